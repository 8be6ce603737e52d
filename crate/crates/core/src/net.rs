//! A small convolutional classifier with hand-written backpropagation.
//!
//! Layout: a stack of blocks (3x3 same-padded convolution, nonlinearity, optional 2x2
//! average pooling) followed by a linear classifier over the flattened features. An
//! optional early head (global average pooling + linear) reads the output of the first
//! block. A net with no blocks is a plain linear classifier over the input pixels.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Image;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    Relu,
    /// `log(1 + e^z) - log 2`; smooth and zero at the origin.
    Softplus,
    Identity,
}

impl Activation {
    #[inline]
    fn apply<T: Scalar>(self, z: T) -> T {
        match self {
            Activation::Relu => z.max(T::zero()),
            // log(1 + e^z) - log 2, without overflow
            Activation::Softplus => z.max(T::zero()) + (-z.abs()).exp().ln_1p() - T::of(std::f64::consts::LN_2),
            Activation::Identity => z,
        }
    }

    #[inline]
    fn derivative<T: Scalar>(self, z: T) -> T {
        match self {
            Activation::Relu => {
                if z > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Softplus => T::one() / (T::one() + (-z).exp()),
            Activation::Identity => T::one(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub out_channels: usize,
    pub activation: Activation,
    pub pool: bool,
}

/// Architecture of a [`ToyNet`]. `input` is `[height, width, channels]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetSpec {
    pub input: [usize; 3],
    pub blocks: Vec<BlockSpec>,
    pub num_classes: usize,
    pub early_head: bool,
}

impl NetSpec {
    /// Two conv blocks of `hidden` channels with softplus and 2x2 pooling.
    pub fn toy(input: [usize; 3], num_classes: usize, hidden: usize, early_head: bool) -> Self {
        let block = BlockSpec {
            out_channels: hidden,
            activation: Activation::Softplus,
            pool: true,
        };
        Self {
            input,
            blocks: vec![block.clone(), block],
            num_classes,
            early_head,
        }
    }

    /// No conv blocks: the classifier reads the raw pixels.
    pub fn linear(input: [usize; 3], num_classes: usize) -> Self {
        Self {
            input,
            blocks: Vec::new(),
            num_classes,
            early_head: false,
        }
    }

    /// Same architecture for a different input resolution.
    pub fn with_input(&self, height: usize, width: usize) -> Self {
        Self {
            input: [height, width, self.input[2]],
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input.contains(&0) {
            return Err(Error::invalid("net input dims must be positive"));
        }
        if self.num_classes == 0 {
            return Err(Error::invalid("num_classes must be positive"));
        }
        if self.blocks.iter().any(|b| b.out_channels == 0) {
            return Err(Error::invalid("block out_channels must be positive"));
        }
        if self.early_head && self.blocks.is_empty() {
            return Err(Error::invalid("an early head needs at least one block"));
        }
        Ok(())
    }

    /// Feature dims `(h, w, c)` after each block; index 0 is the input.
    pub fn feature_dims(&self) -> Vec<(usize, usize, usize)> {
        let mut dims = vec![(self.input[0], self.input[1], self.input[2])];
        for b in &self.blocks {
            let (h, w, _) = *dims.last().unwrap();
            let (h, w) = if b.pool { (h.div_ceil(2), w.div_ceil(2)) } else { (h, w) };
            dims.push((h, w, b.out_channels));
        }
        dims
    }

    pub fn flat_features(&self) -> usize {
        let (h, w, c) = *self.feature_dims().last().unwrap();
        h * w * c
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvBlock<T> {
    pub in_channels: usize,
    pub out_channels: usize,
    pub activation: Activation,
    pub pool: bool,
    /// `[out][ky][kx][in]`
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Linear<T> {
    pub in_features: usize,
    pub out_features: usize,
    /// `[out][in]`
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> Linear<T> {
    fn zeros(in_features: usize, out_features: usize) -> Self {
        Self {
            in_features,
            out_features,
            weight: vec![T::zero(); in_features * out_features],
            bias: vec![T::zero(); out_features],
        }
    }

    fn forward(&self, x: &[T]) -> Vec<T> {
        (0..self.out_features)
            .map(|o| {
                let row = &self.weight[o * self.in_features..(o + 1) * self.in_features];
                row.iter().zip(x).fold(self.bias[o], |acc, (&w, &v)| acc + w * v)
            })
            .collect()
    }

    /// Accumulates parameter gradients into `grads` and returns dL/dx.
    fn backward(&self, x: &[T], dy: &[T], grads: Option<&mut Linear<T>>, want_input: bool) -> Vec<T> {
        if let Some(g) = grads {
            for (o, &d) in dy.iter().enumerate() {
                if d == T::zero() {
                    continue;
                }
                g.bias[o] += d;
                let row = &mut g.weight[o * self.in_features..(o + 1) * self.in_features];
                for (gw, &v) in row.iter_mut().zip(x) {
                    *gw += d * v;
                }
            }
        }
        let mut dx = Vec::new();
        if want_input {
            dx = vec![T::zero(); self.in_features];
            for (o, &d) in dy.iter().enumerate() {
                if d == T::zero() {
                    continue;
                }
                let row = &self.weight[o * self.in_features..(o + 1) * self.in_features];
                for (dv, &w) in dx.iter_mut().zip(row) {
                    *dv += d * w;
                }
            }
        }
        dx
    }
}

/// Dense `h x w x c` feature map.
#[derive(Clone, Debug)]
struct Feature<T> {
    h: usize,
    w: usize,
    c: usize,
    data: Vec<T>,
}

struct BlockTrace<T> {
    input: Feature<T>,
    pre: Vec<T>,
    output: Feature<T>,
}

struct Trace<T> {
    blocks: Vec<BlockTrace<T>>,
}

impl<T: Scalar> ConvBlock<T> {
    fn conv_forward(&self, x: &Feature<T>) -> Vec<T> {
        let (h, w, cin, cout) = (x.h, x.w, self.in_channels, self.out_channels);
        let mut z = vec![T::zero(); h * w * cout];
        for i in 0..h {
            for j in 0..w {
                let out = &mut z[(i * w + j) * cout..(i * w + j + 1) * cout];
                out.copy_from_slice(&self.bias);
                for ky in 0..3 {
                    let y = i + ky;
                    if y < 1 || y > h {
                        continue;
                    }
                    for kx in 0..3 {
                        let xx = j + kx;
                        if xx < 1 || xx > w {
                            continue;
                        }
                        let base = ((y - 1) * w + (xx - 1)) * cin;
                        let input = &x.data[base..base + cin];
                        for (o, acc) in out.iter_mut().enumerate() {
                            let wb = ((o * 3 + ky) * 3 + kx) * cin;
                            let kernel = &self.weight[wb..wb + cin];
                            *acc += kernel.iter().zip(input).fold(T::zero(), |s, (&a, &b)| s + a * b);
                        }
                    }
                }
            }
        }
        z
    }

    fn forward(&self, x: Feature<T>) -> BlockTrace<T> {
        let pre = self.conv_forward(&x);
        let act: Vec<T> = pre.iter().map(|&z| self.activation.apply(z)).collect();
        let (h, w, c) = (x.h, x.w, self.out_channels);
        let output = if self.pool {
            avg_pool(&Feature { h, w, c, data: act })
        } else {
            Feature { h, w, c, data: act }
        };
        BlockTrace { input: x, pre, output }
    }

    /// Backprop through pool, activation and conv. Returns dL/d(input) if requested.
    fn backward(
        &self,
        trace: &BlockTrace<T>,
        d_out: &[T],
        grads: Option<&mut ConvBlock<T>>,
        want_input: bool,
    ) -> Vec<T> {
        let x = &trace.input;
        let (h, w, cin, cout) = (x.h, x.w, self.in_channels, self.out_channels);
        let mut dz = if self.pool {
            avg_pool_backward(h, w, cout, d_out)
        } else {
            d_out.to_vec()
        };
        for (d, &z) in dz.iter_mut().zip(&trace.pre) {
            *d *= self.activation.derivative(z);
        }

        let mut grads = grads;
        let mut dx = if want_input { vec![T::zero(); h * w * cin] } else { Vec::new() };
        for i in 0..h {
            for j in 0..w {
                let dzp = &dz[(i * w + j) * cout..(i * w + j + 1) * cout];
                if let Some(g) = grads.as_deref_mut() {
                    for (gb, &d) in g.bias.iter_mut().zip(dzp) {
                        *gb += d;
                    }
                }
                for ky in 0..3 {
                    let y = i + ky;
                    if y < 1 || y > h {
                        continue;
                    }
                    for kx in 0..3 {
                        let xx = j + kx;
                        if xx < 1 || xx > w {
                            continue;
                        }
                        let base = ((y - 1) * w + (xx - 1)) * cin;
                        for (o, &d) in dzp.iter().enumerate() {
                            if d == T::zero() {
                                continue;
                            }
                            let wb = ((o * 3 + ky) * 3 + kx) * cin;
                            if let Some(g) = grads.as_deref_mut() {
                                let gw = &mut g.weight[wb..wb + cin];
                                for (gv, &v) in gw.iter_mut().zip(&x.data[base..base + cin]) {
                                    *gv += d * v;
                                }
                            }
                            if want_input {
                                let kernel = &self.weight[wb..wb + cin];
                                for (dv, &k) in dx[base..base + cin].iter_mut().zip(kernel) {
                                    *dv += d * k;
                                }
                            }
                        }
                    }
                }
            }
        }
        dx
    }
}

fn avg_pool<T: Scalar>(x: &Feature<T>) -> Feature<T> {
    let (oh, ow) = (x.h.div_ceil(2), x.w.div_ceil(2));
    let mut data = vec![T::zero(); oh * ow * x.c];
    for p in 0..oh {
        for q in 0..ow {
            let rows = (2 * p)..(2 * p + 2).min(x.h);
            let cols = (2 * q)..(2 * q + 2).min(x.w);
            let count = T::of((rows.len() * cols.len()) as f64);
            let out = &mut data[(p * ow + q) * x.c..(p * ow + q + 1) * x.c];
            for y in rows {
                for xx in cols.clone() {
                    let src = &x.data[(y * x.w + xx) * x.c..(y * x.w + xx + 1) * x.c];
                    for (o, &v) in out.iter_mut().zip(src) {
                        *o += v;
                    }
                }
            }
            for o in out.iter_mut() {
                *o /= count;
            }
        }
    }
    Feature { h: oh, w: ow, c: x.c, data }
}

fn avg_pool_backward<T: Scalar>(h: usize, w: usize, c: usize, d_out: &[T]) -> Vec<T> {
    let ow = w.div_ceil(2);
    let mut dx = vec![T::zero(); h * w * c];
    for y in 0..h {
        let p = y / 2;
        let rows = if 2 * p + 1 < h { 2 } else { 1 };
        for xx in 0..w {
            let q = xx / 2;
            let cols = if 2 * q + 1 < w { 2 } else { 1 };
            let count = T::of((rows * cols) as f64);
            let src = &d_out[(p * ow + q) * c..(p * ow + q + 1) * c];
            for (d, &g) in dx[(y * w + xx) * c..(y * w + xx + 1) * c].iter_mut().zip(src) {
                *d = g / count;
            }
        }
    }
    dx
}

fn global_avg_pool<T: Scalar>(x: &Feature<T>) -> Vec<T> {
    let mut out = vec![T::zero(); x.c];
    for px in x.data.chunks_exact(x.c) {
        for (o, &v) in out.iter_mut().zip(px) {
            *o += v;
        }
    }
    let n = T::of((x.h * x.w) as f64);
    out.iter_mut().for_each(|o| *o /= n);
    out
}

/// Which logit vector a gradient is taken from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Head {
    Main,
    Early,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ToyNet<T> {
    spec: NetSpec,
    pub blocks: Vec<ConvBlock<T>>,
    pub classifier: Linear<T>,
    pub early_head: Option<Linear<T>>,
}

impl<T: Scalar> ToyNet<T> {
    /// All parameters zero.
    pub fn zeros(spec: NetSpec) -> Result<Self> {
        spec.validate()?;
        let dims = spec.feature_dims();
        let blocks = spec
            .blocks
            .iter()
            .zip(&dims)
            .map(|(b, &(_, _, cin))| ConvBlock {
                in_channels: cin,
                out_channels: b.out_channels,
                activation: b.activation,
                pool: b.pool,
                weight: vec![T::zero(); b.out_channels * 9 * cin],
                bias: vec![T::zero(); b.out_channels],
            })
            .collect();
        let classifier = Linear::zeros(spec.flat_features(), spec.num_classes);
        let early_head = spec
            .early_head
            .then(|| Linear::zeros(dims[1].2, spec.num_classes));
        Ok(Self {
            spec,
            blocks,
            classifier,
            early_head,
        })
    }

    /// He-uniform weights, zero biases.
    pub fn init<R: Rng + ?Sized>(spec: NetSpec, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(spec)?;
        let mut fill = |w: &mut [T], fan_in: usize, gain: f64| {
            let bound = (gain / fan_in as f64).sqrt();
            for v in w {
                *v = T::of(rng.gen_range(-bound..bound));
            }
        };
        for b in &mut net.blocks {
            fill(&mut b.weight, 9 * b.in_channels, 6.0);
        }
        fill(&mut net.classifier.weight, net.classifier.in_features, 3.0);
        if let Some(head) = &mut net.early_head {
            fill(&mut head.weight, head.in_features, 3.0);
        }
        Ok(net)
    }

    pub fn spec(&self) -> &NetSpec {
        &self.spec
    }

    pub fn num_classes(&self) -> usize {
        self.spec.num_classes
    }

    pub fn has_early_head(&self) -> bool {
        self.early_head.is_some()
    }

    pub fn input_dims(&self) -> (usize, usize, usize) {
        let [h, w, c] = self.spec.input;
        (h, w, c)
    }

    /// Named parameter tensors in a fixed order.
    pub fn named_params(&self) -> Vec<(String, &[T])> {
        let mut out = Vec::new();
        for (k, b) in self.blocks.iter().enumerate() {
            out.push((format!("block{k}.weight"), b.weight.as_slice()));
            out.push((format!("block{k}.bias"), b.bias.as_slice()));
        }
        out.push(("classifier.weight".into(), self.classifier.weight.as_slice()));
        out.push(("classifier.bias".into(), self.classifier.bias.as_slice()));
        if let Some(h) = &self.early_head {
            out.push(("early_head.weight".into(), h.weight.as_slice()));
            out.push(("early_head.bias".into(), h.bias.as_slice()));
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Vec<T>> {
        let mut out = Vec::new();
        for b in &mut self.blocks {
            out.push(&mut b.weight);
            out.push(&mut b.bias);
        }
        out.push(&mut self.classifier.weight);
        out.push(&mut self.classifier.bias);
        if let Some(h) = &mut self.early_head {
            out.push(&mut h.weight);
            out.push(&mut h.bias);
        }
        out
    }

    pub fn cast<U: Scalar>(&self) -> ToyNet<U> {
        let conv = |v: &[T]| v.iter().map(|&x| U::of(x.as_f64())).collect::<Vec<U>>();
        let lin = |l: &Linear<T>| Linear {
            in_features: l.in_features,
            out_features: l.out_features,
            weight: conv(&l.weight),
            bias: conv(&l.bias),
        };
        ToyNet {
            spec: self.spec.clone(),
            blocks: self
                .blocks
                .iter()
                .map(|b| ConvBlock {
                    in_channels: b.in_channels,
                    out_channels: b.out_channels,
                    activation: b.activation,
                    pool: b.pool,
                    weight: conv(&b.weight),
                    bias: conv(&b.bias),
                })
                .collect(),
            classifier: lin(&self.classifier),
            early_head: self.early_head.as_ref().map(lin),
        }
    }

    fn check_input(&self, image: &Image<T>) -> Result<()> {
        if image.dims() != self.input_dims() {
            return Err(Error::dims(
                format!("{:?}", self.input_dims()),
                format!("{:?}", image.dims()),
            ));
        }
        Ok(())
    }

    fn trace(&self, image: &Image<T>, depth: usize) -> Trace<T> {
        let (h, w, c) = image.dims();
        let mut x = Feature {
            h,
            w,
            c,
            data: image.data().to_vec(),
        };
        let mut blocks = Vec::with_capacity(depth);
        for b in &self.blocks[..depth] {
            let t = b.forward(x);
            x = t.output.clone();
            blocks.push(t);
        }
        Trace { blocks }
    }

    fn last_features<'a>(&self, trace: &'a Trace<T>, image: &'a Image<T>) -> &'a [T] {
        trace
            .blocks
            .last()
            .map(|t| t.output.data.as_slice())
            .unwrap_or(image.data())
    }

    /// Main-head logits.
    pub fn forward(&self, image: &Image<T>) -> Result<Vec<T>> {
        self.check_input(image)?;
        let trace = self.trace(image, self.blocks.len());
        Ok(self.classifier.forward(self.last_features(&trace, image)))
    }

    /// Early-head logits; only the first block is evaluated.
    pub fn forward_early(&self, image: &Image<T>) -> Result<Vec<T>> {
        let head = self.early_head.as_ref().ok_or(Error::MissingEarlyHead)?;
        self.check_input(image)?;
        let trace = self.trace(image, 1);
        Ok(head.forward(&global_avg_pool(&trace.blocks[0].output)))
    }

    /// `argmax` of the main logits, ties to the lowest index.
    pub fn predict(&self, image: &Image<T>) -> Result<usize> {
        Ok(argmax(&self.forward(image)?))
    }

    /// Gradient of one logit with respect to the input image.
    pub fn logit_gradient(&self, image: &Image<T>, class: usize, head: Head) -> Result<Image<T>> {
        self.check_input(image)?;
        if class >= self.spec.num_classes {
            return Err(Error::invalid(format!(
                "class {class} out of range for {} classes",
                self.spec.num_classes
            )));
        }
        let mut onehot = vec![T::zero(); self.spec.num_classes];
        onehot[class] = T::one();
        let grad = match head {
            Head::Main => {
                let trace = self.trace(image, self.blocks.len());
                self.backward(&trace, image, Some(&onehot), None, None, true)
            }
            Head::Early => {
                if self.early_head.is_none() {
                    return Err(Error::MissingEarlyHead);
                }
                let trace = self.trace(image, 1);
                self.backward(&trace, image, None, Some(&onehot), None, true)
            }
        };
        let (h, w, c) = image.dims();
        Ok(Image::from_parts(h, w, c, grad))
    }

    /// Backprop from main-logit and/or early-logit gradients. `trace` must cover every
    /// block when `d_main` is given, and at least the first when `d_early` is.
    fn backward(
        &self,
        trace: &Trace<T>,
        image: &Image<T>,
        d_main: Option<&[T]>,
        d_early: Option<&[T]>,
        mut grads: Option<&mut ToyNet<T>>,
        want_input: bool,
    ) -> Vec<T> {
        let depth = trace.blocks.len();
        let mut d_feat: Option<Vec<T>> = None;

        if let Some(dm) = d_main {
            debug_assert_eq!(depth, self.blocks.len());
            let need = want_input || depth > 0;
            d_feat = Some(self.classifier.backward(
                self.last_features(trace, image),
                dm,
                grads.as_deref_mut().map(|g| &mut g.classifier),
                need,
            ));
        }

        for k in (0..depth).rev() {
            if k == 0 {
                if let (Some(de), Some(head)) = (d_early, &self.early_head) {
                    let out = &trace.blocks[0].output;
                    let pooled = global_avg_pool(out);
                    let d_pooled = head.backward(
                        &pooled,
                        de,
                        grads.as_deref_mut().and_then(|g| g.early_head.as_mut()),
                        true,
                    );
                    let n = T::of((out.h * out.w) as f64);
                    let acc = d_feat.get_or_insert_with(|| vec![T::zero(); out.data.len()]);
                    for px in acc.chunks_exact_mut(out.c) {
                        for (a, &d) in px.iter_mut().zip(&d_pooled) {
                            *a += d / n;
                        }
                    }
                }
            }
            let Some(d_out) = d_feat.take() else { continue };
            let need = want_input || k > 0;
            let d_in = self.blocks[k].backward(
                &trace.blocks[k],
                &d_out,
                grads.as_deref_mut().map(|g| &mut g.blocks[k]),
                need,
            );
            if need {
                d_feat = Some(d_in);
            }
        }
        d_feat.unwrap_or_else(|| vec![T::zero(); image.data().len()])
    }

    /// Softmax cross-entropy on the main head, plus `aux_coefficient` times the same loss
    /// on the early head when present. Parameter gradients are added into `grads`.
    /// Returns the total loss and the main-head prediction.
    pub(crate) fn accumulate_loss_gradient(
        &self,
        image: &Image<T>,
        label: usize,
        aux_coefficient: T,
        grads: &mut ToyNet<T>,
    ) -> Result<(T, usize)> {
        self.check_input(image)?;
        let trace = self.trace(image, self.blocks.len());
        let logits = self.classifier.forward(self.last_features(&trace, image));
        let (loss, d_main) = softmax_xent(&logits, label);
        let mut total = loss;
        let d_early = match &self.early_head {
            Some(head) => {
                let aux = head.forward(&global_avg_pool(&trace.blocks[0].output));
                let (aux_loss, mut d) = softmax_xent(&aux, label);
                total += aux_coefficient * aux_loss;
                d.iter_mut().for_each(|v| *v *= aux_coefficient);
                Some(d)
            }
            None => None,
        };
        self.backward(&trace, image, Some(&d_main), d_early.as_deref(), Some(grads), false);
        Ok((total, argmax(&logits)))
    }
}

/// Loss and dLoss/dlogits of softmax cross-entropy.
fn softmax_xent<T: Scalar>(logits: &[T], label: usize) -> (T, Vec<T>) {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: T = exps.iter().copied().sum();
    let loss = sum.ln() - (logits[label] - max);
    let mut d: Vec<T> = exps.iter().map(|&e| e / sum).collect();
    d[label] -= T::one();
    (loss, d)
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax<T: PartialOrd + Copy>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}
