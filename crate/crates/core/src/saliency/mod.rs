//! Vanilla-gradient saliency maps and their cheaper approximations.
//!
//! Every variant takes the absolute gradient of a single class logit with respect to
//! the input pixels and reduces over channels with a maximum.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::{argmax, Head, ToyNet};
use crate::resample::{resize_bicubic, upscale_nearest};
use crate::scalar::Scalar;
use crate::tensor::Image;

/// Non-negative per-pixel importance field, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SaliencyMap<T> {
    height: usize,
    width: usize,
    values: Vec<T>,
}

impl<T: Scalar> SaliencyMap<T> {
    pub fn new(height: usize, width: usize, values: Vec<T>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::invalid("saliency map dims must be positive"));
        }
        if values.len() != height * width {
            return Err(Error::dims(
                format!("{} values", height * width),
                format!("{} values", values.len()),
            ));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite() || *v < T::zero()) {
            return Err(Error::invalid(format!(
                "saliency value at index {pos} is negative or non-finite"
            )));
        }
        Ok(Self { height, width, values })
    }

    pub(crate) fn from_parts(height: usize, width: usize, values: Vec<T>) -> Self {
        debug_assert_eq!(values.len(), height * width);
        Self { height, width, values }
    }

    /// Uniform map with every cell equal to `value`.
    pub fn constant(height: usize, width: usize, value: T) -> Result<Self> {
        Self::new(height, width, vec![value; height * width])
    }

    /// Channel-wise maximum of absolute values.
    pub fn from_gradient(grad: &Image<T>) -> Self {
        let values = grad
            .data()
            .chunks_exact(grad.channels())
            .map(|px| px.iter().fold(T::zero(), |m, v| m.max(v.abs())))
            .collect();
        Self::from_parts(grad.height(), grad.width(), values)
    }

    /// Reads a single-channel image as a map.
    pub fn from_image(image: &Image<T>) -> Result<Self> {
        if image.channels() != 1 {
            return Err(Error::dims("1 channel", format!("{} channels", image.channels())));
        }
        Self::new(image.height(), image.width(), image.data().to_vec())
    }

    pub fn to_image(&self) -> Image<T> {
        Image::from_parts(self.height, self.width, 1, self.values.clone())
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> T {
        self.values[row * self.width + col]
    }

    pub fn scale(&self, factor: T) -> Result<Self> {
        Self::new(self.height, self.width, self.values.iter().map(|&v| v * factor).collect())
    }

    pub fn max(&self) -> T {
        self.values.iter().copied().fold(T::zero(), T::max)
    }

    pub fn min(&self) -> T {
        self.values.iter().copied().fold(T::infinity(), T::min)
    }
}

/// How a map is obtained for an image.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum SaliencyStrategy {
    #[default]
    Full,
    /// Saliency of a bicubic `1/factor` copy, upscaled back with nearest neighbour.
    LowRes { factor: usize },
    EarlyHead,
    /// Uses the predicted class instead of the label.
    MaxLogit,
    /// Maps supplied by the caller.
    External,
}

impl SaliencyStrategy {
    pub const HALF_RES: SaliencyStrategy = SaliencyStrategy::LowRes { factor: 2 };

    pub fn name(&self) -> String {
        match self {
            SaliencyStrategy::Full => "full".into(),
            SaliencyStrategy::LowRes { factor: 2 } => "low-res".into(),
            SaliencyStrategy::LowRes { factor } => format!("low-res:{factor}"),
            SaliencyStrategy::EarlyHead => "early-head".into(),
            SaliencyStrategy::MaxLogit => "max-logit".into(),
            SaliencyStrategy::External => "external".into(),
        }
    }

    /// Parses the names produced by [`SaliencyStrategy::name`].
    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "full" => SaliencyStrategy::Full,
            "low-res" => SaliencyStrategy::HALF_RES,
            "early-head" => SaliencyStrategy::EarlyHead,
            "max-logit" => SaliencyStrategy::MaxLogit,
            "external" => SaliencyStrategy::External,
            other => match other.strip_prefix("low-res:").map(str::parse::<usize>) {
                Some(Ok(factor)) if factor >= 1 => SaliencyStrategy::LowRes { factor },
                _ => return Err(Error::invalid(format!("unknown saliency strategy `{other}`"))),
            },
        })
    }

    /// Input resolution the network must accept for a `height x width` image.
    pub fn net_input(&self, height: usize, width: usize) -> (usize, usize) {
        match self {
            SaliencyStrategy::LowRes { factor } => (height.div_ceil(*factor), width.div_ceil(*factor)),
            _ => (height, width),
        }
    }
}

/// `max_c |d logit_label / d x_ijc|` via backprop through the whole net.
pub fn vanilla_saliency<T: Scalar>(net: &ToyNet<T>, image: &Image<T>, label: usize) -> Result<SaliencyMap<T>> {
    let grad = net.logit_gradient(image, label, Head::Main)?;
    Ok(SaliencyMap::from_gradient(&grad))
}

/// Vanilla saliency at the predicted class.
pub fn maxlogit_saliency<T: Scalar>(net: &ToyNet<T>, image: &Image<T>) -> Result<SaliencyMap<T>> {
    let label = argmax(&net.forward(image)?);
    vanilla_saliency(net, image, label)
}

/// Saliency of a reduced copy, mapped back to the full image size. `net_lr` must take
/// `ceil(H / factor) x ceil(W / factor)` inputs.
pub fn lowres_saliency<T: Scalar>(
    net_lr: &ToyNet<T>,
    image: &Image<T>,
    label: usize,
    factor: usize,
) -> Result<SaliencyMap<T>> {
    if factor == 0 {
        return Err(Error::invalid("low-res factor must be positive"));
    }
    let (h, w) = (image.height(), image.width());
    let small = resize_bicubic(image, h.div_ceil(factor), w.div_ceil(factor))?;
    let map = vanilla_saliency(net_lr, &small, label)?;
    upscale_nearest(&map, h, w)
}

/// Saliency from the early-head logit; backprop only traverses the first block.
pub fn earlyhead_saliency<T: Scalar>(net: &ToyNet<T>, image: &Image<T>, label: usize) -> Result<SaliencyMap<T>> {
    let grad = net.logit_gradient(image, label, Head::Early)?;
    Ok(SaliencyMap::from_gradient(&grad))
}

/// Dispatches on `strategy`. `label` is ignored for max-logit; external maps cannot be
/// computed here.
pub fn compute_saliency<T: Scalar>(
    strategy: SaliencyStrategy,
    net: &ToyNet<T>,
    image: &Image<T>,
    label: usize,
) -> Result<SaliencyMap<T>> {
    match strategy {
        SaliencyStrategy::Full => vanilla_saliency(net, image, label),
        SaliencyStrategy::LowRes { factor } => lowres_saliency(net, image, label, factor),
        SaliencyStrategy::EarlyHead => earlyhead_saliency(net, image, label),
        SaliencyStrategy::MaxLogit => maxlogit_saliency(net, image),
        SaliencyStrategy::External => Err(Error::invalid("external saliency maps must be supplied by the caller")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{Activation, BlockSpec, NetSpec};
    use crate::rng::RngStream;

    /// Linear net whose weight for class `y` at any pixel of channel `c` is `w[y][c]`.
    fn channel_linear(h: usize, w: usize, weights: &[[f64; 3]]) -> ToyNet<f64> {
        let mut net = ToyNet::zeros(NetSpec::linear([h, w, 3], weights.len())).unwrap();
        let n = h * w * 3;
        for (y, wy) in weights.iter().enumerate() {
            for k in 0..n {
                net.classifier.weight[y * n + k] = wy[k % 3];
            }
        }
        net
    }

    #[test]
    fn linear_net_gives_constant_map() {
        let net = channel_linear(5, 6, &[[0.5, -2.0, 1.0], [0.1, 0.2, -0.3]]);
        let img = Image::random(5, 6, 3, &mut RngStream::new(1, 0)).unwrap();
        let map = vanilla_saliency(&net, &img, 0).unwrap();
        assert!(map.values().iter().all(|v| (*v - 2.0).abs() < 1e-12));
        let map = vanilla_saliency(&net, &img, 1).unwrap();
        assert!(map.values().iter().all(|v| (*v - 0.3).abs() < 1e-12));
    }

    #[test]
    fn map_dims_and_sign() {
        let net = ToyNet::<f32>::init(NetSpec::toy([9, 7, 3], 4, 3, true), &mut RngStream::new(2, 0)).unwrap();
        let img = Image::random(9, 7, 3, &mut RngStream::new(3, 0)).unwrap();
        for map in [
            vanilla_saliency(&net, &img, 2).unwrap(),
            earlyhead_saliency(&net, &img, 1).unwrap(),
            maxlogit_saliency(&net, &img).unwrap(),
        ] {
            assert_eq!((map.height(), map.width()), (9, 7));
            assert!(map.values().iter().all(|v| *v >= 0.0 && v.is_finite()));
        }
    }

    #[test]
    fn label_out_of_range() {
        let net = channel_linear(2, 2, &[[1.0, 1.0, 1.0]]);
        let img = Image::zeros(2, 2, 3).unwrap();
        assert!(vanilla_saliency(&net, &img, 1).is_err());
    }

    #[test]
    fn maxlogit_uses_argmax_class() {
        // class 2 wins on a positive image
        let net = channel_linear(3, 3, &[[0.1, 0.1, 0.1], [0.2, -0.5, 0.0], [1.0, 0.5, 0.25]]);
        let img = Image::filled(3, 3, 3, 0.5).unwrap();
        assert_eq!(net.predict(&img).unwrap(), 2);
        assert_eq!(maxlogit_saliency(&net, &img).unwrap(), vanilla_saliency(&net, &img, 2).unwrap());
    }

    #[test]
    fn maxlogit_tie_uses_lowest_class() {
        let net = channel_linear(2, 2, &[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]);
        let img = Image::filled(2, 2, 3, 0.5).unwrap();
        let logits = net.forward(&img).unwrap();
        assert_eq!(logits[0], logits[1]);
        assert_eq!(maxlogit_saliency(&net, &img).unwrap(), vanilla_saliency(&net, &img, 0).unwrap());
    }

    #[test]
    fn maxlogit_matches_independent_argmax() {
        for seed in 0..10 {
            let net = ToyNet::<f64>::init(NetSpec::toy([8, 8, 3], 5, 4, false), &mut RngStream::new(seed, 0)).unwrap();
            let img = Image::random(8, 8, 3, &mut RngStream::new(seed, 1)).unwrap();
            let logits = net.forward(&img).unwrap();
            let mut best = 0;
            for k in 0..logits.len() {
                if logits[k] > logits[best] {
                    best = k;
                }
            }
            assert_eq!(maxlogit_saliency(&net, &img).unwrap(), vanilla_saliency(&net, &img, best).unwrap());
        }
    }

    #[test]
    fn lowres_constant_image_linear_net() {
        let net = channel_linear(4, 4, &[[0.3, -0.7, 0.2]]);
        let img = Image::filled(8, 8, 3, 0.4).unwrap();
        let map = lowres_saliency(&net, &img, 0, 2).unwrap();
        assert_eq!((map.height(), map.width()), (8, 8));
        assert!(map.values().iter().all(|v| (*v - 0.7).abs() < 1e-12));
    }

    #[test]
    fn lowres_handles_odd_dims() {
        let net = ToyNet::<f32>::init(NetSpec::toy([4, 3, 3], 2, 2, false), &mut RngStream::new(4, 0)).unwrap();
        let img = Image::random(7, 5, 3, &mut RngStream::new(5, 0)).unwrap();
        let map = lowres_saliency(&net, &img, 1, 2).unwrap();
        assert_eq!((map.height(), map.width()), (7, 5));
    }

    #[test]
    fn lowres_224_runs_at_112() {
        let strategy = SaliencyStrategy::HALF_RES;
        assert_eq!(strategy.net_input(224, 224), (112, 112));
        let net = ToyNet::<f32>::init(NetSpec::toy([112, 112, 3], 2, 2, false), &mut RngStream::new(4, 0)).unwrap();
        let img = Image::random(224, 224, 3, &mut RngStream::new(5, 0)).unwrap();
        let map = lowres_saliency(&net, &img, 0, 2).unwrap();
        assert_eq!((map.height(), map.width()), (224, 224));
    }

    #[test]
    fn early_head_identity_block() {
        // first block: identity kernel, no nonlinearity, no pooling
        let spec = NetSpec {
            input: [4, 5, 3],
            blocks: vec![BlockSpec {
                out_channels: 3,
                activation: Activation::Identity,
                pool: false,
            }],
            num_classes: 2,
            early_head: true,
        };
        let mut net = ToyNet::<f64>::zeros(spec).unwrap();
        for c in 0..3 {
            net.blocks[0].weight[((c * 3 + 1) * 3 + 1) * 3 + c] = 1.0;
        }
        let head = net.early_head.as_mut().unwrap();
        head.weight = vec![0.4, -1.2, 0.8, 0.0, 0.0, 0.0];
        let img = Image::random(4, 5, 3, &mut RngStream::new(6, 0)).unwrap();
        let map = earlyhead_saliency(&net, &img, 0).unwrap();
        // global average pooling divides the head weight by H*W
        let expected = 1.2 / 20.0;
        assert!(map.values().iter().all(|v| (*v - expected).abs() < 1e-12));
    }

    #[test]
    fn early_head_missing() {
        let net = ToyNet::<f32>::init(NetSpec::toy([4, 4, 3], 2, 2, false), &mut RngStream::new(0, 0)).unwrap();
        let img = Image::zeros(4, 4, 3).unwrap();
        assert!(matches!(earlyhead_saliency(&net, &img, 0), Err(Error::MissingEarlyHead)));
    }

    #[test]
    fn early_head_matches_finite_differences() {
        let net = ToyNet::<f64>::init(NetSpec::toy([8, 8, 3], 3, 4, true), &mut RngStream::new(9, 0)).unwrap();
        let img = Image::random(8, 8, 3, &mut RngStream::new(10, 0)).unwrap();
        let map = earlyhead_saliency(&net, &img, 1).unwrap();
        let eps = 1e-3;
        let mut data = img.data().to_vec();
        for i in 0..8 {
            for j in 0..8 {
                let mut best = 0f64;
                for c in 0..3 {
                    let k = (i * 8 + j) * 3 + c;
                    let orig = data[k];
                    data[k] = orig + eps;
                    let up = net.forward_early(&Image::new(8, 8, 3, data.clone()).unwrap()).unwrap()[1];
                    data[k] = orig - eps;
                    let down = net.forward_early(&Image::new(8, 8, 3, data.clone()).unwrap()).unwrap()[1];
                    data[k] = orig;
                    best = best.max(((up - down) / (2.0 * eps)).abs());
                }
                let a = map.get(i, j);
                assert!((a - best).abs() <= 1e-3 * a.max(best), "({i},{j}) {a} vs {best}");
            }
        }
    }

    #[test]
    fn strategy_names_round_trip() {
        for s in [
            SaliencyStrategy::Full,
            SaliencyStrategy::HALF_RES,
            SaliencyStrategy::LowRes { factor: 4 },
            SaliencyStrategy::EarlyHead,
            SaliencyStrategy::MaxLogit,
            SaliencyStrategy::External,
        ] {
            assert_eq!(SaliencyStrategy::parse(&s.name()).unwrap(), s);
        }
        assert!(SaliencyStrategy::parse("grad-cam").is_err());
    }

    #[test]
    fn map_rejects_negative() {
        assert!(SaliencyMap::new(1, 2, vec![1.0f32, -0.5]).is_err());
    }
}
