//! A small RandAugment-style catalogue of whole-image transforms.
//!
//! A policy draws `n_ops` ops uniformly with replacement and applies them in sequence at
//! one shared magnitude on a 0..=30 scale. Each draw is resolved into an [`AppliedOp`]
//! with concrete parameters, so a logged sequence can be replayed exactly.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Image;

pub const MAX_MAGNITUDE: u32 = 30;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyOp {
    Identity,
    HorizontalFlip,
    Rotate,
    Translate,
    Solarize,
    Posterize,
    Invert,
    Brightness,
    Contrast,
}

impl PolicyOp {
    pub const ALL: [PolicyOp; 9] = [
        PolicyOp::Identity,
        PolicyOp::HorizontalFlip,
        PolicyOp::Rotate,
        PolicyOp::Translate,
        PolicyOp::Solarize,
        PolicyOp::Posterize,
        PolicyOp::Invert,
        PolicyOp::Brightness,
        PolicyOp::Contrast,
    ];

    /// Concrete parameters for this op at `magnitude` on a `width`-wide image. Signed
    /// ops draw their sign (and translate its axis) from `rng`.
    pub fn resolve<R: Rng + ?Sized>(self, magnitude: u32, width: usize, rng: &mut R) -> AppliedOp {
        let m = magnitude.min(MAX_MAGNITUDE) as f64 / MAX_MAGNITUDE as f64;
        let sign = |rng: &mut R| if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        match self {
            PolicyOp::Identity => AppliedOp::Identity,
            PolicyOp::HorizontalFlip => AppliedOp::HorizontalFlip,
            PolicyOp::Rotate => AppliedOp::Rotate {
                degrees: sign(rng) * 30.0 * m,
            },
            PolicyOp::Translate => {
                let d = (magnitude.min(MAX_MAGNITUDE) as usize * (width / 3) / MAX_MAGNITUDE as usize) as i64;
                let d = if sign(rng) > 0.0 { d } else { -d };
                if rng.gen_bool(0.5) {
                    AppliedOp::Translate { dx: d, dy: 0 }
                } else {
                    AppliedOp::Translate { dx: 0, dy: d }
                }
            }
            PolicyOp::Solarize => AppliedOp::Solarize { threshold: 1.0 - m },
            PolicyOp::Posterize => AppliedOp::Posterize {
                bits: 8 - magnitude.min(MAX_MAGNITUDE) * 6 / MAX_MAGNITUDE,
            },
            PolicyOp::Invert => AppliedOp::Invert,
            PolicyOp::Brightness => AppliedOp::Brightness { factor: 1.0 + sign(rng) * m },
            PolicyOp::Contrast => AppliedOp::Contrast { factor: 1.0 + sign(rng) * m },
        }
    }
}

/// A transform with its parameters fixed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "kebab-case")]
pub enum AppliedOp {
    Identity,
    HorizontalFlip,
    /// Counter-clockwise about the image centre, bilinear, zero fill.
    Rotate { degrees: f64 },
    /// Content moves by `(dx, dy)` pixels, zero fill.
    Translate { dx: i64, dy: i64 },
    /// Values at or above `threshold` are inverted.
    Solarize { threshold: f64 },
    /// Keeps the top `bits` bits of the 8-bit value.
    Posterize { bits: u32 },
    Invert,
    Brightness { factor: f64 },
    /// Scales deviations from the image mean.
    Contrast { factor: f64 },
}

impl AppliedOp {
    pub fn apply<T: Scalar>(&self, image: &Image<T>) -> Image<T> {
        let (h, w, c) = image.dims();
        let out = match *self {
            AppliedOp::Identity => image.clone(),
            AppliedOp::HorizontalFlip => Image::from_parts(
                h,
                w,
                c,
                (0..h)
                    .flat_map(|i| (0..w).flat_map(move |j| (0..c).map(move |ch| (i, w - 1 - j, ch))))
                    .map(|(i, j, ch)| image.get(i, j, ch))
                    .collect(),
            ),
            AppliedOp::Rotate { degrees } => rotate(image, degrees),
            AppliedOp::Translate { dx, dy } => translate(image, dx, dy),
            AppliedOp::Solarize { threshold } => {
                let t = T::of(threshold);
                image.map(|v| if v >= t { T::one() - v } else { v })
            }
            AppliedOp::Posterize { bits } => {
                let mask: u8 = if bits >= 8 { 0xff } else { !(0xffu8 >> bits) };
                image.map(|v| {
                    let q = (v.as_f64() * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8;
                    T::of((q & mask) as f64 / 255.0)
                })
            }
            AppliedOp::Invert => image.map(|v| T::one() - v),
            AppliedOp::Brightness { factor } => {
                let f = T::of(factor);
                image.map(|v| v * f)
            }
            AppliedOp::Contrast { factor } => {
                let mean = image.mean();
                let f = T::of(factor);
                image.map(|v| mean + (v - mean) * f)
            }
        };
        out.clamp_unit()
    }
}

fn rotate<T: Scalar>(image: &Image<T>, degrees: f64) -> Image<T> {
    let (h, w, c) = image.dims();
    let (sin, cos) = degrees.to_radians().sin_cos();
    let (cy, cx) = ((h as f64 - 1.0) / 2.0, (w as f64 - 1.0) / 2.0);
    let sample = |y: i64, x: i64, ch: usize| -> f64 {
        if y < 0 || x < 0 || y >= h as i64 || x >= w as i64 {
            0.0
        } else {
            image.get(y as usize, x as usize, ch).as_f64()
        }
    };
    let mut data = Vec::with_capacity(h * w * c);
    for i in 0..h {
        for j in 0..w {
            // inverse map the output pixel into the source
            let (dy, dx) = (i as f64 - cy, j as f64 - cx);
            let sy = cy + cos * dy - sin * dx;
            let sx = cx + sin * dy + cos * dx;
            let (y0, x0) = (sy.floor(), sx.floor());
            let (ty, tx) = (sy - y0, sx - x0);
            let (y0, x0) = (y0 as i64, x0 as i64);
            for ch in 0..c {
                let v = (1.0 - ty) * ((1.0 - tx) * sample(y0, x0, ch) + tx * sample(y0, x0 + 1, ch))
                    + ty * ((1.0 - tx) * sample(y0 + 1, x0, ch) + tx * sample(y0 + 1, x0 + 1, ch));
                data.push(T::of(v));
            }
        }
    }
    Image::from_parts(h, w, c, data)
}

fn translate<T: Scalar>(image: &Image<T>, dx: i64, dy: i64) -> Image<T> {
    let (h, w, c) = image.dims();
    let mut data = Vec::with_capacity(h * w * c);
    for i in 0..h as i64 {
        for j in 0..w as i64 {
            let (sy, sx) = (i - dy, j - dx);
            let inside = sy >= 0 && sx >= 0 && sy < h as i64 && sx < w as i64;
            for ch in 0..c {
                data.push(if inside {
                    image.get(sy as usize, sx as usize, ch)
                } else {
                    T::zero()
                });
            }
        }
    }
    Image::from_parts(h, w, c, data)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransformPolicy {
    pub ops: Vec<PolicyOp>,
    pub n_ops: usize,
    pub magnitude: u32,
}

impl Default for TransformPolicy {
    fn default() -> Self {
        Self {
            ops: PolicyOp::ALL.to_vec(),
            n_ops: 3,
            magnitude: 15,
        }
    }
}

impl TransformPolicy {
    pub fn only(op: PolicyOp, n_ops: usize, magnitude: u32) -> Self {
        Self {
            ops: vec![op],
            n_ops,
            magnitude,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ops.is_empty() {
            return Err(Error::invalid("policy needs at least one op"));
        }
        if self.magnitude > MAX_MAGNITUDE {
            return Err(Error::invalid(format!(
                "magnitude {} exceeds {MAX_MAGNITUDE}",
                self.magnitude
            )));
        }
        Ok(())
    }

    /// Draws and resolves `n_ops` ops.
    pub fn sample<R: Rng + ?Sized>(&self, width: usize, rng: &mut R) -> Vec<AppliedOp> {
        (0..self.n_ops)
            .map(|_| {
                let op = self.ops[rng.gen_range(0..self.ops.len())];
                op.resolve(self.magnitude, width, rng)
            })
            .collect()
    }
}

/// Applies a resolved op sequence in order.
pub fn apply_ops<T: Scalar>(image: &Image<T>, ops: &[AppliedOp]) -> Image<T> {
    ops.iter().fold(image.clone(), |img, op| op.apply(&img))
}

/// Samples and applies the policy; returns the image and the ops that produced it.
pub fn apply_policy_logged<T: Scalar, R: Rng + ?Sized>(
    image: &Image<T>,
    policy: &TransformPolicy,
    rng: &mut R,
) -> (Image<T>, Vec<AppliedOp>) {
    let ops = policy.sample(image.width(), rng);
    (apply_ops(image, &ops), ops)
}

pub fn apply_policy<T: Scalar, R: Rng + ?Sized>(image: &Image<T>, policy: &TransformPolicy, rng: &mut R) -> Image<T> {
    apply_policy_logged(image, policy, rng).0
}
