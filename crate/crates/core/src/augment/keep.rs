//! Saliency-aware cut, paste and cut-mix, and the plain baselines they refine.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::{AugmentConfig, Mode};
use super::policy::{apply_policy_logged, AppliedOp};
use crate::error::{Error, Result};
use crate::region::{candidate_scores, sample_high_region, sample_low_region, CandidateScores};
use crate::saliency::SaliencyMap;
use crate::scalar::Scalar;
use crate::tensor::{cut_random, cut_zero, paste_region, Image, Rect};

/// Soft label over at most two classes; weights are positive and sum to one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MixedLabel(Vec<(usize, f64)>);

impl MixedLabel {
    pub fn hard(label: usize) -> Self {
        Self(vec![(label, 1.0)])
    }

    /// `lambda` on `a`, `1 - lambda` on `b`. Equal labels merge; zero weights drop out.
    pub fn pair(a: usize, b: usize, lambda: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::invalid(format!("lambda {lambda} outside [0, 1]")));
        }
        if a == b {
            return Ok(Self::hard(a));
        }
        let entries = [(a, lambda), (b, 1.0 - lambda)]
            .into_iter()
            .filter(|&(_, w)| w > 0.0)
            .collect();
        Ok(Self(entries))
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.0
    }

    /// Class with the largest weight (first on ties).
    pub fn dominant(&self) -> usize {
        self.0
            .iter()
            .fold((self.0[0].0, f64::NEG_INFINITY), |best, &(c, w)| if w > best.1 { (c, w) } else { best })
            .0
    }

    pub fn weight_of(&self, class: usize) -> f64 {
        self.0.iter().filter(|(c, _)| *c == class).map(|(_, w)| w).sum()
    }
}

fn thresholded_scores<T: Scalar>(
    image: &Image<T>,
    map: &SaliencyMap<T>,
    cfg: &AugmentConfig,
) -> Result<CandidateScores<T>> {
    if (map.height(), map.width()) != (image.height(), image.width()) {
        return Err(Error::dims(
            format!("{}x{} map", image.height(), image.width()),
            format!("{}x{}", map.height(), map.width()),
        ));
    }
    cfg.check_fits(image.height(), image.width())?;
    let stride = cfg.stride_for(image.height(), image.width());
    let mut scores = candidate_scores(map, cfg.region.height, cfg.region.width, stride)?;
    scores.quantile_threshold(cfg.tau)?;
    Ok(scores)
}

/// Cuts a region whose importance is at or below the `tau`-quantile. Fills with zeros,
/// or with uniform noise in [`Mode::KeepErase`].
pub fn keep_cutout<T: Scalar, R: Rng + ?Sized>(
    image: &Image<T>,
    map: &SaliencyMap<T>,
    cfg: &AugmentConfig,
    rng: &mut R,
) -> Result<(Image<T>, Rect)> {
    let scores = thresholded_scores(image, map, cfg)?;
    let rect = sample_low_region(&scores, rng)?;
    let out = if cfg.mode == Mode::KeepErase {
        cut_random(image, &rect, rng)?
    } else {
        cut_zero(image, &rect)?
    };
    Ok((out, rect))
}

/// Transforms the whole image with the policy, then pastes back a region of the
/// original whose importance is at or above the `tau`-quantile, at the same coordinates.
pub fn keep_paste<T: Scalar, R: Rng + ?Sized>(
    image: &Image<T>,
    map: &SaliencyMap<T>,
    cfg: &AugmentConfig,
    rng: &mut R,
) -> Result<(Image<T>, Rect, Vec<AppliedOp>)> {
    let scores = thresholded_scores(image, map, cfg)?;
    let (transformed, ops) = apply_policy_logged(image, &cfg.policy, rng);
    let rect = sample_high_region(&scores, rng)?;
    Ok((paste_region(image, &transformed, &rect)?, rect, ops))
}

/// Replaces a low-importance region of `image_a` with the same region of `image_b` and
/// mixes labels by the untouched area fraction of `image_a`.
pub fn keep_cutmix<T: Scalar, R: Rng + ?Sized>(
    image_a: &Image<T>,
    label_a: usize,
    image_b: &Image<T>,
    label_b: usize,
    map_a: &SaliencyMap<T>,
    cfg: &AugmentConfig,
    rng: &mut R,
) -> Result<(Image<T>, MixedLabel, Rect)> {
    if !image_a.same_dims(image_b) {
        return Err(Error::dims(
            format!("{:?}", image_a.dims()),
            format!("{:?}", image_b.dims()),
        ));
    }
    let scores = thresholded_scores(image_a, map_a, cfg)?;
    let rect = sample_low_region(&scores, rng)?;
    let out = paste_region(image_b, image_a, &rect)?;
    let lambda = 1.0 - rect.area() as f64 / (image_a.height() * image_a.width()) as f64;
    Ok((out, MixedLabel::pair(label_a, label_b, lambda)?, rect))
}

/// Uniformly placed, fully contained `height x width` rect.
pub fn random_rect<R: Rng + ?Sized>(
    image_h: usize,
    image_w: usize,
    height: usize,
    width: usize,
    rng: &mut R,
) -> Result<Rect> {
    if height == 0 || width == 0 || height > image_h || width > image_w {
        return Err(Error::invalid(format!(
            "region {height}x{width} does not fit in a {image_h}x{image_w} image"
        )));
    }
    Ok(Rect {
        top: rng.gen_range(0..=image_h - height),
        left: rng.gen_range(0..=image_w - width),
        height,
        width,
    })
}

/// Baseline cutout: zero a uniformly placed `length x length` square.
pub fn plain_cutout<T: Scalar, R: Rng + ?Sized>(image: &Image<T>, length: usize, rng: &mut R) -> Result<Image<T>> {
    let rect = random_rect(image.height(), image.width(), length, length, rng)?;
    cut_zero(image, &rect)
}
