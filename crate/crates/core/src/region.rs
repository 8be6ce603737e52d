//! Region importance scores and threshold-based region sampling.
//!
//! The importance of a region is the sum of saliency over it. Scores for every
//! fully-contained placement of an `h x w` window are computed in O(1) each from a
//! summed-area table; the acceptance threshold is the nearest-rank `tau`-quantile of
//! those scores. The samplers draw uniformly from the placements at or below
//! (low) / at or above (high) the threshold, which is the distribution a
//! repeat-until-accepted loop converges to, without the risk of spinning forever.

use rand::Rng;

use crate::error::{Error, Result};
use crate::saliency::SaliencyMap;
use crate::scalar::Scalar;
use crate::tensor::Rect;

/// `(H + 1) x (W + 1)` inclusive prefix sums with a zero first row and column.
#[derive(Clone, Debug, PartialEq)]
pub struct SummedAreaTable<T> {
    height: usize,
    width: usize,
    table: Vec<T>,
}

impl<T: Scalar> SummedAreaTable<T> {
    pub fn build(map: &SaliencyMap<T>) -> Self {
        let (h, w) = (map.height(), map.width());
        let stride = w + 1;
        let mut table = vec![T::zero(); (h + 1) * stride];
        for i in 0..h {
            let mut row_sum = T::zero();
            for j in 0..w {
                row_sum += map.get(i, j);
                table[(i + 1) * stride + j + 1] = table[i * stride + j + 1] + row_sum;
            }
        }
        Self {
            height: h,
            width: w,
            table,
        }
    }

    /// Map height (the table has one more row).
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Sum of the map over rows `< row` and columns `< col`.
    #[inline]
    pub fn at(&self, row: usize, col: usize) -> T {
        self.table[row * (self.width + 1) + col]
    }

    #[inline]
    fn sum_unchecked(&self, top: usize, left: usize, bottom: usize, right: usize) -> T {
        // Clamp tiny negative round-off; the map is non-negative.
        (self.at(bottom, right) - self.at(top, right) - self.at(bottom, left) + self.at(top, left)).max(T::zero())
    }

    /// Importance score of `rect`: the exact saliency mass inside it.
    pub fn region_score(&self, rect: &Rect) -> Result<T> {
        if !rect.contained_in(self.height, self.width) {
            return Err(Error::RectOutOfBounds {
                rect: *rect,
                height: self.height,
                width: self.width,
            });
        }
        Ok(self.sum_unchecked(rect.top, rect.left, rect.bottom(), rect.right()))
    }

    pub fn total(&self) -> T {
        self.at(self.height, self.width)
    }
}

/// Convenience for [`SummedAreaTable::build`].
pub fn build_sat<T: Scalar>(map: &SaliencyMap<T>) -> SummedAreaTable<T> {
    SummedAreaTable::build(map)
}

/// Scores of every contained `region_h x region_w` placement at a given stride.
#[derive(Clone, Debug, PartialEq)]
pub struct CandidateScores<T> {
    pub region_h: usize,
    pub region_w: usize,
    pub stride: usize,
    pub rows: usize,
    pub cols: usize,
    scores: Vec<T>,
    threshold: Option<T>,
}

impl<T: Scalar> CandidateScores<T> {
    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn scores(&self) -> &[T] {
        &self.scores
    }

    pub fn threshold(&self) -> Option<T> {
        self.threshold
    }

    /// Rect of the candidate at flat grid index `k`.
    pub fn rect(&self, k: usize) -> Rect {
        let (r, c) = (k / self.cols, k % self.cols);
        Rect {
            top: r * self.stride,
            left: c * self.stride,
            height: self.region_h,
            width: self.region_w,
        }
    }

    pub fn score_of(&self, k: usize) -> T {
        self.scores[k]
    }

    /// Sets the threshold to the nearest-rank `tau`-quantile and returns it.
    pub fn quantile_threshold(&mut self, tau: f64) -> Result<T> {
        let t = nearest_rank_quantile(&self.scores, tau)?;
        self.threshold = Some(t);
        Ok(t)
    }

    fn require_threshold(&self) -> Result<T> {
        self.threshold
            .ok_or_else(|| Error::invalid("candidate threshold not set; call quantile_threshold first"))
    }

    /// Grid indices with score at or below the threshold.
    pub fn low_set(&self) -> Result<Vec<usize>> {
        let t = self.require_threshold()?;
        Ok((0..self.len()).filter(|&k| self.scores[k] <= t).collect())
    }

    /// Grid indices with score at or above the threshold.
    pub fn high_set(&self) -> Result<Vec<usize>> {
        let t = self.require_threshold()?;
        Ok((0..self.len()).filter(|&k| self.scores[k] >= t).collect())
    }

    /// Index of the highest-scoring candidate (first on ties).
    pub fn argmax(&self) -> usize {
        crate::net::argmax(&self.scores)
    }
}

/// Scores every fully-contained placement of an `h x w` window, `stride` apart.
pub fn candidate_scores<T: Scalar>(map: &SaliencyMap<T>, h: usize, w: usize, stride: usize) -> Result<CandidateScores<T>> {
    let sat = SummedAreaTable::build(map);
    candidate_scores_from_sat(&sat, h, w, stride)
}

pub fn candidate_scores_from_sat<T: Scalar>(
    sat: &SummedAreaTable<T>,
    h: usize,
    w: usize,
    stride: usize,
) -> Result<CandidateScores<T>> {
    if h == 0 || w == 0 || stride == 0 {
        return Err(Error::invalid("region dims and stride must be positive"));
    }
    if h > sat.height() || w > sat.width() {
        return Err(Error::invalid(format!(
            "region {h}x{w} does not fit in a {}x{} map",
            sat.height(),
            sat.width()
        )));
    }
    let rows = (sat.height() - h + 1).div_ceil(stride);
    let cols = (sat.width() - w + 1).div_ceil(stride);
    let mut scores = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        let top = r * stride;
        for c in 0..cols {
            let left = c * stride;
            scores.push(sat.sum_unchecked(top, left, top + h, left + w));
        }
    }
    Ok(CandidateScores {
        region_h: h,
        region_w: w,
        stride,
        rows,
        cols,
        scores,
        threshold: None,
    })
}

/// 1-based nearest rank `ceil(tau * n)`, clamped to `[1, n]`. A product within 1e-9 of
/// an integer counts as that integer so `0.7 * 10` is rank 7, not 8.
pub fn nearest_rank(tau: f64, n: usize) -> usize {
    let x = tau * n as f64;
    let r = x.round();
    let k = if (x - r).abs() < 1e-9 { r } else { x.ceil() };
    (k as usize).clamp(1, n)
}

/// Nearest-rank quantile: the `ceil(tau * n)`-th smallest value.
pub fn nearest_rank_quantile<T: Scalar>(values: &[T], tau: f64) -> Result<T> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::invalid(format!("tau must lie in (0, 1), got {tau}")));
    }
    if values.is_empty() {
        return Err(Error::invalid("quantile of an empty score set"));
    }
    let k = nearest_rank(tau, values.len()) - 1;
    let mut buf = values.to_vec();
    let (_, v, _) = buf.select_nth_unstable_by(k, |a, b| a.partial_cmp(b).expect("finite scores"));
    Ok(*v)
}

/// Stores the `tau`-quantile into `scores` and returns it.
pub fn quantile_threshold<T: Scalar>(scores: &mut CandidateScores<T>, tau: f64) -> Result<T> {
    scores.quantile_threshold(tau)
}

/// Uniform draw among candidates scoring at or below the threshold.
pub fn sample_low_region<T: Scalar, R: Rng + ?Sized>(scores: &CandidateScores<T>, rng: &mut R) -> Result<Rect> {
    let set = scores.low_set()?;
    // the threshold is itself a score, so the set always has a member
    Ok(scores.rect(set[rng.gen_range(0..set.len())]))
}

/// Uniform draw among candidates scoring at or above the threshold.
pub fn sample_high_region<T: Scalar, R: Rng + ?Sized>(scores: &CandidateScores<T>, rng: &mut R) -> Result<Rect> {
    let set = scores.high_set()?;
    Ok(scores.rect(set[rng.gen_range(0..set.len())]))
}
