//! Bicubic image resizing and nearest-neighbour map upscaling.

use crate::error::{Error, Result};
use crate::saliency::SaliencyMap;
use crate::scalar::Scalar;
use crate::tensor::Image;

const CUBIC_A: f64 = -0.5;

/// Catmull-Rom cubic convolution kernel.
pub(crate) fn cubic_weight(x: f64) -> f64 {
    let x = x.abs();
    if x <= 1.0 {
        ((CUBIC_A + 2.0) * x - (CUBIC_A + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((CUBIC_A * x - 5.0 * CUBIC_A) * x + 8.0 * CUBIC_A) * x - 4.0 * CUBIC_A
    } else {
        0.0
    }
}

/// Four source taps (edge-clamped) and weights for one output coordinate.
fn taps(out_index: usize, in_len: usize, out_len: usize) -> ([usize; 4], [f64; 4]) {
    let src = (out_index as f64 + 0.5) * in_len as f64 / out_len as f64 - 0.5;
    let base = src.floor();
    let t = src - base;
    let mut idx = [0usize; 4];
    let mut w = [0f64; 4];
    for k in 0..4 {
        let pos = base as i64 - 1 + k as i64;
        idx[k] = pos.clamp(0, in_len as i64 - 1) as usize;
        w[k] = cubic_weight(t - (k as f64 - 1.0));
    }
    (idx, w)
}

/// Resizes with the Catmull-Rom bicubic kernel. Samples outside the image are clamped to
/// the border and the result is clamped to `[0, 1]`.
pub fn resize_bicubic<T: Scalar>(image: &Image<T>, out_h: usize, out_w: usize) -> Result<Image<T>> {
    if out_h == 0 || out_w == 0 {
        return Err(Error::invalid("output dims must be positive"));
    }
    let (h, w, c) = image.dims();
    let col_taps: Vec<_> = (0..out_w).map(|j| taps(j, w, out_w)).collect();
    let row_taps: Vec<_> = (0..out_h).map(|i| taps(i, h, out_h)).collect();

    // horizontal pass: h x out_w x c
    let mut horiz = vec![0f64; h * out_w * c];
    for i in 0..h {
        for (j, (idx, wt)) in col_taps.iter().enumerate() {
            for ch in 0..c {
                let mut acc = 0.0;
                for k in 0..4 {
                    acc += wt[k] * image.get(i, idx[k], ch).as_f64();
                }
                horiz[(i * out_w + j) * c + ch] = acc;
            }
        }
    }

    let mut data = Vec::with_capacity(out_h * out_w * c);
    for (idx, wt) in &row_taps {
        for j in 0..out_w {
            for ch in 0..c {
                let mut acc = 0.0;
                for k in 0..4 {
                    acc += wt[k] * horiz[(idx[k] * out_w + j) * c + ch];
                }
                data.push(T::of(acc.clamp(0.0, 1.0)));
            }
        }
    }
    Ok(Image::from_parts(out_h, out_w, c, data))
}

#[inline]
fn nearest_source(out_index: usize, in_len: usize, out_len: usize) -> usize {
    (((out_index as f64 + 0.5) * in_len as f64 / out_len as f64).floor() as usize).min(in_len - 1)
}

/// Nearest-neighbour upscaling (or downscaling) of a saliency map.
pub fn upscale_nearest<T: Scalar>(map: &SaliencyMap<T>, out_h: usize, out_w: usize) -> Result<SaliencyMap<T>> {
    if out_h == 0 || out_w == 0 {
        return Err(Error::invalid("output dims must be positive"));
    }
    let (h, w) = (map.height(), map.width());
    let cols: Vec<usize> = (0..out_w).map(|j| nearest_source(j, w, out_w)).collect();
    let mut values = Vec::with_capacity(out_h * out_w);
    for i in 0..out_h {
        let si = nearest_source(i, h, out_h);
        values.extend(cols.iter().map(|&sj| map.get(si, sj)));
    }
    Ok(SaliencyMap::from_parts(out_h, out_w, values))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_image_stays_constant() {
        let img = Image::<f64>::filled(7, 5, 3, 0.7).unwrap();
        for &(oh, ow) in &[(3, 2), (14, 10), (7, 5), (1, 1), (9, 13)] {
            let out = resize_bicubic(&img, oh, ow).unwrap();
            assert_eq!(out.dims(), (oh, ow, 3));
            assert!(out.data().iter().all(|v| (v - 0.7).abs() < 1e-6));
        }
    }

    /// Non-separable 2-D evaluation of the same kernel, one output pixel at a time.
    fn reference_bicubic(img: &Image<f64>, oh: usize, ow: usize) -> Vec<f64> {
        let (h, w, c) = img.dims();
        let kernel = |x: f64| -> f64 {
            let a = -0.5;
            let x = x.abs();
            if x <= 1.0 {
                1.0 - (a + 3.0) * x.powi(2) + (a + 2.0) * x.powi(3)
            } else if x < 2.0 {
                -4.0 * a + 8.0 * a * x - 5.0 * a * x.powi(2) + a * x.powi(3)
            } else {
                0.0
            }
        };
        let mut out = Vec::new();
        for i in 0..oh {
            let sy = (i as f64 + 0.5) * h as f64 / oh as f64 - 0.5;
            for j in 0..ow {
                let sx = (j as f64 + 0.5) * w as f64 / ow as f64 - 0.5;
                for ch in 0..c {
                    let mut acc = 0.0;
                    for yy in (sy.floor() as i64 - 1)..=(sy.floor() as i64 + 2) {
                        for xx in (sx.floor() as i64 - 1)..=(sx.floor() as i64 + 2) {
                            let py = yy.clamp(0, h as i64 - 1) as usize;
                            let px = xx.clamp(0, w as i64 - 1) as usize;
                            acc += kernel(sy - yy as f64) * kernel(sx - xx as f64) * img.get(py, px, ch);
                        }
                    }
                    out.push(acc.clamp(0.0, 1.0));
                }
            }
        }
        out
    }

    #[test]
    fn checkerboard_upscale_matches_reference() {
        let img = Image::<f64>::new(2, 2, 1, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let out = resize_bicubic(&img, 4, 4).unwrap();
        let reference = reference_bicubic(&img, 4, 4);
        for (a, b) in out.data().iter().zip(&reference) {
            assert!((a - b).abs() < 1e-4, "{a} vs {b}");
        }
    }

    #[test]
    fn random_resize_matches_reference() {
        let mut rng = crate::rng::RngStream::new(11, 0);
        let img = Image::<f64>::random(9, 6, 3, &mut rng).unwrap();
        for &(oh, ow) in &[(5, 3), (17, 11), (4, 12)] {
            let out = resize_bicubic(&img, oh, ow).unwrap();
            for (a, b) in out.data().iter().zip(&reference_bicubic(&img, oh, ow)) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn half_resolution_dims() {
        let img = Image::<f32>::filled(224, 224, 3, 0.2).unwrap();
        assert_eq!(resize_bicubic(&img, 112, 112).unwrap().dims(), (112, 112, 3));
    }

    #[test]
    fn nearest_from_single_cell() {
        let map = SaliencyMap::new(1, 1, vec![3.0f32]).unwrap();
        let up = upscale_nearest(&map, 4, 6).unwrap();
        assert!(up.values().iter().all(|v| *v == 3.0));
    }

    #[test]
    fn nearest_integer_factor_replicates_blocks() {
        let map = SaliencyMap::new(2, 2, vec![1.0f32, 2.0, 3.0, 4.0]).unwrap();
        let up = upscale_nearest(&map, 4, 4).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(up.get(i, j), map.get(i / 2, j / 2));
            }
        }
    }

    #[test]
    fn nearest_non_integer_factor_uses_index_formula() {
        let map = SaliencyMap::new(3, 3, (0..9).map(|v| v as f64).collect()).unwrap();
        let up = upscale_nearest(&map, 5, 5).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let si = ((i as f64 + 0.5) * 3.0 / 5.0).floor() as usize;
                let sj = ((j as f64 + 0.5) * 3.0 / 5.0).floor() as usize;
                assert_eq!(up.get(i, j), map.get(si, sj));
            }
        }
    }
}
