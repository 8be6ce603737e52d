//! Two-class synthetic images: class 1 carries one bright 4x4 patch on a dim noise
//! background, class 0 is background only.

use rand::Rng;

use super::DatasetRecord;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{Image, Rect};

pub const PATCH: usize = 4;
const CHANNELS: usize = 3;

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticRecord<T> {
    pub record: DatasetRecord<T>,
    /// Where the bright patch sits (class 1 only).
    pub patch: Option<Rect>,
}

/// `n` records of `size x size x 3`; labels alternate 0, 1, 0, ...
pub fn make_synthetic_annotated<T: Scalar, R: Rng + ?Sized>(
    n: usize,
    size: usize,
    rng: &mut R,
) -> Result<Vec<SyntheticRecord<T>>> {
    if size < 8 {
        return Err(Error::invalid(format!("synthetic image size must be >= 8, got {size}")));
    }
    (0..n)
        .map(|k| {
            let label = k % 2;
            let patch = (label == 1).then(|| Rect {
                top: rng.gen_range(0..=size - PATCH),
                left: rng.gen_range(0..=size - PATCH),
                height: PATCH,
                width: PATCH,
            });
            let image = Image::from_fn(size, size, CHANNELS, |i, j, _| {
                let v = match patch {
                    Some(p) if p.contains(i, j) => rng.gen_range(0.9..=1.0),
                    _ => rng.gen_range(0.0..=0.2),
                };
                T::of(v)
            })?;
            Ok(SyntheticRecord {
                record: DatasetRecord::new(image, label),
                patch,
            })
        })
        .collect()
}

pub fn make_synthetic<T: Scalar, R: Rng + ?Sized>(n: usize, size: usize, rng: &mut R) -> Result<Vec<DatasetRecord<T>>> {
    Ok(make_synthetic_annotated(n, size, rng)?
        .into_iter()
        .map(|s| s.record)
        .collect())
}
