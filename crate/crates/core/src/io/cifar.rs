//! CIFAR-10 binary batches: each record is one label byte followed by 3072 pixel
//! bytes, the red, green and blue 32x32 planes in that order.

use std::fs;
use std::path::Path;

use super::DatasetRecord;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Image;

const SIDE: usize = 32;
const PLANE: usize = SIDE * SIDE;
pub const CIFAR_RECORD_BYTES: usize = 1 + 3 * PLANE;

pub fn decode_cifar10<T: Scalar>(bytes: &[u8]) -> Result<Vec<DatasetRecord<T>>> {
    if !bytes.len().is_multiple_of(CIFAR_RECORD_BYTES) {
        return Err(Error::Parse {
            offset: bytes.len() - bytes.len() % CIFAR_RECORD_BYTES,
            message: format!(
                "file size {} is not a multiple of {CIFAR_RECORD_BYTES}",
                bytes.len()
            ),
        });
    }
    bytes
        .chunks_exact(CIFAR_RECORD_BYTES)
        .map(|rec| {
            let planes = &rec[1..];
            let image = Image::from_fn(SIDE, SIDE, 3, |i, j, c| T::of(planes[c * PLANE + i * SIDE + j] as f64 / 255.0))?;
            Ok(DatasetRecord::new(image, rec[0] as usize))
        })
        .collect()
}

pub fn read_cifar10<T: Scalar>(path: impl AsRef<Path>) -> Result<Vec<DatasetRecord<T>>> {
    decode_cifar10(&fs::read(path)?)
}
