//! `KAT1` raw tensor files: the magic, then `H`, `W`, `C` as little-endian `u32`, then
//! `H * W * C` little-endian `f32` values, row-major with the channel index fastest.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Image;

pub const RAW_MAGIC: &[u8; 4] = b"KAT1";
const HEADER_LEN: usize = 16;

#[derive(Clone, Debug, PartialEq)]
pub struct RawTensor {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub data: Vec<f32>,
}

impl RawTensor {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::invalid("tensor dims must be positive"));
        }
        if data.len() != height * width * channels {
            return Err(Error::dims(
                format!("{} values", height * width * channels),
                format!("{} values", data.len()),
            ));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn from_image<T: Scalar>(image: &Image<T>) -> Self {
        let (height, width, channels) = image.dims();
        Self {
            height,
            width,
            channels,
            data: image.data().iter().map(|v| v.as_f32()).collect(),
        }
    }

    pub fn into_image<T: Scalar>(self) -> Result<Image<T>> {
        Image::new(
            self.height,
            self.width,
            self.channels,
            self.data.into_iter().map(|v| T::of(v as f64)).collect(),
        )
    }
}

pub fn encode_raw(t: &RawTensor) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * t.data.len());
    out.extend_from_slice(RAW_MAGIC);
    for d in [t.height, t.width, t.channels] {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in &t.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_raw(bytes: &[u8]) -> Result<RawTensor> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Parse {
            offset: bytes.len(),
            message: format!("header truncated: need {HEADER_LEN} bytes"),
        });
    }
    if &bytes[..4] != RAW_MAGIC {
        return Err(Error::Parse {
            offset: 0,
            message: "bad magic, expected KAT1".into(),
        });
    }
    let dim = |k: usize| u32::from_le_bytes(bytes[4 + 4 * k..8 + 4 * k].try_into().unwrap()) as usize;
    let (h, w, c) = (dim(0), dim(1), dim(2));
    if h == 0 || w == 0 || c == 0 {
        return Err(Error::Parse {
            offset: 4,
            message: format!("zero dimension in {h}x{w}x{c}"),
        });
    }
    let n = h
        .checked_mul(w)
        .and_then(|v| v.checked_mul(c))
        .ok_or_else(|| Error::Parse {
            offset: 4,
            message: "dimensions overflow".into(),
        })?;
    let expected = n
        .checked_mul(4)
        .and_then(|v| v.checked_add(HEADER_LEN))
        .ok_or_else(|| Error::Parse {
            offset: 4,
            message: "dimensions overflow".into(),
        })?;
    if bytes.len() != expected {
        return Err(Error::Parse {
            offset: bytes.len().min(expected),
            message: format!("payload is {} bytes, expected {expected}", bytes.len()),
        });
    }
    let mut data = Vec::with_capacity(n);
    for (k, chunk) in bytes[HEADER_LEN..].chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(Error::Parse {
                offset: HEADER_LEN + 4 * k,
                message: "non-finite value".into(),
            });
        }
        data.push(v);
    }
    RawTensor::new(h, w, c, data)
}

pub fn read_raw(path: impl AsRef<Path>) -> Result<RawTensor> {
    decode_raw(&fs::read(path)?)
}

pub fn write_raw(path: impl AsRef<Path>, t: &RawTensor) -> Result<()> {
    fs::write(path, encode_raw(t))?;
    Ok(())
}
