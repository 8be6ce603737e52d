//! Binary PPM (`P6`, maxval 255).

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Image;

/// Encodes as `P6`; single-channel images are written as gray RGB. Values are scaled by
/// 255 and rounded half-up.
pub fn encode_ppm<T: Scalar>(image: &Image<T>) -> Result<Vec<u8>> {
    let (h, w, c) = image.dims();
    if c != 1 && c != 3 {
        return Err(Error::invalid(format!("PPM needs 1 or 3 channels, got {c}")));
    }
    let mut out = format!("P6\n{w} {h}\n255\n").into_bytes();
    out.reserve(h * w * 3);
    let quantize = |v: T| (v.as_f64() * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8;
    for px in image.data().chunks_exact(c) {
        if c == 1 {
            let g = quantize(px[0]);
            out.extend_from_slice(&[g, g, g]);
        } else {
            out.extend(px.iter().map(|&v| quantize(v)));
        }
    }
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            offset: self.pos,
            message: message.into(),
        }
    }

    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b' ' | b'\t' | b'\n' | b'\r' => self.pos += 1,
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err(format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .unwrap()
            .parse()
            .map_err(|_| Error::Parse {
                offset: start,
                message: format!("{what} out of range"),
            })
    }
}

/// Decodes a `P6` file into a 3-channel image scaled to `[0, 1]`.
pub fn decode_ppm<T: Scalar>(bytes: &[u8]) -> Result<Image<T>> {
    let mut cur = Cursor { bytes, pos: 0 };
    if !bytes.starts_with(b"P6") {
        return Err(cur.err("expected P6 magic"));
    }
    cur.pos = 2;
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(cur.err("zero image dimension"));
    }
    if maxval != 255 {
        return Err(cur.err(format!("unsupported maxval {maxval}, only 255")));
    }
    match bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        _ => return Err(cur.err("expected whitespace after maxval")),
    }
    let n = width * height * 3;
    let payload = &bytes[cur.pos..];
    if payload.len() < n {
        return Err(Error::Parse {
            offset: bytes.len(),
            message: format!("truncated payload: {} of {n} bytes", payload.len()),
        });
    }
    let data = payload[..n].iter().map(|&b| T::of(b as f64 / 255.0)).collect();
    Image::new(height, width, 3, data)
}

pub fn read_ppm<T: Scalar>(path: impl AsRef<Path>) -> Result<Image<T>> {
    decode_ppm(&fs::read(path)?)
}

pub fn write_ppm<T: Scalar>(path: impl AsRef<Path>, image: &Image<T>) -> Result<()> {
    fs::write(path, encode_ppm(image)?)?;
    Ok(())
}
