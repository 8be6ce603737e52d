//! Dense images, rectangular regions and the mask arithmetic built on them.
//!
//! A region `S` stands in for the binary mask `M(S)` with `M_ij = 1` iff `(i, j)` lies in
//! `S`. The mask is only materialized on request ([`Rect::mask`]); cut and paste work
//! directly on the rectangle.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row-major `height x width x channels` image, channel index fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct Image<T> {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<T>,
}

impl<T: Scalar> Image<T> {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<T>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::invalid(format!(
                "image dims must be positive, got {height}x{width}x{channels}"
            )));
        }
        if data.len() != height * width * channels {
            return Err(Error::dims(
                format!("{} values", height * width * channels),
                format!("{} values", data.len()),
            ));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite value at index {pos}")));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: T) -> Result<Self> {
        Self::new(height, width, channels, vec![value; height * width * channels])
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Result<Self> {
        Self::filled(height, width, channels, T::zero())
    }

    /// Builds an image by evaluating `f(row, col, channel)` for every element.
    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> T,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width * channels);
        for i in 0..height {
            for j in 0..width {
                for c in 0..channels {
                    data.push(f(i, j, c));
                }
            }
        }
        Self::new(height, width, channels, data)
    }

    /// Uniform `[0, 1)` noise image.
    pub fn random<R: Rng + ?Sized>(height: usize, width: usize, channels: usize, rng: &mut R) -> Result<Self> {
        Self::from_fn(height, width, channels, |_, _, _| T::of(rng.gen::<f64>()))
    }

    /// Internal constructor for data already known to satisfy the invariants.
    pub(crate) fn from_parts(height: usize, width: usize, channels: usize, data: Vec<T>) -> Self {
        debug_assert_eq!(data.len(), height * width * channels);
        Self {
            height,
            width,
            channels,
            data,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize, channel: usize) -> usize {
        (row * self.width + col) * self.channels + channel
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, channel: usize) -> T {
        self.data[self.index(row, col, channel)]
    }

    /// Applies `f` elementwise. The result must stay finite.
    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        let data: Vec<T> = self.data.iter().map(|&v| f(v)).collect();
        debug_assert!(data.iter().all(|v| v.is_finite()));
        Self::from_parts(self.height, self.width, self.channels, data)
    }

    pub fn clamp_unit(&self) -> Self {
        self.map(|v| v.max(T::zero()).min(T::one()))
    }

    pub fn cast<U: Scalar>(&self) -> Image<U> {
        Image::from_parts(
            self.height,
            self.width,
            self.channels,
            self.data.iter().map(|&v| U::of(v.as_f64())).collect(),
        )
    }

    pub fn same_dims(&self, other: &Image<T>) -> bool {
        self.dims() == other.dims()
    }

    pub fn mean(&self) -> T {
        self.data.iter().copied().sum::<T>() / T::of(self.data.len() as f64)
    }

    fn check_rect(&self, rect: &Rect) -> Result<()> {
        if rect.contained_in(self.height, self.width) {
            Ok(())
        } else {
            Err(Error::RectOutOfBounds {
                rect: *rect,
                height: self.height,
                width: self.width,
            })
        }
    }

    fn fill_rect(&self, rect: &Rect, mut value: impl FnMut() -> T) -> Self {
        let mut data = self.data.clone();
        for i in rect.top..rect.bottom() {
            let start = self.index(i, rect.left, 0);
            let end = self.index(i, rect.right() - 1, self.channels - 1) + 1;
            for v in &mut data[start..end] {
                *v = value();
            }
        }
        Self::from_parts(self.height, self.width, self.channels, data)
    }
}

/// Axis-aligned region with rows `[top, top + height)` and columns `[left, left + width)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rect {
    pub top: usize,
    pub left: usize,
    pub height: usize,
    pub width: usize,
}

impl Rect {
    pub fn new(top: usize, left: usize, height: usize, width: usize) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::invalid("rect height and width must be positive"));
        }
        Ok(Self {
            top,
            left,
            height,
            width,
        })
    }

    /// The rect covering a whole `height x width` image.
    pub fn full(height: usize, width: usize) -> Self {
        Self {
            top: 0,
            left: 0,
            height,
            width,
        }
    }

    pub fn bottom(&self) -> usize {
        self.top + self.height
    }

    pub fn right(&self) -> usize {
        self.left + self.width
    }

    pub fn area(&self) -> usize {
        self.height * self.width
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        row >= self.top && row < self.bottom() && col >= self.left && col < self.right()
    }

    pub fn contained_in(&self, height: usize, width: usize) -> bool {
        self.height > 0 && self.width > 0 && self.bottom() <= height && self.right() <= width
    }

    pub fn intersects(&self, other: &Rect) -> bool {
        self.top < other.bottom()
            && other.top < self.bottom()
            && self.left < other.right()
            && other.left < self.right()
    }

    pub fn covers(&self, other: &Rect) -> bool {
        self.top <= other.top
            && self.left <= other.left
            && self.bottom() >= other.bottom()
            && self.right() >= other.right()
    }

    /// Materializes `M(S)` as a row-major `height x width` 0/1 mask.
    pub fn mask(&self, height: usize, width: usize) -> Vec<u8> {
        let mut m = vec![0u8; height * width];
        for i in self.top..self.bottom().min(height) {
            for j in self.left..self.right().min(width) {
                m[i * width + j] = 1;
            }
        }
        m
    }
}

/// `(1 - M(S)) * x`: zero every channel inside `rect`.
pub fn cut_zero<T: Scalar>(image: &Image<T>, rect: &Rect) -> Result<Image<T>> {
    image.check_rect(rect)?;
    Ok(image.fill_rect(rect, T::zero))
}

/// Random-erasing fill: every value inside `rect` becomes an i.i.d. uniform `[0, 1)` draw.
pub fn cut_random<T: Scalar, R: Rng + ?Sized>(image: &Image<T>, rect: &Rect, rng: &mut R) -> Result<Image<T>> {
    image.check_rect(rect)?;
    Ok(image.fill_rect(rect, || T::of(rng.gen::<f64>())))
}

/// `M(S) * source + (1 - M(S)) * target`: copy `source` into `target` over `rect`.
pub fn paste_region<T: Scalar>(source: &Image<T>, target: &Image<T>, rect: &Rect) -> Result<Image<T>> {
    if !source.same_dims(target) {
        return Err(Error::dims(
            format!("{:?}", target.dims()),
            format!("{:?}", source.dims()),
        ));
    }
    target.check_rect(rect)?;
    let mut data = target.data.clone();
    for i in rect.top..rect.bottom() {
        let start = target.index(i, rect.left, 0);
        let end = start + rect.width * target.channels;
        data[start..end].copy_from_slice(&source.data[start..end]);
    }
    Ok(Image::from_parts(target.height, target.width, target.channels, data))
}
