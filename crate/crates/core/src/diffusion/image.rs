use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Flattened row-major grayscale image. Dataset images live in `[-1, 1]`;
/// intermediate diffusion states may leave that range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageTensor<T> {
    pixels: Vec<T>,
    height: usize,
    width: usize,
}

impl<T: Scalar> ImageTensor<T> {
    pub fn new(pixels: Vec<T>, height: usize, width: usize) -> Result<Self> {
        if pixels.len() != height * width {
            return Err(Error::shape("image pixels", height * width, pixels.len()));
        }
        if !pixels.iter().all(|p| p.is_finite()) {
            return Err(Error::Domain("image has non-finite pixels".into()));
        }
        Ok(Self {
            pixels,
            height,
            width,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            pixels: vec![T::zero(); height * width],
            height,
            width,
        }
    }

    pub fn pixels(&self) -> &[T] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<T> {
        self.pixels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn clamped(&self) -> Self {
        let lo = -T::one();
        let hi = T::one();
        Self {
            pixels: self.pixels.iter().map(|&p| p.max(lo).min(hi)).collect(),
            height: self.height,
            width: self.width,
        }
    }

    pub fn in_unit_range(&self) -> bool {
        self.pixels.iter().all(|&p| p >= -T::one() && p <= T::one())
    }

    pub fn scaled(&self, factor: T) -> Self {
        Self {
            pixels: self.pixels.iter().map(|&p| p * factor).collect(),
            height: self.height,
            width: self.width,
        }
    }

    pub fn cast<U: Scalar>(&self) -> ImageTensor<U> {
        ImageTensor {
            pixels: self.pixels.iter().map(|p| U::of(p.as_f64())).collect(),
            height: self.height,
            width: self.width,
        }
    }

    /// Pixel values mapped from `[-1, 1]` to bytes.
    pub fn to_gray8(&self) -> Vec<u8> {
        self.pixels
            .iter()
            .map(|p| ((p.as_f64().clamp(-1.0, 1.0) + 1.0) * 127.5).round() as u8)
            .collect()
    }
}

/// Text-conditioning vector `y` fed to the denoiser.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditioningVector<T>(pub Vec<T>);

impl<T: Scalar> ConditioningVector<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::Domain("conditioning has non-finite entries".into()));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[T] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}
