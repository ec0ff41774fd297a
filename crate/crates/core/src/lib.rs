//! Differentially private adaptation of a small diffusion model through
//! noisy aggregated embeddings.
//!
//! Per-image embeddings (textual-inversion tokens or image-encoder
//! features) are normalized, optionally subsampled, averaged, and released
//! with calibrated Gaussian noise. The release then steers generation,
//! either as a conditioning token or as a style-guidance target.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adaptation;
pub mod aggregation;
pub mod diffusion;
pub mod error;
pub mod harness;
pub mod io;
pub mod privacy;
pub mod rng;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Schedule = diffusion::DiffusionSchedule<f64>;
pub type Image = diffusion::ImageTensor<f64>;
pub type Denoiser = diffusion::DenoiserModel<f64>;
pub type Denoiser32 = diffusion::DenoiserModel<f32>;
pub type Encoder = adaptation::ImageEncoder<f64>;
pub type Text = diffusion::TextEncoder<f64>;
