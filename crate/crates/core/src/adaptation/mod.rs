//! The two adaptation paths: per-image textual inversion feeding the
//! private aggregator, and style guidance toward a private encoder-space
//! centroid.

pub mod encoder;
pub mod guidance;
pub mod textual_inversion;

pub use encoder::{encode_set, fit_encoder, ImageEncoder};
pub use guidance::{guidance_gradient, guided_eps, guided_sample, GuidanceConfig, Guided};
pub use textual_inversion::{
    build_ti_embedding_set, ti_loss, train_token_per_image, NoisePopulation, TiConfig,
    TokenEmbedding,
};

use crate::aggregation::NoisyCentroid;
use crate::diffusion::{ConditioningVector, TextEncoder};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// `y_{u*}`: conditioning for `prompt_id` with the released token in place
/// of the placeholder.
pub fn adapt_conditioning<T: Scalar>(
    text: &TextEncoder<T>,
    prompt_id: usize,
    token: &NoisyCentroid,
) -> Result<ConditioningVector<T>> {
    if token.dim() != text.dim() {
        return Err(Error::shape("released token", text.dim(), token.dim()));
    }
    let u: Vec<T> = token.values.iter().map(|&v| T::of(v)).collect();
    text.condition(prompt_id, &u)
}
