//! Style guidance toward a (noisy) target in encoder space.

use super::encoder::ImageEncoder;
use crate::diffusion::{
    ddim_sample, predict_x0, DenoiserModel, DiffusionSchedule, ImageTensor, NoisePredictor,
};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct GuidanceConfig<T> {
    pub weight: T,
    /// Target `u*` in encoder space.
    pub target: Vec<T>,
}

impl<T: Scalar> GuidanceConfig<T> {
    pub fn new(weight: T, target: Vec<T>, encoder: &ImageEncoder<T>) -> Result<Self> {
        if !(weight >= T::zero()) {
            return Err(Error::Config("guidance weight must be >= 0".into()));
        }
        if target.len() != encoder.dim() {
            return Err(Error::shape("guidance target", encoder.dim(), target.len()));
        }
        Ok(Self { weight, target })
    }
}

/// Surrogate gradient `(1 / sqrt(alpha_t)) grad_{x0_hat} l_cos(u*, E(x0_hat))`,
/// i.e. the gradient with respect to `x_t` holding the predicted noise fixed.
pub fn guidance_gradient<T: Scalar>(
    encoder: &ImageEncoder<T>,
    target: &[T],
    x_t: &[T],
    eps: &[T],
    t: usize,
    sched: &DiffusionSchedule<T>,
) -> Result<Vec<T>> {
    let x0 = predict_x0(x_t, eps, t, sched)?;
    let (_, g) = encoder.cosine_loss_grad(target, &x0)?;
    let inv = T::one() / sched.alpha(t).sqrt();
    Ok(g.into_iter().map(|v| v * inv).collect())
}

/// `eps + w sqrt(1 - alpha_t) grad_{x_t} l_cos(u*, E(x0_hat))`.
#[allow(clippy::too_many_arguments)]
pub fn guided_eps<T: Scalar>(
    model: &DenoiserModel<T>,
    encoder: &ImageEncoder<T>,
    cfg: &GuidanceConfig<T>,
    x_t: &[T],
    y: &[T],
    t: usize,
    sched: &DiffusionSchedule<T>,
) -> Result<Vec<T>> {
    let eps = model.forward(x_t, y, t, sched)?;
    if cfg.weight == T::zero() {
        return Ok(eps);
    }
    let g = guidance_gradient(encoder, &cfg.target, x_t, &eps, t, sched)?;
    let k = cfg.weight * (T::one() - sched.alpha(t)).sqrt();
    Ok(eps.iter().zip(g).map(|(&e, gi)| e + k * gi).collect())
}

/// Denoiser wrapped with style guidance, usable wherever a
/// [`NoisePredictor`] is expected.
pub struct Guided<'a, T> {
    pub model: &'a DenoiserModel<T>,
    pub encoder: &'a ImageEncoder<T>,
    pub config: &'a GuidanceConfig<T>,
}

impl<T: Scalar> NoisePredictor<T> for Guided<'_, T> {
    fn image_shape(&self) -> (usize, usize) {
        self.model.image_shape()
    }

    fn predict_eps(
        &self,
        x_t: &[T],
        y: &[T],
        t: usize,
        sched: &DiffusionSchedule<T>,
    ) -> Result<Vec<T>> {
        guided_eps(self.model, self.encoder, self.config, x_t, y, t, sched)
    }
}

pub fn guided_sample<T: Scalar>(
    model: &DenoiserModel<T>,
    encoder: &ImageEncoder<T>,
    cfg: &GuidanceConfig<T>,
    y: &[T],
    sched: &DiffusionSchedule<T>,
    seed: u64,
) -> Result<ImageTensor<T>> {
    let guided = Guided {
        model,
        encoder,
        config: cfg,
    };
    ddim_sample(&guided, y, sched, seed)
}
