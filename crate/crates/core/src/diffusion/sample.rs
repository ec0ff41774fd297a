//! Forward noising and deterministic DDIM sampling.

use super::denoiser::DenoiserModel;
use super::image::ImageTensor;
use super::schedule::DiffusionSchedule;
use crate::error::{Error, Result};
use crate::rng::{normal_vec, stream};
use crate::scalar::{all_finite, Scalar};

fn check_t<T: Scalar>(t: usize, sched: &DiffusionSchedule<T>) -> Result<()> {
    if t == 0 || t > sched.steps() {
        return Err(Error::Domain(format!(
            "timestep {t} outside [1, {}]",
            sched.steps()
        )));
    }
    Ok(())
}

/// `x_t = sqrt(alpha_t) x_0 + sqrt(1 - alpha_t) eps`. Accepts `t = 0`.
pub fn forward_noise<T: Scalar>(
    x0: &[T],
    t: usize,
    eps: &[T],
    sched: &DiffusionSchedule<T>,
) -> Result<Vec<T>> {
    if t > sched.steps() {
        check_t(t, sched)?;
    }
    if eps.len() != x0.len() {
        return Err(Error::shape("noise", x0.len(), eps.len()));
    }
    let a = sched.alpha(t);
    let (sa, sb) = (a.sqrt(), (T::one() - a).sqrt());
    Ok(x0.iter().zip(eps).map(|(&x, &e)| sa * x + sb * e).collect())
}

/// `x0_hat = (x_t - sqrt(1 - alpha_t) eps_hat) / sqrt(alpha_t)`.
pub fn predict_x0<T: Scalar>(
    x_t: &[T],
    eps_hat: &[T],
    t: usize,
    sched: &DiffusionSchedule<T>,
) -> Result<Vec<T>> {
    check_t(t, sched)?;
    if eps_hat.len() != x_t.len() {
        return Err(Error::shape("predicted noise", x_t.len(), eps_hat.len()));
    }
    let a = sched.alpha(t);
    let (sa, sb) = (a.sqrt(), (T::one() - a).sqrt());
    Ok(x_t
        .iter()
        .zip(eps_hat)
        .map(|(&x, &e)| (x - sb * e) / sa)
        .collect())
}

/// `x_{t-1} = sqrt(alpha_{t-1}) x0_hat + sqrt(1 - alpha_{t-1}) eps_hat`.
pub fn ddim_step<T: Scalar>(
    x_t: &[T],
    eps_hat: &[T],
    t: usize,
    sched: &DiffusionSchedule<T>,
) -> Result<Vec<T>> {
    let x0 = predict_x0(x_t, eps_hat, t, sched)?;
    let prev = sched.alpha(t - 1);
    let (sa, sb) = (prev.sqrt(), (T::one() - prev).sqrt());
    Ok(x0
        .iter()
        .zip(eps_hat)
        .map(|(&x, &e)| sa * x + sb * e)
        .collect())
}

/// Anything that predicts the noise component of `x_t`.
pub trait NoisePredictor<T: Scalar> {
    /// `(height, width)` of the images this predictor works on.
    fn image_shape(&self) -> (usize, usize);

    fn predict_eps(
        &self,
        x_t: &[T],
        y: &[T],
        t: usize,
        sched: &DiffusionSchedule<T>,
    ) -> Result<Vec<T>>;
}

impl<T: Scalar> NoisePredictor<T> for DenoiserModel<T> {
    fn image_shape(&self) -> (usize, usize) {
        let a = self.architecture();
        (a.height, a.width)
    }

    fn predict_eps(
        &self,
        x_t: &[T],
        y: &[T],
        t: usize,
        sched: &DiffusionSchedule<T>,
    ) -> Result<Vec<T>> {
        self.forward(x_t, y, t, sched)
    }
}

impl<T: Scalar, P: NoisePredictor<T> + ?Sized> NoisePredictor<T> for &P {
    fn image_shape(&self) -> (usize, usize) {
        (**self).image_shape()
    }

    fn predict_eps(
        &self,
        x_t: &[T],
        y: &[T],
        t: usize,
        sched: &DiffusionSchedule<T>,
    ) -> Result<Vec<T>> {
        (**self).predict_eps(x_t, y, t, sched)
    }
}

/// Runs `T` DDIM steps from a seeded `x_T ~ N(0, I)` and clamps the result
/// to `[-1, 1]` once at the end.
pub fn ddim_sample<T: Scalar, P: NoisePredictor<T> + ?Sized>(
    predictor: &P,
    y: &[T],
    sched: &DiffusionSchedule<T>,
    seed: u64,
) -> Result<ImageTensor<T>> {
    let x = ddim_trajectory_end(predictor, y, sched, seed)?;
    let (h, w) = predictor.image_shape();
    Ok(ImageTensor::new(x, h, w)?.clamped())
}

/// Unclamped final state of the DDIM trajectory.
pub fn ddim_trajectory_end<T: Scalar, P: NoisePredictor<T> + ?Sized>(
    predictor: &P,
    y: &[T],
    sched: &DiffusionSchedule<T>,
    seed: u64,
) -> Result<Vec<T>> {
    let (h, w) = predictor.image_shape();
    let mut rng = stream(seed, "ddim-init");
    let mut x: Vec<T> = normal_vec(&mut rng, h * w);
    for t in (1..=sched.steps()).rev() {
        let eps = predictor.predict_eps(&x, y, t, sched)?;
        if !all_finite(&eps) {
            return Err(Error::NonFinite { t });
        }
        x = ddim_step(&x, &eps, t, sched)?;
        if !all_finite(&x) {
            return Err(Error::NonFinite { t });
        }
    }
    Ok(x)
}
