use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Cumulative-product noise schedule `alpha_1 > ... > alpha_T`, with
/// `alpha_0 = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionSchedule<T> {
    alpha: Vec<T>,
}

impl<T: Scalar> DiffusionSchedule<T> {
    /// Builds a schedule from explicit cumulative products (index 0 is `alpha_1`).
    pub fn from_alphas(alpha: Vec<T>) -> Result<Self> {
        if alpha.len() < 2 {
            return Err(Error::Domain("a schedule needs at least two steps".into()));
        }
        let one = T::one();
        let ok = alpha[0] < one
            && alpha.windows(2).all(|w| w[1] < w[0])
            && *alpha.last().unwrap() > T::zero();
        if !ok {
            return Err(Error::Domain(
                "alphas must be strictly decreasing within (0, 1)".into(),
            ));
        }
        Ok(Self { alpha })
    }

    pub fn steps(&self) -> usize {
        self.alpha.len()
    }

    /// `alpha_t` for `t` in `0..=T`.
    pub fn alpha(&self, t: usize) -> T {
        if t == 0 {
            T::one()
        } else {
            self.alpha[t - 1]
        }
    }

    pub fn alphas(&self) -> &[T] {
        &self.alpha
    }

    /// `t / T`, the argument of the denoiser's time features.
    pub fn fraction(&self, t: usize) -> T {
        T::of(t as f64 / self.steps() as f64)
    }
}

/// Linear betas from `1e-4 * 1000/T` to `0.02 * 1000/T`, clamped below 0.999,
/// so that `alpha` is approximately a function of `t / T` for any `T`.
pub fn make_schedule<T: Scalar>(steps: usize) -> Result<DiffusionSchedule<T>> {
    if steps < 2 {
        return Err(Error::Domain(format!("schedule needs T >= 2, got {steps}")));
    }
    let scale = 1000.0 / steps as f64;
    let (lo, hi) = (1e-4 * scale, 0.02 * scale);
    let mut prod = 1.0f64;
    let alpha = (0..steps)
        .map(|i| {
            let frac = i as f64 / (steps - 1) as f64;
            let beta = (lo + (hi - lo) * frac).clamp(f64::MIN_POSITIVE, 0.999);
            prod *= 1.0 - beta;
            T::of(prod)
        })
        .collect();
    DiffusionSchedule::from_alphas(alpha)
}
