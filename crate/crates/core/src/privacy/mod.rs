//! Gaussian mechanism calibration and amplification by subsampling.
//!
//! All functions here are pure and work in `f64` regardless of the scalar
//! type used elsewhere in the crate.

use std::fmt;
use std::str::FromStr;

use libm::erfc;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An `(epsilon, delta)` differential privacy guarantee.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyBudget {
    epsilon: f64,
    delta: f64,
}

impl PrivacyBudget {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::InvalidBudget(format!(
                "epsilon must be positive and finite, got {epsilon}"
            )));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidBudget(format!(
                "delta must lie in (0, 1), got {delta}"
            )));
        }
        Ok(Self { epsilon, delta })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

/// Standard deviation of the isotropic noise together with the quantities
/// it was derived from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseCalibration {
    pub sigma: f64,
    /// l2 diameter bound of a single contribution (2 for unit vectors).
    pub sensitivity: f64,
    /// Number of vectors averaged; the mean has sensitivity `sensitivity / count`.
    pub count: usize,
}

impl NoiseCalibration {
    pub fn effective_sensitivity(&self) -> f64 {
        self.sensitivity / self.count as f64
    }
}

/// Sampling `sample` of `population` records without replacement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsampleConfig {
    population: usize,
    sample: usize,
}

impl SubsampleConfig {
    pub fn new(population: usize, sample: usize) -> Result<Self> {
        if sample == 0 || sample > population {
            return Err(Error::Domain(format!(
                "subsample size {sample} must lie in [1, {population}]"
            )));
        }
        Ok(Self { population, sample })
    }

    pub fn population(&self) -> usize {
        self.population
    }

    pub fn sample(&self) -> usize {
        self.sample
    }

    pub fn rate(&self) -> f64 {
        self.sample as f64 / self.population as f64
    }

    pub fn is_identity(&self) -> bool {
        self.sample == self.population
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CalibrationMethod {
    /// `sigma = (sensitivity / count) * sqrt(2 ln(1.25 / delta)) / epsilon`.
    Classical,
    /// Smallest sigma satisfying the exact Gaussian privacy curve.
    #[default]
    Numeric,
}

impl FromStr for CalibrationMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "classical" => Ok(Self::Classical),
            "numeric" => Ok(Self::Numeric),
            other => Err(Error::Config(format!(
                "unknown calibration method `{other}` (expected classical or numeric)"
            ))),
        }
    }
}

impl fmt::Display for CalibrationMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Classical => "classical",
            Self::Numeric => "numeric",
        })
    }
}

fn check_sensitivity(sensitivity: f64, count: usize) -> Result<()> {
    if !(sensitivity.is_finite() && sensitivity > 0.0) {
        return Err(Error::Domain(format!(
            "sensitivity must be positive, got {sensitivity}"
        )));
    }
    if count == 0 {
        return Err(Error::Domain("count must be at least 1".into()));
    }
    Ok(())
}

/// Closed-form Gaussian mechanism calibration.
///
/// Only guaranteed to satisfy the privacy curve for `epsilon <= 1`.
pub fn calibrate_classical(
    budget: PrivacyBudget,
    sensitivity: f64,
    count: usize,
) -> Result<NoiseCalibration> {
    check_sensitivity(sensitivity, count)?;
    let log_term = (1.25 / budget.delta).ln();
    if log_term <= 0.0 || budget.epsilon <= 0.0 {
        return Err(Error::Domain(format!(
            "classical calibration undefined for epsilon = {}, delta = {}",
            budget.epsilon, budget.delta
        )));
    }
    let sigma = (sensitivity / count as f64) * (2.0 * log_term).sqrt() / budget.epsilon;
    Ok(NoiseCalibration {
        sigma,
        sensitivity,
        count,
    })
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Exact privacy curve of the Gaussian mechanism: the smallest `delta` for
/// which noise `sigma` on a query of l2 sensitivity `sensitivity` is
/// `(epsilon, delta)`-DP.
pub fn gaussian_privacy_curve(sigma: f64, sensitivity: f64, epsilon: f64) -> f64 {
    let a = sensitivity / (2.0 * sigma);
    let b = epsilon * sigma / sensitivity;
    let first = normal_cdf(a - b);
    let tail = normal_cdf(-a - b);
    // e^eps * tail, kept finite for large epsilon
    let second = if tail > 0.0 {
        (epsilon + tail.ln()).exp()
    } else {
        0.0
    };
    (first - second).clamp(0.0, 1.0)
}

// Bisection runs over log2(sigma / sensitivity) in a fixed bracket for a
// fixed number of halvings, so the result is a deterministic grid point and
// monotone in (epsilon, delta).
const LOG2_BRACKET: f64 = 64.0;
const BISECTION_STEPS: usize = 48;

/// Numeric calibration against [`gaussian_privacy_curve`].
pub fn calibrate_numeric(
    budget: PrivacyBudget,
    sensitivity: f64,
    count: usize,
) -> Result<NoiseCalibration> {
    check_sensitivity(sensitivity, count)?;
    let eff = sensitivity / count as f64;
    let ok = |log2_ratio: f64| {
        gaussian_privacy_curve(eff * log2_ratio.exp2(), eff, budget.epsilon) <= budget.delta
    };
    let (mut lo, mut hi) = (-LOG2_BRACKET, LOG2_BRACKET);
    if !ok(hi) {
        return Err(Error::Convergence {
            iterations: BISECTION_STEPS,
        });
    }
    if ok(lo) {
        hi = lo;
    } else {
        for _ in 0..BISECTION_STEPS {
            let mid = 0.5 * (lo + hi);
            if ok(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
    }
    let sigma = eff * hi.exp2();
    if !sigma.is_finite() || sigma <= 0.0 {
        return Err(Error::Convergence {
            iterations: BISECTION_STEPS,
        });
    }
    Ok(NoiseCalibration {
        sigma,
        sensitivity,
        count,
    })
}

pub fn calibrate(
    method: CalibrationMethod,
    budget: PrivacyBudget,
    sensitivity: f64,
    count: usize,
) -> Result<NoiseCalibration> {
    match method {
        CalibrationMethod::Classical => calibrate_classical(budget, sensitivity, count),
        CalibrationMethod::Numeric => calibrate_numeric(budget, sensitivity, count),
    }
}

/// Guarantee on the full dataset of a mechanism that is `base`-DP on a
/// uniform subsample drawn without replacement.
pub fn amplify_by_subsampling(base: PrivacyBudget, config: SubsampleConfig) -> PrivacyBudget {
    let q = config.rate();
    PrivacyBudget {
        epsilon: (q * base.epsilon.exp_m1()).ln_1p(),
        delta: q * base.delta,
    }
}

/// Base guarantee the subsampled mechanism needs so that the amplified
/// guarantee equals `target`.
pub fn invert_amplification(
    target: PrivacyBudget,
    config: SubsampleConfig,
) -> Result<PrivacyBudget> {
    let q = config.rate();
    let delta = target.delta / q;
    if delta >= 1.0 {
        return Err(Error::Domain(format!(
            "base delta {delta} >= 1: target delta {} too large for sampling rate {q}",
            target.delta
        )));
    }
    let epsilon = (target.epsilon.exp_m1() / q).ln_1p();
    if !epsilon.is_finite() {
        return Err(Error::Domain(format!(
            "base epsilon overflows for target epsilon {}",
            target.epsilon
        )));
    }
    Ok(PrivacyBudget { epsilon, delta })
}

/// Full calibration of a (possibly subsampled) release: the noise for the
/// size-`count` mechanism plus the base budget it was calibrated to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReleasePlan {
    pub calibration: NoiseCalibration,
    pub base: PrivacyBudget,
    pub target: PrivacyBudget,
    pub subsample: Option<SubsampleConfig>,
}

/// Inverts amplification when subsampling (rate < 1), then calibrates at
/// `sensitivity / m`.
pub fn plan_release(
    target: PrivacyBudget,
    sensitivity: f64,
    population: usize,
    sample: Option<usize>,
    method: CalibrationMethod,
) -> Result<ReleasePlan> {
    let subsample = match sample {
        Some(m) => Some(SubsampleConfig::new(population, m)?),
        None => None,
    };
    let (base, count) = match subsample {
        Some(cfg) if !cfg.is_identity() => (invert_amplification(target, cfg)?, cfg.sample()),
        _ => (target, population),
    };
    let calibration = calibrate(method, base, sensitivity, count)?;
    Ok(ReleasePlan {
        calibration,
        base,
        target,
        subsample,
    })
}
