//! Normalized embeddings, subsampling, and the noisy centroid release.

use std::cmp::Ordering;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::privacy::{
    plan_release, CalibrationMethod, NoiseCalibration, PrivacyBudget, ReleasePlan, SubsampleConfig,
};
use crate::rng::{normal_vec, stream};
use crate::scalar::norm;

/// l2 diameter of the unit sphere.
pub const UNIT_SENSITIVITY: f64 = 2.0;

/// Allowed deviation of a normalized embedding's norm from 1.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    values: Vec<f64>,
    normalized: bool,
}

impl Embedding {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Embedding("empty embedding".into()));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::Embedding("non-finite entry".into()));
        }
        Ok(Self {
            values,
            normalized: false,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        norm(&self.values)
    }

    /// True when flagged normalized and the norm actually is 1.
    pub fn is_unit(&self) -> bool {
        self.normalized && (self.norm() - 1.0).abs() <= UNIT_NORM_TOLERANCE
    }

    /// Unit-l2 copy; vectors already within rounding of unit norm are kept
    /// bit-for-bit so that normalization is idempotent.
    pub fn normalize(&self) -> Result<Embedding> {
        let n = self.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::Embedding(format!(
                "cannot normalize a vector of norm {n}"
            )));
        }
        let values = if (n - 1.0).abs() <= 1e-12 {
            self.values.clone()
        } else {
            self.values.iter().map(|v| v / n).collect()
        };
        Ok(Embedding {
            values,
            normalized: true,
        })
    }
}

pub fn normalize(e: &Embedding) -> Result<Embedding> {
    e.normalize()
}

/// Immutable, nonempty, uniform-dimension collection of embeddings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSet {
    members: Vec<Embedding>,
    source_labels: Vec<String>,
    /// Norms before normalization, where known. Diagnostic only.
    pre_normalization_norms: Option<Vec<f64>>,
}

impl EmbeddingSet {
    pub fn new(members: Vec<Embedding>, source_labels: Vec<String>) -> Result<Self> {
        let Some(first) = members.first() else {
            return Err(Error::Embedding("embedding set must be nonempty".into()));
        };
        let dim = first.dim();
        if let Some(bad) = members.iter().find(|m| m.dim() != dim) {
            return Err(Error::shape("embedding dimension", dim, bad.dim()));
        }
        if source_labels.len() != members.len() {
            return Err(Error::shape(
                "source labels",
                members.len(),
                source_labels.len(),
            ));
        }
        Ok(Self {
            members,
            source_labels,
            pre_normalization_norms: None,
        })
    }

    /// Normalizes each raw vector and remembers its original norm.
    pub fn from_raw(raw: Vec<Vec<f64>>, source_labels: Vec<String>) -> Result<Self> {
        let mut norms = Vec::with_capacity(raw.len());
        let mut members = Vec::with_capacity(raw.len());
        for v in raw {
            let e = Embedding::new(v)?;
            norms.push(e.norm());
            members.push(e.normalize()?);
        }
        let mut set = Self::new(members, source_labels)?;
        set.pre_normalization_norms = Some(norms);
        Ok(set)
    }

    pub fn with_pre_normalization_norms(mut self, norms: Option<Vec<f64>>) -> Result<Self> {
        if let Some(n) = &norms {
            if n.len() != self.len() {
                return Err(Error::shape("pre-normalization norms", self.len(), n.len()));
            }
        }
        self.pre_normalization_norms = norms;
        Ok(self)
    }

    pub fn members(&self) -> &[Embedding] {
        &self.members
    }

    pub fn source_labels(&self) -> &[String] {
        &self.source_labels
    }

    pub fn pre_normalization_norms(&self) -> Option<&[f64]> {
        self.pre_normalization_norms.as_deref()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.members[0].dim()
    }

    pub fn all_normalized(&self) -> bool {
        self.members.iter().all(Embedding::is_unit)
    }

    fn select(&self, indices: &[usize]) -> Self {
        Self {
            members: indices.iter().map(|&i| self.members[i].clone()).collect(),
            source_labels: indices
                .iter()
                .map(|&i| self.source_labels[i].clone())
                .collect(),
            pre_normalization_norms: self
                .pre_normalization_norms
                .as_ref()
                .map(|n| indices.iter().map(|&i| n[i]).collect()),
        }
    }
}

fn cmp_values(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Mean of the members. Members are summed in a canonical (lexicographic)
/// order so the result does not depend on how the set is arranged.
pub fn centroid(set: &EmbeddingSet) -> Vec<f64> {
    let mut order: Vec<&[f64]> = set.members.iter().map(Embedding::values).collect();
    order.sort_by(|a, b| cmp_values(a, b));
    let mut sum = vec![0.0; set.dim()];
    for v in order {
        for (s, x) in sum.iter_mut().zip(v) {
            *s += x;
        }
    }
    let k = set.len() as f64;
    sum.iter().map(|s| s / k).collect()
}

/// `m` distinct members chosen uniformly without replacement, kept in
/// their original relative order.
pub fn subsample(set: &EmbeddingSet, m: usize, seed: u64) -> Result<EmbeddingSet> {
    let n = set.len();
    if m == 0 || m > n {
        return Err(Error::Domain(format!(
            "subsample size {m} must lie in [1, {n}]"
        )));
    }
    let mut rng = stream(seed, "subsample");
    let mut picked = index::sample(&mut rng, n, m).into_vec();
    picked.sort_unstable();
    Ok(set.select(&picked))
}

/// Where the noise level of a release comes from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NoiseSource {
    Calibrated {
        budget: PrivacyBudget,
        method: CalibrationMethod,
    },
    /// Fixed noise level, bypassing calibration (0 gives the clean centroid).
    Fixed { sigma: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoisyCentroid {
    pub values: Vec<f64>,
    pub calibration: NoiseCalibration,
    /// Present when the noise was calibrated to a budget.
    pub plan: Option<ReleasePlan>,
    pub subsample: Option<SubsampleConfig>,
    pub seed: u64,
}

impl NoisyCentroid {
    pub fn sigma(&self) -> f64 {
        self.calibration.sigma
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// Releases the centroid with numerically calibrated Gaussian noise.
pub fn release(
    set: &EmbeddingSet,
    budget: PrivacyBudget,
    sample: Option<usize>,
    seed: u64,
) -> Result<NoisyCentroid> {
    release_with(
        set,
        NoiseSource::Calibrated {
            budget,
            method: CalibrationMethod::Numeric,
        },
        sample,
        seed,
    )
}

/// Optional subsample to `sample`, centroid, then i.i.d. `N(0, sigma^2)` per
/// coordinate. Subsampling and noise draw from separate streams of `seed`.
pub fn release_with(
    set: &EmbeddingSet,
    noise: NoiseSource,
    sample: Option<usize>,
    seed: u64,
) -> Result<NoisyCentroid> {
    if let Some(i) = set.members.iter().position(|m| !m.is_unit()) {
        return Err(Error::Embedding(format!(
            "member {i} ({}) is not unit-normalized",
            set.source_labels[i]
        )));
    }
    let n = set.len();
    let subsample_cfg = sample.map(|m| SubsampleConfig::new(n, m)).transpose()?;
    let count = sample.unwrap_or(n);

    let (calibration, plan) = match noise {
        NoiseSource::Calibrated { budget, method } => {
            let plan = plan_release(budget, UNIT_SENSITIVITY, n, sample, method)?;
            (plan.calibration, Some(plan))
        }
        NoiseSource::Fixed { sigma } => {
            if !(sigma >= 0.0 && sigma.is_finite()) {
                return Err(Error::Domain(format!(
                    "fixed sigma must be >= 0, got {sigma}"
                )));
            }
            let cal = NoiseCalibration {
                sigma,
                sensitivity: UNIT_SENSITIVITY,
                count,
            };
            (cal, None)
        }
    };

    let mut values = match subsample_cfg {
        Some(cfg) if !cfg.is_identity() => centroid(&subsample(set, cfg.sample(), seed)?),
        _ => centroid(set),
    };
    if calibration.sigma > 0.0 {
        let mut rng = stream(seed, "noise");
        let z: Vec<f64> = normal_vec(&mut rng, values.len());
        for (v, zi) in values.iter_mut().zip(z) {
            *v += calibration.sigma * zi;
        }
    }
    Ok(NoisyCentroid {
        values,
        calibration,
        plan,
        subsample: subsample_cfg,
        seed,
    })
}
