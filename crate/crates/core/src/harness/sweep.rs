//! The `(m, epsilon)` sweep: one cell per configuration, each releasing a
//! private token and scoring the images it generates.

use std::cmp::Ordering;
use std::fmt;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::datasets::StyleDataset;
use super::metrics::{mean_stderr, style_score_against, target_direction};
use crate::adaptation::{adapt_conditioning, guided_sample, GuidanceConfig, ImageEncoder};
use crate::aggregation::{centroid, release_with, EmbeddingSet, NoiseSource, NoisyCentroid};
use crate::diffusion::{ddim_sample, DenoiserModel, DiffusionSchedule, ImageTensor, TextEncoder};
use crate::error::{Error, Result};
use crate::io::sha256_hex;
use crate::privacy::{CalibrationMethod, PrivacyBudget};
use crate::rng::{derive_seed, derive_seed_indexed};
use crate::scalar::distance;

pub const THREADS_ENV: &str = "DPEMBED_THREADS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: String,
    pub n: usize,
    /// Subsample size; `None` releases the full-set centroid.
    pub m: Option<usize>,
    /// `None` releases without noise.
    pub epsilon: Option<f64>,
    pub delta: f64,
    pub seed: u64,
    pub prompt_id: usize,
    pub repetitions: usize,
    pub method: CalibrationMethod,
}

impl ExperimentConfig {
    pub fn effective_m(&self) -> usize {
        self.m.unwrap_or(self.n)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.repetitions == 0 {
            return Err(Error::Config("n and repetitions must be positive".into()));
        }
        if let Some(m) = self.m {
            if m == 0 || m > self.n {
                return Err(Error::Config(format!(
                    "m = {m} must lie in [1, {}]",
                    self.n
                )));
            }
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Config(format!(
                "delta = {} must lie in (0, 1)",
                self.delta
            )));
        }
        Ok(())
    }

    pub fn noise(&self) -> Result<NoiseSource> {
        Ok(match self.epsilon {
            Some(eps) => NoiseSource::Calibrated {
                budget: PrivacyBudget::new(eps, self.delta)?,
                method: self.method,
            },
            None => NoiseSource::Fixed { sigma: 0.0 },
        })
    }

    /// Total order used to arrange results: dataset, then `m`, then
    /// `epsilon` with the noise-free cell last, then the remaining fields.
    pub fn cmp_key(&self, other: &Self) -> Ordering {
        let eps = |c: &Self| c.epsilon.unwrap_or(f64::INFINITY);
        self.dataset
            .cmp(&other.dataset)
            .then(self.n.cmp(&other.n))
            .then(self.effective_m().cmp(&other.effective_m()))
            .then(self.m.is_none().cmp(&other.m.is_none()))
            .then(eps(self).total_cmp(&eps(other)))
            .then(self.delta.total_cmp(&other.delta))
            .then(self.seed.cmp(&other.seed))
            .then(self.prompt_id.cmp(&other.prompt_id))
            .then(self.repetitions.cmp(&other.repetitions))
            .then(self.method.to_string().cmp(&other.method.to_string()))
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("config serializes"))
    }

    /// File-name friendly cell identifier.
    pub fn slug(&self) -> String {
        let eps = self
            .epsilon
            .map_or("none".to_string(), |e| format!("{e:e}"));
        format!("{}_m{}_eps{}", self.dataset, self.effective_m(), eps)
    }
}

/// How a released token steers generation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "path")]
pub enum AdaptationPath {
    /// The token enters the conditioning vector.
    TextualInversion,
    /// The token is a target in encoder space for guided sampling.
    StyleGuidance { weight: f64 },
}

/// Seeds of repetition `r`; shared by every cell so that cells differ only
/// in their privacy settings.
pub fn repetition_seeds(master: u64, r: usize) -> (u64, u64) {
    let rep = derive_seed_indexed(master, "repetition", r as u64);
    (
        derive_seed(rep, &["release"]),
        derive_seed(rep, &["sample"]),
    )
}

/// Read-only state shared by all cells.
pub struct SweepArtifacts {
    pub model: DenoiserModel<f64>,
    pub text: TextEncoder<f64>,
    pub schedule: DiffusionSchedule<f64>,
    pub encoder: ImageEncoder<f64>,
    pub dataset: StyleDataset,
    pub embeddings: EmbeddingSet,
    pub path: AdaptationPath,
    target: Vec<f64>,
    clean_centroid: Vec<f64>,
}

impl SweepArtifacts {
    pub fn new(
        model: DenoiserModel<f64>,
        text: TextEncoder<f64>,
        schedule: DiffusionSchedule<f64>,
        encoder: ImageEncoder<f64>,
        dataset: StyleDataset,
        embeddings: EmbeddingSet,
        path: AdaptationPath,
    ) -> Result<Self> {
        if text.dim() != model.cond_dim() {
            return Err(Error::shape(
                "text encoder dimension",
                model.cond_dim(),
                text.dim(),
            ));
        }
        if encoder.image_dim() != model.image_dim() {
            return Err(Error::shape(
                "encoder input",
                model.image_dim(),
                encoder.image_dim(),
            ));
        }
        if embeddings.len() != dataset.len() {
            return Err(Error::shape(
                "embedding count",
                dataset.len(),
                embeddings.len(),
            ));
        }
        let want = match path {
            AdaptationPath::TextualInversion => text.dim(),
            AdaptationPath::StyleGuidance { weight } => {
                if !(weight >= 0.0) {
                    return Err(Error::Config("guidance weight must be >= 0".into()));
                }
                encoder.dim()
            }
        };
        if embeddings.dim() != want {
            return Err(Error::shape("embedding dimension", want, embeddings.dim()));
        }
        let target = target_direction(&encoder, &dataset.images)?;
        let clean_centroid = centroid(&embeddings);
        Ok(Self {
            model,
            text,
            schedule,
            encoder,
            dataset,
            embeddings,
            path,
            target,
            clean_centroid,
        })
    }

    /// Unit direction of the clean encoder-space centroid of the target set.
    pub fn target(&self) -> &[f64] {
        &self.target
    }

    /// Noise-free full-set centroid of the embeddings.
    pub fn clean_centroid(&self) -> &[f64] {
        &self.clean_centroid
    }

    /// Generates one image from a released token.
    pub fn generate(
        &self,
        token: &NoisyCentroid,
        prompt_id: usize,
        seed: u64,
    ) -> Result<ImageTensor<f64>> {
        match self.path {
            AdaptationPath::TextualInversion => {
                let y = adapt_conditioning(&self.text, prompt_id, token)?;
                ddim_sample(&self.model, y.values(), &self.schedule, seed)
            }
            AdaptationPath::StyleGuidance { weight } => {
                let y = self.text.base(prompt_id)?;
                let cfg = GuidanceConfig::new(weight, token.values.clone(), &self.encoder)?;
                guided_sample(
                    &self.model,
                    &self.encoder,
                    &cfg,
                    y.values(),
                    &self.schedule,
                    seed,
                )
            }
        }
    }

    /// Generation with no adaptation (`u = 0`, unguided).
    pub fn generate_unadapted(&self, prompt_id: usize, seed: u64) -> Result<ImageTensor<f64>> {
        let y = self.text.base(prompt_id)?;
        ddim_sample(&self.model, y.values(), &self.schedule, seed)
    }

    pub fn score(&self, x: &ImageTensor<f64>) -> Result<f64> {
        style_score_against(&self.encoder, x, &self.target)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum CellStatus {
    Ok,
    Failed(String),
}

impl fmt::Display for CellStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CellStatus::Ok => f.write_str("ok"),
            CellStatus::Failed(msg) => write!(f, "error: {msg}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub config: ExperimentConfig,
    pub status: CellStatus,
    pub sigma: f64,
    pub style_score_mean: f64,
    pub style_score_stderr: f64,
    /// Mean over repetitions of `||u* - clean centroid||`.
    pub embedding_drift: f64,
    pub scores: Vec<f64>,
    pub drifts: Vec<f64>,
    pub samples: Vec<ImageTensor<f64>>,
    pub wall_time: Duration,
}

impl SweepResult {
    pub fn is_ok(&self) -> bool {
        self.status == CellStatus::Ok
    }

    fn failed(config: ExperimentConfig, err: &Error, wall_time: Duration) -> Self {
        Self {
            config,
            status: CellStatus::Failed(err.to_string()),
            sigma: f64::NAN,
            style_score_mean: f64::NAN,
            style_score_stderr: f64::NAN,
            embedding_drift: f64::NAN,
            scores: Vec::new(),
            drifts: Vec::new(),
            samples: Vec::new(),
            wall_time,
        }
    }
}

fn check_compatible(cfg: &ExperimentConfig, art: &SweepArtifacts) -> Result<()> {
    cfg.validate()?;
    if cfg.dataset != art.dataset.name {
        return Err(Error::Config(format!(
            "cell dataset `{}` but artifacts hold `{}`",
            cfg.dataset, art.dataset.name
        )));
    }
    if cfg.n != art.embeddings.len() {
        return Err(Error::shape("cell n", art.embeddings.len(), cfg.n));
    }
    Ok(())
}

/// Runs one cell. Repetition `r` releases with its own noise draw and
/// samples with its own seed; both seeds depend only on `(seed, r)`.
pub fn run_cell(cfg: &ExperimentConfig, art: &SweepArtifacts) -> Result<SweepResult> {
    let start = Instant::now();
    check_compatible(cfg, art)?;
    let noise = cfg.noise()?;
    let mut sigma = 0.0;
    let mut scores = Vec::with_capacity(cfg.repetitions);
    let mut drifts = Vec::with_capacity(cfg.repetitions);
    let mut samples = Vec::with_capacity(cfg.repetitions);
    for r in 0..cfg.repetitions {
        let (release_seed, sample_seed) = repetition_seeds(cfg.seed, r);
        let token = release_with(&art.embeddings, noise, cfg.m, release_seed)?;
        sigma = token.sigma();
        drifts.push(distance(&token.values, &art.clean_centroid));
        let x = art.generate(&token, cfg.prompt_id, sample_seed)?;
        scores.push(art.score(&x)?);
        samples.push(x);
    }
    let (mean, stderr) = mean_stderr(&scores);
    let drift = drifts.iter().sum::<f64>() / drifts.len() as f64;
    if !(mean.is_finite() && stderr.is_finite() && drift.is_finite()) {
        return Err(Error::Embedding("cell produced non-finite metrics".into()));
    }
    Ok(SweepResult {
        config: cfg.clone(),
        status: CellStatus::Ok,
        sigma,
        style_score_mean: mean,
        style_score_stderr: stderr,
        embedding_drift: drift,
        scores,
        drifts,
        samples,
        wall_time: start.elapsed(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineResult {
    pub scores: Vec<f64>,
    pub mean: f64,
    pub stderr: f64,
    pub samples: Vec<ImageTensor<f64>>,
}

/// No-adaptation reference with the same sampling seeds as the cells.
pub fn run_baseline(
    art: &SweepArtifacts,
    prompt_id: usize,
    repetitions: usize,
    seed: u64,
) -> Result<BaselineResult> {
    let mut scores = Vec::with_capacity(repetitions);
    let mut samples = Vec::with_capacity(repetitions);
    for r in 0..repetitions {
        let (_, sample_seed) = repetition_seeds(seed, r);
        let x = art.generate_unadapted(prompt_id, sample_seed)?;
        scores.push(art.score(&x)?);
        samples.push(x);
    }
    let (mean, stderr) = mean_stderr(&scores);
    Ok(BaselineResult {
        scores,
        mean,
        stderr,
        samples,
    })
}

/// Worker count: `jobs` and `DPEMBED_THREADS` both cap the machine's
/// parallelism.
pub fn resolve_threads(jobs: Option<usize>) -> usize {
    let avail = std::thread::available_parallelism().map_or(1, |n| n.get());
    let env = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&v| v > 0);
    [Some(avail), jobs.filter(|&j| j > 0), env]
        .into_iter()
        .flatten()
        .min()
        .unwrap_or(1)
}

/// Runs every cell and returns results sorted by [`ExperimentConfig::cmp_key`].
/// Failed cells are kept with a [`CellStatus::Failed`] marker.
pub fn run_sweep(
    grid: &[ExperimentConfig],
    art: &SweepArtifacts,
    jobs: Option<usize>,
) -> Result<Vec<SweepResult>> {
    let mut ordered = grid.to_vec();
    ordered.sort_by(ExperimentConfig::cmp_key);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(resolve_threads(jobs))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(|| {
        ordered
            .into_par_iter()
            .map(|cfg| {
                let start = Instant::now();
                run_cell(&cfg, art)
                    .unwrap_or_else(|e| SweepResult::failed(cfg, &e, start.elapsed()))
            })
            .collect()
    }))
}
