//! TOML sweep description and artifact assembly.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::datasets::{make_style_dataset, DatasetSpec, StyleFamily};
use super::sweep::{AdaptationPath, ExperimentConfig, SweepArtifacts};
use crate::adaptation::{build_ti_embedding_set, encode_set, fit_encoder, TiConfig};
use crate::diffusion::{make_schedule, TextEncoder};
use crate::error::{Error, Result};
use crate::io::{checkpoint, read_file, store};
use crate::privacy::CalibrationMethod;
use crate::rng::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    pub family: StyleFamily,
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub checkpoint: PathBuf,
    /// Precomputed embedding store; computed from the dataset when absent.
    #[serde(default)]
    pub embeddings: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EpsilonEntry {
    Value(f64),
    /// `"none"`: no noise.
    Keyword(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MEntry {
    Count(usize),
    /// `"n"`: the full set.
    Keyword(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DeltaEntry {
    Value(f64),
    /// `"one_over_n"`.
    Keyword(String),
}

impl Default for DeltaEntry {
    fn default() -> Self {
        DeltaEntry::Keyword("one_over_n".into())
    }
}

fn default_epsilons() -> Vec<EpsilonEntry> {
    [1e-5, 0.1, 0.5, 1.0, 2.0]
        .into_iter()
        .map(EpsilonEntry::Value)
        .chain([EpsilonEntry::Keyword("none".into())])
        .collect()
}

fn default_ms() -> Vec<MEntry> {
    [4, 8, 16]
        .into_iter()
        .map(MEntry::Count)
        .chain([MEntry::Keyword("n".into())])
        .collect()
}

fn default_repetitions() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default = "default_epsilons")]
    pub epsilons: Vec<EpsilonEntry>,
    #[serde(default = "default_ms")]
    pub ms: Vec<MEntry>,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    /// Master seed, overridable from the command line.
    #[serde(default)]
    pub seed: u64,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            epsilons: default_epsilons(),
            ms: default_ms(),
            repetitions: default_repetitions(),
            seed: 0,
        }
    }
}

fn classical() -> CalibrationMethod {
    CalibrationMethod::Classical
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrivacySection {
    #[serde(default)]
    pub delta: DeltaEntry,
    #[serde(default = "classical")]
    pub method: CalibrationMethod,
}

impl Default for PrivacySection {
    fn default() -> Self {
        Self {
            delta: DeltaEntry::default(),
            method: classical(),
        }
    }
}

fn default_pool() -> String {
    "public:512:1".into()
}

fn default_encoder_dim() -> usize {
    32
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderSection {
    #[serde(default = "default_pool")]
    pub pool: String,
    #[serde(default = "default_encoder_dim")]
    pub dim: usize,
}

impl Default for EncoderSection {
    fn default() -> Self {
        Self {
            pool: default_pool(),
            dim: default_encoder_dim(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PathKind {
    #[default]
    Ti,
    Sg,
}

fn default_weight() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationSection {
    #[serde(default)]
    pub prompt_id: usize,
    #[serde(default)]
    pub path: PathKind,
    #[serde(default = "default_weight")]
    pub guidance_weight: f64,
}

impl Default for GenerationSection {
    fn default() -> Self {
        Self {
            prompt_id: 0,
            path: PathKind::Ti,
            guidance_weight: default_weight(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct TiSection {
    pub steps: Option<usize>,
    pub lr: Option<f64>,
    pub population: Option<usize>,
    pub batch: Option<usize>,
    #[serde(default)]
    pub seed: u64,
}

impl TiSection {
    pub fn config(&self) -> TiConfig {
        let mut c = TiConfig::default();
        if let Some(s) = self.steps {
            c.steps = s;
        }
        if let Some(lr) = self.lr {
            c.adam.lr = lr;
        }
        if let Some(p) = self.population {
            c.population = p;
        }
        if let Some(b) = self.batch {
            c.batch = b;
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepFile {
    pub dataset: DatasetSection,
    pub model: ModelSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub privacy: PrivacySection,
    #[serde(default)]
    pub encoder: EncoderSection,
    #[serde(default)]
    pub generation: GenerationSection,
    #[serde(default)]
    pub ti: TiSection,
}

impl SweepFile {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config file; relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = String::from_utf8(read_file(path)?)
            .map_err(|_| Error::Config(format!("{} is not UTF-8", path.display())))?;
        let mut file = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut file.model.checkpoint);
        if let Some(e) = file.model.embeddings.as_mut() {
            fix(e);
        }
        Ok(file)
    }

    pub fn delta(&self) -> Result<f64> {
        match &self.privacy.delta {
            DeltaEntry::Value(d) => Ok(*d),
            DeltaEntry::Keyword(k) if k == "one_over_n" => Ok(1.0 / self.dataset.n as f64),
            DeltaEntry::Keyword(k) => Err(Error::Config(format!("unknown delta `{k}`"))),
        }
    }

    pub fn adaptation_path(&self) -> AdaptationPath {
        match self.generation.path {
            PathKind::Ti => AdaptationPath::TextualInversion,
            PathKind::Sg => AdaptationPath::StyleGuidance {
                weight: self.generation.guidance_weight,
            },
        }
    }

    /// Cells of the `ms x epsilons` grid.
    pub fn grid(&self, master_seed: Option<u64>) -> Result<Vec<ExperimentConfig>> {
        let n = self.dataset.n;
        let delta = self.delta()?;
        let eps = self
            .grid
            .epsilons
            .iter()
            .map(|e| match e {
                EpsilonEntry::Value(v) => Ok(Some(*v)),
                EpsilonEntry::Keyword(k) if k == "none" => Ok(None),
                EpsilonEntry::Keyword(k) => Err(Error::Config(format!("unknown epsilon `{k}`"))),
            })
            .collect::<Result<Vec<_>>>()?;
        let ms = self
            .grid
            .ms
            .iter()
            .map(|m| match m {
                MEntry::Count(c) => Ok(Some(*c)),
                MEntry::Keyword(k) if k == "n" => Ok(None),
                MEntry::Keyword(k) => Err(Error::Config(format!("unknown m `{k}`"))),
            })
            .collect::<Result<Vec<_>>>()?;
        let mut cells = Vec::with_capacity(eps.len() * ms.len());
        for &m in &ms {
            for &epsilon in &eps {
                let cfg = ExperimentConfig {
                    dataset: self.dataset.family.name().to_string(),
                    n,
                    m,
                    epsilon,
                    delta,
                    seed: master_seed.unwrap_or(self.grid.seed),
                    prompt_id: self.generation.prompt_id,
                    repetitions: self.grid.repetitions,
                    method: self.privacy.method,
                };
                cfg.validate()?;
                cells.push(cfg);
            }
        }
        if cells.is_empty() {
            return Err(Error::Config("empty grid".into()));
        }
        Ok(cells)
    }
}

/// Loads the checkpoint, renders the dataset, fits the encoder and loads
/// or computes the per-image embeddings.
pub fn build_artifacts(file: &SweepFile) -> Result<SweepArtifacts> {
    let ckpt = checkpoint::load::<f64>(&file.model.checkpoint)?;
    let text = TextEncoder::new(ckpt.meta.text_encoder)?;
    let schedule = make_schedule(ckpt.steps)?;
    let dataset = make_style_dataset(file.dataset.family, file.dataset.n, file.dataset.seed)?;
    let pool_spec: DatasetSpec = file.encoder.pool.parse()?;
    let encoder = fit_encoder(&pool_spec.images()?, file.encoder.dim)?;
    let path = file.adaptation_path();
    let embeddings = match &file.model.embeddings {
        Some(p) => store::read_set(p)?,
        None => match path {
            AdaptationPath::TextualInversion => {
                let seed = derive_seed(file.ti.seed, &["ti-set", dataset.name.as_str()]);
                build_ti_embedding_set(
                    &ckpt.model,
                    &text,
                    &dataset.images,
                    &dataset.labels,
                    file.generation.prompt_id,
                    &schedule,
                    &file.ti.config(),
                    seed,
                )?
                .0
            }
            AdaptationPath::StyleGuidance { .. } => {
                encode_set(&encoder, &dataset.images, &dataset.labels)?
            }
        },
    };
    SweepArtifacts::new(
        ckpt.model, text, schedule, encoder, dataset, embeddings, path,
    )
}
