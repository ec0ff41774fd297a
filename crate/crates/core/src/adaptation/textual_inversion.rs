//! Per-image textual inversion: one token per private image, learned with
//! the denoiser frozen.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregation::EmbeddingSet;
use crate::diffusion::train::{Adam, AdamConfig, LrSchedule};
use crate::diffusion::{
    forward_noise, ConditioningVector, DenoiserModel, DiffusionSchedule, ImageTensor, TextEncoder,
};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, normal_vec, stream};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TiConfig {
    pub steps: usize,
    pub adam: AdamConfig,
    pub lr_schedule: LrSchedule,
    /// Number of `(t, eps)` draws fixed up front; the objective is the mean
    /// loss over this population.
    pub population: usize,
    /// Population members per Adam step; `>= population` means full batch.
    pub batch: usize,
}

impl Default for TiConfig {
    fn default() -> Self {
        Self {
            steps: 2_000,
            adam: AdamConfig {
                lr: 5e-3,
                ..AdamConfig::default()
            },
            lr_schedule: LrSchedule::Cosine,
            population: 64,
            batch: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenEmbedding<T> {
    pub values: Vec<T>,
    pub source: String,
    pub steps: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
}

/// Fixed `(t, eps)` draws for one image.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePopulation<T> {
    pub draws: Vec<(usize, Vec<T>)>,
}

impl<T: Scalar> NoisePopulation<T> {
    pub fn sample(seed: u64, size: usize, image_dim: usize, steps: usize) -> Self {
        let mut t_rng = stream(seed, "ti-timesteps");
        let mut e_rng = stream(seed, "ti-noise");
        let draws = (0..size)
            .map(|_| {
                let t = t_rng.random_range(1..=steps);
                (t, normal_vec(&mut e_rng, image_dim))
            })
            .collect();
        Self { draws }
    }
}

struct Objective<'a, T> {
    model: &'a DenoiserModel<T>,
    text: &'a TextEncoder<T>,
    sched: &'a DiffusionSchedule<T>,
    prompt_id: usize,
    /// `(t, x_t, eps)` per population member.
    items: Vec<(usize, Vec<T>, &'a [T])>,
}

impl<'a, T: Scalar> Objective<'a, T> {
    fn new(
        model: &'a DenoiserModel<T>,
        text: &'a TextEncoder<T>,
        sched: &'a DiffusionSchedule<T>,
        prompt_id: usize,
        image: &ImageTensor<T>,
        population: &'a NoisePopulation<T>,
    ) -> Result<Self> {
        let items = population
            .draws
            .iter()
            .map(|(t, eps)| {
                Ok((
                    *t,
                    forward_noise(image.pixels(), *t, eps, sched)?,
                    eps.as_slice(),
                ))
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            model,
            text,
            sched,
            prompt_id,
            items,
        })
    }

    /// Mean per-pixel squared error over `indices`, and optionally the
    /// gradient with respect to the token.
    fn eval(&self, token: &[T], indices: &[usize], want_grad: bool) -> Result<(f64, Vec<T>)> {
        let y: ConditioningVector<T> = self.text.condition(self.prompt_id, token)?;
        let d = self.model.image_dim();
        let scale = T::of(2.0 / (indices.len() * d) as f64);
        let mut loss = 0.0;
        let mut grad_y = vec![T::zero(); token.len()];
        for &i in indices {
            let (t, xt, eps) = &self.items[i];
            let trace = self.model.trace(xt, y.values(), *t, self.sched)?;
            let upstream: Vec<T> = trace
                .output()
                .iter()
                .zip(eps.iter())
                .map(|(&p, &e)| {
                    loss += (p - e).as_f64().powi(2);
                    scale * (p - e)
                })
                .collect();
            if want_grad {
                let (_, gy) = self.model.backward_trace(&trace, &upstream, None)?;
                for (a, b) in grad_y.iter_mut().zip(gy) {
                    *a += b;
                }
            }
        }
        let grad = if want_grad {
            self.text.token_gradient(token, &grad_y)
        } else {
            grad_y
        };
        Ok((loss / (indices.len() * d) as f64, grad))
    }
}

/// Population loss of a token on one image.
pub fn ti_loss<T: Scalar>(
    model: &DenoiserModel<T>,
    text: &TextEncoder<T>,
    image: &ImageTensor<T>,
    prompt_id: usize,
    sched: &DiffusionSchedule<T>,
    population: &NoisePopulation<T>,
    token: &[T],
) -> Result<f64> {
    let obj = Objective::new(model, text, sched, prompt_id, image, population)?;
    let all: Vec<usize> = (0..obj.items.len()).collect();
    Ok(obj.eval(token, &all, false)?.0)
}

/// Learns a token for a single image. Only `image` is read, so the result
/// is independent of every other member of the private set.
#[allow(clippy::too_many_arguments)]
pub fn train_token_per_image<T: Scalar>(
    model: &DenoiserModel<T>,
    text: &TextEncoder<T>,
    image: &ImageTensor<T>,
    source: &str,
    prompt_id: usize,
    sched: &DiffusionSchedule<T>,
    config: &TiConfig,
    seed: u64,
) -> Result<TokenEmbedding<T>> {
    if text.dim() != model.cond_dim() {
        return Err(Error::shape(
            "text encoder dimension",
            model.cond_dim(),
            text.dim(),
        ));
    }
    if config.population == 0 || config.batch == 0 {
        return Err(Error::Config(
            "TI population and batch must be positive".into(),
        ));
    }
    let population =
        NoisePopulation::sample(seed, config.population, model.image_dim(), sched.steps());
    let obj = Objective::new(model, text, sched, prompt_id, image, &population)?;
    let all: Vec<usize> = (0..config.population).collect();
    let full_batch = config.batch >= config.population;
    let mut pick = stream(seed, "ti-batches");

    let mut token = vec![T::zero(); text.dim()];
    let initial_loss = obj.eval(&token, &all, false)?.0;
    let mut adam = Adam::new(config.adam, token.len());
    let mut batch = vec![0usize; config.batch.min(config.population)];
    for step in 0..config.steps {
        let (loss, grad) = if full_batch {
            obj.eval(&token, &all, true)?
        } else {
            for b in batch.iter_mut() {
                *b = pick.random_range(0..config.population);
            }
            obj.eval(&token, &batch, true)?
        };
        if !loss.is_finite() || !grad.iter().all(|g| g.is_finite()) {
            return Err(Error::Diverged { step, loss });
        }
        let lr = config.lr_schedule.at(config.adam.lr, step, config.steps);
        adam.step(&mut token, &grad, lr);
    }
    let final_loss = obj.eval(&token, &all, false)?.0;
    Ok(TokenEmbedding {
        values: token,
        source: source.to_string(),
        steps: config.steps,
        initial_loss,
        final_loss,
    })
}

/// Trains one token per image, each with a seed derived from the image's
/// label, and normalizes them into an [`EmbeddingSet`]. Any failure aborts
/// the whole build.
#[allow(clippy::too_many_arguments)]
pub fn build_ti_embedding_set<T: Scalar>(
    model: &DenoiserModel<T>,
    text: &TextEncoder<T>,
    images: &[ImageTensor<T>],
    labels: &[String],
    prompt_id: usize,
    sched: &DiffusionSchedule<T>,
    config: &TiConfig,
    seed: u64,
) -> Result<(EmbeddingSet, Vec<TokenEmbedding<T>>)> {
    if images.len() != labels.len() {
        return Err(Error::shape("image labels", images.len(), labels.len()));
    }
    let tokens: Vec<TokenEmbedding<T>> = images
        .par_iter()
        .zip(labels.par_iter())
        .map(|(img, label)| {
            let s = derive_seed(seed, &["ti", label]);
            train_token_per_image(model, text, img, label, prompt_id, sched, config, s)
        })
        .collect::<Result<_>>()?;
    let raw = tokens
        .iter()
        .map(|t| t.values.iter().map(|v| v.as_f64()).collect())
        .collect();
    let set = EmbeddingSet::from_raw(raw, labels.to_vec())?;
    Ok((set, tokens))
}
