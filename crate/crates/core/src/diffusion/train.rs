//! Adam and the noise-prediction training loop.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::denoiser::{Architecture, DenoiserModel};
use super::image::{ConditioningVector, ImageTensor};
use super::sample::forward_noise;
use super::schedule::DiffusionSchedule;
use crate::error::{Error, Result};
use crate::rng::{normal_vec, standard_normal, stream};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LrSchedule {
    #[default]
    Constant,
    /// Half-cosine decay to zero at the final step.
    Cosine,
}

impl LrSchedule {
    pub fn at(self, lr: f64, step: usize, total: usize) -> f64 {
        match self {
            LrSchedule::Constant => lr,
            LrSchedule::Cosine => {
                let p = step as f64 / total.max(1) as f64;
                0.5 * lr * (1.0 + (std::f64::consts::PI * p).cos())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Adam<T> {
    config: AdamConfig,
    m: Vec<T>,
    v: Vec<T>,
    t: i32,
}

impl<T: Scalar> Adam<T> {
    pub fn new(config: AdamConfig, len: usize) -> Self {
        Self {
            config,
            m: vec![T::zero(); len],
            v: vec![T::zero(); len],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [T], grad: &[T], lr: f64) {
        self.t += 1;
        let c = &self.config;
        let (b1, b2) = (T::of(c.beta1), T::of(c.beta2));
        let bc1 = T::one() - b1.powi(self.t);
        let bc2 = T::one() - b2.powi(self.t);
        let (lr, eps) = (T::of(lr), T::of(c.eps));
        for (((p, &g), m), v) in params
            .iter_mut()
            .zip(grad)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            *m = b1 * *m + (T::one() - b1) * g;
            *v = b2 * *v + (T::one() - b2) * g * g;
            let mh = *m / bc1;
            let vh = *v / bc2;
            *p -= lr * mh / (vh.sqrt() + eps);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub architecture: Architecture,
    pub steps: usize,
    pub batch: usize,
    pub adam: AdamConfig,
    #[serde(default)]
    pub lr_schedule: LrSchedule,
    /// Standard deviation of isotropic Gaussian jitter added to the
    /// conditioning vector of every training example.
    #[serde(default)]
    pub cond_noise: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            architecture: Architecture::standard(),
            steps: 20_000,
            batch: 32,
            adam: AdamConfig::default(),
            lr_schedule: LrSchedule::Constant,
            cond_noise: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Per-step mean squared error per pixel.
    pub losses: Vec<f64>,
}

impl TrainReport {
    /// Mean of the last `window` losses.
    pub fn smoothed_tail(&self, window: usize) -> f64 {
        let w = window.min(self.losses.len()).max(1);
        self.losses[self.losses.len() - w..].iter().sum::<f64>() / w as f64
    }

    pub fn smoothed_head(&self, window: usize) -> f64 {
        let w = window.min(self.losses.len()).max(1);
        self.losses[..w].iter().sum::<f64>() / w as f64
    }

    pub fn final_loss(&self) -> f64 {
        self.smoothed_tail(100)
    }
}

/// Dataset indices of each training batch. Depends only on `(seed, n)`, so a
/// permuted dataset sees the same index schedule.
pub fn batch_schedule(seed: u64, n: usize, steps: usize, batch: usize) -> Vec<Vec<usize>> {
    let mut rng = stream(seed, "train-batches");
    (0..steps)
        .map(|_| (0..batch).map(|_| rng.random_range(0..n)).collect())
        .collect()
}

/// Minimizes the noise-prediction MSE with mini-batch Adam. Every step draws
/// a batch of indices, a timestep uniform in `[1, T]` and `eps ~ N(0, I)` per
/// example, each from its own seeded stream.
pub fn train_denoiser<T: Scalar>(
    dataset: &[(ImageTensor<T>, ConditioningVector<T>)],
    sched: &DiffusionSchedule<T>,
    config: &TrainConfig,
    seed: u64,
) -> Result<(DenoiserModel<T>, TrainReport)> {
    if dataset.is_empty() {
        return Err(Error::Domain("training dataset is empty".into()));
    }
    if config.batch == 0 {
        return Err(Error::Config("batch size must be positive".into()));
    }
    let arch = &config.architecture;
    for (x, y) in dataset {
        if x.len() != arch.image_dim() {
            return Err(Error::shape("training image", arch.image_dim(), x.len()));
        }
        if y.dim() != arch.cond_dim {
            return Err(Error::shape(
                "training conditioning",
                arch.cond_dim,
                y.dim(),
            ));
        }
    }
    let mut model = DenoiserModel::seeded(arch.clone(), seed);
    let mut adam = Adam::new(config.adam, model.params().len());
    let mut t_rng = stream(seed, "train-timesteps");
    let mut eps_rng = stream(seed, "train-noise");
    let mut index_rng = stream(seed, "train-batches");
    let mut cond_rng = stream(seed, "train-cond-noise");
    if !(config.cond_noise >= 0.0 && config.cond_noise.is_finite()) {
        return Err(Error::Config("conditioning jitter must be >= 0".into()));
    }
    let jitter = T::of(config.cond_noise);
    let mut y_buf = vec![T::zero(); arch.cond_dim];
    let d = arch.image_dim();
    let scale = T::of(2.0 / (config.batch * d) as f64);
    let mut grad = vec![T::zero(); model.params().len()];
    let mut losses = Vec::with_capacity(config.steps);

    for step in 0..config.steps {
        grad.iter_mut().for_each(|g| *g = T::zero());
        let mut loss = 0.0;
        for _ in 0..config.batch {
            let (x0, y) = &dataset[index_rng.random_range(0..dataset.len())];
            let t = t_rng.random_range(1..=sched.steps());
            let eps: Vec<T> = normal_vec(&mut eps_rng, d);
            let xt = forward_noise(x0.pixels(), t, &eps, sched)?;
            y_buf.copy_from_slice(y.values());
            if config.cond_noise > 0.0 {
                for v in y_buf.iter_mut() {
                    *v += jitter * standard_normal::<T, _>(&mut cond_rng);
                }
            }
            let trace = model.trace(&xt, &y_buf, t, sched)?;
            let upstream: Vec<T> = trace
                .output()
                .iter()
                .zip(&eps)
                .map(|(&p, &e)| {
                    loss += (p - e).as_f64().powi(2);
                    scale * (p - e)
                })
                .collect();
            model.backward_trace(&trace, &upstream, Some(&mut grad))?;
        }
        let loss = loss / (config.batch * d) as f64;
        if !loss.is_finite() {
            return Err(Error::Diverged { step, loss });
        }
        losses.push(loss);
        let lr = config.lr_schedule.at(config.adam.lr, step, config.steps);
        adam.step(model.params_mut(), &grad, lr);
    }
    Ok((model, TrainReport { losses }))
}
