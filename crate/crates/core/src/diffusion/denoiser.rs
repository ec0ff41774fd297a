//! Fully connected noise predictor with hand-written reverse mode.
//!
//! Input is `[x_t | time features | y]`; hidden layers are affine + tanh;
//! the output layer is linear and bias-free. An optional input skip adds
//! `g(t) x_t` with `g(t) = <v, time features> + b`, which lets the network
//! pass the noise through at high `t` despite its narrow hidden layers.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::schedule::DiffusionSchedule;
use crate::error::{Error, Result};
use crate::rng::{standard_normal, stream};
use crate::scalar::{axpy, dot, Scalar};

/// Number of sinusoidal time features.
pub const TIME_FEATURES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
}

impl Activation {
    pub fn id(self) -> u8 {
        match self {
            Activation::Tanh => 1,
        }
    }

    pub fn from_id(id: u8) -> Option<Self> {
        match id {
            1 => Some(Activation::Tanh),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub height: usize,
    pub width: usize,
    /// Conditioning dimension `c`.
    pub cond_dim: usize,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    /// Time-modulated input skip (`TIME_FEATURES + 1` parameters).
    #[serde(default)]
    pub skip: bool,
}

impl Architecture {
    /// 16x16 images, `c = 16`, two tanh layers of 128 units.
    pub fn standard() -> Self {
        Self {
            height: 16,
            width: 16,
            cond_dim: 16,
            hidden: vec![128, 128],
            activation: Activation::Tanh,
            skip: true,
        }
    }

    pub fn image_dim(&self) -> usize {
        self.height * self.width
    }

    pub fn input_dim(&self) -> usize {
        self.image_dim() + TIME_FEATURES + self.cond_dim
    }

    /// `[input, hidden..., output]`
    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut s = Vec::with_capacity(self.hidden.len() + 2);
        s.push(self.input_dim());
        s.extend(&self.hidden);
        s.push(self.image_dim());
        s
    }

    pub fn param_count(&self) -> usize {
        let sizes = self.layer_sizes();
        let last = sizes.len() - 2;
        let layers: usize = sizes
            .windows(2)
            .enumerate()
            .map(|(l, w)| w[0] * w[1] + if l < last { w[1] } else { 0 })
            .sum();
        layers + self.skip_params()
    }

    pub fn skip_params(&self) -> usize {
        if self.skip {
            TIME_FEATURES + 1
        } else {
            0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct LayerLayout {
    inputs: usize,
    outputs: usize,
    weight: usize,
    bias: Option<usize>,
}

fn layouts(arch: &Architecture) -> Vec<LayerLayout> {
    let sizes = arch.layer_sizes();
    let last = sizes.len() - 2;
    let mut offset = 0;
    sizes
        .windows(2)
        .enumerate()
        .map(|(l, w)| {
            let weight = offset;
            offset += w[0] * w[1];
            let bias = if l < last {
                let b = offset;
                offset += w[1];
                Some(b)
            } else {
                None
            };
            LayerLayout {
                inputs: w[0],
                outputs: w[1],
                weight,
                bias,
            }
        })
        .collect()
}

/// `[sin(2^k pi s), cos(2^k pi s)]` for `k = 0..4`, `s = t / T`.
pub fn time_features<T: Scalar>(fraction: T) -> [T; TIME_FEATURES] {
    let mut out = [T::zero(); TIME_FEATURES];
    for k in 0..TIME_FEATURES / 2 {
        let arg = T::PI() * T::of((1u32 << k) as f64) * fraction;
        out[2 * k] = arg.sin();
        out[2 * k + 1] = arg.cos();
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenoiserModel<T> {
    arch: Architecture,
    layout: Vec<LayerLayout>,
    params: Vec<T>,
}

fn skip_offset(arch: &Architecture) -> Option<usize> {
    arch.skip.then(|| arch.param_count() - arch.skip_params())
}

/// Gradients of `<upstream, output>`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenoiserGradients<T> {
    /// Same layout as [`DenoiserModel::params`].
    pub params: Vec<T>,
    pub x: Vec<T>,
    pub y: Vec<T>,
}

/// Per-layer activations retained for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace<T> {
    /// `activations[0]` is the input vector, the last entry is the output.
    activations: Vec<Vec<T>>,
}

impl<T> ForwardTrace<T> {
    pub fn output(&self) -> &[T] {
        self.activations.last().expect("trace holds the output")
    }
}

impl<T: Scalar> DenoiserModel<T> {
    pub fn zeros(arch: Architecture) -> Self {
        let n = arch.param_count();
        Self {
            layout: layouts(&arch),
            arch,
            params: vec![T::zero(); n],
        }
    }

    /// Weights `N(0, 1 / fan_in)`, biases zero.
    pub fn init<R: Rng + ?Sized>(arch: Architecture, rng: &mut R) -> Self {
        let mut model = Self::zeros(arch);
        for l in model.layout.clone() {
            let scale = T::of(1.0 / (l.inputs as f64).sqrt());
            for w in &mut model.params[l.weight..l.weight + l.inputs * l.outputs] {
                *w = scale * standard_normal::<T, _>(rng);
            }
        }
        model
    }

    pub fn seeded(arch: Architecture, seed: u64) -> Self {
        Self::init(arch, &mut stream(seed, "denoiser-init"))
    }

    pub fn from_params(arch: Architecture, params: Vec<T>) -> Result<Self> {
        if params.len() != arch.param_count() {
            return Err(Error::shape(
                "denoiser parameters",
                arch.param_count(),
                params.len(),
            ));
        }
        if !params.iter().all(|p| p.is_finite()) {
            return Err(Error::Domain("non-finite denoiser parameter".into()));
        }
        Ok(Self {
            layout: layouts(&arch),
            arch,
            params,
        })
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn image_dim(&self) -> usize {
        self.arch.image_dim()
    }

    pub fn cond_dim(&self) -> usize {
        self.arch.cond_dim
    }

    pub fn cast<U: Scalar>(&self) -> DenoiserModel<U> {
        DenoiserModel {
            arch: self.arch.clone(),
            layout: self.layout.clone(),
            params: self.params.iter().map(|p| U::of(p.as_f64())).collect(),
        }
    }

    fn input(&self, x_t: &[T], y: &[T], fraction: T) -> Result<Vec<T>> {
        if x_t.len() != self.image_dim() {
            return Err(Error::shape(
                "denoiser image input",
                self.image_dim(),
                x_t.len(),
            ));
        }
        if y.len() != self.cond_dim() {
            return Err(Error::shape(
                "denoiser conditioning",
                self.cond_dim(),
                y.len(),
            ));
        }
        let mut z = Vec::with_capacity(self.arch.input_dim());
        z.extend_from_slice(x_t);
        z.extend_from_slice(&time_features(fraction));
        z.extend_from_slice(y);
        Ok(z)
    }

    pub fn trace(
        &self,
        x_t: &[T],
        y: &[T],
        t: usize,
        sched: &DiffusionSchedule<T>,
    ) -> Result<ForwardTrace<T>> {
        let mut activations = Vec::with_capacity(self.layout.len() + 1);
        activations.push(self.input(x_t, y, sched.fraction(t))?);
        for l in &self.layout {
            let input = activations.last().unwrap();
            let w = &self.params[l.weight..l.weight + l.inputs * l.outputs];
            let mut out: Vec<T> = w
                .chunks_exact(l.inputs)
                .map(|row| dot(row, input))
                .collect();
            if let Some(b) = l.bias {
                for (o, &bi) in out.iter_mut().zip(&self.params[b..b + l.outputs]) {
                    *o = (*o + bi).tanh();
                }
            }
            activations.push(out);
        }
        if let Some(g) = self.skip_gain(&activations[0]) {
            let out = activations.last_mut().unwrap();
            axpy(g, x_t, out);
        }
        Ok(ForwardTrace { activations })
    }

    /// `g(t)` from the time features stored in the network input.
    fn skip_gain(&self, input: &[T]) -> Option<T> {
        let off = skip_offset(&self.arch)?;
        let d = self.image_dim();
        let v = &self.params[off..off + TIME_FEATURES];
        Some(dot(v, &input[d..d + TIME_FEATURES]) + self.params[off + TIME_FEATURES])
    }

    /// Predicted noise `eps_theta(x_t, y, t)`.
    pub fn forward(
        &self,
        x_t: &[T],
        y: &[T],
        t: usize,
        sched: &DiffusionSchedule<T>,
    ) -> Result<Vec<T>> {
        Ok(self.trace(x_t, y, t, sched)?.activations.pop().unwrap())
    }

    /// Reverse pass through a recorded trace. Parameter gradients are
    /// accumulated into `param_grad` when given.
    pub fn backward_trace(
        &self,
        trace: &ForwardTrace<T>,
        upstream: &[T],
        param_grad: Option<&mut [T]>,
    ) -> Result<(Vec<T>, Vec<T>)> {
        if upstream.len() != self.image_dim() {
            return Err(Error::shape(
                "upstream gradient",
                self.image_dim(),
                upstream.len(),
            ));
        }
        let mut param_grad = param_grad;
        let d = self.image_dim();
        let input0 = &trace.activations[0];
        let skip = self.skip_gain(input0);
        if let (Some(off), Some(g)) = (skip_offset(&self.arch), param_grad.as_deref_mut()) {
            let ux = dot(upstream, &input0[..d]);
            axpy(
                ux,
                &input0[d..d + TIME_FEATURES],
                &mut g[off..off + TIME_FEATURES],
            );
            g[off + TIME_FEATURES] += ux;
        }
        let mut delta = upstream.to_vec();
        for (li, l) in self.layout.iter().enumerate().rev() {
            let out = &trace.activations[li + 1];
            let input = &trace.activations[li];
            if l.bias.is_some() {
                for (d, &a) in delta.iter_mut().zip(out) {
                    *d *= T::one() - a * a;
                }
            }
            let w = &self.params[l.weight..l.weight + l.inputs * l.outputs];
            if let Some(g) = param_grad.as_deref_mut() {
                for (o, &d) in delta.iter().enumerate() {
                    let row = l.weight + o * l.inputs;
                    axpy(d, input, &mut g[row..row + l.inputs]);
                }
                if let Some(b) = l.bias {
                    for (gb, &d) in g[b..b + l.outputs].iter_mut().zip(&delta) {
                        *gb += d;
                    }
                }
            }
            let mut next = vec![T::zero(); l.inputs];
            for (row, &d) in w.chunks_exact(l.inputs).zip(&delta) {
                axpy(d, row, &mut next);
            }
            delta = next;
        }
        let mut grad_x = delta[..d].to_vec();
        if let Some(g) = skip {
            axpy(g, upstream, &mut grad_x);
        }
        let grad_y = delta[d + TIME_FEATURES..].to_vec();
        Ok((grad_x, grad_y))
    }

    /// Exact gradients of `<upstream, forward(x_t, y, t)>` with respect to
    /// parameters, `x_t` and `y`.
    pub fn backward(
        &self,
        x_t: &[T],
        y: &[T],
        t: usize,
        sched: &DiffusionSchedule<T>,
        upstream: &[T],
    ) -> Result<DenoiserGradients<T>> {
        let trace = self.trace(x_t, y, t, sched)?;
        let mut params = vec![T::zero(); self.params.len()];
        let (x, y) = self.backward_trace(&trace, upstream, Some(&mut params))?;
        Ok(DenoiserGradients { params, x, y })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::schedule::make_schedule;
    use crate::rng::normal_vec;

    fn tiny() -> Architecture {
        Architecture {
            height: 2,
            width: 3,
            cond_dim: 4,
            hidden: vec![5, 7],
            activation: Activation::Tanh,
            skip: true,
        }
    }

    #[test]
    fn param_count_matches_layout() {
        let a = Architecture::standard();
        assert_eq!(a.input_dim(), 256 + 8 + 16);
        assert_eq!(
            a.param_count(),
            280 * 128 + 128 + 128 * 128 + 128 + 128 * 256 + 9
        );
        let m = DenoiserModel::<f64>::zeros(a);
        assert_eq!(m.params().len(), m.architecture().param_count());
    }

    #[test]
    fn zero_model_outputs_zero() {
        let sched = make_schedule::<f64>(10).unwrap();
        let m = DenoiserModel::<f64>::zeros(tiny());
        let out = m.forward(&[0.3; 6], &[1.0; 4], 4, &sched).unwrap();
        assert_eq!(out, vec![0.0; 6]);
    }

    #[test]
    fn forward_is_deterministic_with_output_dim() {
        let sched = make_schedule::<f64>(10).unwrap();
        let m = DenoiserModel::<f64>::seeded(tiny(), 3);
        let mut r = stream(1, "x");
        let x: Vec<f64> = normal_vec(&mut r, 6);
        let y: Vec<f64> = normal_vec(&mut r, 4);
        let a = m.forward(&x, &y, 7, &sched).unwrap();
        let b = m.clone().forward(&x, &y, 7, &sched).unwrap();
        assert_eq!(a.len(), 6);
        assert_eq!(a, b);
    }

    #[test]
    fn shape_errors() {
        let sched = make_schedule::<f64>(10).unwrap();
        let m = DenoiserModel::<f64>::seeded(tiny(), 3);
        assert!(m.forward(&[0.0; 5], &[0.0; 4], 1, &sched).is_err());
        assert!(m.forward(&[0.0; 6], &[0.0; 3], 1, &sched).is_err());
        assert!(m
            .backward(&[0.0; 6], &[0.0; 4], 1, &sched, &[0.0; 2])
            .is_err());
        assert!(DenoiserModel::<f64>::from_params(tiny(), vec![0.0; 3]).is_err());
    }

    #[test]
    fn zero_upstream_and_linearity() {
        let sched = make_schedule::<f64>(10).unwrap();
        let m = DenoiserModel::<f64>::seeded(tiny(), 5);
        let mut r = stream(2, "x");
        let x: Vec<f64> = normal_vec(&mut r, 6);
        let y: Vec<f64> = normal_vec(&mut r, 4);
        let g0 = m.backward(&x, &y, 3, &sched, &[0.0; 6]).unwrap();
        assert!(g0
            .params
            .iter()
            .chain(&g0.x)
            .chain(&g0.y)
            .all(|&v| v == 0.0));

        let u1: Vec<f64> = normal_vec(&mut r, 6);
        let u2: Vec<f64> = normal_vec(&mut r, 6);
        let sum: Vec<f64> = u1.iter().zip(&u2).map(|(a, b)| 2.0 * a + b).collect();
        let g1 = m.backward(&x, &y, 3, &sched, &u1).unwrap();
        let g2 = m.backward(&x, &y, 3, &sched, &u2).unwrap();
        let gs = m.backward(&x, &y, 3, &sched, &sum).unwrap();
        for ((a, b), s) in g1.params.iter().zip(&g2.params).zip(&gs.params) {
            assert!((2.0 * a + b - s).abs() < 1e-12);
        }
        for ((a, b), s) in g1.y.iter().zip(&g2.y).zip(&gs.y) {
            assert!((2.0 * a + b - s).abs() < 1e-12);
        }
    }

    #[test]
    fn time_features_at_endpoints() {
        let f = time_features(0.0f64);
        assert_eq!(f[0], 0.0);
        assert_eq!(f[1], 1.0);
        let g = time_features(0.5f64);
        assert!((g[0] - 1.0).abs() < 1e-15);
    }
}
