//! Stand-in for the text encoder: `y = P onehot(prompt) + gate(u)`.

use serde::{Deserialize, Serialize};

use super::image::ConditioningVector;
use crate::error::{Error, Result};
use crate::rng::{standard_normal, stream};
use crate::scalar::{dot, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TextEncoderConfig {
    pub dim: usize,
    pub vocab: usize,
    pub seed: u64,
    /// Radius `rho` of the token gate `u * exp(-|u|^2 / (2 rho^2))`; `None`
    /// makes the token enter additively.
    pub token_radius: Option<f64>,
}

impl Default for TextEncoderConfig {
    fn default() -> Self {
        Self {
            dim: 16,
            vocab: 3,
            seed: 0x5eed_7e47,
            token_radius: Some(3.0),
        }
    }
}

/// Frozen prompt projection plus the token pathway.
///
/// The gate passes tokens of moderate norm almost unchanged and suppresses
/// tokens far outside the embedding scale, so a token drowned in noise
/// degrades to the plain prompt conditioning.
#[derive(Debug, Clone, PartialEq)]
pub struct TextEncoder<T> {
    config: TextEncoderConfig,
    /// Column `k` is the conditioning of prompt `k`; stored column-major.
    columns: Vec<T>,
}

impl<T: Scalar> TextEncoder<T> {
    pub fn new(config: TextEncoderConfig) -> Result<Self> {
        if config.dim == 0 || config.vocab == 0 {
            return Err(Error::Config("text encoder needs dim, vocab >= 1".into()));
        }
        if let Some(r) = config.token_radius {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::Config(format!(
                    "token radius must be positive, got {r}"
                )));
            }
        }
        let mut rng = stream(config.seed, "prompt-projection");
        let scale = T::of(1.0 / (config.dim as f64).sqrt());
        let columns = (0..config.dim * config.vocab)
            .map(|_| scale * standard_normal::<T, _>(&mut rng))
            .collect();
        Ok(Self { config, columns })
    }

    pub fn config(&self) -> &TextEncoderConfig {
        &self.config
    }

    pub fn dim(&self) -> usize {
        self.config.dim
    }

    pub fn vocab(&self) -> usize {
        self.config.vocab
    }

    pub fn prompt(&self, prompt_id: usize) -> Result<&[T]> {
        if prompt_id >= self.config.vocab {
            return Err(Error::Domain(format!(
                "prompt id {prompt_id} outside vocabulary of {}",
                self.config.vocab
            )));
        }
        let d = self.config.dim;
        Ok(&self.columns[prompt_id * d..(prompt_id + 1) * d])
    }

    fn gate_factor(&self, token: &[T]) -> T {
        match self.config.token_radius {
            None => T::one(),
            Some(r) => {
                let r2 = T::of(r * r);
                (-dot(token, token) / (r2 + r2)).exp()
            }
        }
    }

    /// Token contribution to the conditioning vector.
    pub fn gate(&self, token: &[T]) -> Vec<T> {
        let g = self.gate_factor(token);
        token.iter().map(|&u| g * u).collect()
    }

    /// Pulls a gradient with respect to `y` back to the token. The gate's
    /// Jacobian is `g (I - u u^T / rho^2)`, which is symmetric.
    pub fn token_gradient(&self, token: &[T], grad_y: &[T]) -> Vec<T> {
        match self.config.token_radius {
            None => grad_y.to_vec(),
            Some(r) => {
                let g = self.gate_factor(token);
                let proj = dot(token, grad_y) / T::of(r * r);
                grad_y
                    .iter()
                    .zip(token)
                    .map(|(&gy, &u)| g * (gy - u * proj))
                    .collect()
            }
        }
    }

    /// `y_u = P onehot(prompt_id) + gate(u)`.
    pub fn condition(&self, prompt_id: usize, token: &[T]) -> Result<ConditioningVector<T>> {
        if token.len() != self.config.dim {
            return Err(Error::shape(
                "token embedding",
                self.config.dim,
                token.len(),
            ));
        }
        let base = self.prompt(prompt_id)?;
        ConditioningVector::new(
            base.iter()
                .zip(self.gate(token))
                .map(|(&b, u)| b + u)
                .collect(),
        )
    }

    pub fn base(&self, prompt_id: usize) -> Result<ConditioningVector<T>> {
        ConditioningVector::new(self.prompt(prompt_id)?.to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn enc(radius: Option<f64>) -> TextEncoder<f64> {
        TextEncoder::new(TextEncoderConfig {
            dim: 5,
            vocab: 3,
            seed: 1,
            token_radius: radius,
        })
        .unwrap()
    }

    #[test]
    fn zero_token_gives_prompt_conditioning() {
        for r in [None, Some(2.0)] {
            let e = enc(r);
            let y = e.condition(2, &[0.0; 5]).unwrap();
            assert_eq!(y.values(), e.prompt(2).unwrap());
        }
    }

    #[test]
    fn additive_without_gate() {
        let e = enc(None);
        let a = [0.1, -0.2, 0.3, 0.0, 1.0];
        let b = [0.5, 0.5, -1.0, 2.0, 0.0];
        let ab: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let y0 = e.condition(0, &[0.0; 5]).unwrap();
        let ya = e.condition(0, &a).unwrap();
        let yb = e.condition(0, &b).unwrap();
        let yab = e.condition(0, &ab).unwrap();
        for i in 0..5 {
            let lhs = yab.values()[i] - y0.values()[i];
            let rhs = (ya.values()[i] - y0.values()[i]) + (yb.values()[i] - y0.values()[i]);
            assert!((lhs - rhs).abs() < 1e-12);
        }
        assert_eq!(e.condition(0, &a).unwrap(), ya);
    }

    #[test]
    fn gate_suppresses_huge_tokens() {
        let e = enc(Some(3.0));
        let y = e.condition(1, &[1e4, -2e4, 0.0, 5e3, 1.0]).unwrap();
        assert_eq!(y.values(), e.prompt(1).unwrap());
        let g = e.gate(&[1e-4, 0.0, 0.0, 0.0, 0.0]);
        assert!((g[0] - 1e-4).abs() < 1e-12);
    }

    #[test]
    fn gate_gradient_matches_finite_differences() {
        let e = enc(Some(1.5));
        let u = [0.4, -1.1, 0.7, 0.2, 0.9];
        let w = [0.3, 0.8, -0.5, 1.0, -0.2];
        let f = |v: &[f64]| dot(&e.gate(v), &w);
        let g = e.token_gradient(&u, &w);
        for i in 0..5 {
            let (mut p, mut m) = (u, u);
            p[i] += 1e-5;
            m[i] -= 1e-5;
            let fd = (f(&p) - f(&m)) / 2e-5;
            assert!((fd - g[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn errors() {
        let e = enc(None);
        assert!(e.condition(3, &[0.0; 5]).is_err());
        assert!(e.condition(0, &[0.0; 4]).is_err());
    }
}
