//! Fixed linear image encoder `E(x) = M x / |M x|` built from the leading
//! principal directions of a public image pool.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::aggregation::{Embedding, EmbeddingSet};
use crate::diffusion::ImageTensor;
use crate::error::{Error, Result};
use crate::scalar::{dot, norm, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct ImageEncoder<T> {
    /// `dim x image_dim`, row-major, orthonormal rows.
    rows: Vec<T>,
    dim: usize,
    image_dim: usize,
}

impl<T: Scalar> ImageEncoder<T> {
    /// Wraps an explicit projection; rows must be orthonormal to 1e-8.
    pub fn from_rows(rows: Vec<T>, dim: usize, image_dim: usize) -> Result<Self> {
        if rows.len() != dim * image_dim {
            return Err(Error::shape("encoder matrix", dim * image_dim, rows.len()));
        }
        let enc = Self {
            rows,
            dim,
            image_dim,
        };
        if enc.orthonormality_error() > 1e-8 {
            return Err(Error::Domain("encoder rows are not orthonormal".into()));
        }
        Ok(enc)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn image_dim(&self) -> usize {
        self.image_dim
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.rows[i * self.image_dim..(i + 1) * self.image_dim]
    }

    /// `max |M M^T - I|` entrywise.
    pub fn orthonormality_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.dim {
            for j in 0..self.dim {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot(self.row(i), self.row(j)).as_f64() - target).abs());
            }
        }
        worst
    }

    /// Raw projection `M x`.
    pub fn project(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.image_dim {
            return Err(Error::shape("encoder input", self.image_dim, x.len()));
        }
        Ok(self
            .rows
            .chunks_exact(self.image_dim)
            .map(|r| dot(r, x))
            .collect())
    }

    /// `M^T v`
    pub fn transpose_apply(&self, v: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.image_dim];
        for (row, &vi) in self.rows.chunks_exact(self.image_dim).zip(v) {
            for (o, &r) in out.iter_mut().zip(row) {
                *o += vi * r;
            }
        }
        out
    }

    /// Unit-norm feature vector of `x` in the scalar type of the encoder.
    pub fn features(&self, x: &[T]) -> Result<Vec<T>> {
        let p = self.project(x)?;
        let n = norm(&p);
        if !(n > T::zero()) {
            return Err(Error::Embedding("image has zero encoder projection".into()));
        }
        Ok(p.iter().map(|&v| v / n).collect())
    }

    /// `E(x)` as a normalized embedding.
    pub fn encode(&self, x: &ImageTensor<T>) -> Result<Embedding> {
        let f = self.features(x.pixels())?;
        Embedding::new(f.iter().map(|v| v.as_f64()).collect())?.normalize()
    }

    /// `l_cos(target, E(x))` and its gradient with respect to `x`, where
    /// `l_cos(a, b) = -<a, b> / (|a| |b|)`.
    pub fn cosine_loss_grad(&self, target: &[T], x: &[T]) -> Result<(T, Vec<T>)> {
        if target.len() != self.dim {
            return Err(Error::shape("guidance target", self.dim, target.len()));
        }
        let p = self.project(x)?;
        let pn = norm(&p);
        let an = norm(target);
        if !(pn > T::zero()) || !(an > T::zero()) {
            return Err(Error::Embedding("cosine loss of a zero vector".into()));
        }
        let ap = dot(target, &p);
        let loss = -ap / (an * pn);
        let pn3 = pn * pn * pn;
        let grad_p: Vec<T> = target
            .iter()
            .zip(&p)
            .map(|(&a, &pi)| -(a / pn - ap * pi / pn3) / an)
            .collect();
        Ok((loss, self.transpose_apply(&grad_p)))
    }

    pub fn cast<U: Scalar>(&self) -> ImageEncoder<U> {
        ImageEncoder {
            rows: self.rows.iter().map(|v| U::of(v.as_f64())).collect(),
            dim: self.dim,
            image_dim: self.image_dim,
        }
    }
}

/// `E(x_i)` for every image, as an [`EmbeddingSet`] for the private
/// aggregator.
pub fn encode_set(
    enc: &ImageEncoder<f64>,
    images: &[ImageTensor<f64>],
    labels: &[String],
) -> Result<EmbeddingSet> {
    if images.len() != labels.len() {
        return Err(Error::shape("image labels", images.len(), labels.len()));
    }
    let members = images
        .iter()
        .map(|x| enc.encode(x))
        .collect::<Result<Vec<_>>>()?;
    EmbeddingSet::new(members, labels.to_vec())
}

/// Relative eigenvalue floor below which a direction counts as absent.
const RANK_TOLERANCE: f64 = 1e-10;

/// Top-`dim` principal directions of the centered pool. Signs are fixed so
/// the largest-magnitude entry of each row is positive.
pub fn fit_encoder<T: Scalar>(pool: &[ImageTensor<T>], dim: usize) -> Result<ImageEncoder<T>> {
    let Some(first) = pool.first() else {
        return Err(Error::DegeneratePool { rank: 0, dim });
    };
    let d = first.len();
    if dim == 0 || dim > d {
        return Err(Error::Config(format!(
            "encoder dimension {dim} outside [1, {d}]"
        )));
    }
    if pool.len() < dim {
        return Err(Error::DegeneratePool {
            rank: pool.len(),
            dim,
        });
    }
    if let Some(bad) = pool.iter().find(|x| x.len() != d) {
        return Err(Error::shape("pool image", d, bad.len()));
    }
    let n = pool.len() as f64;
    let mut mean = vec![0.0f64; d];
    for x in pool {
        for (m, p) in mean.iter_mut().zip(x.pixels()) {
            *m += p.as_f64() / n;
        }
    }
    let mut cov = DMatrix::<f64>::zeros(d, d);
    let mut centered = vec![0.0f64; d];
    for x in pool {
        for ((c, p), m) in centered.iter_mut().zip(x.pixels()).zip(&mean) {
            *c = p.as_f64() - m;
        }
        for i in 0..d {
            let ci = centered[i];
            if ci == 0.0 {
                continue;
            }
            for j in i..d {
                cov[(i, j)] += ci * centered[j];
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            cov[(i, j)] = cov[(j, i)];
        }
    }
    cov /= n;

    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let top = eig.eigenvalues[order[0]].max(0.0);
    let rank = order
        .iter()
        .filter(|&&k| eig.eigenvalues[k] > RANK_TOLERANCE * top.max(f64::MIN_POSITIVE))
        .count();
    if rank < dim {
        return Err(Error::DegeneratePool { rank, dim });
    }
    let mut rows = Vec::with_capacity(dim * d);
    for &k in order.iter().take(dim) {
        let v = eig.eigenvectors.column(k);
        let pivot = (0..d)
            .max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs()).then(b.cmp(&a)))
            .unwrap();
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        rows.extend(v.iter().map(|&e| T::of(sign * e)));
    }
    Ok(ImageEncoder {
        rows,
        dim,
        image_dim: d,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_hot_pool(d: usize, weights: &[f64]) -> Vec<ImageTensor<f64>> {
        // Images +-w_k e_k: covariance is diagonal with entries ~ w_k^2.
        let mut pool = Vec::new();
        for (k, &w) in weights.iter().enumerate() {
            for s in [-1.0, 1.0] {
                let mut px = vec![0.0; d];
                px[k] = s * w;
                pool.push(ImageTensor::new(px, 1, d).unwrap());
            }
        }
        pool
    }

    #[test]
    fn recovers_axes_of_diagonal_covariance() {
        let pool = one_hot_pool(6, &[0.3, 0.9, 0.5, 0.7, 0.1, 0.2]);
        let enc = fit_encoder(&pool, 3).unwrap();
        assert!(enc.orthonormality_error() < 1e-8);
        for (row, axis) in [1usize, 3, 2].iter().enumerate() {
            let r = enc.row(row);
            assert!((r[*axis] - 1.0).abs() < 1e-10, "row {row}: {r:?}");
        }
    }

    #[test]
    fn degenerate_pool_rejected() {
        let pool = one_hot_pool(6, &[0.3, 0.9]);
        assert!(matches!(
            fit_encoder(&pool, 3),
            Err(Error::DegeneratePool { .. })
        ));
        assert!(fit_encoder::<f64>(&[], 1).is_err());
    }

    #[test]
    fn encoding_is_unit_and_scale_invariant() {
        let pool = one_hot_pool(5, &[0.3, 0.9, 0.5, 0.7, 0.1]);
        let enc = fit_encoder(&pool, 4).unwrap();
        let x = ImageTensor::new(vec![0.2, -0.4, 0.1, 0.9, 0.3], 1, 5).unwrap();
        let e = enc.encode(&x).unwrap();
        assert!((e.norm() - 1.0).abs() < 1e-12);
        let e2 = enc.encode(&x.scaled(2.0)).unwrap();
        for (a, b) in e.values().iter().zip(e2.values()) {
            assert!((a - b).abs() < 1e-12);
        }
        let z = ImageTensor::new(vec![0.0, 0.0, 0.0, 0.0, 1.0], 1, 5).unwrap();
        assert!(enc.encode(&z).is_err());
    }

    #[test]
    fn encoding_of_pool_image_is_normalized_coefficients() {
        let pool = one_hot_pool(5, &[0.3, 0.9, 0.5, 0.7, 0.1]);
        let enc = fit_encoder(&pool, 5).unwrap();
        let x = &pool[2];
        let p = enc.project(x.pixels()).unwrap();
        let n = norm(&p);
        let e = enc.encode(x).unwrap();
        for (a, b) in e.values().iter().zip(&p) {
            assert!((a - b / n).abs() < 1e-12);
        }
    }
}
