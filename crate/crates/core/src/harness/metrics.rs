//! Encoder-space fidelity metrics.

use crate::adaptation::ImageEncoder;
use crate::diffusion::ImageTensor;
use crate::error::{Error, Result};
use crate::scalar::{dot, norm};

/// Normalized clean centroid of `E(x_i)` over a target set.
pub fn target_direction(enc: &ImageEncoder<f64>, images: &[ImageTensor<f64>]) -> Result<Vec<f64>> {
    if images.is_empty() {
        return Err(Error::Config("target set is empty".into()));
    }
    let mut acc = vec![0.0; enc.dim()];
    for x in images {
        for (a, v) in acc.iter_mut().zip(enc.features(x.pixels())?) {
            *a += v;
        }
    }
    let len = norm(&acc);
    if len == 0.0 {
        return Err(Error::Embedding("target centroid has zero norm".into()));
    }
    Ok(acc.into_iter().map(|v| v / len).collect())
}

/// Cosine between `E(generated)` and a unit target direction.
pub fn style_score_against(
    enc: &ImageEncoder<f64>,
    generated: &ImageTensor<f64>,
    direction: &[f64],
) -> Result<f64> {
    if direction.len() != enc.dim() {
        return Err(Error::shape("style direction", enc.dim(), direction.len()));
    }
    let e = enc.features(generated.pixels())?;
    Ok((dot(&e, direction) / norm(direction)).clamp(-1.0, 1.0))
}

pub fn style_score(
    enc: &ImageEncoder<f64>,
    generated: &ImageTensor<f64>,
    target_set: &[ImageTensor<f64>],
) -> Result<f64> {
    style_score_against(enc, generated, &target_direction(enc, target_set)?)
}

/// Mean pairwise cosine between distinct members of a set in encoder space.
pub fn intra_set_cosine(enc: &ImageEncoder<f64>, images: &[ImageTensor<f64>]) -> Result<f64> {
    let feats = images
        .iter()
        .map(|x| enc.features(x.pixels()))
        .collect::<Result<Vec<_>>>()?;
    let k = feats.len();
    if k < 2 {
        return Err(Error::Config("need at least two images".into()));
    }
    let mut sum = 0.0;
    for i in 0..k {
        for j in (i + 1)..k {
            sum += dot(&feats[i], &feats[j]);
        }
    }
    Ok(sum / (k * (k - 1) / 2) as f64)
}

/// Sample mean and standard error of the mean; the error is 0 for a single
/// value.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adaptation::fit_encoder;
    use crate::harness::datasets::{make_public_pool, make_style_dataset, StyleFamily};

    fn encoder() -> ImageEncoder<f64> {
        let pool: Vec<_> = make_public_pool(96, 11)
            .into_iter()
            .map(|(x, _)| x)
            .collect();
        fit_encoder(&pool, 16).unwrap()
    }

    #[test]
    fn member_scores_dominate_intra_set_cosine() {
        let enc = encoder();
        let set = make_style_dataset(StyleFamily::Glyphs, 20, 2).unwrap();
        let intra = intra_set_cosine(&enc, &set.images).unwrap();
        let dir = target_direction(&enc, &set.images).unwrap();
        let mean = set
            .images
            .iter()
            .map(|x| style_score_against(&enc, x, &dir).unwrap())
            .sum::<f64>()
            / 20.0;
        assert!(mean >= intra, "{mean} < {intra}");
    }

    #[test]
    fn scale_invariance_and_range() {
        let enc = encoder();
        let set = make_style_dataset(StyleFamily::Strokes, 10, 3).unwrap();
        let x = &set.images[0];
        let a = style_score(&enc, x, &set.images).unwrap();
        let b = style_score(&enc, &x.scaled(3.5), &set.images).unwrap();
        assert!((a - b).abs() < 1e-12);
        assert!((-1.0..=1.0).contains(&a));
        assert!(style_score(&enc, &ImageTensor::zeros(16, 16), &set.images).is_err());
    }

    #[test]
    fn mean_and_stderr() {
        let (m, s) = mean_stderr(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_stderr(&[7.0]), (7.0, 0.0));
    }
}
