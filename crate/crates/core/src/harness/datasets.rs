//! Procedural style families standing in for private image collections.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::diffusion::{ConditioningVector, ImageTensor, TextEncoder};
use crate::error::{Error, Result};
use crate::rng::{derive_seed_indexed, stream};

pub const SIDE: usize = 16;
pub const GENERIC_PROMPT: usize = 0;
/// Conditioning jitter used when training the base model on
/// [`base_training_set`].
pub const BASE_COND_NOISE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StyleFamily {
    /// Thin bright curves on a dark grey ground.
    Strokes,
    /// Dark filled polygon silhouettes on white.
    Glyphs,
}

impl StyleFamily {
    pub const ALL: [StyleFamily; 2] = [StyleFamily::Strokes, StyleFamily::Glyphs];

    pub fn name(self) -> &'static str {
        match self {
            StyleFamily::Strokes => "strokes",
            StyleFamily::Glyphs => "glyphs",
        }
    }

    /// Prompt id of the family in the default vocabulary; prompt 0 is the
    /// generic prompt.
    pub fn prompt_id(self) -> usize {
        match self {
            StyleFamily::Strokes => 1,
            StyleFamily::Glyphs => 2,
        }
    }

    pub fn render(self, seed: u64) -> ImageTensor<f64> {
        let mut rng = stream(seed, self.name());
        let px = match self {
            StyleFamily::Strokes => render_strokes(&mut rng),
            StyleFamily::Glyphs => render_glyph(&mut rng),
        };
        ImageTensor::new(px, SIDE, SIDE).expect("rendered image has SIDE^2 pixels")
    }
}

impl FromStr for StyleFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "strokes" => Ok(StyleFamily::Strokes),
            "glyphs" => Ok(StyleFamily::Glyphs),
            other => Err(Error::UnknownFamily(other.to_string())),
        }
    }
}

impl fmt::Display for StyleFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Supersampling factor per axis used for antialiasing.
const SS: usize = 4;

fn coverage(mut inside: impl FnMut(f64, f64) -> f64) -> Vec<f64> {
    let mut out = vec![0.0; SIDE * SIDE];
    for (i, o) in out.iter_mut().enumerate() {
        let (r, c) = ((i / SIDE) as f64, (i % SIDE) as f64);
        let mut acc = 0.0;
        for sy in 0..SS {
            for sx in 0..SS {
                let y = r + (sy as f64 + 0.5) / SS as f64;
                let x = c + (sx as f64 + 0.5) / SS as f64;
                acc += inside(x, y);
            }
        }
        *o = acc / (SS * SS) as f64;
    }
    out
}

fn seg_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (qx, qy) = (a.0 + t * dx - p.0, a.1 + t * dy - p.1);
    (qx * qx + qy * qy).sqrt()
}

const STROKE_BACKGROUND: f64 = -0.6;
const STROKE_INK: f64 = 0.9;
const STROKE_HALF_WIDTH: f64 = 0.7;

fn render_strokes<R: Rng>(rng: &mut R) -> Vec<f64> {
    // 2-3 quadratic Bezier curves, flattened to polylines.
    let curves = rng.random_range(2..=3);
    let mut segments = Vec::new();
    for _ in 0..curves {
        let mut pt = || (rng.random_range(1.0..15.0), rng.random_range(1.0..15.0));
        let (p0, p1, p2) = (pt(), pt(), pt());
        let mut prev = p0;
        for k in 1..=16 {
            let t = k as f64 / 16.0;
            let u = 1.0 - t;
            let q = (
                u * u * p0.0 + 2.0 * u * t * p1.0 + t * t * p2.0,
                u * u * p0.1 + 2.0 * u * t * p1.1 + t * t * p2.1,
            );
            segments.push((prev, q));
            prev = q;
        }
    }
    coverage(|x, y| {
        let near = segments
            .iter()
            .any(|&(a, b)| seg_distance((x, y), a, b) <= STROKE_HALF_WIDTH);
        if near {
            1.0
        } else {
            0.0
        }
    })
    .into_iter()
    .map(|c| STROKE_BACKGROUND + (STROKE_INK - STROKE_BACKGROUND) * c)
    .collect()
}

fn point_in_polygon(x: f64, y: f64, poly: &[(f64, f64)]) -> bool {
    let mut inside = false;
    let mut j = poly.len() - 1;
    for i in 0..poly.len() {
        let (xi, yi) = poly[i];
        let (xj, yj) = poly[j];
        if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}

fn render_glyph<R: Rng>(rng: &mut R) -> Vec<f64> {
    let vertices = rng.random_range(5..=8);
    let (cx, cy) = (rng.random_range(6.5..9.5), rng.random_range(6.5..9.5));
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    let poly: Vec<(f64, f64)> = (0..vertices)
        .map(|k| {
            let a = phase + std::f64::consts::TAU * k as f64 / vertices as f64;
            let r = rng.random_range(3.0..6.5);
            (cx + r * a.cos(), cy + r * a.sin())
        })
        .collect();
    coverage(|x, y| {
        if point_in_polygon(x, y, &poly) {
            1.0
        } else {
            0.0
        }
    })
    .into_iter()
    .map(|c| 1.0 - 2.0 * c)
    .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct StyleDataset {
    pub name: String,
    pub family: StyleFamily,
    pub seed: u64,
    pub images: Vec<ImageTensor<f64>>,
    pub labels: Vec<String>,
}

impl StyleDataset {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }
}

pub fn make_style_dataset(family: StyleFamily, n: usize, seed: u64) -> Result<StyleDataset> {
    if n == 0 {
        return Err(Error::Config("dataset size must be at least 1".into()));
    }
    let images = (0..n)
        .map(|i| family.render(derive_seed_indexed(seed, family.name(), i as u64)))
        .collect();
    let labels = (0..n).map(|i| format!("{family}-{seed}-{i:04}")).collect();
    Ok(StyleDataset {
        name: family.name().to_string(),
        family,
        seed,
        images,
        labels,
    })
}

/// Public pool alternating over all families; used to train the base model
/// and fit the image encoder. Disjoint from private sets through its stream
/// label.
pub fn make_public_pool(n: usize, seed: u64) -> Vec<(ImageTensor<f64>, StyleFamily)> {
    (0..n)
        .map(|i| {
            let family = StyleFamily::ALL[i % StyleFamily::ALL.len()];
            (
                family.render(derive_seed_indexed(seed, "public", i as u64)),
                family,
            )
        })
        .collect()
}

/// Base-model training pairs: every pool image appears once under the
/// generic prompt 0 and once under its family prompt.
pub fn base_training_set(
    pool: &[(ImageTensor<f64>, StyleFamily)],
    text: &TextEncoder<f64>,
) -> Result<Vec<(ImageTensor<f64>, ConditioningVector<f64>)>> {
    let generic = text.base(GENERIC_PROMPT)?;
    let mut out = Vec::with_capacity(2 * pool.len());
    for (x, family) in pool {
        out.push((x.clone(), generic.clone()));
        out.push((x.clone(), text.base(family.prompt_id())?));
    }
    Ok(out)
}

/// Parses `family:n:seed` or `public:n:seed`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DatasetSpec {
    Family {
        family: StyleFamily,
        n: usize,
        seed: u64,
    },
    Public {
        n: usize,
        seed: u64,
    },
}

impl FromStr for DatasetSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || Error::Config(format!("dataset spec `{s}` is not `family:n:seed`"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let n: usize = parts[1].parse().map_err(|_| bad())?;
        let seed: u64 = parts[2].parse().map_err(|_| bad())?;
        if parts[0] == "public" {
            return Ok(DatasetSpec::Public { n, seed });
        }
        Ok(DatasetSpec::Family {
            family: parts[0].parse()?,
            n,
            seed,
        })
    }
}

impl fmt::Display for DatasetSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DatasetSpec::Family { family, n, seed } => write!(f, "{family}:{n}:{seed}"),
            DatasetSpec::Public { n, seed } => write!(f, "public:{n}:{seed}"),
        }
    }
}

impl DatasetSpec {
    /// Images paired with the family that produced them.
    pub fn labeled_images(&self) -> Result<Vec<(ImageTensor<f64>, StyleFamily)>> {
        Ok(match *self {
            DatasetSpec::Family { family, n, seed } => make_style_dataset(family, n, seed)?
                .images
                .into_iter()
                .map(|x| (x, family))
                .collect(),
            DatasetSpec::Public { n, seed } => {
                if n == 0 {
                    return Err(Error::Config("dataset size must be at least 1".into()));
                }
                make_public_pool(n, seed)
            }
        })
    }

    pub fn images(&self) -> Result<Vec<ImageTensor<f64>>> {
        Ok(self.labeled_images()?.into_iter().map(|(x, _)| x).collect())
    }
}
