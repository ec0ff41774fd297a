//! Embedding store: `"DPEB"`, version `u16`, dimension `u32`, count `u32`,
//! `count * dim` `f32` values, then a JSON trailer.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{put_f32s, read_file, write_file, Reader};
use crate::aggregation::{Embedding, EmbeddingSet, NoisyCentroid, UNIT_NORM_TOLERANCE};
use crate::error::{Error, Result};
use crate::privacy::{NoiseCalibration, ReleasePlan, SubsampleConfig};

pub const MAGIC: &[u8; 4] = b"DPEB";
pub const VERSION: u16 = 1;

/// Drift of an f32-rounded unit vector's norm that is still accepted as
/// normalized on load.
const STORED_NORM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReleaseRecord {
    pub calibration: NoiseCalibration,
    pub plan: Option<ReleasePlan>,
    pub subsample: Option<SubsampleConfig>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Trailer {
    source_labels: Vec<String>,
    normalized: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pre_normalization_norms: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    release: Option<ReleaseRecord>,
}

/// Contents of an embedding store: either a set of per-image embeddings or
/// a single released centroid.
#[derive(Debug, Clone, PartialEq)]
pub enum StoreContents {
    Set(EmbeddingSet),
    Release {
        centroid: NoisyCentroid,
        source_labels: Vec<String>,
    },
}

impl StoreContents {
    pub fn dim(&self) -> usize {
        match self {
            StoreContents::Set(s) => s.dim(),
            StoreContents::Release { centroid, .. } => centroid.dim(),
        }
    }
}

pub fn encode_set(set: &EmbeddingSet) -> Result<Vec<u8>> {
    let rows: Vec<&[f64]> = set.members().iter().map(Embedding::values).collect();
    let trailer = Trailer {
        source_labels: set.source_labels().to_vec(),
        normalized: set.all_normalized(),
        pre_normalization_norms: set.pre_normalization_norms().map(<[f64]>::to_vec),
        release: None,
    };
    encode(set.dim(), &rows, &trailer)
}

pub fn encode_release(centroid: &NoisyCentroid, label: &str) -> Result<Vec<u8>> {
    let trailer = Trailer {
        source_labels: vec![label.to_string()],
        normalized: false,
        pre_normalization_norms: None,
        release: Some(ReleaseRecord {
            calibration: centroid.calibration,
            plan: centroid.plan,
            subsample: centroid.subsample,
            seed: centroid.seed,
        }),
    };
    encode(centroid.dim(), &[&centroid.values], &trailer)
}

fn encode(dim: usize, rows: &[&[f64]], trailer: &Trailer) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(14 + rows.len() * dim * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(dim as u32).to_le_bytes());
    out.extend_from_slice(&(rows.len() as u32).to_le_bytes());
    for r in rows {
        put_f32s(&mut out, r.iter().map(|&v| v as f32));
    }
    out.extend_from_slice(&serde_json::to_vec(trailer)?);
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<StoreContents> {
    let mut r = Reader::new(bytes, "embedding store");
    if r.take(4)? != MAGIC {
        return Err(r.err("bad magic"));
    }
    let version = r.u16()?;
    if version != VERSION {
        return Err(r.err(format!("unsupported version {version}")));
    }
    let dim = r.u32()? as usize;
    let count = r.u32()? as usize;
    if dim == 0 || count == 0 {
        return Err(r.err("empty store"));
    }
    let flat = r.f32s(dim * count)?;
    let trailer: Trailer = serde_json::from_slice(r.rest())?;
    if trailer.source_labels.len() != count {
        return Err(r.err("label count does not match embedding count"));
    }
    let rows: Vec<Vec<f64>> = flat
        .chunks_exact(dim)
        .map(|c| c.iter().map(|&v| v as f64).collect())
        .collect();

    if let Some(rel) = trailer.release {
        if count != 1 {
            return Err(r.err("a release store holds exactly one vector"));
        }
        let centroid = NoisyCentroid {
            values: rows.into_iter().next().unwrap(),
            calibration: rel.calibration,
            plan: rel.plan,
            subsample: rel.subsample,
            seed: rel.seed,
        };
        return Ok(StoreContents::Release {
            centroid,
            source_labels: trailer.source_labels,
        });
    }

    let mut members = Vec::with_capacity(count);
    for (i, v) in rows.into_iter().enumerate() {
        let e = Embedding::new(v)?;
        if trailer.normalized {
            // f32 storage perturbs unit norms by ~1e-7; restore the invariant
            // only for vectors that were unit before rounding.
            if (e.norm() - 1.0).abs() > STORED_NORM_TOLERANCE {
                return Err(Error::Embedding(format!(
                    "stored member {i} is flagged normalized but has norm {}",
                    e.norm()
                )));
            }
            let u = e.normalize()?;
            debug_assert!((u.norm() - 1.0).abs() <= UNIT_NORM_TOLERANCE);
            members.push(u);
        } else {
            members.push(e);
        }
    }
    let set = EmbeddingSet::new(members, trailer.source_labels)?
        .with_pre_normalization_norms(trailer.pre_normalization_norms)?;
    Ok(StoreContents::Set(set))
}

pub fn write_set(path: &Path, set: &EmbeddingSet) -> Result<()> {
    write_file(path, &encode_set(set)?)
}

pub fn write_release(path: &Path, centroid: &NoisyCentroid, label: &str) -> Result<()> {
    write_file(path, &encode_release(centroid, label)?)
}

pub fn read(path: &Path) -> Result<StoreContents> {
    decode(&read_file(path)?).map_err(|e| match e {
        Error::Format { format, reason } => Error::Format {
            format,
            reason: format!("{}: {reason}", path.display()),
        },
        other => other,
    })
}

pub fn read_set(path: &Path) -> Result<EmbeddingSet> {
    match read(path)? {
        StoreContents::Set(s) => Ok(s),
        StoreContents::Release { .. } => Err(Error::Format {
            format: "embedding store",
            reason: format!(
                "{} holds a release, expected an embedding set",
                path.display()
            ),
        }),
    }
}
