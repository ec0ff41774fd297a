//! Model checkpoint: `"DPDM"`, version `u16`, architecture descriptor,
//! `f32` parameters, then a JSON trailer.
//!
//! Descriptor: layer count `L` (`u32`), `L + 1` layer sizes (`u32`),
//! activation id (`u8`), flags (`u8`, bit 0: input skip), `c`, `D`, `T`,
//! height, width (all `u32`).

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{put_f32s, read_file, write_file, Reader};
use crate::diffusion::{Activation, Architecture, DenoiserModel, TextEncoderConfig, TrainConfig};
use crate::error::Result;
use crate::scalar::Scalar;

pub const MAGIC: &[u8; 4] = b"DPDM";
pub const VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub text_encoder: TextEncoderConfig,
    pub training: Option<TrainConfig>,
    pub seed: u64,
    pub final_loss: Option<f64>,
    /// Free-form description of the training data.
    #[serde(default)]
    pub dataset: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint<T> {
    pub model: DenoiserModel<T>,
    /// Number of diffusion steps the model was trained with.
    pub steps: usize,
    pub meta: CheckpointMeta,
}

pub fn encode<T: Scalar>(ckpt: &Checkpoint<T>) -> Result<Vec<u8>> {
    let arch = ckpt.model.architecture();
    let sizes = arch.layer_sizes();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&((sizes.len() - 1) as u32).to_le_bytes());
    for s in &sizes {
        out.extend_from_slice(&(*s as u32).to_le_bytes());
    }
    out.push(arch.activation.id());
    out.push(u8::from(arch.skip));
    for v in [
        arch.cond_dim,
        arch.image_dim(),
        ckpt.steps,
        arch.height,
        arch.width,
    ] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    put_f32s(
        &mut out,
        ckpt.model.params().iter().map(|p| p.as_f64() as f32),
    );
    out.extend_from_slice(&serde_json::to_vec(&ckpt.meta)?);
    Ok(out)
}

pub fn decode<T: Scalar>(bytes: &[u8]) -> Result<Checkpoint<T>> {
    let mut r = Reader::new(bytes, "checkpoint");
    if r.take(4)? != MAGIC {
        return Err(r.err("bad magic"));
    }
    let version = r.u16()?;
    if version != VERSION {
        return Err(r.err(format!("unsupported version {version}")));
    }
    let layers = r.u32()? as usize;
    if layers == 0 || layers > 64 {
        return Err(r.err(format!("implausible layer count {layers}")));
    }
    let sizes = (0..=layers)
        .map(|_| r.u32().map(|v| v as usize))
        .collect::<Result<Vec<_>>>()?;
    let activation = Activation::from_id(r.u8()?).ok_or_else(|| r.err("unknown activation"))?;
    let flags = r.u8()?;
    if flags > 1 {
        return Err(r.err(format!("unknown flags {flags:#x}")));
    }
    let cond_dim = r.u32()? as usize;
    let image_dim = r.u32()? as usize;
    let steps = r.u32()? as usize;
    let height = r.u32()? as usize;
    let width = r.u32()? as usize;
    let arch = Architecture {
        height,
        width,
        cond_dim,
        hidden: sizes[1..layers].to_vec(),
        activation,
        skip: flags & 1 == 1,
    };
    if height * width != image_dim || arch.layer_sizes() != sizes {
        return Err(r.err("architecture descriptor is inconsistent"));
    }
    let params = r.f32s(arch.param_count())?;
    let meta: CheckpointMeta = serde_json::from_slice(r.rest())?;
    let model =
        DenoiserModel::from_params(arch, params.iter().map(|&p| T::of(p as f64)).collect())?;
    Ok(Checkpoint { model, steps, meta })
}

pub fn save<T: Scalar>(path: &Path, ckpt: &Checkpoint<T>) -> Result<()> {
    write_file(path, &encode(ckpt)?)
}

pub fn load<T: Scalar>(path: &Path) -> Result<Checkpoint<T>> {
    decode(&read_file(path)?)
}
