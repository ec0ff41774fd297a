//! Sweep outputs: `results.csv`, per-dataset image grids, sample images and
//! a manifest.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::sweep::{BaselineResult, ExperimentConfig, SweepResult};
use crate::error::{Error, Result};
use crate::io::ppm::{write_p5, write_p6, write_png, RgbImage};
use crate::io::{sha256_hex, write_file};

pub const CSV_HEADER: [&str; 11] = [
    "dataset",
    "n",
    "m",
    "epsilon",
    "delta",
    "seed",
    "sigma",
    "style_score_mean",
    "style_score_stderr",
    "embedding_drift",
    "status",
];

const TILE_SCALE: usize = 4;
const GUTTER: usize = 4;
const BACKGROUND: [u8; 3] = [48, 48, 48];
const ERROR_TILE: [u8; 3] = [200, 30, 30];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReportOptions {
    pub png: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportFiles {
    pub csv: PathBuf,
    pub grids: Vec<PathBuf>,
    pub samples: Vec<PathBuf>,
    pub manifest: PathBuf,
}

fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        String::new()
    }
}

fn epsilon_label(cfg: &ExperimentConfig) -> String {
    cfg.epsilon
        .map_or_else(|| "none".to_string(), |e| format!("{e}"))
}

pub fn csv_bytes(results: &[SweepResult]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Format {
        format: "csv",
        reason: e.to_string(),
    };
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for r in results {
        let c = &r.config;
        w.write_record([
            c.dataset.clone(),
            c.n.to_string(),
            c.effective_m().to_string(),
            epsilon_label(c),
            num(c.delta),
            c.seed.to_string(),
            num(r.sigma),
            num(r.style_score_mean),
            num(r.style_score_stderr),
            num(r.embedding_drift),
            r.status.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| Error::Format {
        format: "csv",
        reason: e.to_string(),
    })
}

/// Grid for one dataset: rows are `m` values, columns are `epsilon` values
/// with the noise-free column last. Each tile is the first repetition's
/// sample; failed cells are red.
pub fn render_grid(results: &[&SweepResult]) -> RgbImage {
    let ms: BTreeSet<usize> = results.iter().map(|r| r.config.effective_m()).collect();
    let mut eps: Vec<Option<f64>> = Vec::new();
    for r in results {
        if !eps
            .iter()
            .any(|e| e.map(f64::to_bits) == r.config.epsilon.map(f64::to_bits))
        {
            eps.push(r.config.epsilon);
        }
    }
    eps.sort_by(|a, b| {
        a.unwrap_or(f64::INFINITY)
            .total_cmp(&b.unwrap_or(f64::INFINITY))
    });
    let (th, tw) = results
        .iter()
        .find_map(|r| r.samples.first().map(|x| (x.height(), x.width())))
        .unwrap_or((16, 16));
    let (cell_h, cell_w) = (th * TILE_SCALE, tw * TILE_SCALE);
    let width = GUTTER + eps.len() * (cell_w + GUTTER);
    let height = GUTTER + ms.len() * (cell_h + GUTTER);
    let mut img = RgbImage::filled(width, height, BACKGROUND);
    for (row, m) in ms.iter().enumerate() {
        for (col, e) in eps.iter().enumerate() {
            let cell = results.iter().find(|r| {
                r.config.effective_m() == *m
                    && r.config.epsilon.map(f64::to_bits) == e.map(f64::to_bits)
            });
            let Some(cell) = cell else { continue };
            let (x0, y0) = (
                GUTTER + col * (cell_w + GUTTER),
                GUTTER + row * (cell_h + GUTTER),
            );
            match cell.samples.first().filter(|_| cell.is_ok()) {
                Some(x) => {
                    let gray = x.to_gray8();
                    for yy in 0..cell_h {
                        for xx in 0..cell_w {
                            let g = gray[(yy / TILE_SCALE) * tw + xx / TILE_SCALE];
                            img.put(x0 + xx, y0 + yy, [g, g, g]);
                        }
                    }
                }
                None => {
                    for yy in 0..cell_h {
                        for xx in 0..cell_w {
                            img.put(x0 + xx, y0 + yy, ERROR_TILE);
                        }
                    }
                }
            }
        }
    }
    img
}

#[derive(Serialize)]
struct ManifestCell<'a> {
    key: String,
    config: &'a ExperimentConfig,
    config_hash: String,
    status: String,
    sample: Option<String>,
}

#[derive(Serialize)]
struct ManifestBaseline {
    prompt_id: usize,
    repetitions: usize,
    style_score_mean: f64,
    style_score_stderr: f64,
}

#[derive(Serialize)]
struct Manifest<'a> {
    grid_hash: String,
    cells: Vec<ManifestCell<'a>>,
    baseline: Option<ManifestBaseline>,
    results_csv_sha256: String,
    grids: Vec<String>,
    extra: &'a serde_json::Value,
}

/// Writes all outputs under `out_dir`. `baseline` and `extra` are recorded
/// in the manifest alongside per-cell config hashes.
pub fn report(
    results: &[SweepResult],
    baseline: Option<(&BaselineResult, usize)>,
    extra: &serde_json::Value,
    out_dir: &Path,
    opts: ReportOptions,
) -> Result<ReportFiles> {
    if results.is_empty() {
        return Err(Error::Config("no results to report".into()));
    }
    let csv = csv_bytes(results)?;
    let csv_path = out_dir.join("results.csv");
    write_file(&csv_path, &csv)?;

    let mut by_dataset: BTreeMap<&str, Vec<&SweepResult>> = BTreeMap::new();
    for r in results {
        by_dataset.entry(&r.config.dataset).or_default().push(r);
    }
    let mut grids = Vec::new();
    for (name, cells) in &by_dataset {
        let img = render_grid(cells);
        let path = out_dir.join(format!("grid_{name}.ppm"));
        write_p6(&path, &img)?;
        grids.push(path);
        if opts.png {
            let path = out_dir.join(format!("grid_{name}.png"));
            write_png(&path, &img)?;
            grids.push(path);
        }
    }

    let mut samples = Vec::new();
    let mut cells = Vec::new();
    for r in results {
        let mut sample = None;
        if let Some(x) = r.samples.first().filter(|_| r.is_ok()) {
            let rel = format!("samples/{}.pgm", r.config.slug());
            let path = out_dir.join(&rel);
            write_p5(&path, x.width(), x.height(), &x.to_gray8())?;
            samples.push(path);
            sample = Some(rel);
        }
        cells.push(ManifestCell {
            key: r.config.slug(),
            config: &r.config,
            config_hash: r.config.hash(),
            status: r.status.to_string(),
            sample,
        });
    }
    let joined: String = cells.iter().map(|c| c.config_hash.as_str()).collect();
    let manifest = Manifest {
        grid_hash: sha256_hex(joined.as_bytes()),
        cells,
        baseline: baseline.map(|(b, prompt_id)| ManifestBaseline {
            prompt_id,
            repetitions: b.scores.len(),
            style_score_mean: b.mean,
            style_score_stderr: b.stderr,
        }),
        results_csv_sha256: sha256_hex(&csv),
        grids: grids
            .iter()
            .filter_map(|p| p.file_name().map(|f| f.to_string_lossy().into_owned()))
            .collect(),
        extra,
    };
    let manifest_path = out_dir.join("manifest.json");
    write_file(&manifest_path, &serde_json::to_vec_pretty(&manifest)?)?;
    Ok(ReportFiles {
        csv: csv_path,
        grids,
        samples,
        manifest: manifest_path,
    })
}
