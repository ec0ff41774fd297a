use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use dpembed::adaptation::{
    adapt_conditioning, build_ti_embedding_set, encode_set, fit_encoder, guided_sample,
    GuidanceConfig, TiConfig,
};
use dpembed::aggregation::{centroid, release_with, NoiseSource, NoisyCentroid};
use dpembed::diffusion::{
    ddim_sample, make_schedule, train_denoiser, Architecture, ImageTensor, LrSchedule, TextEncoder,
    TextEncoderConfig, TrainConfig,
};
use dpembed::harness::datasets::{
    base_training_set, make_style_dataset, StyleDataset, BASE_COND_NOISE,
};
use dpembed::harness::report::ReportOptions;
use dpembed::harness::{build_artifacts, report, run_baseline, run_sweep, DatasetSpec, SweepFile};
use dpembed::io::ppm::{write_p5, write_png, RgbImage};
use dpembed::io::{checkpoint, store};
use dpembed::privacy::{plan_release, CalibrationMethod, NoiseCalibration, PrivacyBudget};

#[derive(Parser)]
#[command(
    name = "dpembed",
    version,
    about = "Differentially private style adaptation of a small diffusion model"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Noise level for a Gaussian release, with optional subsampling.
    Calibrate(CalibrateArgs),
    /// Release a noisy centroid of an embedding store.
    Aggregate(AggregateArgs),
    /// Train the base denoiser.
    TrainBase(TrainBaseArgs),
    /// Learn one textual-inversion token per image.
    EmbedTi(EmbedTiArgs),
    /// Encode images with the PCA image encoder.
    EmbedEncoder(EmbedEncoderArgs),
    /// Generate an image from a token or guidance target.
    Generate(GenerateArgs),
    /// Run an (m, epsilon) sweep from a TOML file.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long)]
    epsilon: f64,
    #[arg(long)]
    delta: f64,
    #[arg(long, default_value_t = 2.0)]
    sensitivity: f64,
    /// Number of averaged records.
    #[arg(long, default_value_t = 1)]
    population: usize,
    /// Subsample size drawn without replacement.
    #[arg(long)]
    sample: Option<usize>,
    #[arg(long, default_value_t = CalibrationMethod::Numeric)]
    method: CalibrationMethod,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct AggregateArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    epsilon: f64,
    /// Defaults to 1/n.
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    sample: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = CalibrationMethod::Numeric)]
    method: CalibrationMethod,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct TrainBaseArgs {
    /// `public:n:seed` or `family:n:seed`.
    #[arg(long, default_value = "public:512:1")]
    dataset: DatasetSpec,
    #[arg(long, default_value_t = 20_000)]
    steps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Diffusion steps T.
    #[arg(long, default_value_t = 50)]
    diffusion_steps: usize,
    #[arg(long, default_value_t = 32)]
    batch: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = BASE_COND_NOISE)]
    cond_noise: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TiArgs {
    #[arg(long)]
    ti_steps: Option<usize>,
    #[arg(long)]
    ti_lr: Option<f64>,
    #[arg(long)]
    ti_population: Option<usize>,
    #[arg(long)]
    ti_batch: Option<usize>,
}

impl TiArgs {
    fn config(&self) -> TiConfig {
        let mut c = TiConfig::default();
        if let Some(v) = self.ti_steps {
            c.steps = v;
        }
        if let Some(v) = self.ti_lr {
            c.adam.lr = v;
        }
        if let Some(v) = self.ti_population {
            c.population = v;
        }
        if let Some(v) = self.ti_batch {
            c.batch = v;
        }
        c
    }
}

#[derive(Args)]
struct EmbedTiArgs {
    #[arg(long)]
    model: PathBuf,
    /// `family:n:seed`.
    #[arg(long)]
    dataset: DatasetSpec,
    #[arg(long, default_value_t = 0)]
    prompt_id: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    ti: TiArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EmbedEncoderArgs {
    #[arg(long, default_value = "public:512:1")]
    pool: DatasetSpec,
    #[arg(long)]
    dataset: DatasetSpec,
    #[arg(long, default_value_t = 32)]
    dim: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    model: PathBuf,
    /// Released token or embedding set (its clean centroid is used).
    #[arg(long)]
    token: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    prompt_id: usize,
    /// Style guidance weight; above 0 the token is an encoder-space target.
    #[arg(long, default_value_t = 0.0)]
    guidance_weight: f64,
    /// Encoder pool for style guidance.
    #[arg(long, default_value = "public:512:1")]
    pool: DatasetSpec,
    #[arg(long, default_value_t = 32)]
    dim: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// `.png`, otherwise binary PGM.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    master_seed: Option<u64>,
    /// Also write PNG grids.
    #[arg(long)]
    png: bool,
}

fn private_dataset(spec: &DatasetSpec) -> Result<StyleDataset> {
    match *spec {
        DatasetSpec::Family { family, n, seed } => Ok(make_style_dataset(family, n, seed)?),
        DatasetSpec::Public { .. } => bail!("expected a `family:n:seed` dataset, got `{spec}`"),
    }
}

fn calibrate(a: CalibrateArgs) -> Result<()> {
    let budget = PrivacyBudget::new(a.epsilon, a.delta)?;
    let plan = plan_release(budget, a.sensitivity, a.population, a.sample, a.method)?;
    if a.json {
        println!("{}", serde_json::to_string(&plan)?);
    } else {
        println!(
            "sigma={} base_epsilon={} base_delta={} method={} count={}",
            plan.calibration.sigma,
            plan.base.epsilon(),
            plan.base.delta(),
            a.method,
            plan.calibration.count
        );
    }
    Ok(())
}

fn aggregate(a: AggregateArgs) -> Result<()> {
    let set = store::read_set(&a.input)?;
    let delta = a.delta.unwrap_or(1.0 / set.len() as f64);
    let noise = NoiseSource::Calibrated {
        budget: PrivacyBudget::new(a.epsilon, delta)?,
        method: a.method,
    };
    let released = release_with(&set, noise, a.sample, a.seed)?;
    let label = a
        .input
        .file_stem()
        .map_or("release".into(), |s| s.to_string_lossy().into_owned());
    store::write_release(&a.output, &released, &label)?;
    eprintln!(
        "released n={} m={} sigma={} -> {}",
        set.len(),
        a.sample.unwrap_or(set.len()),
        released.sigma(),
        a.output.display()
    );
    Ok(())
}

fn train_base(a: TrainBaseArgs) -> Result<()> {
    let text_cfg = TextEncoderConfig::default();
    let text = TextEncoder::<f64>::new(text_cfg)?;
    let data = base_training_set(&a.dataset.labeled_images()?, &text)?;
    let sched = make_schedule::<f64>(a.diffusion_steps)?;
    let mut config = TrainConfig {
        architecture: Architecture::standard(),
        steps: a.steps,
        batch: a.batch,
        lr_schedule: LrSchedule::Constant,
        cond_noise: a.cond_noise,
        ..TrainConfig::default()
    };
    config.adam.lr = a.lr;
    let start = Instant::now();
    let (model, report) = train_denoiser(&data, &sched, &config, a.seed)?;
    eprintln!(
        "trained {} steps in {:.1?}: loss {:.4} -> {:.4}",
        a.steps,
        start.elapsed(),
        report.smoothed_head(100),
        report.smoothed_tail(100)
    );
    let ckpt = checkpoint::Checkpoint {
        model,
        steps: a.diffusion_steps,
        meta: checkpoint::CheckpointMeta {
            text_encoder: text_cfg,
            training: Some(config),
            seed: a.seed,
            final_loss: Some(report.smoothed_tail(100)),
            dataset: Some(a.dataset.to_string()),
        },
    };
    checkpoint::save(&a.out, &ckpt)?;
    Ok(())
}

fn embed_ti(a: EmbedTiArgs) -> Result<()> {
    let ckpt = checkpoint::load::<f64>(&a.model)?;
    let text = TextEncoder::new(ckpt.meta.text_encoder)?;
    let sched = make_schedule(ckpt.steps)?;
    let ds = private_dataset(&a.dataset)?;
    let start = Instant::now();
    let (set, tokens) = build_ti_embedding_set(
        &ckpt.model,
        &text,
        &ds.images,
        &ds.labels,
        a.prompt_id,
        &sched,
        &a.ti.config(),
        a.seed,
    )?;
    let norms = tokens
        .iter()
        .map(|t| t.values.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    let set = set.with_pre_normalization_norms(Some(norms))?;
    store::write_set(&a.out, &set)?;
    eprintln!(
        "{} tokens in {:.1?} -> {}",
        set.len(),
        start.elapsed(),
        a.out.display()
    );
    Ok(())
}

fn embed_encoder(a: EmbedEncoderArgs) -> Result<()> {
    let enc = fit_encoder(&a.pool.images()?, a.dim)?;
    let ds = private_dataset(&a.dataset)?;
    let set = encode_set(&enc, &ds.images, &ds.labels)?;
    store::write_set(&a.out, &set)?;
    eprintln!(
        "{} embeddings of dim {} -> {}",
        set.len(),
        a.dim,
        a.out.display()
    );
    Ok(())
}

fn load_token(path: &Path) -> Result<NoisyCentroid> {
    Ok(match store::read(path)? {
        store::StoreContents::Release { centroid, .. } => centroid,
        store::StoreContents::Set(set) => NoisyCentroid {
            values: centroid(&set),
            calibration: NoiseCalibration {
                sigma: 0.0,
                sensitivity: 2.0,
                count: set.len(),
            },
            plan: None,
            subsample: None,
            seed: 0,
        },
    })
}

fn save_image(path: &Path, x: &ImageTensor<f64>) -> Result<()> {
    let gray = x.to_gray8();
    if path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("png"))
    {
        let mut img = RgbImage::filled(x.width(), x.height(), [0, 0, 0]);
        for (i, &g) in gray.iter().enumerate() {
            img.put(i % x.width(), i / x.width(), [g, g, g]);
        }
        write_png(path, &img)?;
    } else {
        write_p5(path, x.width(), x.height(), &gray)?;
    }
    Ok(())
}

fn generate(a: GenerateArgs) -> Result<()> {
    let ckpt = checkpoint::load::<f64>(&a.model)?;
    let text = TextEncoder::new(ckpt.meta.text_encoder)?;
    let sched = make_schedule(ckpt.steps)?;
    let token = a.token.as_deref().map(load_token).transpose()?;
    let x = if a.guidance_weight > 0.0 {
        let Some(token) = token else {
            bail!("style guidance needs --token");
        };
        let enc = fit_encoder(&a.pool.images()?, a.dim)?;
        let cfg = GuidanceConfig::new(a.guidance_weight, token.values, &enc)?;
        let y = text.base(a.prompt_id)?;
        guided_sample(&ckpt.model, &enc, &cfg, y.values(), &sched, a.seed)?
    } else {
        let y = match &token {
            Some(t) => adapt_conditioning(&text, a.prompt_id, t)?,
            None => text.base(a.prompt_id)?,
        };
        ddim_sample(&ckpt.model, y.values(), &sched, a.seed)?
    };
    save_image(&a.out, &x)?;
    Ok(())
}

fn sweep(a: SweepArgs) -> Result<()> {
    let file = SweepFile::load(&a.config)?;
    let grid = file.grid(a.master_seed)?;
    let start = Instant::now();
    let art = build_artifacts(&file).context("building sweep artifacts")?;
    eprintln!(
        "artifacts ready in {:.1?}; {} cells",
        start.elapsed(),
        grid.len()
    );
    let results = run_sweep(&grid, &art, a.jobs)?;
    let seed = grid[0].seed;
    let baseline = run_baseline(&art, file.generation.prompt_id, file.grid.repetitions, seed)?;
    for r in &results {
        eprintln!(
            "{:<28} sigma={:<12.6} score={:.4}±{:.4} drift={:.4} {} ({:.1?})",
            r.config.slug(),
            r.sigma,
            r.style_score_mean,
            r.style_score_stderr,
            r.embedding_drift,
            r.status,
            r.wall_time
        );
    }
    eprintln!("baseline score={:.4}±{:.4}", baseline.mean, baseline.stderr);
    let extra = json!({
        "config": &file,
        "master_seed": seed,
        "path": art.path,
    });
    let files = report(
        &results,
        Some((&baseline, file.generation.prompt_id)),
        &extra,
        &a.out,
        ReportOptions { png: a.png },
    )?;
    eprintln!("wrote {}", files.csv.display());
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Calibrate(a) => calibrate(a),
        Command::Aggregate(a) => aggregate(a),
        Command::TrainBase(a) => train_base(a),
        Command::EmbedTi(a) => embed_ti(a),
        Command::EmbedEncoder(a) => embed_encoder(a),
        Command::Generate(a) => generate(a),
        Command::Sweep(a) => sweep(a),
    }
}
