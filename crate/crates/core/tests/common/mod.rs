#![allow(dead_code)]

use dpembed::adaptation::{build_ti_embedding_set, fit_encoder, TiConfig};
use dpembed::diffusion::{
    make_schedule, train_denoiser, AdamConfig, Architecture, DenoiserModel, TextEncoder,
    TextEncoderConfig, TrainConfig,
};
use dpembed::harness::datasets::{
    base_training_set, make_public_pool, make_style_dataset, StyleFamily,
};
use dpembed::harness::{AdaptationPath, SweepArtifacts};

/// Standard image and conditioning sizes with a narrow hidden stack.
pub fn small_arch() -> Architecture {
    Architecture {
        hidden: vec![24],
        ..Architecture::standard()
    }
}

pub fn small_ti() -> TiConfig {
    TiConfig {
        steps: 30,
        population: 8,
        batch: 4,
        adam: AdamConfig {
            lr: 2e-2,
            ..AdamConfig::default()
        },
        ..TiConfig::default()
    }
}

pub fn small_model() -> (DenoiserModel<f64>, TextEncoder<f64>) {
    let pool = make_public_pool(32, 1);
    let text = TextEncoder::<f64>::new(TextEncoderConfig::default()).unwrap();
    let sched = make_schedule::<f64>(10).unwrap();
    let cfg = TrainConfig {
        architecture: small_arch(),
        steps: 150,
        batch: 8,
        cond_noise: 0.1,
        ..TrainConfig::default()
    };
    let (model, _) =
        train_denoiser(&base_training_set(&pool, &text).unwrap(), &sched, &cfg, 3).unwrap();
    (model, text)
}

pub fn small_artifacts(n: usize) -> SweepArtifacts {
    let (model, text) = small_model();
    let sched = make_schedule::<f64>(10).unwrap();
    let pool: Vec<_> = make_public_pool(64, 2)
        .into_iter()
        .map(|(x, _)| x)
        .collect();
    let encoder = fit_encoder(&pool, 8).unwrap();
    let dataset = make_style_dataset(StyleFamily::Glyphs, n, 7).unwrap();
    let (set, _) = build_ti_embedding_set(
        &model,
        &text,
        &dataset.images,
        &dataset.labels,
        0,
        &sched,
        &small_ti(),
        11,
    )
    .unwrap();
    SweepArtifacts::new(
        model,
        text,
        sched,
        encoder,
        dataset,
        set,
        AdaptationPath::TextualInversion,
    )
    .unwrap()
}
