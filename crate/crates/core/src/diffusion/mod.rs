//! Desk-scale conditioned pixel-space diffusion model.

pub mod conditioning;
pub mod denoiser;
pub mod image;
pub mod sample;
pub mod schedule;
pub mod train;

pub use conditioning::{TextEncoder, TextEncoderConfig};
pub use denoiser::{
    time_features, Activation, Architecture, DenoiserGradients, DenoiserModel, TIME_FEATURES,
};
pub use image::{ConditioningVector, ImageTensor};
pub use sample::{
    ddim_sample, ddim_step, ddim_trajectory_end, forward_noise, predict_x0, NoisePredictor,
};
pub use schedule::{make_schedule, DiffusionSchedule};
pub use train::{train_denoiser, Adam, AdamConfig, LrSchedule, TrainConfig, TrainReport};
