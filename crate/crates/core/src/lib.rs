//! Truncated-diffusion denoising for hyperspectral image cubes.
//!
//! A noise predictor is trained on the ordinary forward diffusion of clean
//! cubes. At inference the reverse chain is started from the observed noisy
//! cube at a small step `t_cut` rather than from pure noise at step `T`, so
//! only realistic noise levels are removed.
//!
//! Module map:
//!
//! - [`hypercube`]: cube type, HSC files, normalization, patches, manifests
//! - [`schedule`]: β / ᾱ / σ tables
//! - [`diffusion`]: forward kernel, reverse step, truncated sampler
//! - [`predictor`]: the U-Net noise predictor and its weight files
//! - [`trainer`]: training loop, Adam, checkpoints
//! - [`noise_sim`]: Gaussian, impulse and stripe degradations
//! - [`metrics`]: CC, mPSNR, mSSIM, SAM
//! - [`synthetic`]: smooth low-rank test cubes
//! - [`denoise`]: band grouping for wide cubes, the `t_cut` sweep
//! - [`config`]: layered `key=value` run configuration

pub mod config;
pub mod denoise;
pub mod diffusion;
pub mod error;
pub mod hypercube;
pub mod metrics;
pub mod noise_sim;
pub mod par;
pub mod predictor;
pub mod rng;
pub mod schedule;
pub mod synthetic;
pub mod trainer;

pub use error::{Error, Result};
pub use hypercube::HsiCube;
