//! Noise predictor: a small U-Net conditioned on the diffusion step.
//!
//! Architecture for `depth = D`, channel widths `w_l = base_width · 2^l`:
//!
//! | stage            | layers                                              |
//! |------------------|-----------------------------------------------------|
//! | time MLP         | sinusoid(t, E) → Linear(E, E) → SiLU → Linear(E, E) |
//! | `down0`          | Block(bands → w_0) at full resolution               |
//! | `down{l}`, l≥1   | 2×2 average pool, Block(w_{l-1} → w_l)              |
//! | `up{l}`, l<D     | nearest 2× upsample, concat skip `down{l}`, Block(w_{l+1} + w_l → w_l) |
//! | `out`            | Conv3×3(w_0 → bands), zero-initialized              |
//!
//! A block is Conv3×3 → GroupNorm → SiLU → (+ time bias) → Conv3×3 →
//! GroupNorm → SiLU, where the time bias is a per-channel
//! `Linear(E, out)` of `SiLU(time MLP output)`. GroupNorm uses the largest
//! group count ≤ 8 dividing the channel count.
//!
//! Parameter count, with `E = time_embed_dim`:
//!
//! ```text
//! time   2 (E² + E)
//! block  9·in·out + out  +  9·out² + out  +  4·out  +  E·out + out
//! out    9·w_0·bands + bands
//! ```

mod ops;
mod unet;
mod weights;

pub use unet::Gradients;
pub(crate) use weights::{config_entries, config_from_entries, read_framed, write_framed};
pub use weights::{load_weights, read_weights, save_weights, write_weights, WEIGHTS_MAGIC, WEIGHTS_VERSION};

use rand::Rng;

use crate::diffusion::NoiseModel;
use crate::error::{ensure, Result};
use crate::hypercube::HsiCube;
use crate::rng;
use crate::schedule::ScheduleConfig;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictorConfig {
    pub bands: usize,
    pub base_width: usize,
    pub depth: usize,
    pub time_embed_dim: usize,
    pub seed: u64,
    /// The schedule the model is trained against; sampling must use it too.
    pub schedule: ScheduleConfig,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        PredictorConfig {
            bands: 8,
            base_width: 32,
            depth: 2,
            time_embed_dim: 64,
            seed: 0,
            schedule: ScheduleConfig::default(),
        }
    }
}

impl PredictorConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.bands >= 1, Argument, "bands must be at least 1");
        ensure!(self.depth >= 1, Argument, "depth must be at least 1");
        ensure!(self.depth <= 8, Argument, "depth {} is unreasonably deep", self.depth);
        ensure!(self.base_width >= 8, Argument, "base_width must be at least 8");
        ensure!(
            self.time_embed_dim >= 2 && self.time_embed_dim % 2 == 0,
            Argument,
            "time_embed_dim must be even and positive"
        );
        ensure!(self.schedule.steps >= 2, Argument, "schedule needs at least 2 steps");
        Ok(())
    }

    pub fn width(&self, level: usize) -> usize {
        self.base_width << level
    }

    /// Spatial sides must be multiples of this.
    pub fn spatial_multiple(&self) -> usize {
        1 << self.depth
    }

    /// Parameter count from the closed form in the module docs.
    pub fn parameter_count(&self) -> usize {
        let e = self.time_embed_dim;
        let block = |i: usize, o: usize| 9 * i * o + o + 9 * o * o + o + 4 * o + e * o + o;
        let mut n = 2 * (e * e + e);
        n += block(self.bands, self.width(0));
        for l in 1..=self.depth {
            n += block(self.width(l - 1), self.width(l));
        }
        for l in 0..self.depth {
            n += block(self.width(l + 1) + self.width(l), self.width(l));
        }
        n + 9 * self.width(0) * self.bands + self.bands
    }
}

/// `[sin(t ω_0), cos(t ω_0), sin(t ω_1), …]` with `ω_k = 10000^(-2k/dim)`.
/// Panics if `dim` is odd; see [`time_embedding`] for the checked form.
pub fn sinusoidal_embedding(t: f64, dim: usize) -> Vec<f32> {
    assert!(dim % 2 == 0, "embedding dimension must be even");
    let mut out = Vec::with_capacity(dim);
    for k in 0..dim / 2 {
        let omega = 10000f64.powf(-2.0 * k as f64 / dim as f64);
        out.push((t * omega).sin() as f32);
        out.push((t * omega).cos() as f32);
    }
    out
}

/// Sinusoidal embedding of step `t ∈ 1..=steps`.
pub fn time_embedding(t: usize, dim: usize, steps: usize) -> Result<Vec<f32>> {
    ensure!(dim % 2 == 0 && dim > 0, Argument, "embedding dimension {dim} must be even");
    ensure!(t >= 1 && t <= steps, Argument, "step {t} outside 1..={steps}");
    Ok(sinusoidal_embedding(t as f64, dim))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub dims: Vec<usize>,
    pub values: Vec<f32>,
}

#[derive(Debug, Clone)]
pub struct NoisePredictor {
    config: PredictorConfig,
    params: Vec<Parameter>,
    layout: unet::Layout,
}

impl PartialEq for NoisePredictor {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config && self.params == other.params
    }
}

enum Init {
    Zero,
    One,
    Uniform(f32),
}

impl NoisePredictor {
    /// Fresh weights. Kernels and linear maps are uniform in
    /// `±sqrt(3 / fan_in)`, biases and shifts are zero, norm gains one, and
    /// the output convolution is all zeros so the untrained model predicts
    /// the zero field.
    pub fn new(config: PredictorConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = rng::seeded(rng::derive_seed(config.seed, "init"));
        let mut params = Vec::new();
        let layout = unet::Layout::build(&config, &mut |name, dims, init| {
            let n: usize = dims.iter().product();
            let values = match init {
                Init::Zero => vec![0.0; n],
                Init::One => vec![1.0; n],
                Init::Uniform(bound) => (0..n).map(|_| rng.random_range(-bound..=bound)).collect(),
            };
            params.push(Parameter {
                name: name.to_string(),
                dims: dims.to_vec(),
                values,
            });
            params.len() - 1
        });
        Ok(NoisePredictor {
            config,
            params,
            layout,
        })
    }

    /// Rebuilds a predictor from stored parameters, checking names and shapes.
    pub fn from_parameters(config: PredictorConfig, params: Vec<Parameter>) -> Result<Self> {
        let template = NoisePredictor::new(PredictorConfig { seed: 0, ..config })?;
        ensure!(
            params.len() == template.params.len(),
            Format,
            "expected {} parameter tensors, found {}",
            template.params.len(),
            params.len()
        );
        for (p, t) in params.iter().zip(&template.params) {
            ensure!(
                p.name == t.name && p.dims == t.dims,
                Format,
                "parameter {:?} {:?} does not match expected {:?} {:?}",
                p.name,
                p.dims,
                t.name,
                t.dims
            );
            ensure!(
                p.values.len() == p.dims.iter().product::<usize>(),
                Format,
                "parameter {:?} payload length mismatch",
                p.name
            );
            ensure!(
                p.values.iter().all(|v| v.is_finite()),
                Value,
                "parameter {:?} holds non-finite values",
                p.name
            );
        }
        Ok(NoisePredictor {
            config,
            params,
            layout: template.layout,
        })
    }

    pub fn config(&self) -> &PredictorConfig {
        &self.config
    }

    pub fn parameters(&self) -> &[Parameter] {
        &self.params
    }

    /// Mutable access to the raw parameter tensors. Shapes must not change.
    pub fn parameters_mut(&mut self) -> impl Iterator<Item = &mut [f32]> {
        self.params.iter_mut().map(|p| p.values.as_mut_slice())
    }

    pub fn parameter_count(&self) -> usize {
        self.params.iter().map(|p| p.values.len()).sum()
    }

    pub fn zero_gradients(&self) -> Gradients {
        Gradients::zeros_like(&self.params)
    }

    /// Checks that a cube can be fed to the network.
    pub fn check_input(&self, x: &HsiCube) -> Result<()> {
        ensure!(
            x.bands() == self.config.bands,
            Argument,
            "model expects {} bands, input has {}",
            self.config.bands,
            x.bands()
        );
        let m = self.config.spatial_multiple();
        ensure!(
            x.height() % m == 0 && x.width() % m == 0,
            Argument,
            "spatial size {}x{} is not a multiple of {m}",
            x.height(),
            x.width()
        );
        Ok(())
    }

    /// Estimated noise for `x_t` at step `t`; same shape as the input.
    pub fn predict(&self, x_t: &HsiCube, t: usize) -> Result<HsiCube> {
        self.check_input(x_t)?;
        let (out, _) = unet::forward(self, x_t, t, false)?;
        let cube = HsiCube::new(x_t.height(), x_t.width(), x_t.bands(), out)?;
        Ok(cube)
    }

    /// Loss `mean((predict(x_t, t) - target)²)` over the elements of one
    /// sample, scaled by `weight`, with its gradient accumulated into
    /// `grads`. Returns the unscaled mean squared error.
    pub fn accumulate_mse_gradient(
        &self,
        x_t: &HsiCube,
        t: usize,
        target: &HsiCube,
        weight: f64,
        grads: &mut Gradients,
    ) -> Result<f64> {
        self.check_input(x_t)?;
        x_t.require_same_shape(target, "loss target")?;
        let (out, trace) = unet::forward(self, x_t, t, true)?;
        let n = out.len() as f64;
        let mut sse = 0.0f64;
        let scale = 2.0 * weight / n;
        let dout: Vec<f32> = out
            .iter()
            .zip(target.data())
            .map(|(&p, &e)| {
                let d = f64::from(p) - f64::from(e);
                sse += d * d;
                (scale * d) as f32
            })
            .collect();
        unet::backward(self, trace.expect("trace requested"), dout, grads);
        Ok(sse / n)
    }
}

impl NoiseModel for NoisePredictor {
    fn bands(&self) -> usize {
        self.config.bands
    }

    fn predict_noise(&self, x_t: &HsiCube, t: usize) -> Result<HsiCube> {
        self.predict(x_t, t)
    }
}

#[cfg(test)]
mod tests;
