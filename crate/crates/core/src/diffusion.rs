//! Forward noising and the truncated reverse chain.
//!
//! The reverse chain starts from an observed noisy cube placed directly at
//! step `t_cut` instead of from pure noise at step `T`, and walks down to
//! step 1. Intermediate states are never clamped; only the final estimate
//! is clamped to `[0, 1]`.

use rand::Rng;

use crate::error::{ensure, Error, Result};
use crate::hypercube::HsiCube;
use crate::par::Execution;
use crate::rng;
use crate::schedule::Schedule;

/// Anything that estimates the noise component of `x_t` at step `t`.
pub trait NoiseModel: Sync {
    /// Number of bands the model accepts.
    fn bands(&self) -> usize;

    fn predict_noise(&self, x_t: &HsiCube, t: usize) -> Result<HsiCube>;
}

impl<M: NoiseModel + ?Sized> NoiseModel for &M {
    fn bands(&self) -> usize {
        (**self).bands()
    }

    fn predict_noise(&self, x_t: &HsiCube, t: usize) -> Result<HsiCube> {
        (**self).predict_noise(x_t, t)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardSample {
    pub x_t: HsiCube,
    pub epsilon: HsiCube,
    pub t: usize,
}

fn check_step<S: Schedule + ?Sized>(s: &S, t: usize) -> Result<()> {
    ensure!(
        t >= 1 && t <= s.steps(),
        Argument,
        "step {t} outside 1..={}",
        s.steps()
    );
    Ok(())
}

fn zip_map(a: &HsiCube, b: &HsiCube, f: impl Fn(f64, f64) -> f64) -> HsiCube {
    let data = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| f(f64::from(x), f64::from(y)) as f32)
        .collect();
    let (h, w, bands) = a.shape();
    HsiCube::from_parts(h, w, bands, data)
}

/// `sqrt(alpha_bar_t) x0 + sqrt(1 - alpha_bar_t) eps` for a given noise field.
pub fn noisy_at<S: Schedule + ?Sized>(
    x0: &HsiCube,
    epsilon: &HsiCube,
    t: usize,
    s: &S,
) -> Result<HsiCube> {
    check_step(s, t)?;
    x0.require_same_shape(epsilon, "noisy_at")?;
    let signal = s.alpha_bar(t)?.sqrt();
    let noise = s.one_minus_alpha_bar(t)?.sqrt();
    Ok(zip_map(x0, epsilon, |x, e| signal * x + noise * e))
}

/// Draws `x_t ~ q(x_t | x_0)` in one shot, returning the injected noise too.
pub fn forward_sample<S, R>(x0: &HsiCube, t: usize, s: &S, rng: &mut R) -> Result<ForwardSample>
where
    S: Schedule + ?Sized,
    R: Rng + ?Sized,
{
    check_step(s, t)?;
    let (h, w, b) = x0.shape();
    let epsilon = HsiCube::standard_normal(h, w, b, rng)?;
    let x_t = noisy_at(x0, &epsilon, t, s)?;
    Ok(ForwardSample { x_t, epsilon, t })
}

/// One forward transition `x_t ~ N(sqrt(1 - beta_t) x_{t-1}, beta_t I)`.
pub fn forward_step<S, R>(x_prev: &HsiCube, t: usize, s: &S, rng: &mut R) -> Result<HsiCube>
where
    S: Schedule + ?Sized,
    R: Rng + ?Sized,
{
    check_step(s, t)?;
    let beta = s.beta(t)?;
    let (keep, noise) = ((1.0 - beta).sqrt(), beta.sqrt());
    let (h, w, b) = x_prev.shape();
    let eps = HsiCube::standard_normal(h, w, b, rng)?;
    Ok(zip_map(x_prev, &eps, |x, e| keep * x + noise * e))
}

/// Inverts the one-shot forward kernel given a noise estimate.
pub fn predict_x0<S: Schedule + ?Sized>(
    x_t: &HsiCube,
    eps: &HsiCube,
    t: usize,
    s: &S,
) -> Result<HsiCube> {
    check_step(s, t)?;
    x_t.require_same_shape(eps, "predict_x0")?;
    let signal = s.alpha_bar(t)?.sqrt();
    let noise = s.one_minus_alpha_bar(t)?.sqrt();
    Ok(zip_map(x_t, eps, |x, e| (x - noise * e) / signal))
}

/// Mean of `q(x_{t-1} | x_t, x_0)` written as a blend of `x_t` and `x_0`.
pub fn posterior_mean<S: Schedule + ?Sized>(
    x_t: &HsiCube,
    x0: &HsiCube,
    t: usize,
    s: &S,
) -> Result<HsiCube> {
    check_step(s, t)?;
    x_t.require_same_shape(x0, "posterior_mean")?;
    let denom = s.one_minus_alpha_bar(t)?;
    let c_t = s.alpha(t)?.sqrt() * s.one_minus_alpha_bar(t - 1)? / denom;
    let c_0 = s.alpha_bar(t - 1)?.sqrt() * s.beta(t)? / denom;
    Ok(zip_map(x_t, x0, |x, x0| c_t * x + c_0 * x0))
}

/// One reverse update:
/// `x_{t-1} = (x_t - (1 - alpha_t) / sqrt(1 - alpha_bar_t) * eps_hat) / sqrt(alpha_t) + sigma_t z`.
///
/// `z = None` means the zero field. At `t = 1` a non-zero `z` is rejected.
pub fn reverse_step<S: Schedule + ?Sized>(
    x_t: &HsiCube,
    eps_hat: &HsiCube,
    t: usize,
    s: &S,
    z: Option<&HsiCube>,
) -> Result<HsiCube> {
    check_step(s, t)?;
    x_t.require_same_shape(eps_hat, "reverse_step")?;
    if let Some(z) = z {
        x_t.require_same_shape(z, "reverse_step noise")?;
        if t == 1 && z.data().iter().any(|&v| v != 0.0) {
            return Err(Error::Contract(
                "the final reverse step (t = 1) takes no noise".into(),
            ));
        }
    }
    let alpha = s.alpha(t)?;
    let inv_sqrt_alpha = 1.0 / alpha.sqrt();
    let eps_coef = (1.0 - alpha) / s.one_minus_alpha_bar(t)?.sqrt();
    let mean = zip_map(x_t, eps_hat, |x, e| inv_sqrt_alpha * (x - eps_coef * e));
    match z {
        Some(z) if t > 1 => {
            let sigma = s.posterior_sigma(t)?;
            Ok(zip_map(&mean, z, |m, z| m + sigma * z))
        }
        _ => Ok(mean),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SamplerConfig {
    /// Step at which the observed cube enters the chain.
    pub t_cut: usize,
    /// Add `sigma_t z_t` at every step above 1.
    pub stochastic: bool,
    pub seed: u64,
    /// Diagnostic: scale the observed cube by `sqrt(alpha_bar(t_cut))`
    /// before it enters the chain. Off by default.
    pub scale_input: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            t_cut: 35,
            stochastic: true,
            seed: 0,
            scale_input: false,
        }
    }
}

/// Runs the reverse chain from `t_cut` down to 1 starting at `x_noisy`.
///
/// The model is called exactly `t_cut` times with steps `t_cut, …, 1`, and
/// the schedule is never queried above `t_cut`. Output is clamped to
/// `[0, 1]` and is a pure function of the inputs and `cfg.seed`.
pub fn truncated_sample<M, S>(
    x_noisy: &HsiCube,
    model: &M,
    s: &S,
    cfg: &SamplerConfig,
) -> Result<HsiCube>
where
    M: NoiseModel + ?Sized,
    S: Schedule + ?Sized,
{
    ensure!(
        cfg.t_cut >= 1 && cfg.t_cut <= s.steps(),
        Argument,
        "t_cut {} outside 1..={}",
        cfg.t_cut,
        s.steps()
    );
    ensure!(
        model.bands() == x_noisy.bands(),
        Argument,
        "model expects {} bands, cube has {}",
        model.bands(),
        x_noisy.bands()
    );
    let mut rng = rng::seeded(cfg.seed);
    let (h, w, b) = x_noisy.shape();
    let mut x = if cfg.scale_input {
        let k = s.alpha_bar(cfg.t_cut)?.sqrt();
        x_noisy.map(|v| (k * f64::from(v)) as f32)
    } else {
        x_noisy.clone()
    };
    for t in (1..=cfg.t_cut).rev() {
        let eps_hat = model.predict_noise(&x, t)?;
        let z = if t > 1 && cfg.stochastic {
            Some(HsiCube::standard_normal(h, w, b, &mut rng)?)
        } else {
            None
        };
        x = reverse_step(&x, &eps_hat, t, s, z.as_ref())?;
        x.check_finite()?;
    }
    Ok(x.clamp_unit())
}

/// Samples many cubes independently. Cube `i` uses the seed
/// `derive_indexed(cfg.seed, "sample", i)`, so results do not depend on
/// the execution mode.
pub fn truncated_sample_many<M, S>(
    cubes: &[HsiCube],
    model: &M,
    s: &S,
    cfg: &SamplerConfig,
    exec: Execution,
) -> Result<Vec<HsiCube>>
where
    M: NoiseModel + ?Sized,
    S: Schedule + Sync + ?Sized,
{
    exec.map(cubes.len(), |i| {
        let cfg = SamplerConfig {
            seed: rng::derive_indexed(cfg.seed, "sample", i as u64),
            ..*cfg
        };
        truncated_sample(&cubes[i], model, s, &cfg)
    })
    .into_iter()
    .collect()
}
