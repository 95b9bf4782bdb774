//! Diffusion step tables.
//!
//! Steps are 1-based, `t ∈ 1..=T`. Index 0 exists only for the cumulative
//! product, where `alpha_bar(0) = 1`.

use crate::error::{ensure, Error, Result};

/// Read access to the per-step quantities the forward and reverse chains
/// need. [`NoiseSchedule`] is the canonical implementation; the trait lets
/// callers observe or restrict which steps a sampler touches.
pub trait Schedule {
    /// Number of diffusion steps `T`.
    fn steps(&self) -> usize;
    fn beta(&self, t: usize) -> Result<f64>;
    /// Cumulative product of `1 - beta` over steps `1..=t`; 1 at `t = 0`.
    fn alpha_bar(&self, t: usize) -> Result<f64>;
    /// `1 - alpha_bar(t)`, computed without cancellation.
    fn one_minus_alpha_bar(&self, t: usize) -> Result<f64>;
    /// Standard deviation of the reverse-step noise at step `t`.
    fn posterior_sigma(&self, t: usize) -> Result<f64>;

    fn alpha(&self, t: usize) -> Result<f64> {
        Ok(1.0 - self.beta(t)?)
    }
}

/// Parameters of a linear β ramp.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleConfig {
    pub steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig {
            steps: 1000,
            beta_start: 1e-4,
            beta_end: 0.02,
        }
    }
}

impl ScheduleConfig {
    pub fn build(&self) -> Result<NoiseSchedule> {
        NoiseSchedule::linear(self.steps, self.beta_start, self.beta_end)
    }
}

/// Precomputed double-precision tables.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    // All tables have length T + 1; entry 0 of `betas` and `sigmas` is unused.
    betas: Vec<f64>,
    alpha_bars: Vec<f64>,
    one_minus_alpha_bars: Vec<f64>,
    sigmas: Vec<f64>,
}

impl NoiseSchedule {
    /// `beta_t = beta_start + (t - 1) / (T - 1) * (beta_end - beta_start)`.
    pub fn linear(steps: usize, beta_start: f64, beta_end: f64) -> Result<Self> {
        ensure!(steps >= 2, Argument, "schedule needs at least 2 steps, got {steps}");
        ensure!(
            beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0,
            Argument,
            "need 0 < beta_start <= beta_end < 1, got {beta_start}, {beta_end}"
        );
        let span = beta_end - beta_start;
        let betas = (1..=steps)
            .map(|t| beta_start + (t - 1) as f64 / (steps - 1) as f64 * span)
            .collect();
        Self::from_betas(betas)
    }

    /// Builds the tables from an explicit `beta_1..beta_T` sequence, which
    /// must lie in (0, 1) and be non-decreasing.
    pub fn from_betas(betas: Vec<f64>) -> Result<Self> {
        ensure!(betas.len() >= 2, Argument, "schedule needs at least 2 steps");
        ensure!(
            betas.iter().all(|&b| b > 0.0 && b < 1.0),
            Argument,
            "every beta must lie in (0, 1)"
        );
        ensure!(
            betas.windows(2).all(|w| w[0] <= w[1]),
            Argument,
            "betas must be non-decreasing"
        );
        let steps = betas.len();
        let mut full = Vec::with_capacity(steps + 1);
        full.push(0.0);
        full.extend(betas);

        let mut alpha_bars = vec![1.0; steps + 1];
        let mut one_minus = vec![0.0; steps + 1];
        let mut sigmas = vec![0.0; steps + 1];
        for t in 1..=steps {
            let beta = full[t];
            alpha_bars[t] = alpha_bars[t - 1] * (1.0 - beta);
            // 1 - ab_{t-1}(1 - b) = (1 - ab_{t-1}) + ab_{t-1} b
            one_minus[t] = one_minus[t - 1] + alpha_bars[t - 1] * beta;
            sigmas[t] = (one_minus[t - 1] / one_minus[t] * beta).sqrt();
        }
        Ok(NoiseSchedule {
            betas: full,
            alpha_bars,
            one_minus_alpha_bars: one_minus,
            sigmas,
        })
    }

    pub fn steps(&self) -> usize {
        self.betas.len() - 1
    }

    fn check_step(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.steps() {
            return Err(Error::Argument(format!(
                "step {t} outside 1..={}",
                self.steps()
            )));
        }
        Ok(())
    }

    fn check_index(&self, t: usize) -> Result<()> {
        ensure!(
            t <= self.steps(),
            Argument,
            "step {t} outside 0..={}",
            self.steps()
        );
        Ok(())
    }

    pub fn beta(&self, t: usize) -> Result<f64> {
        self.check_step(t)?;
        Ok(self.betas[t])
    }

    pub fn alpha(&self, t: usize) -> Result<f64> {
        Ok(1.0 - self.beta(t)?)
    }

    pub fn alpha_bar(&self, t: usize) -> Result<f64> {
        self.check_index(t)?;
        Ok(self.alpha_bars[t])
    }

    pub fn one_minus_alpha_bar(&self, t: usize) -> Result<f64> {
        self.check_index(t)?;
        Ok(self.one_minus_alpha_bars[t])
    }

    /// `sqrt((1 - alpha_bar(t-1)) / (1 - alpha_bar(t)) * beta(t))`; zero at `t = 1`.
    pub fn posterior_sigma(&self, t: usize) -> Result<f64> {
        self.check_step(t)?;
        Ok(self.sigmas[t])
    }

    /// `beta_1..beta_T`.
    pub fn betas(&self) -> &[f64] {
        &self.betas[1..]
    }
}

impl Default for NoiseSchedule {
    fn default() -> Self {
        ScheduleConfig::default()
            .build()
            .expect("default schedule is valid")
    }
}

impl Schedule for NoiseSchedule {
    fn steps(&self) -> usize {
        NoiseSchedule::steps(self)
    }

    fn beta(&self, t: usize) -> Result<f64> {
        NoiseSchedule::beta(self, t)
    }

    fn alpha_bar(&self, t: usize) -> Result<f64> {
        NoiseSchedule::alpha_bar(self, t)
    }

    fn one_minus_alpha_bar(&self, t: usize) -> Result<f64> {
        NoiseSchedule::one_minus_alpha_bar(self, t)
    }

    fn posterior_sigma(&self, t: usize) -> Result<f64> {
        NoiseSchedule::posterior_sigma(self, t)
    }
}
