//! Training loop: random step, random noise, L2 loss on the predicted noise,
//! Adam update.
//!
//! Randomness for iteration `i` comes from its own stream
//! `derive_indexed(seed, "step", i)`, which picks the batch, the steps and
//! the noise fields. A run therefore depends only on the seed and the data,
//! and resuming from a checkpoint replays exactly what an uninterrupted run
//! would have done.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rand::Rng;

use crate::diffusion::noisy_at;
use crate::error::{ensure, Error, Result};
use crate::hypercube::{extract_patches, DatasetManifest, HsiCube, PatchSpec};
use crate::par::Execution;
use crate::predictor::{
    config_entries, config_from_entries, read_framed, write_framed, Gradients, NoisePredictor,
    Parameter, PredictorConfig,
};
use crate::rng::{self, SeededRng};
use crate::schedule::Schedule;

pub const OPTIMIZER_MAGIC: [u8; 4] = *b"TDFO";
pub const CHECKPOINT_WEIGHTS: &str = "checkpoint.tdfw";
pub const CHECKPOINT_OPTIMIZER: &str = "checkpoint.tdfo";
pub const LOSS_LOG: &str = "loss.csv";

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub seed: u64,
    /// Iterations between checkpoints; 0 writes only the final one.
    pub checkpoint_every: usize,
    /// Iterations between progress callbacks; 0 disables them.
    pub log_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 10_000,
            batch_size: 8,
            learning_rate: 1e-4,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            seed: 0,
            checkpoint_every: 1000,
            log_every: 100,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.steps >= 1, Argument, "steps must be at least 1");
        ensure!(self.batch_size >= 1, Argument, "batch_size must be at least 1");
        ensure!(
            self.learning_rate >= 0.0 && self.learning_rate.is_finite(),
            Argument,
            "learning_rate must be finite and non-negative"
        );
        ensure!(
            (0.0..1.0).contains(&self.adam_beta1) && (0.0..1.0).contains(&self.adam_beta2),
            Argument,
            "Adam betas must lie in [0, 1)"
        );
        ensure!(self.adam_epsilon > 0.0, Argument, "adam_epsilon must be positive");
        Ok(())
    }
}

/// Moment estimates after an update, and the updated parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamScalar {
    pub param: f64,
    pub m: f64,
    pub v: f64,
}

/// One bias-corrected Adam update of a single scalar. `iteration` is the
/// 1-based index of this update.
pub fn adam_scalar(
    param: f64,
    grad: f64,
    m: f64,
    v: f64,
    iteration: u64,
    cfg: &TrainConfig,
) -> AdamScalar {
    let (b1, b2) = (cfg.adam_beta1, cfg.adam_beta2);
    let m = b1 * m + (1.0 - b1) * grad;
    let v = b2 * v + (1.0 - b2) * grad * grad;
    let k = iteration as i32;
    let m_hat = m / (1.0 - b1.powi(k));
    let v_hat = v / (1.0 - b2.powi(k));
    AdamScalar {
        param: param - cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.adam_epsilon),
        m,
        v,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    predictor: NoisePredictor,
    m: Vec<Vec<f32>>,
    v: Vec<Vec<f32>>,
    iteration: u64,
    losses: Vec<f64>,
}

impl TrainState {
    pub fn new(predictor: NoisePredictor) -> Self {
        let zeros: Vec<Vec<f32>> = predictor
            .parameters()
            .iter()
            .map(|p| vec![0.0; p.values.len()])
            .collect();
        Self {
            predictor,
            m: zeros.clone(),
            v: zeros,
            iteration: 0,
            losses: Vec::new(),
        }
    }

    pub fn predictor(&self) -> &NoisePredictor {
        &self.predictor
    }

    pub fn into_predictor(self) -> NoisePredictor {
        self.predictor
    }

    /// Number of completed updates.
    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    /// Loss of every update run in this process, in order.
    pub fn losses(&self) -> &[f64] {
        &self.losses
    }

    pub fn first_moments(&self) -> &[Vec<f32>] {
        &self.m
    }

    pub fn second_moments(&self) -> &[Vec<f32>] {
        &self.v
    }

    fn apply(&mut self, grads: &Gradients, cfg: &TrainConfig) {
        let k = self.iteration + 1;
        let params = self.predictor.parameters_mut();
        for (((p, g), m), v) in params
            .zip(grads.tensors())
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            for i in 0..p.len() {
                let s = adam_scalar(
                    f64::from(p[i]),
                    f64::from(g[i]),
                    f64::from(m[i]),
                    f64::from(v[i]),
                    k,
                    cfg,
                );
                p[i] = s.param as f32;
                m[i] = s.m as f32;
                v[i] = s.v as f32;
            }
        }
        self.iteration = k;
    }

    fn moment_records(&self) -> Vec<Parameter> {
        let mut out = Vec::with_capacity(2 * self.m.len());
        for (i, p) in self.predictor.parameters().iter().enumerate() {
            for (suffix, data) in [("m", &self.m[i]), ("v", &self.v[i])] {
                out.push(Parameter {
                    name: format!("{}.{suffix}", p.name),
                    dims: p.dims.clone(),
                    values: data.clone(),
                });
            }
        }
        out
    }

    /// Optimizer sidecar: weight-file framing with magic `TDFO`, one `.m`
    /// and one `.v` record per parameter, and an `iteration` config key.
    pub fn write_optimizer<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        let mut cfg = config_entries(self.predictor.config());
        cfg.insert("iteration".into(), self.iteration.to_string());
        write_framed(w, OPTIMIZER_MAGIC, &cfg, &self.moment_records())
    }

    /// Rebuilds a state from a predictor and its optimizer sidecar.
    pub fn read_optimizer<R: Read>(predictor: NoisePredictor, r: &mut R) -> Result<Self> {
        let (mut cfg, records) = read_framed(r, OPTIMIZER_MAGIC)?;
        let iteration: u64 = cfg
            .remove("iteration")
            .ok_or_else(|| Error::Format("optimizer file lacks iteration".into()))?
            .parse()
            .map_err(|_| Error::Format("bad iteration value".into()))?;
        if config_from_entries(&cfg)? != *predictor.config() {
            return Err(Error::Format(
                "optimizer state belongs to a different network".into(),
            ));
        }
        let mut state = Self::new(predictor);
        let expected = state.moment_records();
        if records.len() != expected.len() {
            return Err(Error::Format(format!(
                "expected {} moment records, found {}",
                expected.len(),
                records.len()
            )));
        }
        for (i, (got, want)) in records.into_iter().zip(expected).enumerate() {
            if got.name != want.name || got.dims != want.dims {
                return Err(Error::Format(format!(
                    "record {:?} does not match {:?}",
                    got.name, want.name
                )));
            }
            if got.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::Value(format!("non-finite moment in {}", got.name)));
            }
            if i % 2 == 0 {
                state.m[i / 2] = got.values;
            } else {
                state.v[i / 2] = got.values;
            }
        }
        state.iteration = iteration;
        Ok(state)
    }

    /// Writes `checkpoint.tdfw`, `checkpoint.tdfo` and `loss.csv` into `dir`.
    pub fn save_checkpoint(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        crate::predictor::save_weights(&self.predictor, dir.join(CHECKPOINT_WEIGHTS))?;
        let path = dir.join(CHECKPOINT_OPTIMIZER);
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = BufWriter::new(file);
        self.write_optimizer(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(&path, e))?;
        let start = self.iteration - self.losses.len() as u64;
        write_loss_csv(&self.losses, start, dir.join(LOSS_LOG))
    }

    /// Loads a state written by [`TrainState::save_checkpoint`]. The loss
    /// history is not restored.
    pub fn load_checkpoint(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let predictor = crate::predictor::load_weights(dir.join(CHECKPOINT_WEIGHTS))?;
        let path = dir.join(CHECKPOINT_OPTIMIZER);
        let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
        Self::read_optimizer(predictor, &mut BufReader::new(file))
    }
}

/// Writes `iteration,loss` rows; the first loss belongs to iteration `start + 1`.
pub fn write_loss_csv(losses: &[f64], start: u64, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = String::from("iteration,loss\n");
    for (i, l) in losses.iter().enumerate() {
        text.push_str(&format!("{},{:.8}\n", start + i as u64 + 1, l));
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Mean of `losses[end - window .. end]`, clipped at the start.
pub fn smoothed_loss(losses: &[f64], end: usize, window: usize) -> Option<f64> {
    let end = end.min(losses.len());
    if end == 0 || window == 0 {
        return None;
    }
    let slice = &losses[end.saturating_sub(window)..end];
    Some(slice.iter().sum::<f64>() / slice.len() as f64)
}

/// Uniform draw from `1..=steps`.
pub fn sample_timestep<R: Rng + ?Sized>(rng: &mut R, steps: usize) -> usize {
    rng.random_range(1..=steps)
}

/// One element of a training batch after noising.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisySample {
    pub x_t: HsiCube,
    pub t: usize,
    pub epsilon: HsiCube,
}

/// Draws `t` then `ε` for each clean patch in order.
pub fn noise_batch<S: Schedule + ?Sized>(
    batch: &[HsiCube],
    s: &S,
    rng: &mut SeededRng,
) -> Result<Vec<NoisySample>> {
    batch
        .iter()
        .map(|x0| {
            let t = sample_timestep(rng, s.steps());
            let epsilon = HsiCube::standard_normal(x0.height(), x0.width(), x0.bands(), rng)?;
            let x_t = noisy_at(x0, &epsilon, t, s)?;
            Ok(NoisySample { x_t, t, epsilon })
        })
        .collect()
}

/// Mean-reduced batch loss and its gradient. Per-sample gradients may be
/// computed concurrently; they are summed in sample order.
pub fn batch_loss_and_gradient(
    predictor: &NoisePredictor,
    samples: &[NoisySample],
    exec: Execution,
) -> Result<(f64, Gradients)> {
    ensure!(!samples.is_empty(), Argument, "empty batch");
    let weight = 1.0 / samples.len() as f64;
    let parts = exec.map(samples.len(), |i| {
        let s = &samples[i];
        let mut g = predictor.zero_gradients();
        predictor
            .accumulate_mse_gradient(&s.x_t, s.t, &s.epsilon, weight, &mut g)
            .map(|mse| (mse, g))
    });
    let mut total = predictor.zero_gradients();
    let mut loss = 0.0;
    for part in parts {
        let (mse, g) = part?;
        loss += mse * weight;
        total.add_assign(&g);
    }
    Ok((loss, total))
}

/// One update on `batch` (clean patches). Returns the batch loss.
pub fn train_step<S: Schedule + ?Sized>(
    state: &mut TrainState,
    batch: &[HsiCube],
    s: &S,
    rng: &mut SeededRng,
    cfg: &TrainConfig,
    exec: Execution,
) -> Result<f64> {
    ensure!(!batch.is_empty(), Argument, "empty batch");
    for x in batch {
        state.predictor.check_input(x)?;
    }
    let samples = noise_batch(batch, s, rng)?;
    let (loss, grads) = batch_loss_and_gradient(&state.predictor, &samples, exec)?;
    if !loss.is_finite() {
        let steps: Vec<usize> = samples.iter().map(|x| x.t).collect();
        return Err(Error::Divergence(format!(
            "loss is {loss} at iteration {} (steps {steps:?})",
            state.iteration + 1
        )));
    }
    if let Some(name) = grads
        .tensors()
        .iter()
        .zip(state.predictor.parameters())
        .find(|(g, _)| g.iter().any(|v| !v.is_finite()))
        .map(|(_, p)| p.name.clone())
    {
        return Err(Error::Divergence(format!(
            "non-finite gradient for {name} at iteration {}",
            state.iteration + 1
        )));
    }
    state.apply(&grads, cfg);
    state.losses.push(loss);
    Ok(loss)
}

/// Patches from every cube; cube `i` uses `derive_indexed(seed, "patches", i)`.
pub fn patch_pool(cubes: &[HsiCube], spec: &PatchSpec, seed: u64) -> Result<Vec<HsiCube>> {
    let mut pool = Vec::new();
    for (i, c) in cubes.iter().enumerate() {
        pool.extend(extract_patches(c, *spec, rng::derive_indexed(seed, "patches", i as u64))?);
    }
    Ok(pool)
}

#[derive(Default)]
pub struct TrainOptions<'a> {
    /// Where checkpoints go; `None` disables them.
    pub checkpoint_dir: Option<PathBuf>,
    pub exec: Execution,
    /// Called every `log_every` iterations with (iteration, loss, loss
    /// averaged over the last 100 iterations).
    pub progress: Option<&'a mut dyn FnMut(u64, f64, f64)>,
}

/// Fresh training run on a pool of clean patches.
pub fn train(
    pool: &[HsiCube],
    pcfg: PredictorConfig,
    tcfg: &TrainConfig,
    opts: TrainOptions<'_>,
) -> Result<TrainState> {
    tcfg.validate()?;
    let state = TrainState::new(NoisePredictor::new(pcfg)?);
    resume(state, pool, tcfg, opts)
}

/// Continues `state` until it has completed `tcfg.steps` iterations.
pub fn resume(
    mut state: TrainState,
    pool: &[HsiCube],
    tcfg: &TrainConfig,
    mut opts: TrainOptions<'_>,
) -> Result<TrainState> {
    tcfg.validate()?;
    ensure!(!pool.is_empty(), Argument, "empty training set");
    for x in pool {
        state.predictor.check_input(x)?;
    }
    let schedule = state.predictor.config().schedule.build()?;
    while (state.iteration as usize) < tcfg.steps {
        let mut rng = rng::seeded(rng::derive_indexed(tcfg.seed, "step", state.iteration));
        let batch: Vec<HsiCube> = (0..tcfg.batch_size)
            .map(|_| pool[rng.random_range(0..pool.len())].clone())
            .collect();
        let loss = train_step(&mut state, &batch, &schedule, &mut rng, tcfg, opts.exec)?;
        let k = state.iteration as usize;
        if tcfg.log_every > 0 && k % tcfg.log_every == 0 {
            if let Some(cb) = opts.progress.as_mut() {
                let smooth = smoothed_loss(&state.losses, state.losses.len(), 100).unwrap_or(loss);
                cb(state.iteration, loss, smooth);
            }
        }
        if let Some(dir) = &opts.checkpoint_dir {
            if tcfg.checkpoint_every > 0 && k % tcfg.checkpoint_every == 0 {
                state.save_checkpoint(dir)?;
            }
        }
    }
    if let Some(dir) = &opts.checkpoint_dir {
        state.save_checkpoint(dir)?;
    }
    Ok(state)
}

/// Loads the training cubes of a manifest, cuts patches and trains.
pub fn train_manifest(
    manifest: &DatasetManifest,
    spec: &PatchSpec,
    pcfg: PredictorConfig,
    tcfg: &TrainConfig,
    opts: TrainOptions<'_>,
) -> Result<TrainState> {
    let (cubes, _) = manifest.load_training()?;
    let pool = patch_pool(&cubes, spec, rng::derive_seed(tcfg.seed, "patches"))?;
    train(&pool, pcfg, tcfg, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::{NoiseSchedule, ScheduleConfig};
    use crate::synthetic::{low_rank_set, SyntheticConfig};

    fn small(bands: usize) -> PredictorConfig {
        PredictorConfig {
            bands,
            base_width: 8,
            depth: 2,
            time_embed_dim: 16,
            seed: 3,
            schedule: ScheduleConfig::default(),
        }
    }

    #[test]
    fn adam_matches_hand_trajectory() {
        // minimise p² from p = 1 with lr 0.1; reference values worked out
        // with 50-digit arithmetic
        let cfg = TrainConfig { learning_rate: 0.1, ..Default::default() };
        let expected = [
            (0.9000000004999999975, 0.2, 0.004),
            (0.8004122286917921452, 0.3600000001, 0.0072360000036),
            (0.7015862729460295452, 0.4840824458283584286, 0.009791402946953847059),
        ];
        let (mut p, mut m, mut v) = (1.0, 0.0, 0.0);
        for (k, &(ep, em, ev)) in expected.iter().enumerate() {
            let s = adam_scalar(p, 2.0 * p, m, v, k as u64 + 1, &cfg);
            (p, m, v) = (s.param, s.m, s.v);
            assert!((p - ep).abs() < 1e-10, "step {} param {p} vs {ep}", k + 1);
            assert!((m - em).abs() < 1e-10);
            assert!((v - ev).abs() < 1e-10);
        }
    }

    #[test]
    fn timesteps_fill_deciles_evenly() {
        let mut rng = rng::seeded(11);
        let mut bins = [0usize; 10];
        let n = 100_000;
        for _ in 0..n {
            let t = sample_timestep(&mut rng, 1000);
            assert!((1..=1000).contains(&t));
            bins[(t - 1) / 100] += 1;
        }
        for b in bins {
            let share = b as f64 / n as f64;
            assert!((share - 0.1).abs() < 0.01, "decile share {share}");
        }
    }

    #[test]
    fn zero_learning_rate_leaves_parameters_alone() {
        let pool = low_rank_set(2, 16, 16, 4, &SyntheticConfig::default(), 1).unwrap();
        let mut state = TrainState::new(NoisePredictor::new(small(4)).unwrap());
        let before = state.predictor().clone();
        let cfg = TrainConfig { learning_rate: 0.0, ..Default::default() };
        let s = NoiseSchedule::default();
        let loss = train_step(&mut state, &pool, &s, &mut rng::seeded(0), &cfg, Execution::default())
            .unwrap();
        assert!(loss > 0.0 && loss.is_finite());
        assert_eq!(state.predictor(), &before);
        assert_eq!(state.iteration(), 1);
        assert_eq!(state.losses(), &[loss]);
    }

    #[test]
    fn fresh_model_loss_is_noise_energy() {
        let pool = low_rank_set(16, 32, 32, 8, &SyntheticConfig::default(), 2).unwrap();
        let mut state = TrainState::new(NoisePredictor::new(small(8)).unwrap());
        let s = NoiseSchedule::default();
        let loss = train_step(
            &mut state,
            &pool,
            &s,
            &mut rng::seeded(5),
            &TrainConfig::default(),
            Execution::default(),
        )
        .unwrap();
        assert!((loss - 1.0).abs() < 0.1, "loss {loss}");
    }

    fn noisy_samples(n: usize, seed: u64) -> (NoisePredictor, Vec<NoisySample>) {
        let mut p = NoisePredictor::new(small(4)).unwrap();
        // move the zero-initialized head so every parameter gets a gradient
        let mut r = rng::seeded(seed);
        for t in p.parameters_mut() {
            for v in t.iter_mut() {
                *v += 0.05 * (r.random::<f32>() - 0.5);
            }
        }
        let pool = low_rank_set(n, 16, 16, 4, &SyntheticConfig::default(), seed).unwrap();
        let samples = noise_batch(&pool, &NoiseSchedule::default(), &mut r).unwrap();
        (p, samples)
    }

    fn max_rel(a: &Gradients, b: &Gradients) -> f64 {
        let scale = a
            .tensors()
            .iter()
            .flatten()
            .fold(0.0f64, |m, &v| m.max(f64::from(v).abs()));
        a.tensors()
            .iter()
            .flatten()
            .zip(b.tensors().iter().flatten())
            .map(|(&x, &y)| (f64::from(x) - f64::from(y)).abs() / scale)
            .fold(0.0, f64::max)
    }

    #[test]
    fn loss_ignores_batch_order() {
        let (p, samples) = noisy_samples(5, 7);
        let (l1, g1) = batch_loss_and_gradient(&p, &samples, Execution::Sequential).unwrap();
        let mut rev = samples.clone();
        rev.reverse();
        rev.swap(0, 2);
        let (l2, g2) = batch_loss_and_gradient(&p, &rev, Execution::Sequential).unwrap();
        assert!((l1 - l2).abs() <= 1e-12 * l1);
        assert!(max_rel(&g1, &g2) < 1e-6);
    }

    #[test]
    fn parallel_gradient_matches_sequential() {
        let (p, samples) = noisy_samples(4, 8);
        let (l1, g1) = batch_loss_and_gradient(&p, &samples, Execution::Sequential).unwrap();
        let (l2, g2) = batch_loss_and_gradient(&p, &samples, Execution::Parallel).unwrap();
        assert_eq!(l1, l2);
        assert!(max_rel(&g1, &g2) < 1e-6);
    }

    #[test]
    fn nan_input_reports_divergence() {
        let mut p = NoisePredictor::new(small(4)).unwrap();
        for t in p.parameters_mut() {
            t.fill(f32::MAX);
        }
        let mut state = TrainState::new(p);
        let pool = low_rank_set(1, 16, 16, 4, &SyntheticConfig::default(), 1).unwrap();
        let err = train_step(
            &mut state,
            &pool,
            &NoiseSchedule::default(),
            &mut rng::seeded(0),
            &TrainConfig::default(),
            Execution::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Divergence(_)), "{err:?}");
        assert_eq!(state.iteration(), 0);
    }

    #[test]
    fn training_is_deterministic_and_resumable() {
        let pool = low_rank_set(3, 16, 16, 4, &SyntheticConfig::default(), 4).unwrap();
        let cfg = TrainConfig {
            steps: 6,
            batch_size: 2,
            learning_rate: 1e-3,
            seed: 9,
            ..Default::default()
        };
        let a = train(&pool, small(4), &cfg, TrainOptions::default()).unwrap();
        let b = train(&pool, small(4), &cfg, TrainOptions::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.iteration(), 6);

        let dir = tempfile::tempdir().unwrap();
        let half = TrainConfig { steps: 3, ..cfg.clone() };
        let opts = TrainOptions {
            checkpoint_dir: Some(dir.path().to_path_buf()),
            ..Default::default()
        };
        train(&pool, small(4), &half, opts).unwrap();
        let loaded = TrainState::load_checkpoint(dir.path()).unwrap();
        assert_eq!(loaded.iteration(), 3);
        let resumed = resume(loaded, &pool, &cfg, TrainOptions::default()).unwrap();
        assert_eq!(resumed.predictor(), a.predictor());
        assert_eq!(resumed.first_moments(), a.first_moments());

        let csv = std::fs::read_to_string(dir.path().join(LOSS_LOG)).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "iteration,loss");
        assert_eq!(lines.len(), 4);
        assert!(lines[3].starts_with("3,"));
    }

    #[test]
    fn invalid_runs_are_rejected() {
        let pool = low_rank_set(1, 16, 16, 4, &SyntheticConfig::default(), 4).unwrap();
        let zero = TrainConfig { steps: 0, ..Default::default() };
        assert!(matches!(
            train(&pool, small(4), &zero, TrainOptions::default()),
            Err(Error::Argument(_))
        ));
        assert!(matches!(
            train(&[], small(4), &TrainConfig::default(), TrainOptions::default()),
            Err(Error::Argument(_))
        ));
        let wrong_bands = low_rank_set(1, 16, 16, 3, &SyntheticConfig::default(), 4).unwrap();
        assert!(train(&wrong_bands, small(4), &TrainConfig::default(), TrainOptions::default())
            .is_err());
    }

    #[test]
    fn optimizer_sidecar_round_trips() {
        let pool = low_rank_set(1, 16, 16, 4, &SyntheticConfig::default(), 4).unwrap();
        let cfg = TrainConfig { steps: 2, batch_size: 1, ..Default::default() };
        let state = train(&pool, small(4), &cfg, TrainOptions::default()).unwrap();
        let mut bytes = Vec::new();
        state.write_optimizer(&mut bytes).unwrap();
        let back =
            TrainState::read_optimizer(state.predictor().clone(), &mut bytes.as_slice()).unwrap();
        assert_eq!(back.first_moments(), state.first_moments());
        assert_eq!(back.second_moments(), state.second_moments());
        assert_eq!(back.iteration(), 2);
        let other = NoisePredictor::new(small(3)).unwrap();
        assert!(matches!(
            TrainState::read_optimizer(other, &mut bytes.as_slice()),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn smoothing_window() {
        let l = [4.0, 2.0, 1.0, 1.0];
        assert_eq!(smoothed_loss(&l, 4, 2), Some(1.0));
        assert_eq!(smoothed_loss(&l, 2, 100), Some(3.0));
        assert_eq!(smoothed_loss(&l, 0, 3), None);
    }
}
