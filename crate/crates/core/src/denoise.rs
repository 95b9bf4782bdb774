//! Whole-cube denoising with a fixed-band predictor, and the `t_cut` sweep.
//!
//! A cube with more bands than the model is split into contiguous groups of
//! `model bands` with a stride of half a group; the last group is aligned to
//! the final band. Each group runs its own chain and every band is the mean
//! of the groups that cover it. Spatial sizes that are not a multiple of the
//! network's downsampling factor are reflect-padded and cropped back.

use crate::diffusion::{truncated_sample, SamplerConfig};
use crate::error::{ensure, Result};
use crate::hypercube::HsiCube;
use crate::metrics::{evaluate_with, MetricReport};
use crate::par::Execution;
use crate::predictor::NoisePredictor;
use crate::rng;
use crate::schedule::Schedule;

/// First band of every group.
pub fn band_groups(total: usize, group: usize) -> Result<Vec<usize>> {
    ensure!(group >= 1, Argument, "group size must be positive");
    ensure!(
        total >= group,
        Argument,
        "cube has {total} bands but the model needs {group}"
    );
    let stride = (group / 2).max(1);
    let mut starts: Vec<usize> = (0..=total - group).step_by(stride).collect();
    if *starts.last().unwrap() != total - group {
        starts.push(total - group);
    }
    Ok(starts)
}

fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let m = i.rem_euclid(period);
    (if m < n { m } else { period - m }) as usize
}

/// Reflect-pads the bottom and right edges up to multiples of `m`.
pub fn pad_to_multiple(cube: &HsiCube, m: usize) -> Result<HsiCube> {
    let (h, w, b) = cube.shape();
    let ph = h.div_ceil(m) * m;
    let pw = w.div_ceil(m) * m;
    if (ph, pw) == (h, w) {
        return Ok(cube.clone());
    }
    HsiCube::from_fn(ph, pw, b, |band, r, c| {
        cube.get(band, reflect(r as isize, h), reflect(c as isize, w))
    })
}

/// Denoises `noisy` group by group. Group `g` samples with seed
/// `derive_indexed(cfg.seed, "group", g)`, except that a cube with exactly
/// the model's band count uses `cfg.seed` unchanged.
pub fn denoise_cube<S: Schedule + Sync + ?Sized>(
    noisy: &HsiCube,
    model: &NoisePredictor,
    s: &S,
    cfg: &SamplerConfig,
    exec: Execution,
) -> Result<HsiCube> {
    let (h, w, bands) = noisy.shape();
    let group = model.config().bands;
    let starts = band_groups(bands, group)?;
    let padded = pad_to_multiple(noisy, model.config().spatial_multiple())?;
    let single = starts.len() == 1;
    let outputs = exec.map(starts.len(), |g| {
        let sub = padded.band_range(starts[g], group)?;
        let seed = if single {
            cfg.seed
        } else {
            rng::derive_indexed(cfg.seed, "group", g as u64)
        };
        truncated_sample(&sub, model, s, &SamplerConfig { seed, ..*cfg })
    });
    let n = h * w;
    let mut sum = vec![0.0f64; bands * n];
    let mut count = vec![0u32; bands];
    for (g, out) in outputs.into_iter().enumerate() {
        let out = out?;
        let cropped = out.window(0, 0, h, w, 0, group)?;
        for k in 0..group {
            let b = starts[g] + k;
            count[b] += 1;
            for (acc, &v) in sum[b * n..(b + 1) * n].iter_mut().zip(cropped.band(k)) {
                *acc += f64::from(v);
            }
        }
    }
    let data = sum
        .chunks_exact(n)
        .zip(&count)
        .flat_map(|(plane, &c)| plane.iter().map(move |v| (v / f64::from(c)) as f32))
        .collect();
    HsiCube::new(h, w, bands, data)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub t_cut: usize,
    pub report: MetricReport,
}

pub const SWEEP_HEADER: &str = "t_cut,cc,mpsnr,mssim,sam";

/// Denoises `noisy` once per `t_cut` (sorted, duplicates dropped) with the
/// same seed, and scores each result against `reference`.
pub fn sweep_t_cut<S: Schedule + Sync + ?Sized>(
    noisy: &HsiCube,
    reference: &HsiCube,
    model: &NoisePredictor,
    s: &S,
    t_cuts: &[usize],
    cfg: &SamplerConfig,
    exec: Execution,
) -> Result<Vec<SweepRow>> {
    noisy.require_same_shape(reference, "sweep reference")?;
    ensure!(!t_cuts.is_empty(), Argument, "empty t_cut list");
    let mut list = t_cuts.to_vec();
    list.sort_unstable();
    list.dedup();
    if let Some(&bad) = list.iter().find(|&&t| t < 1 || t > s.steps()) {
        return Err(crate::Error::Argument(format!(
            "t_cut {bad} outside 1..={}",
            s.steps()
        )));
    }
    list.into_iter()
        .map(|t_cut| {
            let out = denoise_cube(noisy, model, s, &SamplerConfig { t_cut, ..*cfg }, exec)?;
            Ok(SweepRow {
                t_cut,
                report: evaluate_with(reference, &out, exec)?,
            })
        })
        .collect()
}

/// Header plus one `t_cut,cc,mpsnr,mssim,sam` row per entry.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = format!("{SWEEP_HEADER}\n");
    for r in rows {
        out.push_str(&format!("{},{}\n", r.t_cut, r.report.to_csv_row()));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predictor::PredictorConfig;
    use crate::schedule::{NoiseSchedule, ScheduleConfig};
    use crate::synthetic::{low_rank_cube, SyntheticConfig};

    fn model(bands: usize) -> NoisePredictor {
        NoisePredictor::new(PredictorConfig {
            bands,
            base_width: 8,
            depth: 2,
            time_embed_dim: 16,
            seed: 1,
            schedule: ScheduleConfig::default(),
        })
        .unwrap()
    }

    #[test]
    fn groups_overlap_by_half_and_reach_the_end() {
        assert_eq!(band_groups(8, 8).unwrap(), vec![0]);
        assert_eq!(band_groups(16, 8).unwrap(), vec![0, 4, 8]);
        assert_eq!(band_groups(19, 8).unwrap(), vec![0, 4, 8, 11]);
        assert_eq!(band_groups(5, 1).unwrap(), vec![0, 1, 2, 3, 4]);
        assert!(band_groups(4, 8).is_err());
        for total in 8..40 {
            let starts = band_groups(total, 8).unwrap();
            let mut covered = vec![0; total];
            for s in &starts {
                for c in &mut covered[*s..s + 8] {
                    *c += 1;
                }
            }
            assert!(covered.iter().all(|&c| c >= 1));
            assert_eq!(starts.last().unwrap() + 8, total);
        }
    }

    #[test]
    fn padding_reflects_and_keeps_the_original() {
        let c = low_rank_cube(10, 9, 2, &SyntheticConfig::default(), 1).unwrap();
        let p = pad_to_multiple(&c, 4).unwrap();
        assert_eq!(p.shape(), (12, 12, 2));
        assert_eq!(p.window(0, 0, 10, 9, 0, 2).unwrap(), c);
        assert_eq!(p.get(1, 10, 3), c.get(1, 8, 3));
        assert_eq!(p.get(0, 2, 11), c.get(0, 2, 5));
    }

    #[test]
    fn matching_bands_equals_plain_sampling() {
        let s = NoiseSchedule::default();
        let m = model(4);
        let c = low_rank_cube(16, 16, 4, &SyntheticConfig::default(), 2).unwrap();
        let cfg = SamplerConfig { t_cut: 5, seed: 9, ..Default::default() };
        let direct = truncated_sample(&c, &m, &s, &cfg).unwrap();
        assert_eq!(denoise_cube(&c, &m, &s, &cfg, Execution::default()).unwrap(), direct);
    }

    #[test]
    fn grouped_denoising_keeps_shape_and_is_deterministic() {
        let s = NoiseSchedule::default();
        let m = model(4);
        let c = low_rank_cube(14, 18, 10, &SyntheticConfig::default(), 3).unwrap();
        let cfg = SamplerConfig { t_cut: 4, seed: 2, ..Default::default() };
        let a = denoise_cube(&c, &m, &s, &cfg, Execution::Sequential).unwrap();
        let b = denoise_cube(&c, &m, &s, &cfg, Execution::Parallel).unwrap();
        assert_eq!(a.shape(), (14, 18, 10));
        assert_eq!(a, b);
        assert!(a.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn sweep_rows_are_sorted_and_validated() {
        let s = NoiseSchedule::default();
        let m = model(4);
        let c = low_rank_cube(16, 16, 4, &SyntheticConfig::default(), 4).unwrap();
        let cfg = SamplerConfig { stochastic: false, ..Default::default() };
        let rows = sweep_t_cut(&c, &c, &m, &s, &[3, 1, 2, 3], &cfg, Execution::default()).unwrap();
        assert_eq!(rows.iter().map(|r| r.t_cut).collect::<Vec<_>>(), vec![1, 2, 3]);
        let csv = sweep_csv(&rows);
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.starts_with("t_cut,cc,mpsnr,mssim,sam\n1,"));
        assert!(sweep_t_cut(&c, &c, &m, &s, &[0], &cfg, Execution::default()).is_err());
        assert!(sweep_t_cut(&c, &c, &m, &s, &[1001], &cfg, Execution::default()).is_err());
    }
}
