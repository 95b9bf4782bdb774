//! Synthetic clean cubes with smooth, low-rank spectra.
//!
//! A cube is a linear mixture `x(r, c, b) = Σ_k a_k(r, c) · s_k(b)` of
//! `rank` endmember spectra. Each spectrum is a sum of broad Gaussian bumps
//! over the band axis; each abundance map is a sum of soft spatial blobs,
//! normalized so the abundances at a pixel sum to one. Values stay inside
//! `[floor, ceil]`.

use rand::Rng;

use crate::error::{ensure, Result};
use crate::hypercube::HsiCube;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticConfig {
    pub rank: usize,
    /// Gaussian blobs per abundance map.
    pub blobs: usize,
    /// Blob radius range as a fraction of the shorter side.
    pub radius: (f64, f64),
    pub floor: f64,
    pub ceil: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            rank: 3,
            blobs: 4,
            radius: (0.15, 0.45),
            floor: 0.05,
            ceil: 0.95,
        }
    }
}

fn spectrum<R: Rng>(bands: usize, rng: &mut R) -> Vec<f64> {
    let bumps = rng.random_range(1..=3);
    let mut s = vec![rng.random_range(0.1..0.4); bands];
    for _ in 0..bumps {
        let centre = rng.random_range(-0.2..1.2) * bands as f64;
        let width = rng.random_range(0.3..1.0) * bands.max(2) as f64;
        let height = rng.random_range(0.2..0.6);
        for (b, v) in s.iter_mut().enumerate() {
            *v += height * (-((b as f64 - centre) / width).powi(2)).exp();
        }
    }
    let peak = s.iter().cloned().fold(f64::MIN, f64::max);
    s.iter().map(|v| v / peak).collect()
}

fn abundance<R: Rng>(h: usize, w: usize, cfg: &SyntheticConfig, rng: &mut R) -> Vec<f64> {
    let side = h.min(w) as f64;
    let mut a = vec![0.05; h * w];
    for _ in 0..cfg.blobs {
        let (cy, cx) = (rng.random_range(0.0..h as f64), rng.random_range(0.0..w as f64));
        let r = rng.random_range(cfg.radius.0..cfg.radius.1) * side;
        let weight = rng.random_range(0.5..1.5);
        for y in 0..h {
            for x in 0..w {
                let d2 = (y as f64 - cy).powi(2) + (x as f64 - cx).powi(2);
                a[y * w + x] += weight * (-d2 / (2.0 * r * r)).exp();
            }
        }
    }
    a
}

/// One `h × w × bands` cube from `seed`.
pub fn low_rank_cube(
    h: usize,
    w: usize,
    bands: usize,
    cfg: &SyntheticConfig,
    seed: u64,
) -> Result<HsiCube> {
    ensure!(cfg.rank >= 1, Argument, "rank must be at least 1");
    ensure!(
        0.0 <= cfg.floor && cfg.floor < cfg.ceil && cfg.ceil <= 1.0,
        Argument,
        "need 0 <= floor < ceil <= 1"
    );
    ensure!(
        cfg.radius.0 > 0.0 && cfg.radius.0 < cfg.radius.1,
        Argument,
        "bad blob radius range"
    );
    let mut rng = rng::seeded(seed);
    let spectra: Vec<Vec<f64>> = (0..cfg.rank).map(|_| spectrum(bands, &mut rng)).collect();
    let maps: Vec<Vec<f64>> = (0..cfg.rank).map(|_| abundance(h, w, cfg, &mut rng)).collect();
    let n = h * w;
    let totals: Vec<f64> = (0..n).map(|p| maps.iter().map(|m| m[p]).sum()).collect();
    let span = cfg.ceil - cfg.floor;
    HsiCube::from_fn(h, w, bands, |b, r, c| {
        let p = r * w + c;
        let v: f64 = (0..cfg.rank).map(|k| maps[k][p] * spectra[k][b]).sum::<f64>() / totals[p];
        (cfg.floor + span * v) as f32
    })
}

/// `count` independent cubes; cube `i` uses `derive_indexed(seed, "synthetic", i)`.
pub fn low_rank_set(
    count: usize,
    h: usize,
    w: usize,
    bands: usize,
    cfg: &SyntheticConfig,
    seed: u64,
) -> Result<Vec<HsiCube>> {
    (0..count)
        .map(|i| low_rank_cube(h, w, bands, cfg, rng::derive_indexed(seed, "synthetic", i as u64)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values_stay_in_range_and_are_deterministic() {
        let cfg = SyntheticConfig::default();
        let a = low_rank_cube(32, 32, 8, &cfg, 5).unwrap();
        assert_eq!(a, low_rank_cube(32, 32, 8, &cfg, 5).unwrap());
        assert_ne!(a, low_rank_cube(32, 32, 8, &cfg, 6).unwrap());
        let (lo, hi) = a.min_max();
        assert!(lo >= 0.05 - 1e-6 && hi <= 0.95 + 1e-6);
        assert!(hi - lo > 0.05, "cube should not be flat");
    }

    #[test]
    fn spectra_have_the_declared_rank() {
        // every pixel spectrum lies in the span of `rank` vectors, so any
        // rank+1 pixel spectra are linearly dependent; check via Gram determinant
        let cfg = SyntheticConfig { rank: 2, ..Default::default() };
        let c = low_rank_cube(16, 16, 6, &cfg, 9).unwrap();
        let floor = cfg.floor as f32;
        let pix: Vec<Vec<f64>> = [(0, 0), (7, 3), (15, 15)]
            .iter()
            .map(|&(r, col)| c.spectrum(r, col).map(|v| f64::from(v - floor)).collect())
            .collect();
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let g: Vec<Vec<f64>> = pix.iter().map(|a| pix.iter().map(|b| dot(a, b)).collect()).collect();
        let det = g[0][0] * (g[1][1] * g[2][2] - g[1][2] * g[2][1])
            - g[0][1] * (g[1][0] * g[2][2] - g[1][2] * g[2][0])
            + g[0][2] * (g[1][0] * g[2][1] - g[1][1] * g[2][0]);
        let scale = g[0][0] * g[1][1] * g[2][2];
        assert!(det.abs() / scale < 1e-4, "relative Gram determinant {}", det.abs() / scale);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let bad = SyntheticConfig { rank: 0, ..Default::default() };
        assert!(low_rank_cube(8, 8, 2, &bad, 0).is_err());
        let bad = SyntheticConfig { floor: 0.9, ceil: 0.1, ..Default::default() };
        assert!(low_rank_cube(8, 8, 2, &bad, 0).is_err());
    }
}
