//! Full-reference quality metrics for cube pairs.
//!
//! Conventions:
//!
//! - CC: Pearson correlation per band, averaged over bands. A band that is
//!   constant in either cube scores 1 if the two bands are identical, else 0.
//! - mPSNR: `10 log10(peak² / MSE)` per band, averaged; capped at 100 dB,
//!   which is also the value of a zero-error band.
//! - mSSIM: SSIM per band with an 11×11 Gaussian window (σ = 1.5),
//!   `C1 = (0.01 peak)²`, `C2 = (0.03 peak)²`, averaged over the valid
//!   (unpadded) window positions and then over bands.
//! - SAM: mean spectral angle in degrees over pixels whose reference and
//!   estimate spectra are both non-zero.
//!
//! Everything is accumulated in double precision.

use std::fmt;

use crate::error::{ensure, Error, Result};
use crate::hypercube::HsiCube;
use crate::par::Execution;

pub const PSNR_CAP_DB: f64 = 100.0;
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

/// Header of the CSV written by [`MetricReport::to_csv_row`].
pub const CSV_HEADER: &str = "cc,mpsnr,mssim,sam";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    pub cc: f64,
    pub mpsnr: f64,
    pub mssim: f64,
    /// Degrees.
    pub sam: f64,
}

impl MetricReport {
    /// `cc,mpsnr,mssim,sam` with six decimals each.
    pub fn to_csv_row(&self) -> String {
        format!(
            "{:.6},{:.6},{:.6},{:.6}",
            self.cc, self.mpsnr, self.mssim, self.sam
        )
    }
}

impl fmt::Display for MetricReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "CC {:.4}  mPSNR {:.4} dB  mSSIM {:.4}  SAM {:.4}°",
            self.cc, self.mpsnr, self.mssim, self.sam
        )
    }
}

fn band_mean(values: impl Iterator<Item = f64>, bands: usize) -> f64 {
    values.sum::<f64>() / bands as f64
}

fn pearson(a: &[f32], b: &[f32]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().map(|&v| f64::from(v)).sum::<f64>() / n;
    let mb = b.iter().map(|&v| f64::from(v)).sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let (dx, dy) = (f64::from(x) - ma, f64::from(y) - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return if a == b { 1.0 } else { 0.0 };
    }
    (sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0)
}

pub fn cc(reference: &HsiCube, estimate: &HsiCube) -> Result<f64> {
    cc_with(reference, estimate, Execution::default())
}

pub fn cc_with(reference: &HsiCube, estimate: &HsiCube, exec: Execution) -> Result<f64> {
    reference.require_same_shape(estimate, "cc")?;
    let bands = reference.bands();
    let per_band = exec.map(bands, |b| pearson(reference.band(b), estimate.band(b)));
    Ok(band_mean(per_band.into_iter(), bands))
}

fn band_psnr(a: &[f32], b: &[f32], peak: f64) -> f64 {
    let mse = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| (f64::from(x) - f64::from(y)).powi(2))
        .sum::<f64>()
        / a.len() as f64;
    if mse == 0.0 {
        return PSNR_CAP_DB;
    }
    (10.0 * (peak * peak / mse).log10()).min(PSNR_CAP_DB)
}

pub fn mpsnr(reference: &HsiCube, estimate: &HsiCube, peak: f64) -> Result<f64> {
    mpsnr_with(reference, estimate, peak, Execution::default())
}

pub fn mpsnr_with(
    reference: &HsiCube,
    estimate: &HsiCube,
    peak: f64,
    exec: Execution,
) -> Result<f64> {
    reference.require_same_shape(estimate, "mpsnr")?;
    ensure!(peak > 0.0, Argument, "peak must be positive");
    let bands = reference.bands();
    let per_band = exec.map(bands, |b| band_psnr(reference.band(b), estimate.band(b), peak));
    Ok(band_mean(per_band.into_iter(), bands))
}

/// Normalized 1-D Gaussian taps; the 2-D window is their outer product.
pub fn gaussian_taps(size: usize, sigma: f64) -> Vec<f64> {
    let c = (size as f64 - 1.0) / 2.0;
    let raw: Vec<f64> = (0..size)
        .map(|i| (-((i as f64 - c).powi(2)) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / sum).collect()
}

/// Valid-mode separable filtering of an `h × w` plane.
fn filter_valid(plane: &[f64], h: usize, w: usize, taps: &[f64]) -> Vec<f64> {
    let k = taps.len();
    let (oh, ow) = (h - k + 1, w - k + 1);
    let mut rows = vec![0.0; h * ow];
    for y in 0..h {
        for x in 0..ow {
            rows[y * ow + x] = taps
                .iter()
                .enumerate()
                .map(|(i, t)| t * plane[y * w + x + i])
                .sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = taps
                .iter()
                .enumerate()
                .map(|(i, t)| t * rows[(y + i) * ow + x])
                .sum();
        }
    }
    out
}

fn band_ssim(a: &[f32], b: &[f32], h: usize, w: usize, taps: &[f64], peak: f64) -> f64 {
    let c1 = (SSIM_K1 * peak).powi(2);
    let c2 = (SSIM_K2 * peak).powi(2);
    let x: Vec<f64> = a.iter().map(|&v| f64::from(v)).collect();
    let y: Vec<f64> = b.iter().map(|&v| f64::from(v)).collect();
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(&y).map(|(u, v)| u * v).collect();
    let [mx, my, sxx, syy, sxy] = [&x, &y, &xx, &yy, &xy].map(|p| filter_valid(p, h, w, taps));
    let n = mx.len() as f64;
    (0..mx.len())
        .map(|i| {
            let (ux, uy) = (mx[i], my[i]);
            let vx = sxx[i] - ux * ux;
            let vy = syy[i] - uy * uy;
            let cov = sxy[i] - ux * uy;
            ((2.0 * ux * uy + c1) * (2.0 * cov + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2))
        })
        .sum::<f64>()
        / n
}

pub fn mssim(reference: &HsiCube, estimate: &HsiCube) -> Result<f64> {
    mssim_with(reference, estimate, Execution::default())
}

pub fn mssim_with(reference: &HsiCube, estimate: &HsiCube, exec: Execution) -> Result<f64> {
    reference.require_same_shape(estimate, "mssim")?;
    let (h, w, bands) = reference.shape();
    ensure!(
        h >= SSIM_WINDOW && w >= SSIM_WINDOW,
        Argument,
        "mSSIM needs spatial size at least {SSIM_WINDOW}, got {h}x{w}"
    );
    let taps = gaussian_taps(SSIM_WINDOW, SSIM_SIGMA);
    let per_band = exec.map(bands, |b| {
        band_ssim(reference.band(b), estimate.band(b), h, w, &taps, 1.0)
    });
    Ok(band_mean(per_band.into_iter(), bands))
}

pub fn sam(reference: &HsiCube, estimate: &HsiCube) -> Result<f64> {
    sam_with(reference, estimate, Execution::default())
}

pub fn sam_with(reference: &HsiCube, estimate: &HsiCube, exec: Execution) -> Result<f64> {
    reference.require_same_shape(estimate, "sam")?;
    let (h, w, bands) = reference.shape();
    ensure!(bands >= 2, Argument, "SAM needs at least 2 bands");
    let n = h * w;
    let per_row = exec.map(h, |row| {
        let (mut sum, mut count) = (0.0f64, 0usize);
        for col in 0..w {
            let p = row * w + col;
            let x = |b: usize| f64::from(reference.data()[b * n + p]);
            let y = |b: usize| f64::from(estimate.data()[b * n + p]);
            let na = (0..bands).map(|b| x(b) * x(b)).sum::<f64>().sqrt();
            let nb = (0..bands).map(|b| y(b) * y(b)).sum::<f64>().sqrt();
            if na == 0.0 || nb == 0.0 {
                continue;
            }
            // 2 atan2(|u - v|, |u + v|) on the unit vectors: exact at 0,
            // unlike acos of the cosine
            let (mut diff, mut plus) = (0.0f64, 0.0f64);
            for b in 0..bands {
                let (u, v) = (x(b) / na, y(b) / nb);
                diff += (u - v) * (u - v);
                plus += (u + v) * (u + v);
            }
            sum += 2.0 * diff.sqrt().atan2(plus.sqrt());
            count += 1;
        }
        (sum, count)
    });
    let (sum, count) = per_row
        .into_iter()
        .fold((0.0, 0), |(s, c), (a, b)| (s + a, c + b));
    if count == 0 {
        return Err(Error::Undefined(
            "every pixel has a zero-norm spectrum".into(),
        ));
    }
    Ok((sum / count as f64).to_degrees())
}

/// All four metrics with a peak of 1.
pub fn evaluate(reference: &HsiCube, estimate: &HsiCube) -> Result<MetricReport> {
    evaluate_with(reference, estimate, Execution::default())
}

pub fn evaluate_with(
    reference: &HsiCube,
    estimate: &HsiCube,
    exec: Execution,
) -> Result<MetricReport> {
    Ok(MetricReport {
        cc: cc_with(reference, estimate, exec)?,
        mpsnr: mpsnr_with(reference, estimate, 1.0, exec)?,
        mssim: mssim_with(reference, estimate, exec)?,
        sam: sam_with(reference, estimate, exec)?,
    })
}
