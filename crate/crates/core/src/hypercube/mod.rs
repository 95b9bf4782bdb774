//! Hyperspectral cube data model.
//!
//! A cube stores `bands` planes of `height × width` single-precision scalars,
//! band-major: the scalar at `(band, row, col)` lives at
//! `band * height * width + row * width + col`.

mod format;
mod manifest;

pub use format::{load_cube, read_cube, save_cube, write_cube, HSC_MAGIC};
pub use manifest::{DatasetManifest, ManifestEntry, Normalization, Role};

use rand::Rng;

use crate::error::{ensure, Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct HsiCube {
    height: usize,
    width: usize,
    bands: usize,
    data: Vec<f32>,
}

impl HsiCube {
    /// Builds a cube from band-major data, checking length and finiteness.
    pub fn new(height: usize, width: usize, bands: usize, data: Vec<f32>) -> Result<Self> {
        ensure!(
            height >= 1 && width >= 1 && bands >= 1,
            Argument,
            "cube dimensions must be positive, got {height}x{width}x{bands}"
        );
        let expected = height
            .checked_mul(width)
            .and_then(|v| v.checked_mul(bands))
            .ok_or_else(|| Error::Argument("cube dimensions overflow".into()))?;
        ensure!(
            data.len() == expected,
            Argument,
            "{height}x{width}x{bands} cube needs {expected} scalars, got {}",
            data.len()
        );
        let cube = HsiCube {
            height,
            width,
            bands,
            data,
        };
        cube.check_finite()?;
        Ok(cube)
    }

    pub fn filled(height: usize, width: usize, bands: usize, value: f32) -> Result<Self> {
        Self::new(height, width, bands, vec![value; height * width * bands])
    }

    pub fn zeros(height: usize, width: usize, bands: usize) -> Result<Self> {
        Self::filled(height, width, bands, 0.0)
    }

    /// Builds a cube by evaluating `f(band, row, col)` at every position.
    pub fn from_fn<F>(height: usize, width: usize, bands: usize, mut f: F) -> Result<Self>
    where
        F: FnMut(usize, usize, usize) -> f32,
    {
        let mut data = Vec::with_capacity(height * width * bands);
        for b in 0..bands {
            for r in 0..height {
                for c in 0..width {
                    data.push(f(b, r, c));
                }
            }
        }
        Self::new(height, width, bands, data)
    }

    /// A cube of i.i.d. standard normal scalars.
    pub fn standard_normal<R: Rng + ?Sized>(
        height: usize,
        width: usize,
        bands: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let mut data = vec![0.0; height * width * bands];
        rng::fill_standard_normal(rng, &mut data);
        Self::new(height, width, bands, data)
    }

    /// Wraps data produced inside the crate. Callers guarantee the length;
    /// finiteness is checked only in debug builds.
    pub(crate) fn from_parts(height: usize, width: usize, bands: usize, data: Vec<f32>) -> Self {
        debug_assert_eq!(data.len(), height * width * bands);
        debug_assert!(data.iter().all(|v| v.is_finite()));
        HsiCube {
            height,
            width,
            bands,
            data,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    /// `(height, width, bands)`.
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.bands)
    }

    pub fn band_len(&self) -> usize {
        self.height * self.width
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[cfg(test)]
    pub(crate) fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn band(&self, band: usize) -> &[f32] {
        let n = self.band_len();
        &self.data[band * n..(band + 1) * n]
    }

    pub(crate) fn band_mut(&mut self, band: usize) -> &mut [f32] {
        let n = self.band_len();
        &mut self.data[band * n..(band + 1) * n]
    }

    pub fn get(&self, band: usize, row: usize, col: usize) -> f32 {
        self.data[(band * self.height + row) * self.width + col]
    }

    /// The spectrum of one pixel.
    pub fn spectrum(&self, row: usize, col: usize) -> impl Iterator<Item = f32> + '_ {
        let n = self.band_len();
        let offset = row * self.width + col;
        (0..self.bands).map(move |b| self.data[b * n + offset])
    }

    pub fn min_max(&self) -> (f32, f32) {
        self.data
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    pub fn same_shape(&self, other: &HsiCube) -> bool {
        self.shape() == other.shape()
    }

    pub(crate) fn require_same_shape(&self, other: &HsiCube, what: &str) -> Result<()> {
        ensure!(
            self.same_shape(other),
            Argument,
            "{what}: shape mismatch {:?} vs {:?}",
            self.shape(),
            other.shape()
        );
        Ok(())
    }

    pub fn check_finite(&self) -> Result<()> {
        if let Some(i) = self.data.iter().position(|v| !v.is_finite()) {
            let n = self.band_len();
            return Err(Error::Value(format!(
                "non-finite scalar {} at band {}, pixel {}",
                self.data[i],
                i / n,
                i % n
            )));
        }
        Ok(())
    }

    /// Copies a spatial window and a contiguous run of bands.
    pub fn window(
        &self,
        row: usize,
        col: usize,
        height: usize,
        width: usize,
        band_start: usize,
        band_count: usize,
    ) -> Result<HsiCube> {
        ensure!(
            height >= 1
                && width >= 1
                && band_count >= 1
                && row + height <= self.height
                && col + width <= self.width
                && band_start + band_count <= self.bands,
            Argument,
            "window ({row},{col}) {height}x{width} bands {band_start}+{band_count} exceeds {:?}",
            self.shape()
        );
        let mut data = Vec::with_capacity(height * width * band_count);
        for b in band_start..band_start + band_count {
            let plane = self.band(b);
            for r in row..row + height {
                data.extend_from_slice(&plane[r * self.width + col..r * self.width + col + width]);
            }
        }
        Ok(HsiCube::from_parts(height, width, band_count, data))
    }

    pub fn band_range(&self, band_start: usize, band_count: usize) -> Result<HsiCube> {
        self.window(0, 0, self.height, self.width, band_start, band_count)
    }

    /// Swaps the row and column axes of every band.
    pub fn transpose_spatial(&self) -> HsiCube {
        let (h, w) = (self.height, self.width);
        let mut data = vec![0.0; self.data.len()];
        for b in 0..self.bands {
            let src = self.band(b);
            let dst = &mut data[b * h * w..(b + 1) * h * w];
            for r in 0..h {
                for c in 0..w {
                    dst[c * h + r] = src[r * w + c];
                }
            }
        }
        HsiCube::from_parts(w, h, self.bands, data)
    }

    pub(crate) fn map(&self, f: impl Fn(f32) -> f32) -> HsiCube {
        let data = self.data.iter().map(|&v| f(v)).collect();
        HsiCube::from_parts(self.height, self.width, self.bands, data)
    }

    pub(crate) fn clamp_unit(mut self) -> HsiCube {
        self.data.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
        self
    }
}

/// Maps values linearly so that `lo → 0` and `hi → 1`, clamping the result.
pub fn normalize(cube: &HsiCube, lo: f32, hi: f32) -> Result<HsiCube> {
    ensure!(
        lo.is_finite() && hi.is_finite() && lo < hi,
        Argument,
        "normalization bounds must satisfy lo < hi, got [{lo}, {hi}]"
    );
    let lo64 = f64::from(lo);
    let span = f64::from(hi) - lo64;
    Ok(cube.map(|v| ((f64::from(v) - lo64) / span).clamp(0.0, 1.0) as f32))
}

/// Square spatial windows and a contiguous band run per training sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchSpec {
    pub patch_size: usize,
    pub stride: usize,
    pub band_count: usize,
}

impl PatchSpec {
    pub fn validate_for(&self, cube: &HsiCube) -> Result<()> {
        ensure!(
            self.patch_size >= 1 && self.patch_size <= cube.height.min(cube.width),
            Argument,
            "patch size {} does not fit a {}x{} cube",
            self.patch_size,
            cube.height,
            cube.width
        );
        ensure!(self.stride >= 1, Argument, "patch stride must be at least 1");
        ensure!(
            self.band_count >= 1 && self.band_count <= cube.bands,
            Argument,
            "patch band count {} exceeds cube bands {}",
            self.band_count,
            cube.bands
        );
        Ok(())
    }

    /// Window origins along an axis of length `len`.
    fn origins(&self, len: usize) -> impl Iterator<Item = usize> {
        (0..=len - self.patch_size).step_by(self.stride)
    }
}

/// Cuts `cube` into training patches.
///
/// Windows are visited in row-major order of their top-left corner. Each
/// window takes a contiguous run of `band_count` bands whose start is drawn
/// uniformly from the seeded generator, one draw per window in visiting
/// order.
pub fn extract_patches(cube: &HsiCube, spec: PatchSpec, seed: u64) -> Result<Vec<HsiCube>> {
    spec.validate_for(cube)?;
    let mut rng = rng::seeded(seed);
    let max_start = cube.bands - spec.band_count;
    let mut patches = Vec::new();
    for row in spec.origins(cube.height) {
        for col in spec.origins(cube.width) {
            let band_start = rng.random_range(0..=max_start);
            patches.push(cube.window(
                row,
                col,
                spec.patch_size,
                spec.patch_size,
                band_start,
                spec.band_count,
            )?);
        }
    }
    Ok(patches)
}
