//! Raw planar arrays as exported by common remote-sensing tools.

use std::str::FromStr;

use hsi_diffusion::{Error, HsiCube, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F32,
    F64,
    U16,
    I16,
}

impl Dtype {
    fn size(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
            Dtype::U16 | Dtype::I16 => 2,
        }
    }

    fn decode(self, b: &[u8]) -> f64 {
        match self {
            Dtype::F32 => f64::from(f32::from_le_bytes(b.try_into().unwrap())),
            Dtype::F64 => f64::from_le_bytes(b.try_into().unwrap()),
            Dtype::U16 => f64::from(u16::from_le_bytes(b.try_into().unwrap())),
            Dtype::I16 => f64::from(i16::from_le_bytes(b.try_into().unwrap())),
        }
    }
}

impl FromStr for Dtype {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "f32" => Ok(Dtype::F32),
            "f64" => Ok(Dtype::F64),
            "u16" => Ok(Dtype::U16),
            "i16" => Ok(Dtype::I16),
            _ => Err(format!("unknown dtype {s:?} (f32, f64, u16, i16)")),
        }
    }
}

/// Interleaving of the raw payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    /// band, row, column
    Bsq,
    /// row, band, column
    Bil,
    /// row, column, band
    Bip,
}

impl FromStr for Layout {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "bsq" => Ok(Layout::Bsq),
            "bil" => Ok(Layout::Bil),
            "bip" => Ok(Layout::Bip),
            _ => Err(format!("unknown layout {s:?} (bsq, bil, bip)")),
        }
    }
}

pub fn decode(
    bytes: &[u8],
    (h, w, b): (usize, usize, usize),
    dtype: Dtype,
    layout: Layout,
) -> Result<HsiCube> {
    let want = h * w * b * dtype.size();
    if bytes.len() != want {
        return Err(Error::Corrupt(format!(
            "{h}x{w}x{b} {dtype:?} needs {want} bytes, file has {}",
            bytes.len()
        )));
    }
    let at = |i: usize| dtype.decode(&bytes[i * dtype.size()..(i + 1) * dtype.size()]) as f32;
    HsiCube::from_fn(h, w, b, |band, r, c| {
        at(match layout {
            Layout::Bsq => (band * h + r) * w + c,
            Layout::Bil => (r * b + band) * w + c,
            Layout::Bip => (r * w + c) * b + band,
        })
    })
}
