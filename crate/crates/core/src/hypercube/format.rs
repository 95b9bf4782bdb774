//! HSC cube files.
//!
//! Layout, all integers and scalars little-endian:
//!
//! ```text
//! "HSC1" | u32 height | u32 width | u32 bands | height*width*bands f32 (band-major)
//! ```

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::HsiCube;
use crate::error::{Error, Result};

pub const HSC_MAGIC: [u8; 4] = *b"HSC1";

pub fn write_cube<W: Write>(writer: &mut W, cube: &HsiCube) -> io::Result<()> {
    writer.write_all(&HSC_MAGIC)?;
    for dim in [cube.height(), cube.width(), cube.bands()] {
        writer.write_all(&(dim as u32).to_le_bytes())?;
    }
    let mut buf = Vec::with_capacity(cube.len() * 4);
    for v in cube.data() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    writer.write_all(&buf)
}

pub fn read_cube<R: Read>(reader: &mut R) -> Result<HsiCube> {
    let mut header = [0u8; 16];
    reader
        .read_exact(&mut header)
        .map_err(|_| Error::Format("truncated HSC header".into()))?;
    if header[..4] != HSC_MAGIC {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected \"HSC1\"",
            String::from_utf8_lossy(&header[..4])
        )));
    }
    let dim = |i: usize| u32::from_le_bytes(header[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize;
    let (height, width, bands) = (dim(0), dim(1), dim(2));
    if height == 0 || width == 0 || bands == 0 {
        return Err(Error::Format(format!(
            "zero dimension in header {height}x{width}x{bands}"
        )));
    }
    let count = height * width * bands;
    let mut payload = Vec::new();
    reader
        .read_to_end(&mut payload)
        .map_err(|e| Error::Corrupt(format!("reading payload: {e}")))?;
    if payload.len() != count * 4 {
        return Err(Error::Corrupt(format!(
            "header declares {height}x{width}x{bands} = {count} scalars, payload holds {} bytes",
            payload.len()
        )));
    }
    let data = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    HsiCube::new(height, width, bands, data)
}

pub fn load_cube(path: impl AsRef<Path>) -> Result<HsiCube> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_cube(&mut BufReader::new(file))
}

pub fn save_cube(cube: &HsiCube, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    cube.check_finite()?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = BufWriter::new(file);
    write_cube(&mut writer, cube)
        .and_then(|_| writer.flush())
        .map_err(|e| Error::io(path, e))
}
