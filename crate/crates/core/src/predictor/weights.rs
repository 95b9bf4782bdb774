//! Weight files.
//!
//! ```text
//! "TDFW" | u16 version | u32 config length | config (UTF-8 key=value lines)
//!        | u32 record count | records
//! record: u32 name length | name (UTF-8) | u32 rank | rank × u32 dims | f32 payload
//! ```
//!
//! All integers and floats are little-endian. The config block names every
//! [`PredictorConfig`] field, so a file fully describes its network.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{NoisePredictor, Parameter, PredictorConfig};
use crate::error::{Error, Result};
use crate::schedule::ScheduleConfig;

pub const WEIGHTS_MAGIC: [u8; 4] = *b"TDFW";
pub const WEIGHTS_VERSION: u16 = 1;

/// Writes the shared record framing used by weight and optimizer files.
pub(crate) fn write_framed<W: Write>(
    w: &mut W,
    magic: [u8; 4],
    config: &BTreeMap<String, String>,
    records: &[Parameter],
) -> std::io::Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(&magic);
    buf.extend_from_slice(&WEIGHTS_VERSION.to_le_bytes());
    let text: String = config.iter().map(|(k, v)| format!("{k}={v}\n")).collect();
    buf.extend_from_slice(&(text.len() as u32).to_le_bytes());
    buf.extend_from_slice(text.as_bytes());
    buf.extend_from_slice(&(records.len() as u32).to_le_bytes());
    for r in records {
        buf.extend_from_slice(&(r.name.len() as u32).to_le_bytes());
        buf.extend_from_slice(r.name.as_bytes());
        buf.extend_from_slice(&(r.dims.len() as u32).to_le_bytes());
        for &d in &r.dims {
            buf.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in &r.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    w.write_all(&buf)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format("truncated weight file".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn utf8(&mut self, n: usize) -> Result<&'a str> {
        std::str::from_utf8(self.take(n)?).map_err(|_| Error::Format("invalid UTF-8".into()))
    }
}

pub(crate) fn read_framed<R: Read>(
    r: &mut R,
    magic: [u8; 4],
) -> Result<(BTreeMap<String, String>, Vec<Parameter>)> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)
        .map_err(|e| Error::Format(format!("reading weight file: {e}")))?;
    let mut c = Cursor { bytes: &bytes, pos: 0 };
    if c.take(4)? != magic {
        return Err(Error::Format(format!(
            "bad magic, expected {:?}",
            String::from_utf8_lossy(&magic)
        )));
    }
    let version = u16::from_le_bytes(c.take(2)?.try_into().unwrap());
    if version != WEIGHTS_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let len = c.u32()?;
    let mut config = BTreeMap::new();
    for line in c.utf8(len)?.lines() {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("bad config line {line:?}")))?;
        config.insert(k.to_string(), v.to_string());
    }
    let count = c.u32()?;
    let mut records = Vec::with_capacity(count.min(4096));
    for _ in 0..count {
        let name_len = c.u32()?;
        let name = c.utf8(name_len)?.to_string();
        let rank = c.u32()?;
        if rank > 8 {
            return Err(Error::Format(format!("record {name:?} has rank {rank}")));
        }
        let dims = (0..rank).map(|_| c.u32()).collect::<Result<Vec<_>>>()?;
        let n: usize = dims.iter().product();
        let values = c
            .take(n * 4)?
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        records.push(Parameter { name, dims, values });
    }
    if c.pos != bytes.len() {
        return Err(Error::Format("trailing bytes after last record".into()));
    }
    Ok((config, records))
}

pub(crate) fn config_entries(cfg: &PredictorConfig) -> BTreeMap<String, String> {
    [
        ("bands", cfg.bands.to_string()),
        ("base_width", cfg.base_width.to_string()),
        ("depth", cfg.depth.to_string()),
        ("time_embed_dim", cfg.time_embed_dim.to_string()),
        ("seed", cfg.seed.to_string()),
        ("schedule.steps", cfg.schedule.steps.to_string()),
        ("schedule.beta_start", cfg.schedule.beta_start.to_string()),
        ("schedule.beta_end", cfg.schedule.beta_end.to_string()),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

fn field<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<T> {
    map.get(key)
        .ok_or_else(|| Error::Format(format!("config block lacks {key:?}")))?
        .parse()
        .map_err(|_| Error::Format(format!("config value for {key:?} is malformed")))
}

pub(crate) fn config_from_entries(map: &BTreeMap<String, String>) -> Result<PredictorConfig> {
    let cfg = PredictorConfig {
        bands: field(map, "bands")?,
        base_width: field(map, "base_width")?,
        depth: field(map, "depth")?,
        time_embed_dim: field(map, "time_embed_dim")?,
        seed: field(map, "seed")?,
        schedule: ScheduleConfig {
            steps: field(map, "schedule.steps")?,
            beta_start: field(map, "schedule.beta_start")?,
            beta_end: field(map, "schedule.beta_end")?,
        },
    };
    cfg.validate()
        .map_err(|e| Error::Format(format!("stored config is invalid: {e}")))?;
    Ok(cfg)
}

pub fn write_weights<W: Write>(w: &mut W, p: &NoisePredictor) -> std::io::Result<()> {
    write_framed(w, WEIGHTS_MAGIC, &config_entries(p.config()), p.parameters())
}

pub fn read_weights<R: Read>(r: &mut R) -> Result<NoisePredictor> {
    let (config, records) = read_framed(r, WEIGHTS_MAGIC)?;
    let known = config_entries(&PredictorConfig::default());
    if let Some(k) = config.keys().find(|k| !known.contains_key(*k)) {
        return Err(Error::Format(format!("unknown config key {k:?}")));
    }
    NoisePredictor::from_parameters(config_from_entries(&config)?, records)
}

pub fn save_weights(p: &NoisePredictor, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_weights(&mut w, p)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<NoisePredictor> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_weights(&mut BufReader::new(file))
}
