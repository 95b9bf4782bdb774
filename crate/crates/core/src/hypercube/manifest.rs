//! Dataset manifests.
//!
//! UTF-8 text, one `role<TAB>path` entry per line, `#` starts a comment.
//! Roles are `train` and `eval`. An optional `normalize<TAB>rule` line picks
//! the intensity normalization applied to every cube before use, where
//! `rule` is one of `none`, `minmax`, `percentile:<lo>,<hi>` or
//! `fixed:<lo>,<hi>`. Without one, `minmax` is used. Relative paths are
//! resolved against the manifest's directory.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::{load_cube, normalize, HsiCube};
use crate::error::{ensure, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Train,
    Eval,
}

impl FromStr for Role {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Role::Train),
            "eval" => Ok(Role::Eval),
            other => Err(Error::Format(format!("unknown manifest role {other:?}"))),
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Train => "train",
            Role::Eval => "eval",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Normalization {
    None,
    /// Global min/max over the training split.
    MinMax,
    /// Percentile clip bounds over the training split, in percent.
    Percentile { lo: f64, hi: f64 },
    Fixed { lo: f32, hi: f32 },
}

fn parse_pair(s: &str) -> Result<(f64, f64)> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| Error::Format(format!("expected <lo>,<hi>, got {s:?}")))?;
    let parse = |v: &str| {
        v.trim()
            .parse::<f64>()
            .map_err(|_| Error::Format(format!("bad number {v:?}")))
    };
    Ok((parse(a)?, parse(b)?))
}

impl FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "none" {
            return Ok(Normalization::None);
        }
        if s == "minmax" {
            return Ok(Normalization::MinMax);
        }
        if let Some(rest) = s.strip_prefix("percentile:") {
            let (lo, hi) = parse_pair(rest)?;
            ensure!(
                (0.0..=100.0).contains(&lo) && (0.0..=100.0).contains(&hi) && lo < hi,
                Format,
                "percentiles must satisfy 0 <= lo < hi <= 100"
            );
            return Ok(Normalization::Percentile { lo, hi });
        }
        if let Some(rest) = s.strip_prefix("fixed:") {
            let (lo, hi) = parse_pair(rest)?;
            ensure!(lo < hi, Format, "fixed bounds must satisfy lo < hi");
            return Ok(Normalization::Fixed {
                lo: lo as f32,
                hi: hi as f32,
            });
        }
        Err(Error::Format(format!("unknown normalization rule {s:?}")))
    }
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Normalization::None => f.write_str("none"),
            Normalization::MinMax => f.write_str("minmax"),
            Normalization::Percentile { lo, hi } => write!(f, "percentile:{lo},{hi}"),
            Normalization::Fixed { lo, hi } => write!(f, "fixed:{lo},{hi}"),
        }
    }
}

impl Normalization {
    /// Turns the rule into concrete bounds using the training cubes.
    /// `None` yields `None`.
    pub fn resolve(&self, train: &[HsiCube]) -> Result<Option<(f32, f32)>> {
        let bounds = match *self {
            Normalization::None => return Ok(None),
            Normalization::Fixed { lo, hi } => (lo, hi),
            Normalization::MinMax => {
                ensure!(!train.is_empty(), Argument, "min/max needs training cubes");
                train.iter().map(HsiCube::min_max).fold(
                    (f32::INFINITY, f32::NEG_INFINITY),
                    |(lo, hi), (a, b)| (lo.min(a), hi.max(b)),
                )
            }
            Normalization::Percentile { lo, hi } => {
                ensure!(!train.is_empty(), Argument, "percentiles need training cubes");
                let mut values: Vec<f32> =
                    train.iter().flat_map(|c| c.data().iter().copied()).collect();
                values.sort_unstable_by(f32::total_cmp);
                (percentile(&values, lo), percentile(&values, hi))
            }
        };
        ensure!(
            bounds.0 < bounds.1,
            Argument,
            "degenerate normalization bounds [{}, {}]",
            bounds.0,
            bounds.1
        );
        Ok(Some(bounds))
    }
}

/// Linear interpolation between closest ranks of a sorted slice.
fn percentile(sorted: &[f32], p: f64) -> f32 {
    let pos = p / 100.0 * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let j = (i + 1).min(sorted.len() - 1);
    let frac = pos - i as f64;
    (f64::from(sorted[i]) * (1.0 - frac) + f64::from(sorted[j]) * frac) as f32
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub role: Role,
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    pub normalization: Normalization,
}

impl DatasetManifest {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut entries = Vec::new();
        let mut normalization = Normalization::MinMax;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim_end();
            if line.trim().is_empty() {
                continue;
            }
            let (key, value) = line.split_once('\t').ok_or_else(|| {
                Error::Format(format!("manifest line {}: expected role<TAB>path", lineno + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            if key == "normalize" {
                normalization = value.parse()?;
                continue;
            }
            let role = key.parse()?;
            let path = PathBuf::from(value);
            let path = if path.is_absolute() {
                path
            } else {
                base_dir.join(path)
            };
            entries.push(ManifestEntry { role, path });
        }
        Ok(DatasetManifest {
            entries,
            normalization,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn paths(&self, role: Role) -> impl Iterator<Item = &Path> {
        self.entries
            .iter()
            .filter(move |e| e.role == role)
            .map(|e| e.path.as_path())
    }

    /// Loads the training cubes, resolves the normalization against them and
    /// applies it. Returns the cubes with the resolved bounds.
    pub fn load_training(&self) -> Result<(Vec<HsiCube>, Option<(f32, f32)>)> {
        let raw: Vec<HsiCube> = self
            .paths(Role::Train)
            .map(load_cube)
            .collect::<Result<_>>()?;
        ensure!(!raw.is_empty(), Argument, "manifest has no train entries");
        let bounds = self.normalization.resolve(&raw)?;
        let cubes = match bounds {
            Some((lo, hi)) => raw
                .iter()
                .map(|c| normalize(c, lo, hi))
                .collect::<Result<_>>()?,
            None => raw,
        };
        Ok((cubes, bounds))
    }

    /// The manifest text with the normalization pinned to concrete bounds.
    pub fn to_text(&self, resolved: Option<(f32, f32)>) -> String {
        let rule = match resolved {
            Some((lo, hi)) => Normalization::Fixed { lo, hi },
            None => self.normalization,
        };
        let mut out = format!("normalize\t{rule}\n");
        for e in &self.entries {
            out.push_str(&format!("{}\t{}\n", e.role, e.path.display()));
        }
        out
    }
}
