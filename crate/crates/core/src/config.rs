//! Flat `key=value` run configuration.
//!
//! A run is described by layers of entries (built-in defaults, then a config
//! file, then command-line overrides), later layers winning. Unknown keys
//! are rejected. The top-level `seed` key, when given, fills every component
//! seed that is not set explicitly:
//!
//! | key              | derived as                     |
//! |------------------|--------------------------------|
//! | `predictor.seed` | `derive_seed(seed, "predictor")` |
//! | `train.seed`     | `derive_seed(seed, "train")`     |
//! | `sampler.seed`   | `derive_seed(seed, "sampler")`   |
//! | `noise.seed`     | `derive_seed(seed, "noise")`     |
//!
//! The resolved snapshot lists every key with its final value, so feeding it
//! back as a config file reproduces the run.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::diffusion::SamplerConfig;
use crate::error::{Error, Result};
use crate::hypercube::PatchSpec;
use crate::noise_sim::NoiseSpec;
use crate::predictor::PredictorConfig;
use crate::rng::derive_seed;
use crate::trainer::TrainConfig;

/// File name of the resolved snapshot written next to every output.
pub const SNAPSHOT_NAME: &str = "config.resolved";

/// Keys recorded verbatim in the snapshot with no default: file paths and
/// the raw-array description used by the converter.
pub const RECORD_KEYS: &[&str] = &[
    "paths.input",
    "paths.output",
    "paths.reference",
    "paths.estimate",
    "paths.weights",
    "paths.manifest",
    "paths.out_dir",
    "convert.height",
    "convert.width",
    "convert.bands",
    "convert.dtype",
    "convert.layout",
    "convert.normalize",
];

pub type Entries = BTreeMap<String, String>;

/// Parses `key=value` lines. Blank lines and lines starting with `#` are
/// skipped; a repeated key keeps its last value.
pub fn parse_entries(text: &str) -> Result<Entries> {
    let mut out = Entries::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::Argument(format!("line {}: expected key=value, got {line:?}", i + 1))
        })?;
        let k = k.trim();
        if k.is_empty() {
            return Err(Error::Argument(format!("line {}: empty key", i + 1)));
        }
        out.insert(k.to_string(), v.trim().to_string());
    }
    Ok(out)
}

pub fn load_entries(path: impl AsRef<Path>) -> Result<Entries> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_entries(&text)
}

/// One `KEY=VALUE` command-line override.
pub fn parse_override(s: &str) -> Result<(String, String)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| Error::Argument(format!("override must be key=value, got {s:?}")))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub predictor: PredictorConfig,
    pub train: TrainConfig,
    pub patch: PatchSpec,
    pub sampler: SamplerConfig,
    pub noise: NoiseSpec,
    pub sweep_t_cuts: Vec<usize>,
    /// Train on this many generated low-rank cubes instead of a manifest;
    /// 0 means use the manifest.
    pub synthetic: usize,
    /// Values of [`RECORD_KEYS`] that were given.
    pub records: BTreeMap<String, String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: None,
            predictor: PredictorConfig::default(),
            train: TrainConfig::default(),
            patch: PatchSpec {
                patch_size: 32,
                stride: 16,
                band_count: 8,
            },
            sampler: SamplerConfig::default(),
            noise: NoiseSpec::awgn(25.0, 0),
            sweep_t_cuts: vec![5, 15, 25, 35, 50, 75, 100],
            synthetic: 0,
            records: BTreeMap::new(),
        }
    }
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Argument(format!("{key}: cannot parse {v:?}")))
}

fn flag(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Argument(format!("{key}: expected true or false, got {v:?}"))),
    }
}

fn list(key: &str, v: &str) -> Result<Vec<usize>> {
    v.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| num(key, p.trim()))
        .collect()
}

impl RunConfig {
    /// Applies one entry. Unknown keys are an error.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let p = &mut self.predictor;
        let t = &mut self.train;
        match key {
            "seed" => self.seed = Some(num(key, v)?),
            "schedule.steps" => p.schedule.steps = num(key, v)?,
            "schedule.beta_start" => p.schedule.beta_start = num(key, v)?,
            "schedule.beta_end" => p.schedule.beta_end = num(key, v)?,
            "predictor.bands" => p.bands = num(key, v)?,
            "predictor.base_width" => p.base_width = num(key, v)?,
            "predictor.depth" => p.depth = num(key, v)?,
            "predictor.time_embed_dim" => p.time_embed_dim = num(key, v)?,
            "predictor.seed" => p.seed = num(key, v)?,
            "train.steps" => t.steps = num(key, v)?,
            "train.batch_size" => t.batch_size = num(key, v)?,
            "train.learning_rate" => t.learning_rate = num(key, v)?,
            "train.adam_beta1" => t.adam_beta1 = num(key, v)?,
            "train.adam_beta2" => t.adam_beta2 = num(key, v)?,
            "train.adam_epsilon" => t.adam_epsilon = num(key, v)?,
            "train.seed" => t.seed = num(key, v)?,
            "train.checkpoint_every" => t.checkpoint_every = num(key, v)?,
            "train.log_every" => t.log_every = num(key, v)?,
            "patch.size" => self.patch.patch_size = num(key, v)?,
            "patch.stride" => self.patch.stride = num(key, v)?,
            "patch.bands" => self.patch.band_count = num(key, v)?,
            "sampler.t_cut" => self.sampler.t_cut = num(key, v)?,
            "sampler.stochastic" => self.sampler.stochastic = flag(key, v)?,
            "sampler.seed" => self.sampler.seed = num(key, v)?,
            "sampler.scale_input" => self.sampler.scale_input = flag(key, v)?,
            "sweep.t_cuts" => self.sweep_t_cuts = list(key, v)?,
            "data.synthetic" => self.synthetic = num(key, v)?,
            k if k.starts_with("noise.") => self.noise.set(k, v)?,
            k if RECORD_KEYS.contains(&k) => {
                self.records.insert(k.to_string(), v.to_string());
            }
            _ => return Err(Error::Argument(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Merges `layers` over the defaults, derives unset seeds from `seed`,
    /// and validates the result.
    pub fn resolve(layers: &[Entries]) -> Result<Self> {
        let mut merged = Entries::new();
        for layer in layers {
            merged.extend(layer.iter().map(|(k, v)| (k.clone(), v.clone())));
        }
        let mut cfg = Self::default();
        if let Some(v) = merged.get("seed") {
            let seed: u64 = num("seed", v)?;
            cfg.seed = Some(seed);
            cfg.predictor.seed = derive_seed(seed, "predictor");
            cfg.train.seed = derive_seed(seed, "train");
            cfg.sampler.seed = derive_seed(seed, "sampler");
            cfg.noise.seed = derive_seed(seed, "noise");
        }
        for (k, v) in &merged {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.predictor.validate()?;
        let steps = self.predictor.schedule.steps;
        if self.sampler.t_cut < 1 || self.sampler.t_cut > steps {
            return Err(Error::Argument(format!(
                "sampler.t_cut must be in 1..={steps}, got {}",
                self.sampler.t_cut
            )));
        }
        if let Some(&bad) = self.sweep_t_cuts.iter().find(|&&t| t < 1 || t > steps) {
            return Err(Error::Argument(format!(
                "sweep.t_cuts entry {bad} outside 1..={steps}"
            )));
        }
        if self.patch.patch_size == 0 || self.patch.stride == 0 || self.patch.band_count == 0 {
            return Err(Error::Argument("patch settings must be positive".into()));
        }
        self.noise.validate()
    }

    /// Every key with its resolved value.
    pub fn to_entries(&self) -> Entries {
        let p = &self.predictor;
        let t = &self.train;
        let s = &self.sampler;
        let mut e: Entries = [
            ("schedule.steps", p.schedule.steps.to_string()),
            ("schedule.beta_start", p.schedule.beta_start.to_string()),
            ("schedule.beta_end", p.schedule.beta_end.to_string()),
            ("predictor.bands", p.bands.to_string()),
            ("predictor.base_width", p.base_width.to_string()),
            ("predictor.depth", p.depth.to_string()),
            ("predictor.time_embed_dim", p.time_embed_dim.to_string()),
            ("predictor.seed", p.seed.to_string()),
            ("train.steps", t.steps.to_string()),
            ("train.batch_size", t.batch_size.to_string()),
            ("train.learning_rate", t.learning_rate.to_string()),
            ("train.adam_beta1", t.adam_beta1.to_string()),
            ("train.adam_beta2", t.adam_beta2.to_string()),
            ("train.adam_epsilon", t.adam_epsilon.to_string()),
            ("train.seed", t.seed.to_string()),
            ("train.checkpoint_every", t.checkpoint_every.to_string()),
            ("train.log_every", t.log_every.to_string()),
            ("patch.size", self.patch.patch_size.to_string()),
            ("patch.stride", self.patch.stride.to_string()),
            ("patch.bands", self.patch.band_count.to_string()),
            ("sampler.t_cut", s.t_cut.to_string()),
            ("sampler.stochastic", s.stochastic.to_string()),
            ("sampler.seed", s.seed.to_string()),
            ("sampler.scale_input", s.scale_input.to_string()),
            (
                "sweep.t_cuts",
                self.sweep_t_cuts
                    .iter()
                    .map(|t| t.to_string())
                    .collect::<Vec<_>>()
                    .join(","),
            ),
            ("data.synthetic", self.synthetic.to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        if let Some(seed) = self.seed {
            e.insert("seed".into(), seed.to_string());
        }
        e.extend(self.noise.to_entries());
        e.extend(self.records.clone());
        e
    }

    pub fn to_text(&self) -> String {
        self.to_entries()
            .iter()
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }

    /// Writes [`SNAPSHOT_NAME`] into `dir`, creating it if needed.
    pub fn save_snapshot(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(SNAPSHOT_NAME);
        std::fs::write(&path, self.to_text()).map_err(|e| Error::io(&path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entries(pairs: &[(&str, &str)]) -> Entries {
        pairs
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect()
    }

    #[test]
    fn defaults_resolve() {
        let cfg = RunConfig::resolve(&[]).unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.sampler.t_cut, 35);
        assert_eq!(cfg.train.learning_rate, 1e-4);
        assert_eq!(cfg.predictor.schedule.steps, 1000);
    }

    #[test]
    fn later_layers_win() {
        let file = entries(&[("train.steps", "50"), ("sampler.t_cut", "20")]);
        let flags = entries(&[("sampler.t_cut", "10")]);
        let cfg = RunConfig::resolve(&[file, flags]).unwrap();
        assert_eq!(cfg.train.steps, 50);
        assert_eq!(cfg.sampler.t_cut, 10);
    }

    #[test]
    fn unknown_and_malformed_keys_fail() {
        assert!(RunConfig::resolve(&[entries(&[("train.stpes", "5")])]).is_err());
        assert!(RunConfig::resolve(&[entries(&[("train.steps", "five")])]).is_err());
        assert!(RunConfig::resolve(&[entries(&[("sampler.t_cut", "0")])]).is_err());
        assert!(RunConfig::resolve(&[entries(&[("sampler.t_cut", "1001")])]).is_err());
        assert!(RunConfig::resolve(&[entries(&[("sampler.stochastic", "maybe")])]).is_err());
        assert!(parse_entries("no equals sign").is_err());
    }

    #[test]
    fn top_seed_fills_unset_component_seeds() {
        let a = RunConfig::resolve(&[entries(&[("seed", "7")])]).unwrap();
        assert_eq!(a.train.seed, derive_seed(7, "train"));
        assert_eq!(a.noise.seed, derive_seed(7, "noise"));
        assert_ne!(a.train.seed, a.sampler.seed);
        let b = RunConfig::resolve(&[entries(&[("seed", "7"), ("train.seed", "3")])]).unwrap();
        assert_eq!(b.train.seed, 3);
        assert_eq!(b.sampler.seed, a.sampler.seed);
    }

    #[test]
    fn snapshot_reproduces_the_config() {
        let flags = entries(&[
            ("seed", "11"),
            ("noise.awgn", "uniform:10,50"),
            ("noise.impulse_density", "0.1"),
            ("sweep.t_cuts", "5,10"),
            ("paths.input", "a.hsc"),
        ]);
        let cfg = RunConfig::resolve(&[flags]).unwrap();
        let again = RunConfig::resolve(&[parse_entries(&cfg.to_text()).unwrap()]).unwrap();
        assert_eq!(again, cfg);
        let dir = tempfile::tempdir().unwrap();
        cfg.save_snapshot(dir.path()).unwrap();
        let on_disk = load_entries(dir.path().join(SNAPSHOT_NAME)).unwrap();
        assert_eq!(on_disk, cfg.to_entries());
    }

    #[test]
    fn comments_and_overrides() {
        let e = parse_entries("# header\n\ntrain.steps = 4\n").unwrap();
        assert_eq!(e["train.steps"], "4");
        assert_eq!(
            parse_override("sampler.t_cut=12").unwrap(),
            ("sampler.t_cut".to_string(), "12".to_string())
        );
        assert!(parse_override("sampler.t_cut").is_err());
    }
}
