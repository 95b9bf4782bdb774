use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Args;
use hsi_diffusion::config::{self, Entries, RunConfig};
use hsi_diffusion::denoise::{band_groups, denoise_cube, sweep_csv, sweep_t_cut};
use hsi_diffusion::hypercube::{load_cube, normalize, save_cube, DatasetManifest, Normalization};
use hsi_diffusion::metrics::{evaluate as score, CSV_HEADER};
use hsi_diffusion::noise_sim::{apply_noise, NoiseSpec};
use hsi_diffusion::par::Execution;
use hsi_diffusion::predictor::{load_weights, save_weights, NoisePredictor};
use hsi_diffusion::rng::derive_seed;
use hsi_diffusion::synthetic::{low_rank_set, SyntheticConfig};
use hsi_diffusion::trainer::{self, patch_pool, TrainOptions, TrainState, CHECKPOINT_WEIGHTS};
use hsi_diffusion::{Error, Result};

use crate::raw::{decode, Dtype, Layout};
use crate::ConfigArgs;

pub const WEIGHTS_NAME: &str = "weights.tdfw";

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

/// Builds the run config: defaults, then `--config`, then flags. `flags`
/// holds command-specific values and goes last.
fn resolve(common: &ConfigArgs, flags: Vec<(&str, String)>) -> Result<RunConfig> {
    let mut layers = Vec::new();
    if let Some(file) = &common.config {
        layers.push(config::load_entries(file)?);
    }
    let mut top = Entries::new();
    if let Some(seed) = common.seed {
        top.insert("seed".into(), seed.to_string());
    }
    for o in &common.overrides {
        let (k, v) = config::parse_override(o)?;
        top.insert(k, v);
    }
    for (k, v) in flags {
        top.insert(k.to_string(), v);
    }
    layers.push(top);
    RunConfig::resolve(&layers)
}

/// `<output>.config` next to a single-file output.
fn sidecar(output: &Path, ext: &str) -> PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(ext);
    output.with_file_name(name)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn snapshot(cfg: &RunConfig, output: &Path) -> Result<()> {
    write_text(&sidecar(output, ".config"), &cfg.to_text())
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
        }
        _ => Ok(()),
    }
}

#[derive(Args, Debug)]
pub struct ConvertArgs {
    /// Raw little-endian array
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    height: usize,
    #[arg(long)]
    width: usize,
    #[arg(long)]
    bands: usize,
    /// f32, f64, u16 or i16
    #[arg(long, default_value = "f32")]
    dtype: Dtype,
    /// bsq (band, row, col), bil (row, band, col) or bip (row, col, band)
    #[arg(long, default_value = "bsq")]
    layout: Layout,
    /// none, minmax, percentile:LO,HI or fixed:LO,HI
    #[arg(long, default_value = "none")]
    normalize: String,
    #[command(flatten)]
    common: ConfigArgs,
}

pub fn convert(a: ConvertArgs) -> Result<()> {
    let rule: Normalization = a.normalize.parse()?;
    let cfg = resolve(
        &a.common,
        vec![
            ("paths.input", path_str(&a.input)),
            ("paths.output", path_str(&a.output)),
            ("convert.height", a.height.to_string()),
            ("convert.width", a.width.to_string()),
            ("convert.bands", a.bands.to_string()),
            ("convert.dtype", format!("{:?}", a.dtype).to_lowercase()),
            ("convert.layout", format!("{:?}", a.layout).to_lowercase()),
            ("convert.normalize", rule.to_string()),
        ],
    )?;
    let bytes = fs::read(&a.input).map_err(|e| Error::io(&a.input, e))?;
    let mut cube = decode(&bytes, (a.height, a.width, a.bands), a.dtype, a.layout)?;
    if let Some((lo, hi)) = rule.resolve(std::slice::from_ref(&cube))? {
        cube = normalize(&cube, lo, hi)?;
    }
    ensure_parent(&a.output)?;
    save_cube(&cube, &a.output)?;
    snapshot(&cfg, &a.output)?;
    let (lo, hi) = cube.min_max();
    println!(
        "wrote {}: {}x{}x{} (height x width x bands), values in [{lo}, {hi}]",
        a.output.display(),
        cube.height(),
        cube.width(),
        cube.bands()
    );
    Ok(())
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Dataset manifest (role<TAB>path lines)
    #[arg(long, required_unless_present = "synthetic")]
    manifest: Option<PathBuf>,
    /// Train on N generated low-rank cubes of patch size instead of a manifest
    #[arg(long, conflicts_with = "manifest")]
    synthetic: Option<usize>,
    /// Receives weights, checkpoints, loss.csv and the config snapshot
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Continue from the checkpoint in --out-dir
    #[arg(long)]
    resume: bool,
    #[arg(long)]
    quiet: bool,
    #[command(flatten)]
    common: ConfigArgs,
}

pub fn train(a: TrainArgs) -> Result<()> {
    let mut flags = vec![("paths.out_dir", path_str(&a.out_dir))];
    if let Some(m) = &a.manifest {
        flags.push(("paths.manifest", path_str(m)));
    }
    if let Some(n) = a.synthetic {
        flags.push(("data.synthetic", n.to_string()));
    }
    if let Some(s) = a.steps {
        flags.push(("train.steps", s.to_string()));
    }
    if let Some(b) = a.batch_size {
        flags.push(("train.batch_size", b.to_string()));
    }
    if let Some(lr) = a.learning_rate {
        flags.push(("train.learning_rate", lr.to_string()));
    }
    let cfg = resolve(&a.common, flags)?;
    cfg.train.validate()?;
    let pcfg = cfg.predictor;
    fs::create_dir_all(&a.out_dir).map_err(|e| Error::io(&a.out_dir, e))?;
    cfg.save_snapshot(&a.out_dir)?;

    let pool = if cfg.synthetic > 0 {
        let side = cfg.patch.patch_size;
        low_rank_set(
            cfg.synthetic,
            side,
            side,
            pcfg.bands,
            &SyntheticConfig::default(),
            derive_seed(cfg.train.seed, "synthetic"),
        )?
    } else {
        let path = a
            .manifest
            .as_ref()
            .ok_or_else(|| Error::Argument("--manifest or --synthetic is required".into()))?;
        let manifest = DatasetManifest::load(path)?;
        let (cubes, bounds) = manifest.load_training()?;
        write_text(&a.out_dir.join("manifest.resolved"), &manifest.to_text(bounds))?;
        patch_pool(&cubes, &cfg.patch, derive_seed(cfg.train.seed, "patches"))?
    };
    eprintln!(
        "training on {} patches, {} parameters, {} steps",
        pool.len(),
        pcfg.parameter_count(),
        cfg.train.steps
    );
    let mut log = |it: u64, loss: f64, smooth: f64| {
        eprintln!("iteration {it:>7}  loss {loss:.6}  mean(100) {smooth:.6}");
    };
    let opts = TrainOptions {
        checkpoint_dir: Some(a.out_dir.clone()),
        exec: Execution::default(),
        progress: if a.quiet { None } else { Some(&mut log) },
    };
    let state = if a.resume && a.out_dir.join(CHECKPOINT_WEIGHTS).exists() {
        let state = TrainState::load_checkpoint(&a.out_dir)?;
        if *state.predictor().config() != pcfg {
            return Err(Error::Argument(
                "checkpoint was trained with a different predictor config".into(),
            ));
        }
        trainer::resume(state, &pool, &cfg.train, opts)?
    } else {
        trainer::train(&pool, pcfg, &cfg.train, opts)?
    };
    let out = a.out_dir.join(WEIGHTS_NAME);
    save_weights(state.predictor(), &out)?;
    println!("wrote {} after {} iterations", out.display(), state.iteration());
    Ok(())
}

#[derive(Args, Debug)]
pub struct DenoiseArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    weights: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Step at which the observed cube enters the reverse chain
    #[arg(long)]
    t_cut: Option<usize>,
    /// Drop the sigma_t z_t term
    #[arg(long)]
    deterministic: bool,
    #[command(flatten)]
    common: ConfigArgs,
}

fn sampler_flags(t_cut: Option<usize>, deterministic: bool) -> Vec<(&'static str, String)> {
    let mut f = Vec::new();
    if let Some(t) = t_cut {
        f.push(("sampler.t_cut", t.to_string()));
    }
    if deterministic {
        f.push(("sampler.stochastic", "false".to_string()));
    }
    f
}

/// Loads weights and pins the run config to the network they describe.
fn load_model(cfg: &mut RunConfig, weights: &Path) -> Result<NoisePredictor> {
    let model = load_weights(weights)?;
    cfg.predictor = *model.config();
    cfg.validate()?;
    Ok(model)
}

pub fn denoise(a: DenoiseArgs) -> Result<()> {
    let mut flags = vec![
        ("paths.input", path_str(&a.input)),
        ("paths.weights", path_str(&a.weights)),
        ("paths.output", path_str(&a.output)),
    ];
    flags.extend(sampler_flags(a.t_cut, a.deterministic));
    let mut cfg = resolve(&a.common, flags)?;
    let model = load_model(&mut cfg, &a.weights)?;
    let noisy = load_cube(&a.input)?;
    let groups = band_groups(noisy.bands(), model.config().bands)?;
    eprintln!(
        "denoising {}x{}x{} at t_cut {} with {} band group(s) starting at {:?}",
        noisy.height(),
        noisy.width(),
        noisy.bands(),
        cfg.sampler.t_cut,
        groups.len(),
        groups
    );
    let schedule = cfg.predictor.schedule.build()?;
    let out = denoise_cube(&noisy, &model, &schedule, &cfg.sampler, Execution::default())?;
    ensure_parent(&a.output)?;
    save_cube(&out, &a.output)?;
    snapshot(&cfg, &a.output)?;
    println!("wrote {}", a.output.display());
    Ok(())
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Gaussian noise std on the 8-bit scale, same on every band
    #[arg(long, conflicts_with = "hybrid")]
    awgn: Option<f64>,
    /// Default mixed Gaussian + impulse + stripe degradation
    #[arg(long)]
    hybrid: bool,
    /// Noise spec file (noise.* keys), e.g. a previous run's .noise snapshot
    #[arg(long)]
    spec: Option<PathBuf>,
    #[command(flatten)]
    common: ConfigArgs,
}

pub fn simulate(a: SimulateArgs) -> Result<()> {
    let mut common = a.common.clone();
    let flags = vec![
        ("paths.input", path_str(&a.input)),
        ("paths.output", path_str(&a.output)),
    ];
    let mut spec_layer = Entries::new();
    if a.hybrid {
        spec_layer.extend(NoiseSpec::hybrid(0).to_entries());
        spec_layer.remove("noise.seed");
    }
    if let Some(s) = a.awgn {
        spec_layer.extend(NoiseSpec::awgn(s, 0).to_entries());
        spec_layer.remove("noise.seed");
    }
    if let Some(file) = &a.spec {
        spec_layer.extend(config::load_entries(file)?);
    }
    // spec flags sit under --set so explicit overrides still win
    let overrides = std::mem::take(&mut common.overrides);
    for (k, v) in spec_layer {
        common.overrides.push(format!("{k}={v}"));
    }
    common.overrides.extend(overrides);
    let cfg = resolve(&common, flags)?;
    let clean = load_cube(&a.input)?;
    let noisy = apply_noise(&clean, &cfg.noise)?;
    ensure_parent(&a.output)?;
    save_cube(&noisy, &a.output)?;
    write_text(&sidecar(&a.output, ".noise"), &cfg.noise.to_text())?;
    snapshot(&cfg, &a.output)?;
    println!("wrote {}", a.output.display());
    Ok(())
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[arg(long)]
    reference: PathBuf,
    #[arg(long)]
    estimate: PathBuf,
    /// Append the row to this CSV, writing the header if the file is new
    #[arg(long)]
    output: Option<PathBuf>,
    /// Leading label column, e.g. a method or noise level
    #[arg(long)]
    label: Option<String>,
    /// Print the header line before the row
    #[arg(long)]
    header: bool,
    #[command(flatten)]
    common: ConfigArgs,
}

pub fn evaluate(a: EvaluateArgs) -> Result<()> {
    let mut flags = vec![
        ("paths.reference", path_str(&a.reference)),
        ("paths.estimate", path_str(&a.estimate)),
    ];
    if let Some(o) = &a.output {
        flags.push(("paths.output", path_str(o)));
    }
    let cfg = resolve(&a.common, flags)?;
    let reference = load_cube(&a.reference)?;
    let estimate = load_cube(&a.estimate)?;
    let report = score(&reference, &estimate)?;
    let (header, row) = match &a.label {
        Some(l) => (format!("label,{CSV_HEADER}"), format!("{l},{}", report.to_csv_row())),
        None => (CSV_HEADER.to_string(), report.to_csv_row()),
    };
    if a.header {
        println!("{header}");
    }
    println!("{row}");
    if let Some(path) = &a.output {
        ensure_parent(path)?;
        let fresh = fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        let mut text = String::new();
        if fresh {
            text.push_str(&header);
            text.push('\n');
        }
        text.push_str(&row);
        text.push('\n');
        f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))?;
        snapshot(&cfg, path)?;
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(long)]
    noisy: PathBuf,
    #[arg(long)]
    reference: PathBuf,
    #[arg(long)]
    weights: PathBuf,
    /// Comma-separated truncation steps
    #[arg(long)]
    t_cut_list: Option<String>,
    /// CSV destination; the table is also printed
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    deterministic: bool,
    #[command(flatten)]
    common: ConfigArgs,
}

pub fn sweep(a: SweepArgs) -> Result<()> {
    let mut flags = vec![
        ("paths.input", path_str(&a.noisy)),
        ("paths.reference", path_str(&a.reference)),
        ("paths.weights", path_str(&a.weights)),
        ("paths.output", path_str(&a.output)),
    ];
    if let Some(l) = &a.t_cut_list {
        flags.push(("sweep.t_cuts", l.clone()));
    }
    flags.extend(sampler_flags(None, a.deterministic));
    let mut cfg = resolve(&a.common, flags)?;
    let model = load_model(&mut cfg, &a.weights)?;
    let noisy = load_cube(&a.noisy)?;
    let reference = load_cube(&a.reference)?;
    let schedule = cfg.predictor.schedule.build()?;
    let rows = sweep_t_cut(
        &noisy,
        &reference,
        &model,
        &schedule,
        &cfg.sweep_t_cuts,
        &cfg.sampler,
        Execution::default(),
    )?;
    let csv = sweep_csv(&rows);
    print!("{csv}");
    ensure_parent(&a.output)?;
    write_text(&a.output, &csv)?;
    snapshot(&cfg, &a.output)
}
