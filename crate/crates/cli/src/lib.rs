//! The `paperprint` command line: pipeline stages over grid files, a
//! reference store, and the study runner.
//!
//! Each pipeline stage reads and writes [`gridfile::GridFile`]s tagged with
//! the digest of the [`config::PipelineConfig`] that produced them; a stage
//! refuses inputs made under a different config.

pub mod config;
pub mod error;
pub mod gridfile;
pub mod store;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::Rng;
use serde::Deserialize;

use paperprint_core::acquisition::acquire;
use paperprint_core::normmap::{estimate_normmap, NormMap, NormSource};
use paperprint_core::optics::{Orientation, ScanImage};
use paperprint_core::reconstruct::{feature_from_heightmap, FeatureKind};
use paperprint_core::rng;
use paperprint_core::synth::{generate_surface, FiberModelParams, HeightMap};
use paperprint_studies::{study_by_name, StudyConfig, STUDIES};

use config::PipelineConfig;
use error::{CliError, Result, EXIT_OK, EXIT_REJECT};
use gridfile::GridFile;
use store::{FaultAction, FaultPoint, Store};

/// Environment variable that makes `enroll` abort at a named fault point.
pub const FAULT_ENV: &str = "PAPERPRINT_FAULT";

#[derive(Debug, Parser)]
#[command(
    name = "paperprint",
    version,
    about = "Paper-surface fingerprinting toolkit"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct ConfigArg {
    /// Pipeline config (TOML); defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic surface heightmap.
    Synth {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config seed. Without either a fresh seed is drawn.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 0)]
        patch: usize,
    },
    /// Simulate the four orientation scans of one acquisition.
    Scan {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        surface: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 0)]
        scanner: usize,
        #[arg(long, default_value_t = 0)]
        repeat: usize,
        /// Overrides the seed derived from the surface.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Estimate the two norm-map components from four scans.
    Estimate {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(required = true, num_args = 4)]
        scans: Vec<PathBuf>,
    },
    /// Scale, complete and integrate a norm map into a heightmap.
    Reconstruct {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        nx: PathBuf,
        #[arg(long)]
        ny: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Extract a feature: norm_map_x, norm_map_y, heightmap, detrended or subband(n).
    Feature {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        kind: String,
        #[arg(long)]
        heightmap: Option<PathBuf>,
        #[arg(long)]
        nx: Option<PathBuf>,
        #[arg(long)]
        ny: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Add a reference feature to the store.
    Enroll {
        /// Store directory; defaults to $PAPERPRINT_STORE.
        #[arg(long)]
        store: Option<PathBuf>,
        #[arg(long)]
        id: String,
        feature: PathBuf,
    },
    /// Match a test feature against one record or the whole store.
    Verify {
        #[arg(long)]
        store: Option<PathBuf>,
        #[arg(long)]
        id: Option<String>,
        #[arg(long)]
        threshold: Option<f64>,
        /// JSON with `mu_unmatched` and `mu_matched`; the threshold is their
        /// midpoint. Defaults to `stats.json` in the store.
        #[arg(long)]
        stats: Option<PathBuf>,
        feature: PathBuf,
    },
    /// List enrolled patch ids.
    List {
        #[arg(long)]
        store: Option<PathBuf>,
    },
    /// Run a study and write `<name>.csv` and `<name>.manifest.json`.
    Experiment {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(STUDIES))]
        name: String,
        /// Study config (TOML); defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Collect study summaries from manifests into one CSV.
    Report {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// What a command printed and the exit code it asks for.
#[derive(Debug, Default)]
pub struct Outcome {
    pub stdout: String,
    pub code: i32,
}

impl Outcome {
    fn ok(stdout: String) -> Self {
        Self {
            stdout,
            code: EXIT_OK,
        }
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(CliError::io(dir))
}

fn read_checked(cfg: &PipelineConfig, path: &Path) -> Result<GridFile> {
    let f = GridFile::read(path)?;
    cfg.check_input(&f, &path.display().to_string())?;
    Ok(f)
}

fn stamp(file: GridFile, cfg: &PipelineConfig, source: &str, pitch: f64, seed: u64) -> GridFile {
    file.with("config_digest", cfg.digest())
        .with("source", source)
        .with("pixel_pitch", pitch)
        .with("seed", seed)
}

fn scan_file_name(o: Orientation) -> String {
    format!("scan_{:03}.pgrd", o.degrees())
}

pub fn cmd_synth(cfg: &PipelineConfig, out: &Path, seed: Option<u64>, patch: usize) -> Result<u64> {
    let base = seed.or(cfg.seed).unwrap_or_else(|| rand::rng().random());
    let surface_seed = cfg.corpus_spec(base).surface_seed(patch);
    let params = FiberModelParams {
        seed: surface_seed,
        ..cfg.surface.clone()
    };
    let hm = generate_surface(&params, cfg.rows, cfg.cols, cfg.pixel_pitch)?;
    stamp(
        GridFile::new(hm.heights),
        cfg,
        "synth",
        hm.pixel_pitch,
        base,
    )
    .with("kind", "surface")
    .with("units", "um")
    .with("patch", patch)
    .with("surface_seed", surface_seed)
    .write(out)?;
    Ok(base)
}

pub fn cmd_scan(
    cfg: &PipelineConfig,
    surface: &Path,
    out_dir: &Path,
    scanner: usize,
    repeat: usize,
    seed: Option<u64>,
) -> Result<Vec<PathBuf>> {
    let f = read_checked(cfg, surface)?;
    let pitch: f64 = f.require("pixel_pitch")?;
    let surface_seed: u64 = f.require("surface_seed")?;
    let seed = seed.unwrap_or_else(|| {
        rng::derive_seed(
            surface_seed,
            &[rng::tag("acquisition"), scanner as u64, repeat as u64],
        )
    });
    let profile = cfg.scanner(scanner)?;
    let hm = HeightMap::new(f.grid, pitch)?;
    let scans = acquire(&hm, profile, &cfg.model.handling, seed)?;
    create_dir(out_dir)?;
    let mut paths = Vec::new();
    for s in scans {
        let path = out_dir.join(scan_file_name(s.orientation));
        stamp(GridFile::new(s.intensities), cfg, "scan", pitch, seed)
            .with("kind", "scan")
            .with("orientation", s.orientation.degrees())
            .with("scanner", &profile.name)
            .write(&path)?;
        paths.push(path);
    }
    Ok(paths)
}

pub fn cmd_estimate(
    cfg: &PipelineConfig,
    scans: &[PathBuf],
    out_dir: &Path,
) -> Result<[PathBuf; 2]> {
    let mut images = Vec::with_capacity(scans.len());
    let mut seed = 0;
    for p in scans {
        let f = read_checked(cfg, p)?;
        let deg: u16 = f.require("orientation")?;
        seed = f.require("seed")?;
        images.push(ScanImage {
            orientation: Orientation::from_degrees(deg)?,
            pixel_pitch: f.require("pixel_pitch")?,
            intensities: f.grid,
        });
    }
    let pitch = images[0].pixel_pitch;
    let nm = estimate_normmap(&images)?;
    create_dir(out_dir)?;
    let nx = out_dir.join("normmap_x.pgrd");
    let ny = out_dir.join("normmap_y.pgrd");
    for (path, grid, kind) in [
        (&nx, nm.nx_scaled, "normmap_x"),
        (&ny, nm.ny_scaled, "normmap_y"),
    ] {
        stamp(GridFile::new(grid), cfg, "estimate", pitch, seed)
            .with("kind", kind)
            .write(path)?;
    }
    Ok([nx, ny])
}

fn read_normmap(cfg: &PipelineConfig, nx: &Path, ny: &Path) -> Result<(NormMap, f64, u64)> {
    let fx = read_checked(cfg, nx)?;
    let fy = read_checked(cfg, ny)?;
    let pitch = fx.require("pixel_pitch")?;
    let seed = fx.require("seed")?;
    Ok((
        NormMap::new(fx.grid, fy.grid, NormSource::Scanner)?,
        pitch,
        seed,
    ))
}

pub fn cmd_reconstruct(cfg: &PipelineConfig, nx: &Path, ny: &Path, out: &Path) -> Result<()> {
    let (nm, pitch, seed) = read_normmap(cfg, nx, ny)?;
    let est = cfg.pipeline()?.estimate_from(nm, pitch)?;
    stamp(
        GridFile::new(est.heightmap.heights),
        cfg,
        "reconstruct",
        pitch,
        seed,
    )
    .with("kind", "heightmap")
    .with("units", "um")
    .with("alpha", est.alpha)
    .with("clamped", est.clamped)
    .write(out)
}

pub fn cmd_feature(
    cfg: &PipelineConfig,
    kind: FeatureKind,
    heightmap: Option<&Path>,
    normmap: Option<(&Path, &Path)>,
    out: &Path,
) -> Result<()> {
    let (grid, pitch, seed) = match kind {
        FeatureKind::NormMapX | FeatureKind::NormMapY => {
            let (nx, ny) =
                normmap.ok_or_else(|| CliError::Invalid(format!("{kind} needs --nx and --ny")))?;
            let (nm, pitch, seed) = read_normmap(cfg, nx, ny)?;
            let g = if kind == FeatureKind::NormMapX {
                nm.nx_scaled
            } else {
                nm.ny_scaled
            };
            (g, pitch, seed)
        }
        _ => {
            let path =
                heightmap.ok_or_else(|| CliError::Invalid(format!("{kind} needs --heightmap")))?;
            let f = read_checked(cfg, path)?;
            let pitch = f.require("pixel_pitch")?;
            let seed = f.require("seed")?;
            let hm = HeightMap::new(f.grid, pitch)?;
            (
                feature_from_heightmap(&hm, kind, &cfg.features)?,
                pitch,
                seed,
            )
        }
    };
    stamp(GridFile::new(grid), cfg, "feature", pitch, seed)
        .with("kind", "feature")
        .with("feature_kind", kind)
        .write(out)
}

#[derive(Debug, Deserialize)]
struct Calibration {
    mu_unmatched: f64,
    mu_matched: f64,
}

/// `explicit`, else the midpoint of the calibrated means in `stats` or the
/// store's `stats.json`.
pub fn resolve_threshold(
    store: &Store,
    explicit: Option<f64>,
    stats: Option<&Path>,
) -> Result<f64> {
    if let Some(t) = explicit {
        if !t.is_finite() {
            return Err(CliError::Invalid(format!("threshold {t} is not finite")));
        }
        return Ok(t);
    }
    let path = stats
        .map(Path::to_path_buf)
        .unwrap_or_else(|| store.root().join("stats.json"));
    let text = fs::read(&path).map_err(|e| {
        CliError::Invalid(format!(
            "no threshold given and no calibration at {}: {e}",
            path.display()
        ))
    })?;
    let c: Calibration = serde_json::from_slice(&text)
        .map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
    Ok(0.5 * (c.mu_unmatched + c.mu_matched))
}

fn fault_from_env() -> Result<Option<(FaultPoint, FaultAction)>> {
    match std::env::var(FAULT_ENV) {
        Ok(v) => FaultPoint::parse(&v)
            .map(|p| Some((p, FaultAction::Abort)))
            .ok_or_else(|| CliError::Invalid(format!("{FAULT_ENV}={v} names no fault point"))),
        Err(_) => Ok(None),
    }
}

pub fn cmd_experiment(
    name: &str,
    config: Option<&Path>,
    seed: Option<u64>,
    out_dir: &Path,
) -> Result<[PathBuf; 2]> {
    let study = study_by_name(name)?;
    let mut cfg = match config {
        Some(p) => StudyConfig::from_toml(&fs::read_to_string(p).map_err(CliError::io(p))?)?,
        None => StudyConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let report = study.run(&cfg)?;
    create_dir(out_dir)?;
    let csv = out_dir.join(format!("{name}.csv"));
    let manifest = out_dir.join(format!("{name}.manifest.json"));
    fs::write(&csv, report.to_csv_string()?).map_err(CliError::io(&csv))?;
    let text = serde_json::to_string_pretty(&report.manifest()).expect("manifest serializes");
    fs::write(&manifest, text + "\n").map_err(CliError::io(&manifest))?;
    Ok([csv, manifest])
}

/// Long-form `study,key,value` rows from every `*.manifest.json` in `dir`.
pub fn cmd_report(dir: &Path) -> Result<String> {
    let mut rows: BTreeMap<(String, String), String> = BTreeMap::new();
    let entries = fs::read_dir(dir).map_err(CliError::io(dir))?;
    for e in entries {
        let path = e.map_err(CliError::io(dir))?.path();
        if !path.to_string_lossy().ends_with(".manifest.json") {
            continue;
        }
        let text = fs::read(&path).map_err(CliError::io(&path))?;
        let m: serde_json::Value = serde_json::from_slice(&text)
            .map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
        let study = m["study"].as_str().unwrap_or("unknown").to_string();
        rows.insert((study.clone(), "seed".into()), m["seed"].to_string());
        rows.insert((study.clone(), "rows".into()), m["rows"].to_string());
        if let Some(summary) = m["summary"].as_object() {
            for (k, v) in summary {
                rows.insert((study.clone(), k.clone()), v.to_string());
            }
        }
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let bad = |e: csv::Error| CliError::Invalid(format!("csv: {e}"));
    w.write_record(["study", "key", "value"]).map_err(bad)?;
    for ((study, key), value) in rows {
        w.write_record([study, key, value]).map_err(bad)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::Invalid(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv of UTF-8 fields"))
}

fn lines(paths: &[PathBuf]) -> String {
    paths.iter().map(|p| format!("{}\n", p.display())).collect()
}

pub fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Synth {
            config,
            out,
            seed,
            patch,
        } => {
            let cfg = PipelineConfig::load(config.config.as_deref())?;
            let seed = cmd_synth(&cfg, &out, seed, patch)?;
            Ok(Outcome::ok(format!("{} seed={seed}\n", out.display())))
        }
        Command::Scan {
            config,
            surface,
            out_dir,
            scanner,
            repeat,
            seed,
        } => {
            let cfg = PipelineConfig::load(config.config.as_deref())?;
            let paths = cmd_scan(&cfg, &surface, &out_dir, scanner, repeat, seed)?;
            Ok(Outcome::ok(lines(&paths)))
        }
        Command::Estimate {
            config,
            out_dir,
            scans,
        } => {
            let cfg = PipelineConfig::load(config.config.as_deref())?;
            Ok(Outcome::ok(lines(&cmd_estimate(&cfg, &scans, &out_dir)?)))
        }
        Command::Reconstruct {
            config,
            nx,
            ny,
            out,
        } => {
            let cfg = PipelineConfig::load(config.config.as_deref())?;
            cmd_reconstruct(&cfg, &nx, &ny, &out)?;
            Ok(Outcome::ok(lines(&[out])))
        }
        Command::Feature {
            config,
            kind,
            heightmap,
            nx,
            ny,
            out,
        } => {
            let cfg = PipelineConfig::load(config.config.as_deref())?;
            let kind: FeatureKind = kind.parse()?;
            let normmap = match (nx.as_deref(), ny.as_deref()) {
                (Some(x), Some(y)) => Some((x, y)),
                (None, None) => None,
                _ => return Err(CliError::Invalid("--nx and --ny go together".into())),
            };
            cmd_feature(&cfg, kind, heightmap.as_deref(), normmap, &out)?;
            Ok(Outcome::ok(lines(&[out])))
        }
        Command::Enroll { store, id, feature } => {
            let store = Store::locate(store.as_deref())?;
            let f = GridFile::read(&feature)?;
            let r = store.enroll_with_fault(&id, &f, fault_from_env()?)?;
            Ok(Outcome::ok(format!(
                "enrolled {} ({})\n",
                r.patch_id, r.feature_kind
            )))
        }
        Command::Verify {
            store,
            id,
            threshold,
            stats,
            feature,
        } => {
            let store = Store::locate(store.as_deref())?;
            let threshold = resolve_threshold(&store, threshold, stats.as_deref())?;
            let test = GridFile::read(&feature)?;
            let v = store.verify(&test.grid, id.as_deref(), threshold)?;
            let out = serde_json::json!({
                "patch_id": v.best.patch_id,
                "score": v.best.score,
                "threshold": v.threshold,
                "decision": if v.accept { "accept" } else { "reject" },
            });
            Ok(Outcome {
                stdout: format!("{out}\n"),
                code: if v.accept { EXIT_OK } else { EXIT_REJECT },
            })
        }
        Command::List { store } => {
            let store = Store::locate(store.as_deref())?;
            let m = store.manifest()?;
            Ok(Outcome::ok(
                m.records
                    .iter()
                    .map(|r| format!("{}\t{}\n", r.patch_id, r.feature_kind))
                    .collect(),
            ))
        }
        Command::Experiment {
            name,
            config,
            seed,
            out_dir,
        } => Ok(Outcome::ok(lines(&cmd_experiment(
            &name,
            config.as_deref(),
            seed,
            &out_dir,
        )?))),
        Command::Report { dir, out } => {
            let csv = cmd_report(&dir)?;
            match out {
                Some(p) => {
                    fs::write(&p, &csv).map_err(CliError::io(&p))?;
                    Ok(Outcome::ok(lines(&[p])))
                }
                None => Ok(Outcome::ok(csv)),
            }
        }
    }
}
