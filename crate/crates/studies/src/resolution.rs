//! Surface tilt versus scan resolution: a fine source surface is block-averaged
//! to each working pixel size and `sin θ` of its plane-fit normals summarized.

use rayon::prelude::*;

use paperprint_core::synth::{
    generate_surface, normals_from_heightmap, ppi_to_pitch, FiberModelParams, HeightMap,
};
use paperprint_core::{invalid, rng, Result};

use crate::config::{ResolutionConfig, StudyConfig};
use crate::report::StudyReport;
use crate::stats::mean_std;
use crate::Study;

pub struct ResolutionStudy;

pub const COLUMNS: &[&str] = &["ppi", "factor", "pixels", "mean_sin_theta", "std_sin_theta"];

/// Integer block-average factor taking `source_ppi` to `ppi`.
pub fn downsample_factor(source_ppi: f64, ppi: f64) -> Result<usize> {
    if !(ppi > 0.0) || !(source_ppi > 0.0) {
        return Err(invalid("ppi", "must be positive"));
    }
    if ppi > source_ppi {
        return Err(invalid(
            "ppi",
            format!("{ppi} is finer than the {source_ppi} ppi source"),
        ));
    }
    let f = source_ppi / ppi;
    let k = f.round();
    if (f - k).abs() > 1e-9 {
        return Err(invalid(
            "ppi",
            format!("{source_ppi}/{ppi} is not an integer"),
        ));
    }
    Ok(k as usize)
}

/// `sin θ` values of the plane-fit normals of `hm` block-averaged by `factor`.
pub fn sin_theta_at(hm: &HeightMap, factor: usize) -> Result<Vec<f64>> {
    let coarse = if factor == 1 {
        hm.clone()
    } else {
        hm.downsample(factor)?
    };
    Ok(normals_from_heightmap(&coarse, 3)?.sin_theta().into_data())
}

pub fn resolution_study(
    sources: &[HeightMap],
    source_ppi: f64,
    ppis: &[f64],
    seed: u64,
) -> Result<StudyReport> {
    if sources.is_empty() {
        return Err(invalid("surfaces", "need at least one source surface"));
    }
    let mut report = StudyReport::new(
        "resolution",
        COLUMNS,
        1,
        seed,
        serde_json::json!({ "source_ppi": source_ppi, "ppi": ppis }),
    );
    for &ppi in ppis {
        let factor = downsample_factor(source_ppi, ppi)?;
        let per: Vec<Vec<f64>> = sources
            .par_iter()
            .map(|hm| sin_theta_at(hm, factor))
            .collect::<Result<_>>()?;
        let all: Vec<f64> = per.into_iter().flatten().collect();
        let (m, s) = mean_std(&all);
        report.push(vec![ppi, factor as f64, all.len() as f64, m, s])?;
    }
    let means = report.column("mean_sin_theta").unwrap_or_default();
    let monotone = report
        .rows
        .iter()
        .zip(report.rows.iter().skip(1))
        .all(|(a, b)| b[0] < a[0] || b[3] >= a[3]);
    report
        .summary
        .insert("monotone_in_ppi".into(), if monotone { 1.0 } else { 0.0 });
    if let Some(i) = ppis.iter().position(|&p| p == 300.0) {
        report.summary.insert("mean_sin_theta_300".into(), means[i]);
    }
    Ok(report)
}

pub fn source_surfaces(
    cfg: &ResolutionConfig,
    surface: &FiberModelParams,
    seed: u64,
) -> Result<Vec<HeightMap>> {
    let pitch = ppi_to_pitch(cfg.source_ppi);
    (0..cfg.surfaces)
        .map(|i| {
            let params = FiberModelParams {
                seed: rng::derive_seed(seed, &[rng::tag("resolution-source"), i as u64]),
                ..surface.clone()
            };
            generate_surface(&params, cfg.source_size, cfg.source_size, pitch)
        })
        .collect()
}

pub fn run_resolution(cfg: &ResolutionConfig, config: &StudyConfig) -> Result<StudyReport> {
    let sources = source_surfaces(cfg, &config.corpus.surface, config.seed)?;
    let mut report = resolution_study(&sources, cfg.source_ppi, &cfg.ppi, config.seed)?;
    report.config = config.to_json();
    Ok(report)
}

impl Study for ResolutionStudy {
    fn name(&self) -> &'static str {
        "resolution"
    }

    fn run(&self, config: &StudyConfig) -> Result<StudyReport> {
        run_resolution(&config.resolution, config)
    }
}
