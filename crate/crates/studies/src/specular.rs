//! Does the specular lobe disturb the difference estimator?
//!
//! Each cell renders the four orientation scans with specular weight `w_s` and
//! an out-of-plane sensor component `v_cx`, estimates `n_y ∝ I_0 − I_180`, and
//! correlates it with the true `n_y` and with the purely diffuse estimate.
//!
//! The cancellation argument is linear in the Phong cosines. Along a long
//! light the specular cosine goes negative at grazing positions, so the
//! clamped model is reported as well (`clamp = 1`).

use rayon::prelude::*;

use paperprint_core::matching::correlation;
use paperprint_core::normmap::estimate_normmap;
use paperprint_core::optics::{
    render_scan, Orientation, ReflectanceParams, ScanImage, ScannerGeometry,
};
use paperprint_core::synth::{
    generate_surface, normals_from_heightmap, FiberModelParams, NormalField, PITCH_300PPI,
};
use paperprint_core::{rng, Grid, Result};

use crate::config::{SpecularConfig, StudyConfig};
use crate::report::StudyReport;
use crate::Study;

pub struct SpecularStudy;

pub const COLUMNS: &[&str] = &[
    "clamp",
    "w_s",
    "v_cx",
    "corr_truth_mean",
    "corr_vs_diffuse_mean",
    "corr_vs_diffuse_min",
    "corr_vs_diffuse_max",
];

/// `n_y` estimate from four noise-free scans.
pub fn estimate_ny(
    normals: &NormalField,
    geom: &ScannerGeometry,
    params: &ReflectanceParams,
) -> Result<Grid> {
    let scans = Orientation::ALL
        .iter()
        .map(|&o| render_scan(normals, geom, params, o, PITCH_300PPI))
        .collect::<Result<Vec<ScanImage>>>()?;
    Ok(estimate_normmap(&scans)?.ny_scaled)
}

pub fn specular_fields(
    cfg: &SpecularConfig,
    surface: &FiberModelParams,
    seed: u64,
) -> Result<Vec<NormalField>> {
    (0..cfg.n_fields)
        .into_par_iter()
        .map(|i| {
            let params = FiberModelParams {
                seed: rng::derive_seed(seed, &[rng::tag("specular-field"), i as u64]),
                ..surface.clone()
            };
            let hm = generate_surface(&params, cfg.size, cfg.size, PITCH_300PPI)?;
            normals_from_heightmap(&hm, 3)
        })
        .collect()
}

/// Per-field correlations for one `(w_s, v_cx)` cell: `(vs truth, vs diffuse)`.
pub fn cell_correlations(
    fields: &[NormalField],
    w_s: f64,
    v_cx: f64,
    tilt_deg: f64,
    clamp: bool,
) -> Result<Vec<(f64, f64)>> {
    let geom = ScannerGeometry::with_sensor(tilt_deg, v_cx);
    let diffuse_params = ReflectanceParams {
        clamp,
        ..ReflectanceParams::diffuse()
    };
    let params = ReflectanceParams {
        clamp,
        ..ReflectanceParams::with_specular(w_s)
    };
    fields
        .par_iter()
        .map(|nf| {
            let diffuse = estimate_ny(nf, &geom, &diffuse_params)?;
            let est = estimate_ny(nf, &geom, &params)?;
            Ok((correlation(&est, &nf.ny)?, correlation(&est, &diffuse)?))
        })
        .collect()
}

pub fn specular_ablation(
    cfg: &SpecularConfig,
    surface: &FiberModelParams,
    seed: u64,
) -> Result<StudyReport> {
    let fields = specular_fields(cfg, surface, seed)?;
    let mut report = StudyReport::new(
        "specular",
        COLUMNS,
        3,
        seed,
        serde_json::to_value(cfg).expect("config serializes"),
    );
    for &clamp in &cfg.clamp {
        for &w_s in &cfg.specular_weights {
            for &v_cx in &cfg.sensor_vcx {
                let cells = cell_correlations(&fields, w_s, v_cx, cfg.sensor_tilt_deg, clamp)?;
                let n = cells.len() as f64;
                let truth = cells.iter().map(|c| c.0).sum::<f64>() / n;
                let diff: Vec<f64> = cells.iter().map(|c| c.1).collect();
                report.push(vec![
                    if clamp { 1.0 } else { 0.0 },
                    w_s,
                    v_cx,
                    truth,
                    diff.iter().sum::<f64>() / n,
                    diff.iter().cloned().fold(f64::INFINITY, f64::min),
                    diff.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                ])?;
            }
        }
    }
    Ok(report)
}

impl Study for SpecularStudy {
    fn name(&self) -> &'static str {
        "specular"
    }

    fn run(&self, config: &StudyConfig) -> Result<StudyReport> {
        let mut r = specular_ablation(&config.specular, &config.corpus.surface, config.seed)?;
        r.config = config.to_json();
        Ok(r)
    }
}
