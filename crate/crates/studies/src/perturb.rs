//! Registration robustness: every scan of the test side is rectified from
//! corners jittered by `N(0, L²)` per coordinate, then re-estimated and
//! matched against unperturbed references.
//!
//! Surfaces carry a `margin` px border so the jittered quadrilateral stays on
//! the scan. The true corners are the same axis-aligned square in every scan
//! frame, so `L = 0` rectification is an exact crop.

use rayon::prelude::*;

use paperprint_core::acquisition::{
    acquire, reference_component_std, AcquisitionId, CorpusSpec, FeaturePipeline, PairDesign,
};
use paperprint_core::matching::{
    correlation, hypothesis_stats, log10_eer_gaussian, log10_eer_laplace, MatchStats,
};
use paperprint_core::optics::ScanImage;
use paperprint_core::reconstruct::FeatureKind;
use paperprint_core::registration::{perturb_corners, rectify, CornerSet};
use paperprint_core::synth::HeightMap;
use paperprint_core::{invalid, rng, Grid, Result};

use crate::blocks::design_by_name;
use crate::config::{PerturbConfig, StudyConfig};
use crate::report::StudyReport;
use crate::Study;

pub struct PerturbationStudy;

pub const COLUMNS: &[&str] = &[
    "L",
    "subband",
    "mu0",
    "sigma0",
    "mu1",
    "sigma1",
    "log10_eer_g",
    "log10_eer_l",
];

/// Raw scans of every acquisition plus what is needed to rectify them.
pub struct ScanSet {
    pub ids: Vec<AcquisitionId>,
    pub scans: Vec<Vec<ScanImage>>,
    pub corners: CornerSet,
    pub patch_size: usize,
    pub pipeline: FeaturePipeline,
}

pub fn acquire_scan_set(
    spec: &CorpusSpec,
    surfaces: &[HeightMap],
    margin: usize,
) -> Result<ScanSet> {
    let (rows, cols) = surfaces[0].shape();
    if rows != cols || rows <= 2 * margin {
        return Err(invalid(
            "surfaces",
            format!("{rows}x{cols} cannot hold a square patch with margin {margin}"),
        ));
    }
    let spec = CorpusSpec {
        patches: surfaces.len(),
        ..spec.clone()
    };
    let ids = spec.acquisition_ids();
    let scans = ids
        .par_iter()
        .map(|&id| {
            acquire(
                &surfaces[id.patch],
                &spec.model.scanners[id.scanner],
                &spec.model.handling,
                spec.acquisition_seed(id),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let patch_size = rows - 2 * margin;
    let m = margin as f64;
    Ok(ScanSet {
        ids,
        scans,
        corners: CornerSet::axis_aligned(m, m, patch_size as f64, patch_size as f64),
        patch_size,
        pipeline: FeaturePipeline::new(reference_component_std(surfaces)?),
    })
}

impl ScanSet {
    /// Features after rectifying each scan from its own jittered corners.
    /// Jitter draws depend on `(seed, trial)` but not on `l`.
    pub fn features(
        &self,
        kinds: &[FeatureKind],
        l: f64,
        trial: usize,
        seed: u64,
    ) -> Result<Vec<Vec<Grid>>> {
        self.scans
            .par_iter()
            .enumerate()
            .map(|(i, scans)| {
                let rectified = scans
                    .iter()
                    .map(|s| {
                        let key = rng::derive_seed(
                            seed,
                            &[
                                rng::tag("perturb"),
                                trial as u64,
                                i as u64,
                                s.orientation.degrees() as u64,
                            ],
                        );
                        let corners = perturb_corners(&self.corners, l, key)?;
                        Ok(ScanImage {
                            intensities: rectify(&s.intensities, &corners, self.patch_size)?,
                            ..s.clone()
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                let est = self.pipeline.estimate(&rectified)?;
                kinds
                    .iter()
                    .map(|&k| self.pipeline.feature(&est, k))
                    .collect()
            })
            .collect()
    }
}

/// Scores of reference features against test features for every pair.
pub fn cross_scores(
    reference: &[Grid],
    test: &[Grid],
    pairs: &[(usize, usize)],
) -> Result<Vec<f64>> {
    pairs
        .par_iter()
        .map(|&(a, b)| correlation(&reference[a], &test[b]))
        .collect()
}

fn stats_for(reference: &[Grid], tests: &[Vec<Grid>], design: &PairDesign) -> Result<MatchStats> {
    let (mut m, mut u) = (Vec::new(), Vec::new());
    for t in tests {
        m.extend(cross_scores(reference, t, &design.matched)?);
        u.extend(cross_scores(reference, t, &design.unmatched)?);
    }
    hypothesis_stats(&m, &u)
}

pub fn perturbation_study(set: &ScanSet, cfg: &PerturbConfig, seed: u64) -> Result<StudyReport> {
    if cfg.l_values.iter().any(|&l| !(l >= 0.0)) {
        return Err(invalid("l_values", "must be non-negative"));
    }
    if cfg.subbands.is_empty() || cfg.trials == 0 {
        return Err(invalid(
            "perturb",
            "needs at least one subband and one trial",
        ));
    }
    let design = design_by_name(&cfg.unmatched_design, &set.ids, seed)?;
    let kinds: Vec<FeatureKind> = cfg
        .subbands
        .iter()
        .map(|&n| FeatureKind::Subband(n))
        .collect();
    let base = set.features(&kinds, 0.0, 0, seed)?;
    let per_kind = |k: usize| -> Vec<Grid> { base.iter().map(|f| f[k].clone()).collect() };

    let mut best = (0usize, f64::INFINITY);
    for k in 0..kinds.len() {
        let f = per_kind(k);
        let g = log10_eer_gaussian(&stats_for(&f, &[f.clone()], &design)?)?;
        if g < best.1 {
            best = (k, g);
        }
    }
    let kind = kinds[best.0];
    let reference = per_kind(best.0);

    let mut report = StudyReport::new(
        "perturb",
        COLUMNS,
        1,
        seed,
        serde_json::to_value(cfg).expect("config serializes"),
    );
    for &l in &cfg.l_values {
        let tests = if l == 0.0 {
            vec![reference.clone()]
        } else {
            (0..cfg.trials)
                .map(|t| {
                    let f = set.features(&[kind], l, t, seed)?;
                    Ok(f.into_iter().map(|mut v| v.remove(0)).collect())
                })
                .collect::<Result<Vec<Vec<Grid>>>>()?
        };
        let s = stats_for(&reference, &tests, &design)?;
        report.push(vec![
            l,
            cfg.subbands[best.0] as f64,
            s.mu_unmatched,
            s.sigma_unmatched,
            s.mu_matched,
            s.sigma_matched,
            log10_eer_gaussian(&s)?,
            log10_eer_laplace(&s)?,
        ])?;
    }
    summarize(&mut report)?;
    Ok(report)
}

/// Band and monotonicity checks against the `L = 0` row.
fn summarize(report: &mut StudyReport) -> Result<()> {
    let missing = |c: &str| invalid("column", format!("{c} missing"));
    let l = report.column("L").ok_or_else(|| missing("L"))?;
    for (col, name) in [("log10_eer_l", "laplace"), ("log10_eer_g", "gaussian")] {
        let v = report.column(col).ok_or_else(|| missing(col))?;
        let Some(b) = l.iter().position(|&x| x == 0.0) else {
            continue;
        };
        let dev = l
            .iter()
            .zip(&v)
            .filter(|(&x, _)| x <= 0.3 + 1e-9)
            .map(|(_, &e)| (e - v[b]).abs())
            .fold(0.0, f64::max);
        let tail: Vec<f64> = l
            .iter()
            .zip(&v)
            .filter(|(&x, _)| x >= 0.4 - 1e-9)
            .map(|(_, &e)| e)
            .collect();
        let increasing = tail.windows(2).all(|w| w[1] > w[0]);
        report.summary.insert(format!("{name}_baseline"), v[b]);
        report
            .summary
            .insert(format!("{name}_max_dev_small_l"), dev);
        report.summary.insert(
            format!("{name}_increasing_large_l"),
            if increasing { 1.0 } else { 0.0 },
        );
    }
    Ok(())
}

pub fn run_perturb(cfg: &PerturbConfig, config: &StudyConfig) -> Result<StudyReport> {
    let base = config.corpus_spec(cfg.patches);
    let spec = CorpusSpec {
        rows: base.rows + 2 * cfg.margin,
        cols: base.cols + 2 * cfg.margin,
        ..base
    };
    let set = acquire_scan_set(&spec, &spec.surfaces()?, cfg.margin)?;
    let mut report = perturbation_study(&set, cfg, config.seed)?;
    report.config = config.to_json();
    Ok(report)
}

impl Study for PerturbationStudy {
    fn name(&self) -> &'static str {
        "perturb"
    }

    fn run(&self, config: &StudyConfig) -> Result<StudyReport> {
        run_perturb(&config.perturb, config)
    }
}
