//! Block cutting: how score distributions and EERs change when each feature
//! is repeatedly cut into four equal blocks.
//!
//! Level 0 is the centered root crop. At level `n` every pair contributes
//! `4^n` block correlations, compared block-for-block.

use rayon::prelude::*;

use paperprint_core::acquisition::{build_corpus, PairDesign};
use paperprint_core::matching::{
    correlation, hypothesis_stats, log10_eer_gaussian, log10_eer_laplace, MatchStats,
};
use paperprint_core::{invalid, Error, Grid, Result};

use crate::config::{BlocksConfig, StudyConfig};
use crate::report::StudyReport;
use crate::stats::linear_fit;
use crate::Study;

pub struct BlockCutStudy;

pub const MIN_BLOCK_EDGE: usize = 16;

pub const COLUMNS: &[&str] = &[
    "level",
    "edge_px",
    "mu0",
    "sigma0",
    "mu1",
    "sigma1",
    "log10_eer_g",
    "log10_eer_l",
    "std_ratio0",
    "std_ratio1",
    "var_ratio0",
    "var_ratio1",
    "log10_eer_l_eq13",
];

/// Block-for-block correlations of `pairs` at cut level `level`.
pub fn level_scores(roots: &[Grid], pairs: &[(usize, usize)], level: u32) -> Result<Vec<f64>> {
    let per_side = 1usize << level;
    let per_pair: Vec<Vec<f64>> = pairs
        .par_iter()
        .map(|&(a, b)| {
            let ta = roots[a].tiles(per_side)?;
            let tb = roots[b].tiles(per_side)?;
            ta.iter().zip(&tb).map(|(x, y)| correlation(x, y)).collect()
        })
        .collect::<Result<_>>()?;
    Ok(per_pair.into_iter().flatten().collect())
}

/// Root crop whose edge halves cleanly `max_cuts` times.
pub fn root_crops(features: &[Grid], root_fraction: f64, max_cuts: usize) -> Result<Vec<Grid>> {
    let unit = 1usize << max_cuts;
    features
        .iter()
        .map(|g| {
            let (rows, cols) = g.shape();
            let er = ((rows as f64 * root_fraction).round() as usize) / unit * unit;
            let ec = ((cols as f64 * root_fraction).round() as usize) / unit * unit;
            if er == 0 || ec == 0 {
                return Err(invalid("root_fraction", "root crop is empty"));
            }
            g.crop((rows - er) / 2, (cols - ec) / 2, er, ec)
        })
        .collect()
}

pub fn design_by_name(
    name: &str,
    ids: &[paperprint_core::acquisition::AcquisitionId],
    seed: u64,
) -> Result<PairDesign> {
    match name {
        "all_patch_pairs" => Ok(PairDesign::all_patch_pairs(ids)),
        "one_partner" => Ok(PairDesign::new(ids, seed)),
        other => Err(Error::UnknownName {
            kind: "pair design",
            name: other.to_string(),
        }),
    }
}

/// Per-level statistics of the block-cut experiment.
pub fn block_cut_study(
    features: &[Grid],
    design: &PairDesign,
    max_cuts: usize,
    root_fraction: f64,
    seed: u64,
) -> Result<StudyReport> {
    if !(root_fraction > 0.0 && root_fraction <= 1.0) {
        return Err(invalid("root_fraction", "must lie in (0, 1]"));
    }
    let roots = root_crops(features, root_fraction, max_cuts)?;
    let root_edge = roots[0].rows().min(roots[0].cols());
    let mut levels = Vec::new();
    for level in 0..=max_cuts as u32 {
        let edge = root_edge >> level;
        if edge < MIN_BLOCK_EDGE {
            break;
        }
        let matched = level_scores(&roots, &design.matched, level)?;
        let unmatched = level_scores(&roots, &design.unmatched, level)?;
        levels.push((level, edge, hypothesis_stats(&matched, &unmatched)?));
    }

    let cfg = serde_json::json!({ "max_cuts": max_cuts, "root_fraction": root_fraction });
    let mut report = StudyReport::new("blocks", COLUMNS, 1, seed, cfg);
    let base = &levels[0].2;
    let mean_ratio = |f: fn(&MatchStats) -> f64| -> f64 {
        let last = &levels[levels.len() - 1];
        if last.0 == 0 {
            return 1.0;
        }
        (f(&last.2) / f(base)).powf(1.0 / last.0 as f64)
    };
    let r0 = mean_ratio(|s| s.sigma_unmatched);
    let r1 = mean_ratio(|s| s.sigma_matched);
    let mut prev: Option<&MatchStats> = None;
    let (mut edges, mut log_l, mut log_g) = (Vec::new(), Vec::new(), Vec::new());
    let (mut dmu0, mut dmu1, mut eq13_err) = (0.0f64, 0.0f64, 0.0f64);
    for (level, edge, s) in &levels {
        let g = log10_eer_gaussian(s)?;
        let l = log10_eer_laplace(s)?;
        let n = *level as i32;
        let eq13 = (0.5f64).log10()
            + std::f64::consts::SQRT_2 * (base.mu_unmatched - base.mu_matched)
                / (r0.powi(n) * base.sigma_unmatched + r1.powi(n) * base.sigma_matched)
                / std::f64::consts::LN_10;
        let (sr0, sr1) = match prev {
            Some(p) => (
                s.sigma_unmatched / p.sigma_unmatched,
                s.sigma_matched / p.sigma_matched,
            ),
            None => (f64::NAN, f64::NAN),
        };
        report.push(vec![
            *level as f64,
            *edge as f64,
            s.mu_unmatched,
            s.sigma_unmatched,
            s.mu_matched,
            s.sigma_matched,
            g,
            l,
            sr0,
            sr1,
            sr0 * sr0,
            sr1 * sr1,
            eq13,
        ])?;
        edges.push(*edge as f64);
        log_l.push(l);
        log_g.push(g);
        dmu0 = dmu0.max((s.mu_unmatched - base.mu_unmatched).abs());
        dmu1 = dmu1.max((s.mu_matched - base.mu_matched).abs());
        eq13_err = eq13_err.max((eq13 - l).abs());
        prev = Some(s);
    }
    if edges.len() >= 2 {
        let fl = linear_fit(&edges, &log_l)?;
        let fg = linear_fit(&edges, &log_g)?;
        report
            .summary
            .insert("laplace_slope_per_px".into(), fl.slope);
        report.summary.insert("laplace_r2".into(), fl.r_squared);
        report
            .summary
            .insert("gaussian_slope_per_px".into(), fg.slope);
        report.summary.insert("gaussian_r2".into(), fg.r_squared);
    }
    report.summary.insert("max_abs_dmu0".into(), dmu0);
    report.summary.insert("max_abs_dmu1".into(), dmu1);
    report.summary.insert("mean_std_ratio0".into(), r0);
    report.summary.insert("mean_std_ratio1".into(), r1);
    report
        .summary
        .insert("eq13_max_abs_log10_error".into(), eq13_err);
    Ok(report)
}

pub fn run_blocks(cfg: &BlocksConfig, config: &StudyConfig) -> Result<StudyReport> {
    let corpus = build_corpus(&config.corpus_spec(cfg.patches))?;
    let features = corpus.features(cfg.feature)?;
    let design = design_by_name(&cfg.unmatched_design, &corpus.ids, corpus.spec.seed)?;
    let mut report = block_cut_study(
        &features,
        &design,
        cfg.max_cuts,
        cfg.root_fraction,
        config.seed,
    )?;
    report.config = config.to_json();
    Ok(report)
}

impl Study for BlockCutStudy {
    fn name(&self) -> &'static str {
        "blocks"
    }

    fn run(&self, config: &StudyConfig) -> Result<StudyReport> {
        run_blocks(&config.blocks, config)
    }
}
