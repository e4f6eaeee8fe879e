//! Are the correlations of a block's four quadrants correlated with each
//! other across pairs? Near zero for unmatched pairs, positive for matched.
//!
//! The six `Corr(ρᵢ, ρᵢ′)` values are Fisher-z transformed and tested against
//! zero with a one-sample t-test.

use rand::seq::SliceRandom;
use rayon::prelude::*;

use paperprint_core::acquisition::{build_corpus, PairDesign};
use paperprint_core::matching::{correlation, correlation_slices};
use paperprint_core::{invalid, rng, Grid, Result};

use crate::config::{CovarianceConfig, StudyConfig};
use crate::report::StudyReport;
use crate::residual::quadrant_correlations;
use crate::stats::{fisher_z, one_sample_t, TTest, Tail};
use crate::Study;

pub struct CovarianceStudy;

pub const MIN_PAIRS: usize = 20;

pub const COLUMNS: &[&str] = &[
    "hypothesis",
    "pairs",
    "mean_quadrant_corr",
    "t",
    "df",
    "p_value",
    "quadrant_var_ratio",
];

/// Whole-block and quadrant correlations of one pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairCorrelations {
    pub whole: f64,
    pub quadrants: [f64; 4],
}

pub fn pair_correlations(
    roots: &[Grid],
    pairs: &[(usize, usize)],
) -> Result<Vec<PairCorrelations>> {
    pairs
        .par_iter()
        .map(|&(a, b)| {
            Ok(PairCorrelations {
                whole: correlation(&roots[a], &roots[b])?,
                quadrants: quadrant_correlations(&roots[a], &roots[b])?,
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CovarianceTest {
    pub pairs: usize,
    /// Mean of the six `Corr(ρᵢ, ρᵢ′)`.
    pub mean_corr: f64,
    pub test: TTest,
    /// Mean over quadrants of `Var(ρᵢ) / Var(ρ)`.
    pub var_ratio: f64,
}

fn column(pcs: &[PairCorrelations], i: usize) -> Vec<f64> {
    pcs.iter().map(|p| p.quadrants[i]).collect()
}

fn variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)
}

/// Tests whether quadrant correlations co-vary across pairs. Matched pairs use
/// a one-sided test for positive dependence; unmatched a two-sided one.
pub fn subblock_covariance_test(pcs: &[PairCorrelations], matched: bool) -> Result<CovarianceTest> {
    if pcs.len() < MIN_PAIRS {
        return Err(invalid(
            "pairs",
            format!("need at least {MIN_PAIRS}, got {}", pcs.len()),
        ));
    }
    let cols: Vec<Vec<f64>> = (0..4).map(|i| column(pcs, i)).collect();
    let mut corrs = Vec::with_capacity(6);
    for i in 0..4 {
        for j in i + 1..4 {
            corrs.push(correlation_slices(&cols[i], &cols[j])?);
        }
    }
    let z: Vec<f64> = corrs.iter().map(|&r| fisher_z(r)).collect();
    let tail = if matched {
        Tail::Greater
    } else {
        Tail::TwoSided
    };
    let test = one_sample_t(&z, tail)?;
    let whole: Vec<f64> = pcs.iter().map(|p| p.whole).collect();
    let vw = variance(&whole);
    let var_ratio = cols.iter().map(|c| variance(c) / vw).sum::<f64>() / 4.0;
    Ok(CovarianceTest {
        pairs: pcs.len(),
        mean_corr: corrs.iter().sum::<f64>() / 6.0,
        test,
        var_ratio,
    })
}

/// Null control: each quadrant column is permuted independently, which breaks
/// any dependence between quadrants of the same pair.
pub fn shuffled_control(pcs: &[PairCorrelations], seed: u64) -> Result<CovarianceTest> {
    let mut cols: Vec<Vec<f64>> = (0..4).map(|i| column(pcs, i)).collect();
    for (i, c) in cols.iter_mut().enumerate() {
        c.shuffle(&mut rng::stream(seed, &[rng::tag("shuffle"), i as u64]));
    }
    let shuffled: Vec<PairCorrelations> = (0..pcs.len())
        .map(|k| PairCorrelations {
            whole: pcs[k].whole,
            quadrants: [cols[0][k], cols[1][k], cols[2][k], cols[3][k]],
        })
        .collect();
    subblock_covariance_test(&shuffled, false)
}

pub fn covariance_study(roots: &[Grid], design: &PairDesign, seed: u64) -> Result<StudyReport> {
    let mut report = StudyReport::new("covariance", COLUMNS, 1, seed, serde_json::Value::Null);
    for (h, pairs) in [(0.0, &design.unmatched), (1.0, &design.matched)] {
        let pcs = pair_correlations(roots, pairs)?;
        let r = subblock_covariance_test(&pcs, h == 1.0)?;
        report.push(vec![
            h,
            r.pairs as f64,
            r.mean_corr,
            r.test.t,
            r.test.df,
            r.test.p_value,
            r.var_ratio,
        ])?;
    }
    Ok(report)
}

pub fn run_covariance(cfg: &CovarianceConfig, config: &StudyConfig) -> Result<StudyReport> {
    let corpus = build_corpus(&config.corpus_spec(cfg.patches))?;
    let features = corpus.features(cfg.feature)?;
    let roots = features
        .iter()
        .map(|g| centered_even_crop(g, cfg.root_fraction))
        .collect::<Result<Vec<_>>>()?;
    let design = PairDesign {
        matched: corpus.pair_design().matched,
        unmatched: PairDesign::patch_pair_representatives(&corpus.ids).unmatched,
    };
    let mut report = covariance_study(&roots, &design, config.seed)?;
    report.config = config.to_json();
    Ok(report)
}

fn centered_even_crop(g: &Grid, fraction: f64) -> Result<Grid> {
    let (rows, cols) = g.shape();
    let er = ((rows as f64 * fraction).round() as usize) & !1;
    let ec = ((cols as f64 * fraction).round() as usize) & !1;
    if er == 0 || ec == 0 {
        return Err(invalid("root_fraction", "root crop is empty"));
    }
    g.crop((rows - er) / 2, (cols - ec) / 2, er, ec)
}

impl Study for CovarianceStudy {
    fn name(&self) -> &'static str {
        "covariance"
    }

    fn run(&self, config: &StudyConfig) -> Result<StudyReport> {
        run_covariance(&config.covariance, config)
    }
}
