//! The subblock residual `r_n = ρ − ¼ Σᵢ ρᵢ`: how far a block's correlation
//! is from the average of its four quadrant correlations.

use rayon::prelude::*;

use paperprint_core::acquisition::build_corpus;
use paperprint_core::matching::correlation;
use paperprint_core::{invalid, Grid, Result};

use crate::config::{ResidualConfig, StudyConfig};
use crate::report::StudyReport;
use crate::stats::mean_std;
use crate::Study;

pub struct ResidualStudy;

pub const COLUMNS: &[&str] = &[
    "subblock_edge",
    "n",
    "count",
    "mean_r",
    "std_r",
    "mean_abs_r",
];

/// Quadrant correlations `ρ₁…ρ₄` (row-major) of two co-registered grids.
pub fn quadrant_correlations(x: &Grid, y: &Grid) -> Result<[f64; 4]> {
    x.ensure_same_shape(y)?;
    let (rows, cols) = x.shape();
    if rows % 2 != 0 || cols % 2 != 0 {
        return Err(invalid("shape", format!("{rows}x{cols} is not even")));
    }
    let (qx, qy) = (x.tiles(2)?, y.tiles(2)?);
    let mut out = [0.0; 4];
    for i in 0..4 {
        out[i] = correlation(&qx[i], &qy[i])?;
    }
    Ok(out)
}

pub fn subblock_residual(x: &Grid, y: &Grid) -> Result<f64> {
    let q = quadrant_correlations(x, y)?;
    Ok(correlation(x, y)? - q.iter().sum::<f64>() / 4.0)
}

/// Residuals of every `2s × 2s` block of every pair, blocks tiling each grid
/// from the top-left corner.
pub fn residuals_at(
    features: &[Grid],
    pairs: &[(usize, usize)],
    subblock_edge: usize,
) -> Result<Vec<f64>> {
    let block = 2 * subblock_edge;
    let (rows, cols) = features[0].shape();
    if block == 0 || block > rows || block > cols {
        return Err(invalid(
            "subblock_edge",
            format!("{subblock_edge} does not fit {rows}x{cols}"),
        ));
    }
    let (br, bc) = (rows / block, cols / block);
    let per_pair: Vec<Vec<f64>> = pairs
        .par_iter()
        .map(|&(a, b)| {
            let mut v = Vec::with_capacity(br * bc);
            for i in 0..br {
                for j in 0..bc {
                    let x = features[a].crop(i * block, j * block, block, block)?;
                    let y = features[b].crop(i * block, j * block, block, block)?;
                    v.push(subblock_residual(&x, &y)?);
                }
            }
            Ok(v)
        })
        .collect::<Result<_>>()?;
    Ok(per_pair.into_iter().flatten().collect())
}

pub fn residual_table(
    features: &[Grid],
    pairs: &[(usize, usize)],
    edges: &[usize],
    seed: u64,
) -> Result<StudyReport> {
    let mut report = StudyReport::new(
        "residual",
        COLUMNS,
        1,
        seed,
        serde_json::json!({ "edges": edges }),
    );
    for &s in edges {
        let r = residuals_at(features, pairs, s)?;
        let (m, sd) = mean_std(&r);
        let mean_abs = r.iter().map(|v| v.abs()).sum::<f64>() / r.len() as f64;
        report.push(vec![
            s as f64,
            (s * s) as f64,
            r.len() as f64,
            m,
            sd,
            mean_abs,
        ])?;
    }
    Ok(report)
}

pub fn run_residual(cfg: &ResidualConfig, config: &StudyConfig) -> Result<StudyReport> {
    let corpus = build_corpus(&config.corpus_spec(cfg.patches))?;
    let features = corpus.features(cfg.feature)?;
    let design = corpus.pair_design();
    let mut report = residual_table(&features, &design.matched, &cfg.subblock_edges, config.seed)?;
    report.config = config.to_json();
    Ok(report)
}

impl Study for ResidualStudy {
    fn name(&self) -> &'static str {
        "residual"
    }

    fn run(&self, config: &StudyConfig) -> Result<StudyReport> {
        run_residual(&config.residual, config)
    }
}
