//! Studies over synthetic paper corpora: specular ablation, block cutting,
//! the subblock residual, subblock covariance, registration perturbation and
//! the resolution sweep.
//!
//! Every study implements [`Study`] and is looked up by name, so the CLI and
//! tests drive them the same way. A run is fully determined by its
//! [`StudyConfig`], seed included.

pub mod blocks;
pub mod config;
pub mod covariance;
pub mod perturb;
pub mod report;
pub mod residual;
pub mod resolution;
pub mod specular;
pub mod stats;

pub use config::StudyConfig;
pub use report::StudyReport;

use paperprint_core::{Error, Result};

pub trait Study: Send + Sync {
    fn name(&self) -> &'static str;
    fn run(&self, config: &StudyConfig) -> Result<StudyReport>;
}

pub const STUDIES: &[&str] = &[
    "specular",
    "blocks",
    "residual",
    "covariance",
    "perturb",
    "resolution",
];

pub fn study_by_name(name: &str) -> Result<Box<dyn Study>> {
    Ok(match name {
        "specular" => Box::new(specular::SpecularStudy),
        "blocks" => Box::new(blocks::BlockCutStudy),
        "residual" => Box::new(residual::ResidualStudy),
        "covariance" => Box::new(covariance::CovarianceStudy),
        "perturb" => Box::new(perturb::PerturbationStudy),
        "resolution" => Box::new(resolution::ResolutionStudy),
        other => {
            return Err(Error::UnknownName {
                kind: "study",
                name: other.to_string(),
            })
        }
    })
}
