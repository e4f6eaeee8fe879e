//! The declarative run config shared by every pipeline stage.
//!
//! Its canonical JSON serialization is hashed into a digest that each stage
//! embeds in its outputs and checks on its inputs.

use std::path::Path;

use serde::{Deserialize, Serialize};

use paperprint_core::acquisition::{
    reference_component_std, AcquisitionModel, CorpusSpec, FeaturePipeline, ScannerProfile,
};
use paperprint_core::reconstruct::{FeatureParams, IntegrationParams};
use paperprint_core::rng;
use paperprint_core::synth::{generate_surface, FiberModelParams, PITCH_300PPI};

use crate::error::{CliError, Result};
use crate::gridfile::{sha256_hex, GridFile};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Omitted: `synth` draws a fresh seed and records it in its output.
    pub seed: Option<u64>,
    pub rows: usize,
    pub cols: usize,
    pub pixel_pitch: f64,
    pub surface: FiberModelParams,
    pub model: AcquisitionModel,
    pub integration: IntegrationParams,
    pub features: FeatureParams,
    /// Reference `(σ_x, σ_y)` for the scale estimate. Omitted: measured on
    /// `reference_surfaces` surfaces drawn from `surface`.
    pub reference_std: Option<[f64; 2]>,
    pub reference_surfaces: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: None,
            rows: 200,
            cols: 200,
            pixel_pitch: PITCH_300PPI,
            surface: FiberModelParams::default(),
            model: AcquisitionModel::default(),
            integration: IntegrationParams::default(),
            features: FeatureParams::default(),
            reference_std: None,
            reference_surfaces: 2,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Invalid(format!("config: {e}")))
    }

    /// Default config when `path` is `None`.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => Self::from_toml(&std::fs::read_to_string(p).map_err(CliError::io(p))?),
        }
    }

    pub fn digest(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("config serializes"))
    }

    pub fn corpus_spec(&self, seed: u64) -> CorpusSpec {
        CorpusSpec {
            patches: 1,
            rows: self.rows,
            cols: self.cols,
            pixel_pitch: self.pixel_pitch,
            surface: self.surface.clone(),
            model: self.model.clone(),
            seed,
        }
    }

    pub fn scanner(&self, index: usize) -> Result<&ScannerProfile> {
        self.model.scanners.get(index).ok_or_else(|| {
            CliError::Invalid(format!(
                "scanner {index} out of range, config has {}",
                self.model.scanners.len()
            ))
        })
    }

    pub fn reference_std(&self) -> Result<(f64, f64)> {
        if let Some([x, y]) = self.reference_std {
            return Ok((x, y));
        }
        if self.reference_surfaces == 0 {
            return Err(CliError::Invalid(
                "reference_surfaces must be positive".into(),
            ));
        }
        let surfaces = (0..self.reference_surfaces)
            .map(|i| {
                let params = FiberModelParams {
                    seed: rng::derive_seed(0, &[rng::tag("reference"), i as u64]),
                    ..self.surface.clone()
                };
                generate_surface(&params, self.rows, self.cols, self.pixel_pitch)
            })
            .collect::<paperprint_core::Result<Vec<_>>>()?;
        Ok(reference_component_std(&surfaces)?)
    }

    pub fn pipeline(&self) -> Result<FeaturePipeline> {
        Ok(FeaturePipeline {
            reference_std: self.reference_std()?,
            integration: self.integration.clone(),
            features: self.features.clone(),
        })
    }

    /// Refuses inputs produced under a different config.
    pub fn check_input(&self, file: &GridFile, name: &str) -> Result<()> {
        let ours = self.digest();
        match file.get("config_digest") {
            Some(d) if d == ours => Ok(()),
            Some(d) => Err(CliError::Integrity(format!(
                "{name} was produced under config {d}, this run uses {ours}; rerun the upstream stage with this config"
            ))),
            None => Err(CliError::Integrity(format!("{name} carries no config digest"))),
        }
    }
}
