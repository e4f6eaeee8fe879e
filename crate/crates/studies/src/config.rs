use serde::{Deserialize, Serialize};

use paperprint_core::acquisition::CorpusSpec;
use paperprint_core::reconstruct::FeatureKind;
use paperprint_core::{Error, Result};

/// Everything a study run depends on. Missing TOML sections take defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StudyConfig {
    pub seed: u64,
    /// Surface, scanner and pipeline model shared by the corpus-based studies.
    /// `patches` and `seed` inside are overridden per study.
    pub corpus: CorpusSpec,
    pub specular: SpecularConfig,
    pub blocks: BlocksConfig,
    pub residual: ResidualConfig,
    pub covariance: CovarianceConfig,
    pub perturb: PerturbConfig,
    pub resolution: ResolutionConfig,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            corpus: CorpusSpec::default(),
            specular: SpecularConfig::default(),
            blocks: BlocksConfig::default(),
            residual: ResidualConfig::default(),
            covariance: CovarianceConfig::default(),
            perturb: PerturbConfig::default(),
            resolution: ResolutionConfig::default(),
        }
    }
}

impl StudyConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Format(format!("study config: {e}")))
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }

    /// The shared corpus spec with this run's seed and `patches` patches.
    pub fn corpus_spec(&self, patches: usize) -> CorpusSpec {
        CorpusSpec {
            patches,
            seed: self.seed,
            ..self.corpus.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpecularConfig {
    pub specular_weights: Vec<f64>,
    pub sensor_vcx: Vec<f64>,
    pub n_fields: usize,
    pub size: usize,
    pub sensor_tilt_deg: f64,
    /// Clamp settings to evaluate; `false` is the linear Phong model.
    pub clamp: Vec<bool>,
}

impl Default for SpecularConfig {
    fn default() -> Self {
        Self {
            specular_weights: vec![0.0, 0.1, 0.2, 0.3],
            sensor_vcx: vec![0.0, 0.1, 0.3],
            n_fields: 9,
            size: 128,
            sensor_tilt_deg: 10.0,
            clamp: vec![false, true],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BlocksConfig {
    pub feature: FeatureKind,
    pub max_cuts: usize,
    pub root_fraction: f64,
    pub patches: usize,
    /// `all_patch_pairs` or `one_partner`.
    pub unmatched_design: String,
}

impl Default for BlocksConfig {
    fn default() -> Self {
        Self {
            feature: FeatureKind::Subband(2),
            max_cuts: 3,
            root_fraction: 0.8,
            patches: 24,
            unmatched_design: "all_patch_pairs".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ResidualConfig {
    pub feature: FeatureKind,
    /// Subblock edge lengths in px; each block is twice this size.
    pub subblock_edges: Vec<usize>,
    pub patches: usize,
}

impl Default for ResidualConfig {
    fn default() -> Self {
        Self {
            feature: FeatureKind::Subband(2),
            subblock_edges: vec![25, 50, 100],
            patches: 9,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CovarianceConfig {
    pub feature: FeatureKind,
    pub patches: usize,
    pub root_fraction: f64,
}

impl Default for CovarianceConfig {
    fn default() -> Self {
        Self {
            feature: FeatureKind::Subband(2),
            patches: 24,
            root_fraction: 0.8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PerturbConfig {
    pub l_values: Vec<f64>,
    pub trials: usize,
    pub patches: usize,
    /// Scanned border around the patch, px.
    pub margin: usize,
    /// Candidate subbands; the best one at `L = 0` is tracked.
    pub subbands: Vec<usize>,
    /// `all_patch_pairs` or `one_partner`.
    pub unmatched_design: String,
}

impl Default for PerturbConfig {
    fn default() -> Self {
        Self {
            l_values: (0..=10).map(|i| i as f64 / 10.0).collect(),
            trials: 2,
            patches: 9,
            margin: 8,
            subbands: vec![1, 2, 3, 4],
            unmatched_design: "all_patch_pairs".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ResolutionConfig {
    pub ppi: Vec<f64>,
    pub source_ppi: f64,
    /// Edge of the fine source surface in px.
    pub source_size: usize,
    pub surfaces: usize,
}

impl Default for ResolutionConfig {
    fn default() -> Self {
        Self {
            ppi: vec![150.0, 200.0, 300.0, 400.0, 600.0, 800.0, 1200.0],
            source_ppi: 2400.0,
            source_size: 1600,
            surfaces: 3,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_toml_fills_defaults() {
        let c = StudyConfig::from_toml("seed = 5\n[blocks]\nfeature = \"subband(3)\"\n").unwrap();
        assert_eq!(c.seed, 5);
        assert_eq!(c.blocks.feature, FeatureKind::Subband(3));
        assert_eq!(c.blocks.max_cuts, 3);
        assert_eq!(c.perturb.l_values.len(), 11);
        assert!(StudyConfig::from_toml("[blocks]\nfeature = \"subband(x)\"\n").is_err());
    }

    #[test]
    fn json_round_trip() {
        let c = StudyConfig::default();
        let back: StudyConfig = serde_json::from_value(c.to_json()).unwrap();
        assert_eq!(back, c);
    }
}
