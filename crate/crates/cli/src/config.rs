use std::path::Path;

use serde::{Deserialize, Serialize};

use neurograph_core::dataset::SynthConfig;
use neurograph_core::encoding::EncodingConfig;
use neurograph_core::explain::ExportFormat;
use neurograph_core::nn::ModelConfig;
use neurograph_core::rewire::RewireConfig;
use neurograph_core::train::TrainConfig;
use neurograph_core::{Error, FrequencyBand, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CombineRule {
    #[default]
    Max,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainOptions {
    /// Patients explained at the end of `run`.
    pub patients: Vec<String>,
    /// Bands exported one file each; must be among the rewired bands.
    pub bands: Vec<FrequencyBand>,
    pub combine: CombineRule,
    pub formats: Vec<ExportFormat>,
    /// Attention layer to read; the last one when absent.
    pub layer: Option<usize>,
    pub weighted_betweenness: bool,
}

impl Default for ExplainOptions {
    fn default() -> Self {
        Self {
            patients: Vec::new(),
            bands: FrequencyBand::MODEL_BANDS.to_vec(),
            combine: CombineRule::Max,
            formats: vec![ExportFormat::Graphml],
            layer: None,
            weighted_betweenness: false,
        }
    }
}

/// Every stage's settings in one file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub synth: SynthConfig,
    pub rewire: RewireConfig,
    pub encoding: EncodingConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub explain: ExplainOptions,
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Argument(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.into(), source })?;
        toml::from_str(&text).map_err(|e| Error::Format { path: path.into(), reason: e.to_string() })
    }

    pub fn load_or_default(path: Option<&Path>) -> Result<Self> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks every section and their cross-constraints.
    pub fn validate(&self) -> Result<()> {
        self.rewire.validate()?;
        self.encoding.validate()?;
        self.model.validate()?;
        self.train.validate()?;
        let dim = self.encoding.feature_dim();
        if self.model.in_dim != dim {
            return Err(Error::Argument(format!(
                "model.in_dim is {} but the encoding produces {dim} features per node",
                self.model.in_dim
            )));
        }
        if self.model.n_bands != self.rewire.bands_kept.len() {
            return Err(Error::Argument(format!(
                "model.n_bands is {} but rewire.bands_kept lists {} bands",
                self.model.n_bands,
                self.rewire.bands_kept.len()
            )));
        }
        for band in &self.explain.bands {
            if !self.rewire.bands_kept.contains(band) {
                return Err(Error::Argument(format!("explain band {band} is not among rewire.bands_kept")));
            }
        }
        if self.explain.formats.is_empty() {
            return Err(Error::Argument("explain.formats is empty".into()));
        }
        if let Some(l) = self.explain.layer {
            if l >= self.model.layers {
                return Err(Error::Argument(format!(
                    "explain.layer {l} but the model has {} layers",
                    self.model.layers
                )));
            }
        }
        Ok(())
    }
}
