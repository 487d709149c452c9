//! Run configuration file (TOML). Every section is optional; unknown keys are rejected.
//!
//! Precedence, highest first: command-line flags, the config file, built-in defaults.
//! The dictionary path additionally falls back to `STRESSNET_DICT` and then to the
//! dictionary shipped with the sources.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use stressnet::baselines::{ForestConfig, OrdinalConfig};
use stressnet::corpus::{ExclusionScope, GenConfig};
use stressnet::dsp::DspConfig;
use stressnet::features::NormalizationPool;
use stressnet::model::{FeatureMode, ModelConfig, TrainConfig};
use stressnet::pipeline::ModelKind;

use crate::Failure;

pub const DICT_ENV: &str = "STRESSNET_DICT";
const BUNDLED_DICT: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/data/cmudict.dict");

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub dict: Option<PathBuf>,
    pub audio_dir: Option<PathBuf>,
    pub alignment_dir: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub paths: Paths,
    /// Master seed; used wherever a command needs one and no flag is given.
    pub seed: u64,
    pub model: ModelKind,
    /// Defaults to `syllable_numerical` for baselines and `all_features` otherwise.
    pub feature_mode: Option<FeatureMode>,
    /// Explicit architecture; replaces the preset implied by `model`.
    pub model_config: Option<ModelConfig>,
    pub train_fraction: f64,
    pub exclusion_scope: ExclusionScope,
    pub normalization_pool: NormalizationPool,
    pub train: TrainConfig,
    pub ordinal: OrdinalConfig,
    pub forest: ForestConfig,
    pub dsp: DspConfig,
    pub synth: GenConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            paths: Paths::default(),
            seed: 0,
            model: ModelKind::AttnMedium,
            feature_mode: None,
            model_config: None,
            train_fraction: 0.7,
            exclusion_scope: ExclusionScope::default(),
            normalization_pool: NormalizationPool::default(),
            train: TrainConfig::default(),
            ordinal: OrdinalConfig::default(),
            forest: ForestConfig::default(),
            dsp: DspConfig::default(),
            synth: GenConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path).map_err(|e| Failure::config(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Failure::config(format!("invalid config {}: {e}", path.display())))
    }

    pub fn output_dir(&self) -> PathBuf {
        self.paths.output_dir.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    /// Flag, then config file, then `STRESSNET_DICT`, then the bundled dictionary.
    pub fn dict_path(&self, flag: Option<&Path>) -> PathBuf {
        flag.map(Path::to_path_buf)
            .or_else(|| self.paths.dict.clone())
            .or_else(|| std::env::var_os(DICT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(BUNDLED_DICT))
    }

    pub fn validate(&self) -> Result<(), Failure> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Failure::config(format!("train_fraction must lie in (0, 1), got {}", self.train_fraction)));
        }
        self.train.validate().map_err(|e| Failure::config(e.to_string()))?;
        self.dsp.validate().map_err(|e| Failure::config(e.to_string()))?;
        self.synth.validate().map_err(|e| Failure::config(e.to_string()))?;
        if let Some(m) = &self.model_config {
            m.validate().map_err(|e| Failure::config(e.to_string()))?;
        }
        Ok(())
    }
}
