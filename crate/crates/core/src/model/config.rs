use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::features::{FEATURE_COUNT, SYLLABLE_FEATURE_COUNT};
use crate::MAX_SYLLABLES;

/// Which inputs the classifier sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMode {
    /// The six syllable-span measurements.
    SyllableNumerical,
    /// All twelve syllable and nucleus measurements.
    SyllableNucleusNumerical,
    /// Twelve measurements plus the nucleus-type embedding.
    AllFeatures,
}

impl FeatureMode {
    /// Width `K` of the numerical input.
    pub fn num_features(self) -> usize {
        match self {
            FeatureMode::SyllableNumerical => SYLLABLE_FEATURE_COUNT,
            _ => FEATURE_COUNT,
        }
    }

    pub fn uses_type_embedding(self) -> bool {
        self == FeatureMode::AllFeatures
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Medium,
    Large,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub d_model: usize,
    pub heads: usize,
    pub layers: usize,
    pub ffn_hidden: usize,
    pub dropout: f64,
    pub feature_mode: FeatureMode,
    pub max_positions: usize,
    /// Reject `d_model` not divisible by `heads` instead of using per-head projections.
    #[serde(default)]
    pub require_divisible_heads: bool,
}

impl ModelConfig {
    pub fn new(d_model: usize, heads: usize, layers: usize, feature_mode: FeatureMode) -> Self {
        Self {
            d_model,
            heads,
            layers,
            ffn_hidden: 4 * d_model,
            dropout: 0.1,
            feature_mode,
            max_positions: MAX_SYLLABLES,
            require_divisible_heads: false,
        }
    }

    /// D = 5, 6 heads, 3 layers.
    pub fn medium(feature_mode: FeatureMode) -> Self {
        Self::new(5, 6, 3, feature_mode)
    }

    /// D = 10, 12 heads, 6 layers.
    pub fn large(feature_mode: FeatureMode) -> Self {
        Self::new(10, 12, 6, feature_mode)
    }

    pub fn preset(preset: Preset, feature_mode: FeatureMode) -> Self {
        match preset {
            Preset::Medium => Self::medium(feature_mode),
            Preset::Large => Self::large(feature_mode),
        }
    }

    /// Per-head width: `max(1, ceil(D / H))`. Heads are concatenated to `H * head_dim`
    /// and projected back to `D`.
    pub fn head_dim(&self) -> usize {
        self.d_model.div_ceil(self.heads.max(1)).max(1)
    }

    pub fn attention_width(&self) -> usize {
        self.heads * self.head_dim()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::InvalidConfig(m));
        if self.d_model == 0 || self.heads == 0 || self.layers == 0 || self.ffn_hidden == 0 {
            return bad("d_model, heads, layers and ffn_hidden must be >= 1".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if self.max_positions != MAX_SYLLABLES {
            return bad(format!("max_positions must be {MAX_SYLLABLES}"));
        }
        if self.require_divisible_heads && !self.d_model.is_multiple_of(self.heads) {
            return bad(format!("d_model {} is not divisible by {} heads", self.d_model, self.heads));
        }
        Ok(())
    }
}

/// Optimizer and schedule settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// `None` enables class weights only in `AllFeatures` mode.
    pub use_class_weights: Option<bool>,
    pub validation_fraction: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 64,
            epochs: 30,
            seed: 0,
            use_class_weights: None,
            validation_fraction: 0.1,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn class_weights_enabled(&self, mode: FeatureMode) -> bool {
        self.use_class_weights.unwrap_or(mode == FeatureMode::AllFeatures)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.learning_rate > 0.0) || self.batch_size == 0 {
            return Err(ModelError::InvalidConfig("learning_rate must be > 0 and batch_size >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(ModelError::InvalidConfig("validation_fraction must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets() {
        let m = ModelConfig::medium(FeatureMode::AllFeatures);
        assert_eq!((m.d_model, m.heads, m.layers, m.head_dim(), m.attention_width()), (5, 6, 3, 1, 6));
        let l = ModelConfig::large(FeatureMode::SyllableNumerical);
        assert_eq!((l.d_model, l.heads, l.layers, l.head_dim()), (10, 12, 6, 1));
        assert!(m.validate().is_ok());
        let strict = ModelConfig { require_divisible_heads: true, ..m };
        assert!(strict.validate().is_err());
        assert_eq!(ModelConfig::new(8, 2, 1, FeatureMode::AllFeatures).head_dim(), 4);
    }
}
