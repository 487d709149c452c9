//! Checkpoint container shared by the attention model and the baselines.
//!
//! Layout (JSON Lines, UTF-8, `\n` terminated):
//!
//! 1. header object: `format`, `version`, `model_config`, `feature_mode`,
//!    `nucleus_tags`, `feature_slots`, and optionally `class_weights`;
//! 2. one object per named array: `{"name", "shape": [rows, cols], "data": [...]}`,
//!    `data` row-major, numbers in shortest round-trip decimal form;
//! 3. optionally a final `{"payload": ...}` object for models that are not plain arrays.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{FeatureMode, Matrix, ModelConfig, ModelError, ModelParams};
use crate::corpus::ClassWeights;
use crate::features::FEATURE_SLOTS;
use crate::lexicon::NucleusType;
use crate::Scalar;

pub const CHECKPOINT_VERSION: u32 = 1;
pub const FORMAT_ATTENTION: &str = "stressnet-checkpoint";
pub const FORMAT_ORDINAL: &str = "stressnet-or";
pub const FORMAT_FOREST: &str = "stressnet-rf";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointHeader {
    pub format: String,
    pub version: u32,
    pub model_config: serde_json::Value,
    pub feature_mode: FeatureMode,
    pub nucleus_tags: Vec<String>,
    pub feature_slots: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_weights: Option<ClassWeights>,
}

impl CheckpointHeader {
    pub fn new(format: &str, model_config: serde_json::Value, feature_mode: FeatureMode, class_weights: Option<ClassWeights>) -> Self {
        Self {
            format: format.to_string(),
            version: CHECKPOINT_VERSION,
            model_config,
            feature_mode,
            nucleus_tags: NucleusType::REAL.iter().map(|t| t.tag().to_string()).collect(),
            feature_slots: FEATURE_SLOTS.iter().map(|s| s.to_string()).collect(),
            class_weights,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedArray {
    pub name: String,
    pub shape: [usize; 2],
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PayloadLine {
    payload: serde_json::Value,
}

/// A parsed checkpoint file of any format.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub arrays: Vec<NamedArray>,
    pub payload: Option<serde_json::Value>,
}

fn ckpt_err(line: usize, msg: impl std::fmt::Display) -> ModelError {
    ModelError::Checkpoint(format!("line {line}: {msg}"))
}

impl Checkpoint {
    pub fn write(&self, mut out: impl Write) -> Result<(), ModelError> {
        let mut line = |v: String| -> Result<(), ModelError> {
            out.write_all(v.as_bytes())?;
            out.write_all(b"\n")?;
            Ok(())
        };
        let json = |e: serde_json::Error| ModelError::Checkpoint(e.to_string());
        line(serde_json::to_string(&self.header).map_err(json)?)?;
        for a in &self.arrays {
            line(serde_json::to_string(a).map_err(json)?)?;
        }
        if let Some(p) = &self.payload {
            line(serde_json::to_string(&PayloadLine { payload: p.clone() }).map_err(json)?)?;
        }
        Ok(())
    }

    pub fn read(reader: impl BufRead) -> Result<Self, ModelError> {
        let mut lines = reader.lines().enumerate();
        let (_, first) = lines.next().ok_or_else(|| ckpt_err(1, "empty checkpoint"))?;
        let header: CheckpointHeader = serde_json::from_str(&first?).map_err(|e| ckpt_err(1, e))?;
        if header.version != CHECKPOINT_VERSION {
            return Err(ckpt_err(1, format!("unsupported version {}", header.version)));
        }
        let tags: Vec<&str> = NucleusType::REAL.iter().map(|t| t.tag()).collect();
        if header.nucleus_tags != tags {
            return Err(ckpt_err(1, "nucleus tag order differs from this build"));
        }
        if header.feature_slots != FEATURE_SLOTS {
            return Err(ckpt_err(1, "feature slot order differs from this build"));
        }
        let mut arrays = Vec::new();
        let mut payload = None;
        for (i, line) in lines {
            let line = line?;
            let n = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            if payload.is_some() {
                return Err(ckpt_err(n, "content after payload"));
            }
            let value: serde_json::Value = serde_json::from_str(&line).map_err(|e| ckpt_err(n, e))?;
            if value.get("payload").is_some() {
                let p: PayloadLine = serde_json::from_value(value).map_err(|e| ckpt_err(n, e))?;
                payload = Some(p.payload);
            } else {
                let a: NamedArray = serde_json::from_value(value).map_err(|e| ckpt_err(n, e))?;
                if a.shape[0] * a.shape[1] != a.data.len() {
                    return Err(ckpt_err(n, format!("array {} has {} values for shape {:?}", a.name, a.data.len(), a.shape)));
                }
                arrays.push(a);
            }
        }
        Ok(Self { header, arrays, payload })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ModelError> {
        let mut buf = Vec::new();
        self.write(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        let f = std::fs::File::open(path)?;
        Self::read(std::io::BufReader::new(f))
    }

    pub fn expect_format(&self, format: &str) -> Result<(), ModelError> {
        if self.header.format != format {
            return Err(ModelError::Checkpoint(format!("expected format {format:?}, found {:?}", self.header.format)));
        }
        Ok(())
    }
}

/// A trained attention classifier together with its configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionModel<F> {
    pub config: ModelConfig,
    pub params: ModelParams<F>,
    pub class_weights: Option<ClassWeights>,
}

impl<F: Scalar> AttentionModel<F> {
    pub fn to_checkpoint(&self) -> Checkpoint {
        let config = serde_json::to_value(&self.config).expect("model config serializes");
        let header = CheckpointHeader::new(FORMAT_ATTENTION, config, self.config.feature_mode, self.class_weights.clone());
        let arrays = self
            .params
            .tensors()
            .into_iter()
            .map(|(name, t)| NamedArray { name, shape: [t.rows(), t.cols()], data: t.data().iter().map(|v| v.as_f64()).collect() })
            .collect();
        Checkpoint { header, arrays, payload: None }
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self, ModelError> {
        ckpt.expect_format(FORMAT_ATTENTION)?;
        let config: ModelConfig =
            serde_json::from_value(ckpt.header.model_config.clone()).map_err(|e| ModelError::Checkpoint(format!("model_config: {e}")))?;
        if config.feature_mode != ckpt.header.feature_mode {
            return Err(ModelError::Checkpoint("feature_mode disagrees with model_config".into()));
        }
        config.validate()?;
        let named: Vec<(String, Matrix<F>)> = ckpt
            .arrays
            .iter()
            .map(|a| (a.name.clone(), Matrix::from_vec(a.shape[0], a.shape[1], a.data.iter().map(|&v| F::of(v)).collect())))
            .collect();
        let params = ModelParams::from_named(&config, &named)?;
        if !params.is_finite() {
            return Err(ModelError::Checkpoint("non-finite parameter values".into()));
        }
        Ok(Self { config, params, class_weights: ckpt.header.class_weights.clone() })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ModelError> {
        self.to_checkpoint().save(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        Self::from_checkpoint(&Checkpoint::load(path)?)
    }
}
