//! Context-free per-syllable classifiers: proportional-odds regression and a random forest.

mod forest;
mod ordinal;

use serde::{Deserialize, Serialize};

pub use forest::{train_forest, ForestConfig, ForestModel, Node, Tree};
pub use ordinal::{train_ordinal, OrdinalConfig, OrdinalModel};

use crate::corpus::WordInstance;
use crate::lexicon::StressLevel;
use crate::model::{argmax, Checkpoint, FeatureMode, ModelError, FORMAT_FOREST, FORMAT_ORDINAL, NUM_CLASSES};

#[derive(Debug, thiserror::Error)]
pub enum BaselineError {
    #[error("degenerate data: {0}")]
    DegenerateData(String),
    #[error("no training samples")]
    EmptyData,
    #[error("shape error: {0}")]
    Shape(String),
    #[error("baselines do not accept feature mode {0:?}")]
    UnsupportedFeatureMode(FeatureMode),
    #[error("invalid baseline config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Checkpoint(#[from] ModelError),
}

/// One syllable's features with its label.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    pub stress: StressLevel,
}

/// Width of the baseline input for `mode`. `AllFeatures` has no baseline counterpart.
pub fn baseline_width(mode: FeatureMode) -> Result<usize, BaselineError> {
    match mode {
        FeatureMode::AllFeatures => Err(BaselineError::UnsupportedFeatureMode(mode)),
        m => Ok(m.num_features()),
    }
}

/// Flattens labeled valid syllables into per-syllable samples. Unlabeled syllables are skipped.
pub fn samples_from_instances(instances: &[WordInstance], mode: FeatureMode) -> Result<Vec<Sample>, BaselineError> {
    let k = baseline_width(mode)?;
    Ok(instances.iter().flat_map(|w| w.valid()).filter_map(|o| o.stress.map(|s| Sample { features: o.features[..k].to_vec(), stress: s })).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselinePrediction {
    pub stress: StressLevel,
    /// Scores in class-index order (NonStress, Primary, Secondary).
    pub scores: [f64; NUM_CLASSES],
}

#[derive(Debug, Clone, PartialEq)]
pub enum Baseline {
    Ordinal(OrdinalModel),
    Forest(ForestModel),
}

impl Baseline {
    pub fn feature_mode(&self) -> FeatureMode {
        match self {
            Baseline::Ordinal(m) => m.feature_mode,
            Baseline::Forest(m) => m.feature_mode,
        }
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        match self {
            Baseline::Ordinal(m) => m.to_checkpoint(),
            Baseline::Forest(m) => m.to_checkpoint(),
        }
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self, BaselineError> {
        match ckpt.header.format.as_str() {
            FORMAT_ORDINAL => Ok(Baseline::Ordinal(OrdinalModel::from_checkpoint(ckpt)?)),
            FORMAT_FOREST => Ok(Baseline::Forest(ForestModel::from_checkpoint(ckpt)?)),
            other => Err(ModelError::Checkpoint(format!("not a baseline checkpoint: {other:?}")).into()),
        }
    }
}

/// OR: cumulative-logit probabilities; RF: vote proportions. Argmax ties go to the lowest class index.
pub fn predict_baseline(model: &Baseline, x: &[f64]) -> Result<BaselinePrediction, BaselineError> {
    let scores = match model {
        Baseline::Ordinal(m) => m.probabilities(x)?,
        Baseline::Forest(m) => m.vote_proportions(x)?,
    };
    Ok(BaselinePrediction { stress: argmax(&scores), scores })
}

/// Predictions for every valid syllable of every word, in order.
pub fn predict_instances(model: &Baseline, instances: &[WordInstance]) -> Result<Vec<Vec<BaselinePrediction>>, BaselineError> {
    let k = baseline_width(model.feature_mode())?;
    instances.iter().map(|w| w.valid().iter().map(|o| predict_baseline(model, &o.features[..k])).collect()).collect()
}

pub(crate) fn check_width(x: &[f64], k: usize) -> Result<(), BaselineError> {
    if x.len() != k {
        return Err(BaselineError::Shape(format!("expected {k} features, got {}", x.len())));
    }
    Ok(())
}
