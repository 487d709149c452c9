//! Masked self-attention stress classifier.
//!
//! Each word is a 17-slot sequence. Slot `i` is embedded as
//! `E_pos[i] + E_type[t_i] + x_i C` (the type term only in `AllFeatures` mode),
//! passed through pre-norm encoder layers whose attention ignores padded slots,
//! and mapped to three stress logits by a shared linear head.

mod checkpoint;
mod config;
mod encoder;
mod matrix;
mod params;
mod train;

pub use checkpoint::{AttentionModel, Checkpoint, CheckpointHeader, NamedArray, CHECKPOINT_VERSION, FORMAT_ATTENTION, FORMAT_FOREST, FORMAT_ORDINAL};
pub use config::{FeatureMode, ModelConfig, Preset, TrainConfig};
pub use encoder::{
    backward, batch_loss, embed, forward, forward_trace, gradients, loss, softmax_rows, weighted_cross_entropy, Embedded, ForwardOutput, Trace,
    LAYER_NORM_EPS,
};
pub use matrix::Matrix;
pub use params::{LayerParams, ModelParams, NUM_CLASSES, TYPE_ROWS};
pub use train::{argmax, evaluate_set, predict, train, EpochStats, SyllablePrediction, TrainOutcome};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("numerical instability: {0}")]
    NumericalInstability(String),
    #[error("missing label at valid slot {position}")]
    Label { position: usize },
    #[error("training diverged at epoch {epoch}: {message}")]
    DivergedAtEpoch { epoch: usize, message: String },
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("empty data")]
    EmptyData,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
