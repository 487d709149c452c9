//! Alignments, dictionary labels, word instances, splitting, class weights and
//! the synthetic corpus generator.

mod alignment;
mod instance;
mod label;
mod split;
mod synth;
mod weights;

pub use alignment::{load_alignment, parse_alignment, AlignedNucleus, AlignedSyllable, AlignedWord, UtteranceAlignment, ALIGNMENT_SCHEMA};
pub use instance::{read_instances, write_instances, SyllableRecord, WordInstance, WordRecord};
pub use label::{build_instances, label_utterance, Exclusion, ExclusionReason, ExclusionScope, Labeling, WordLabel};
pub use split::{split, split_by_group};
pub use synth::{synth_corpus, GenConfig, SynthCorpus, SynthUtterance};
pub use weights::{compute_class_weights, weights_from_proportions, ClassWeights, WEIGHT_EXPONENT};

use std::path::PathBuf;

use thiserror::Error;

use crate::features::FeatureError;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: line {line}, column {column}: {message}")]
    AlignmentFormat { path: PathBuf, line: usize, column: usize, message: String },
    #[error("{path}: invalid spans in word {word:?}: {message}")]
    InvalidSpans { path: PathBuf, word: String, message: String },
    #[error("need at least 2 utterances to split, got {0}")]
    SplitTooSmall(usize),
    #[error("training set is empty")]
    EmptyTrain,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("word {word:?} has {count} syllables (must be 1..={max})", max = crate::MAX_SYLLABLES)]
    BadSyllableCount { word: String, count: usize },
    #[error("feature table line {line}: {message}")]
    TableFormat { line: usize, message: String },
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
