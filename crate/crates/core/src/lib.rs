//! Syllable-level lexical stress detection.
//!
//! The crate covers the whole pipeline: CMU dictionary parsing and syllabification
//! ([`lexicon`]), pitch and intensity tracking ([`dsp`]), per-syllable prosodic
//! features with sentence-level normalization ([`features`]), corpus handling and
//! class weighting ([`corpus`]), the masked self-attention classifier ([`model`]),
//! per-syllable baselines ([`baselines`]) and evaluation ([`eval`]).
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases below
//! name the common instantiations.

// Negated float comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod corpus;
pub mod dsp;
pub mod error;
pub mod eval;
pub mod features;
pub mod lexicon;
pub mod model;
pub mod pipeline;
pub mod scalar;

pub use error::{Error, ErrorKind};
pub use lexicon::{Lexicon, NucleusType, PronEntry, StressLevel, Syllabification};
pub use scalar::Scalar;

/// Maximum number of syllable slots in a word instance.
pub const MAX_SYLLABLES: usize = 17;

pub type PitchTrack64 = dsp::PitchTrack<f64>;
pub type PitchTrack32 = dsp::PitchTrack<f32>;
pub type IntensityTrack64 = dsp::IntensityTrack<f64>;
pub type IntensityTrack32 = dsp::IntensityTrack<f32>;
pub type ModelParams64 = model::ModelParams<f64>;
pub type ModelParams32 = model::ModelParams<f32>;
pub type Matrix64 = model::Matrix<f64>;
pub type Matrix32 = model::Matrix<f32>;
