//! Crate-wide error with a coarse category used for process exit codes.

use crate::baselines::BaselineError;
use crate::corpus::CorpusError;
use crate::dsp::DspError;
use crate::eval::EvalError;
use crate::features::FeatureError;
use crate::lexicon::LexiconError;
use crate::model::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad settings: invalid config values, unsupported modes, unknown formats.
    Config,
    /// Bad or unreadable input data, or a failed computation on it.
    Data,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("lexicon: {0}")]
    Lexicon(#[from] LexiconError),
    #[error("dsp: {0}")]
    Dsp(#[from] DspError),
    #[error("features: {0}")]
    Feature(#[from] FeatureError),
    #[error("corpus: {0}")]
    Corpus(#[from] CorpusError),
    #[error("model: {0}")]
    Model(#[from] ModelError),
    #[error("baseline: {0}")]
    Baseline(#[from] BaselineError),
    #[error("eval: {0}")]
    Eval(#[from] EvalError),
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io { path: path.as_ref().display().to_string(), source }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_)
            | Error::Dsp(DspError::InvalidConfig(_))
            | Error::Corpus(CorpusError::InvalidConfig(_))
            | Error::Model(ModelError::InvalidConfig(_))
            | Error::Baseline(BaselineError::InvalidConfig(_) | BaselineError::UnsupportedFeatureMode(_))
            | Error::Eval(EvalError::Format(_)) => ErrorKind::Config,
            _ => ErrorKind::Data,
        }
    }
}
