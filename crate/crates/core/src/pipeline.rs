//! End-to-end steps shared by the command-line tool and the tests.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines::{predict_instances, samples_from_instances, train_forest, train_ordinal, Baseline, ForestConfig, OrdinalConfig};
use crate::corpus::{build_instances, label_utterance, split_by_group, ClassWeights, ExclusionScope, Labeling, UtteranceAlignment, WordInstance};
use crate::dsp::{compute_intensity, estimate_pitch, read_wav, DspConfig};
use crate::eval::{evaluate, EvalReport};
use crate::features::{extract_features, NormalizationPool, RawSyllableFeatures};
use crate::lexicon::{Lexicon, StressLevel};
use crate::model::{predict, train, AttentionModel, Checkpoint, EpochStats, FeatureMode, ModelConfig, Preset, TrainConfig, FORMAT_ATTENTION};
use crate::Error;

/// Raw measurements per aligned word of one utterance, from its audio.
pub fn measure_utterance(
    alignment: &UtteranceAlignment,
    samples: &[f64],
    sample_rate: u32,
    dsp: &DspConfig,
) -> Result<Vec<Vec<RawSyllableFeatures>>, Error> {
    let pitch = estimate_pitch(samples, sample_rate, dsp)?;
    let intensity = compute_intensity(samples, sample_rate, dsp)?;
    let mut out = Vec::with_capacity(alignment.words.len());
    for w in &alignment.words {
        let mut raw = Vec::with_capacity(w.syllables.len());
        for s in &w.syllables {
            raw.push(extract_features(&pitch, &intensity, s.span(), s.nucleus_span())?);
        }
        out.push(raw);
    }
    Ok(out)
}

/// Labels an aligned utterance, measures its audio and builds normalized word instances.
/// A relative `audio_path` in the alignment is resolved against `audio_dir`.
pub fn featurize_utterance(
    alignment: &UtteranceAlignment,
    audio_dir: &Path,
    lexicon: &Lexicon,
    dsp: &DspConfig,
    scope: ExclusionScope,
    pool: NormalizationPool,
) -> Result<(Vec<WordInstance>, Labeling), Error> {
    let labeling = label_utterance(alignment, lexicon, scope);
    let audio = resolve_audio(alignment, audio_dir);
    let (samples, rate) = read_wav::<f64>(&audio)?;
    let raw = measure_utterance(alignment, &samples, rate, dsp)?;
    let instances = build_instances(alignment, &raw, &labeling, pool)?;
    Ok((instances, labeling))
}

pub fn resolve_audio(alignment: &UtteranceAlignment, audio_dir: &Path) -> PathBuf {
    let name = if alignment.audio_path.is_empty() { format!("{}.wav", alignment.utterance_id) } else { alignment.audio_path.clone() };
    let p = PathBuf::from(name);
    if p.is_absolute() {
        p
    } else {
        audio_dir.join(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Or,
    Rf,
    AttnMedium,
    AttnLarge,
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "or" => Ok(ModelKind::Or),
            "rf" => Ok(ModelKind::Rf),
            "attn-medium" => Ok(ModelKind::AttnMedium),
            "attn-large" => Ok(ModelKind::AttnLarge),
            other => Err(Error::Config(format!("unknown model kind {other:?} (expected or, rf, attn-medium, attn-large)"))),
        }
    }
}

/// Everything needed to train any of the four model kinds.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainSettings {
    pub feature_mode: Option<FeatureMode>,
    /// Overrides the preset implied by the model kind.
    pub model_config: Option<ModelConfig>,
    pub train: TrainConfig,
    pub ordinal: OrdinalConfig,
    pub forest: ForestConfig,
}

// only a handful exist per run, so boxing the large variant buys nothing
#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel {
    Attention(AttentionModel<f64>),
    Baseline(Baseline),
}

/// Per-syllable predictions for each word, with the class scores.
pub type WordPredictions = Vec<Vec<(StressLevel, [f64; 3])>>;

impl TrainedModel {
    pub fn feature_mode(&self) -> FeatureMode {
        match self {
            TrainedModel::Attention(m) => m.config.feature_mode,
            TrainedModel::Baseline(b) => b.feature_mode(),
        }
    }

    pub fn class_weights(&self) -> Option<&ClassWeights> {
        match self {
            TrainedModel::Attention(m) => m.class_weights.as_ref(),
            TrainedModel::Baseline(_) => None,
        }
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        match self {
            TrainedModel::Attention(m) => m.to_checkpoint(),
            TrainedModel::Baseline(b) => b.to_checkpoint(),
        }
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self, Error> {
        if ckpt.header.format == FORMAT_ATTENTION {
            Ok(TrainedModel::Attention(AttentionModel::from_checkpoint(ckpt)?))
        } else {
            Ok(TrainedModel::Baseline(Baseline::from_checkpoint(ckpt)?))
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), Error> {
        Ok(self.to_checkpoint().save(path)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, Error> {
        Self::from_checkpoint(&Checkpoint::load(path)?)
    }

    pub fn predict_words(&self, words: &[WordInstance]) -> Result<WordPredictions, Error> {
        match self {
            TrainedModel::Attention(m) => {
                words.iter().map(|w| Ok(predict(&m.params, &m.config, w)?.into_iter().map(|p| (p.stress, p.probabilities)).collect())).collect()
            }
            TrainedModel::Baseline(b) => {
                Ok(predict_instances(b, words)?.into_iter().map(|w| w.into_iter().map(|p| (p.stress, p.scores)).collect()).collect())
            }
        }
    }

    /// Scores the model on `words`. Weighted accuracy uses the model's own training weights, if any.
    pub fn evaluate(&self, words: &[WordInstance]) -> Result<EvalReport, Error> {
        let preds: Vec<Vec<StressLevel>> = self.predict_words(words)?.into_iter().map(|w| w.into_iter().map(|(s, _)| s).collect()).collect();
        Ok(evaluate(&preds, words, self.class_weights())?)
    }
}

pub struct TrainResult {
    pub model: TrainedModel,
    pub history: Vec<EpochStats>,
}

/// Trains `kind` on `words`. Attention models hold out a validation share of
/// utterances (`validation_fraction`, split with the training seed).
pub fn train_model(kind: ModelKind, words: &[WordInstance], settings: &TrainSettings) -> Result<TrainResult, Error> {
    let mode = settings.feature_mode.unwrap_or(match kind {
        ModelKind::Or | ModelKind::Rf => FeatureMode::SyllableNumerical,
        _ => FeatureMode::AllFeatures,
    });
    let seed = settings.train.seed;
    match kind {
        ModelKind::Or => {
            let samples = samples_from_instances(words, mode)?;
            let m = train_ordinal(&samples, mode, &settings.ordinal, seed)?;
            Ok(TrainResult { model: TrainedModel::Baseline(Baseline::Ordinal(m)), history: Vec::new() })
        }
        ModelKind::Rf => {
            let samples = samples_from_instances(words, mode)?;
            let m = train_forest(&samples, mode, &settings.forest, seed)?;
            Ok(TrainResult { model: TrainedModel::Baseline(Baseline::Forest(m)), history: Vec::new() })
        }
        ModelKind::AttnMedium | ModelKind::AttnLarge => {
            let preset = if kind == ModelKind::AttnMedium { Preset::Medium } else { Preset::Large };
            let mut cfg = settings.model_config.clone().unwrap_or_else(|| ModelConfig::preset(preset, mode));
            cfg.feature_mode = mode;
            let (tr, val) = holdout(words.to_vec(), settings.train.validation_fraction, seed)?;
            let out = train::<f64>(&tr, &val, &cfg, &settings.train)?;
            Ok(TrainResult { model: TrainedModel::Attention(out.model), history: out.history })
        }
    }
}

fn holdout(words: Vec<WordInstance>, fraction: f64, seed: u64) -> Result<(Vec<WordInstance>, Vec<WordInstance>), Error> {
    if fraction <= 0.0 {
        return Ok((words, Vec::new()));
    }
    let groups = words.iter().map(|w| w.utterance_id.as_str()).collect::<std::collections::BTreeSet<_>>().len();
    if groups < 2 {
        return Ok((words, Vec::new()));
    }
    Ok(split_by_group(words, |w| w.utterance_id.as_str(), 1.0 - fraction, seed)?)
}

/// Hex SHA-256 of a byte string.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Record of one run: what went in and which seeds were used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub tool_version: String,
    pub config_sha256: String,
    pub config: serde_json::Value,
    pub seeds: std::collections::BTreeMap<String, u64>,
    /// Input path -> SHA-256 of its contents.
    pub inputs: std::collections::BTreeMap<String, String>,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, config: serde_json::Value) -> Self {
        let canonical = serde_json::to_vec(&config).expect("json value serializes");
        Self {
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_sha256: sha256_hex(&canonical),
            config,
            seeds: Default::default(),
            inputs: Default::default(),
            outputs: Vec::new(),
        }
    }

    pub fn add_input(&mut self, path: &Path) -> Result<(), Error> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        self.inputs.insert(path.display().to_string(), sha256_hex(&bytes));
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<(), Error> {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        std::fs::write(path, s).map_err(|e| Error::io(path, e))
    }
}
