use serde::{Deserialize, Serialize};

use super::{CorpusError, UtteranceAlignment, WordInstance};
use crate::features::{normalize_sentence_pooled, NormalizationPool, RawSyllableFeatures};
use crate::lexicon::{syllabify, Lexicon, NucleusType, StressLevel};
use crate::MAX_SYLLABLES;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ExclusionReason {
    NotFound,
    Monosyllabic,
    CountMismatch,
    TooLong,
    /// Dropped because another word of the utterance failed (utterance scope).
    UtteranceExcluded,
}

/// Whether a lookup/count failure drops only the word or its whole utterance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExclusionScope {
    #[default]
    Word,
    Utterance,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exclusion {
    pub word_index: usize,
    pub word: String,
    pub reason: ExclusionReason,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordLabel {
    pub word_index: usize,
    pub text: String,
    pub variant_index: usize,
    pub stresses: Vec<StressLevel>,
    pub nuclei: Vec<NucleusType>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Labeling {
    pub utterance_id: String,
    pub labels: Vec<WordLabel>,
    pub exclusions: Vec<Exclusion>,
}

/// Attaches dictionary stress labels to each aligned word.
///
/// The first pronunciation variant whose syllable count equals the aligned count
/// is used. Words with a single syllable, no dictionary entry, no matching variant
/// or more than [`MAX_SYLLABLES`] syllables are reported as exclusions.
pub fn label_utterance(alignment: &UtteranceAlignment, lexicon: &Lexicon, scope: ExclusionScope) -> Labeling {
    let mut labels = Vec::new();
    let mut exclusions = Vec::new();
    for (word_index, word) in alignment.words.iter().enumerate() {
        let n = word.syllables.len();
        let exclude = |reason| Exclusion { word_index, word: word.text.clone(), reason };
        let Some(variants) = lexicon.lookup(&word.text) else {
            exclusions.push(exclude(ExclusionReason::NotFound));
            continue;
        };
        if n > MAX_SYLLABLES {
            exclusions.push(exclude(ExclusionReason::TooLong));
            continue;
        }
        let matched = variants.iter().filter(|v| v.vowel_count() == n).find_map(|v| syllabify(v).ok().map(|s| (v.variant_index, s)));
        let Some((variant_index, syl)) = matched else {
            exclusions.push(exclude(ExclusionReason::CountMismatch));
            continue;
        };
        if n < 2 {
            exclusions.push(exclude(ExclusionReason::Monosyllabic));
            continue;
        }
        let nuclei =
            word.syllables.iter().zip(&syl.syllables).map(|(aligned, dict)| aligned.nucleus.nucleus_type().unwrap_or(dict.nucleus)).collect();
        labels.push(WordLabel { word_index, text: word.text.clone(), variant_index, stresses: syl.stresses(), nuclei });
    }
    let failed = exclusions.iter().any(|e| e.reason != ExclusionReason::Monosyllabic);
    if scope == ExclusionScope::Utterance && failed {
        exclusions.extend(labels.drain(..).map(|l| Exclusion { word_index: l.word_index, word: l.text, reason: ExclusionReason::UtteranceExcluded }));
        exclusions.sort_by_key(|e| e.word_index);
    }
    Labeling { utterance_id: alignment.utterance_id.clone(), labels, exclusions }
}

/// Normalizes one utterance's raw features and emits a padded instance per labeled word.
///
/// `raw[w][s]` holds the measurements of syllable `s` of aligned word `w`.
pub fn build_instances(
    alignment: &UtteranceAlignment,
    raw: &[Vec<RawSyllableFeatures>],
    labeling: &Labeling,
    pool: NormalizationPool,
) -> Result<Vec<WordInstance>, CorpusError> {
    if labeling.labels.is_empty() {
        return Ok(Vec::new());
    }
    let flat: Vec<RawSyllableFeatures> = raw.iter().flatten().copied().collect();
    let in_pool: Vec<bool> = raw
        .iter()
        .flat_map(|w| {
            let keep = pool == NormalizationPool::Sentence || w.len() >= 2;
            std::iter::repeat_n(keep, w.len())
        })
        .collect();
    let normalized = normalize_sentence_pooled(&flat, &in_pool)?;
    let mut offsets = Vec::with_capacity(raw.len());
    let mut acc = 0;
    for w in raw {
        offsets.push(acc);
        acc += w.len();
    }
    labeling
        .labels
        .iter()
        .map(|label| {
            let start = offsets[label.word_index];
            let syllables: Vec<_> = (0..label.stresses.len()).map(|s| (normalized[start + s], label.nuclei[s], Some(label.stresses[s]))).collect();
            WordInstance::new(alignment.utterance_id.clone(), label.text.clone(), label.word_index, &syllables)
        })
        .collect()
}
