use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::CorpusError;
use crate::features::{FeatureVector, SyllableObservation, FEATURE_COUNT};
use crate::lexicon::{NucleusType, StressLevel};
use crate::MAX_SYLLABLES;

/// One word padded to [`MAX_SYLLABLES`] slots.
///
/// Slots `valid_count..` are padding: zero features, `Pad` type, mask false, no label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "WordRecord", try_from = "WordRecord")]
pub struct WordInstance {
    pub utterance_id: String,
    pub word: String,
    pub word_index: usize,
    pub observations: [SyllableObservation; MAX_SYLLABLES],
    pub valid_count: usize,
    pub mask: [bool; MAX_SYLLABLES],
}

impl WordInstance {
    pub fn new(
        utterance_id: impl Into<String>,
        word: impl Into<String>,
        word_index: usize,
        syllables: &[(FeatureVector, NucleusType, Option<StressLevel>)],
    ) -> Result<Self, CorpusError> {
        let word = word.into();
        if syllables.is_empty() || syllables.len() > MAX_SYLLABLES {
            return Err(CorpusError::BadSyllableCount { word, count: syllables.len() });
        }
        let mut observations: [SyllableObservation; MAX_SYLLABLES] = std::array::from_fn(SyllableObservation::padding);
        let mut mask = [false; MAX_SYLLABLES];
        for (i, &(features, nucleus_type, stress)) in syllables.iter().enumerate() {
            observations[i] = SyllableObservation { features, nucleus_type, position: i, stress };
            mask[i] = true;
        }
        Ok(Self { utterance_id: utterance_id.into(), word, word_index, observations, valid_count: syllables.len(), mask })
    }

    pub fn valid(&self) -> &[SyllableObservation] {
        &self.observations[..self.valid_count]
    }

    /// Gold labels per slot; `None` is the ignore marker.
    pub fn labels(&self) -> [Option<StressLevel>; MAX_SYLLABLES] {
        std::array::from_fn(|i| self.observations[i].stress)
    }

    /// Padding slots are zero-featured, `Pad`-typed, unmasked and unlabeled.
    pub fn satisfies_padding_invariant(&self) -> bool {
        (0..MAX_SYLLABLES).all(|i| {
            let o = &self.observations[i];
            let is_valid = i < self.valid_count;
            o.position == i
                && self.mask[i] == is_valid
                && (is_valid || (o.nucleus_type == NucleusType::Pad && o.stress.is_none() && o.features.iter().all(|&v| v == 0.0)))
                && (!is_valid || o.nucleus_type != NucleusType::Pad)
        })
    }
}

/// Line format of the feature table: one JSON object per word instance,
/// fields in the order `utterance_id, word, word_index, syllables`; each syllable
/// holds `position, nucleus, stress, features` (twelve numbers in slot order).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WordRecord {
    pub utterance_id: String,
    pub word: String,
    pub word_index: usize,
    pub syllables: Vec<SyllableRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyllableRecord {
    pub position: usize,
    pub nucleus: NucleusType,
    pub stress: Option<StressLevel>,
    pub features: Vec<f64>,
}

impl From<WordInstance> for WordRecord {
    fn from(w: WordInstance) -> Self {
        let syllables = w
            .valid()
            .iter()
            .map(|o| SyllableRecord { position: o.position, nucleus: o.nucleus_type, stress: o.stress, features: o.features.to_vec() })
            .collect();
        WordRecord { utterance_id: w.utterance_id, word: w.word, word_index: w.word_index, syllables }
    }
}

impl TryFrom<WordRecord> for WordInstance {
    type Error = String;

    fn try_from(r: WordRecord) -> Result<Self, Self::Error> {
        let mut syllables = Vec::with_capacity(r.syllables.len());
        for (i, s) in r.syllables.iter().enumerate() {
            if s.position != i {
                return Err(format!("syllable {i} has position {}", s.position));
            }
            if s.nucleus.is_pad() {
                return Err(format!("syllable {i} has the padding nucleus type"));
            }
            let features: FeatureVector =
                s.features.as_slice().try_into().map_err(|_| format!("syllable {i} has {} features, expected {FEATURE_COUNT}", s.features.len()))?;
            if features.iter().any(|v| !v.is_finite()) {
                return Err(format!("syllable {i} has a non-finite feature"));
            }
            syllables.push((features, s.nucleus, s.stress));
        }
        WordInstance::new(r.utterance_id, r.word, r.word_index, &syllables).map_err(|e| e.to_string())
    }
}

pub fn write_instances<'a>(mut out: impl Write, instances: impl IntoIterator<Item = &'a WordInstance>) -> Result<(), CorpusError> {
    for w in instances {
        let line = serde_json::to_string(w).map_err(|e| CorpusError::TableFormat { line: 0, message: e.to_string() })?;
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn read_instances(reader: impl BufRead) -> Result<Vec<WordInstance>, CorpusError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let w: WordInstance = serde_json::from_str(&line).map_err(|e| CorpusError::TableFormat { line: i + 1, message: e.to_string() })?;
        out.push(w);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use StressLevel::*;

    fn sample() -> WordInstance {
        let mut f = [0.0; FEATURE_COUNT];
        f[0] = 1.5;
        WordInstance::new(
            "u",
            "emotion",
            2,
            &[(f, NucleusType::Ih, Some(NonStress)), (f, NucleusType::Ow, Some(Primary)), (f, NucleusType::Ax, None)],
        )
        .unwrap()
    }

    #[test]
    fn padding_invariant_holds() {
        let w = sample();
        assert_eq!(w.valid_count, 3);
        assert!(w.satisfies_padding_invariant());
        assert_eq!(w.labels()[1], Some(Primary));
        assert_eq!(w.labels()[5], None);
    }

    #[test]
    fn rejects_bad_lengths() {
        assert!(WordInstance::new("u", "x", 0, &[]).is_err());
        let many = vec![([0.0; FEATURE_COUNT], NucleusType::Ax, None); 18];
        assert!(matches!(WordInstance::new("u", "x", 0, &many), Err(CorpusError::BadSyllableCount { count: 18, .. })));
    }

    #[test]
    fn table_round_trip() {
        let w = sample();
        let mut buf = Vec::new();
        write_instances(&mut buf, [&w]).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(
            r#"{"utterance_id":"u","word":"emotion","word_index":2,"syllables":[{"position":0,"nucleus":"ih","stress":"non_stress","features":[1.5,"#
        ));
        assert_eq!(read_instances(buf.as_slice()).unwrap(), vec![w]);
    }

    #[test]
    fn bad_lines_report_line_numbers() {
        let err = read_instances("\n{\"utterance_id\":\"u\"}\n".as_bytes()).unwrap_err();
        assert!(matches!(err, CorpusError::TableFormat { line: 2, .. }));
    }
}
