use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::CorpusError;
use crate::features::Span;
use crate::lexicon::{nucleus_type_of, split_stress, NucleusType};

/// Version written to and required in the `schema` field.
pub const ALIGNMENT_SCHEMA: u32 = 1;

/// Syllable and nucleus timestamps for one utterance.
///
/// ```json
/// {"schema": 1, "utterance_id": "u0001", "audio_path": "u0001.wav",
///  "words": [{"text": "cat", "syllables": [
///     {"start_s": 0.10, "end_s": 0.32,
///      "nucleus": {"tag": "ae", "start_s": 0.15, "end_s": 0.27}}]}]}
/// ```
///
/// The nucleus may name a `tag` (one of the sixteen nucleus types) or an ARPAbet
/// `phoneme` with stress digit; both are optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UtteranceAlignment {
    pub schema: u32,
    pub utterance_id: String,
    #[serde(default)]
    pub audio_path: String,
    pub words: Vec<AlignedWord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlignedWord {
    pub text: String,
    pub syllables: Vec<AlignedSyllable>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlignedSyllable {
    pub start_s: f64,
    pub end_s: f64,
    pub nucleus: AlignedNucleus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlignedNucleus {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phoneme: Option<String>,
    pub start_s: f64,
    pub end_s: f64,
}

impl AlignedSyllable {
    pub fn span(&self) -> Span {
        Span::new(self.start_s, self.end_s)
    }

    pub fn nucleus_span(&self) -> Span {
        Span::new(self.nucleus.start_s, self.nucleus.end_s)
    }
}

impl AlignedNucleus {
    /// Nucleus type named by the alignment, if any.
    pub fn nucleus_type(&self) -> Option<NucleusType> {
        if let Some(tag) = &self.tag {
            return tag.parse().ok();
        }
        let phoneme = self.phoneme.as_deref()?.to_ascii_uppercase();
        let (base, digit) = split_stress(&phoneme);
        nucleus_type_of(base, digit.unwrap_or(1)).ok()
    }
}

impl UtteranceAlignment {
    /// Checks span ordering; `path` only labels the error.
    pub fn validate(&self, path: &Path) -> Result<(), CorpusError> {
        let fail = |word: &str, message: String| CorpusError::InvalidSpans { path: path.to_path_buf(), word: word.to_string(), message };
        if self.schema != ALIGNMENT_SCHEMA {
            return Err(CorpusError::AlignmentFormat {
                path: path.to_path_buf(),
                line: 0,
                column: 0,
                message: format!("unsupported schema {} (expected {ALIGNMENT_SCHEMA})", self.schema),
            });
        }
        for w in &self.words {
            let mut prev_end = f64::NEG_INFINITY;
            for (i, s) in w.syllables.iter().enumerate() {
                let times = [s.start_s, s.end_s, s.nucleus.start_s, s.nucleus.end_s];
                if times.iter().any(|t| !t.is_finite() || *t < 0.0) {
                    return Err(fail(&w.text, format!("syllable {i} has a negative or non-finite time")));
                }
                if !(s.start_s < s.end_s) || !(s.nucleus.start_s < s.nucleus.end_s) {
                    return Err(fail(&w.text, format!("syllable {i} has an empty or inverted span")));
                }
                if !s.span().contains(&s.nucleus_span()) {
                    return Err(fail(&w.text, format!("nucleus of syllable {i} lies outside the syllable span")));
                }
                if s.start_s < prev_end {
                    return Err(fail(&w.text, format!("syllable {i} overlaps or precedes the previous one")));
                }
                prev_end = s.end_s;
            }
        }
        Ok(())
    }
}

/// Parses and validates an alignment document.
pub fn parse_alignment(text: &str, path: &Path) -> Result<UtteranceAlignment, CorpusError> {
    let alignment: UtteranceAlignment = serde_json::from_str(text).map_err(|e| CorpusError::AlignmentFormat {
        path: path.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    alignment.validate(path)?;
    Ok(alignment)
}

pub fn load_alignment(path: impl AsRef<Path>) -> Result<UtteranceAlignment, CorpusError> {
    let path: PathBuf = path.as_ref().to_path_buf();
    let text = fs::read_to_string(&path)?;
    parse_alignment(&text, &path)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_WORDS: &str = r#"{"schema": 1, "utterance_id": "u1", "audio_path": "u1.wav", "words": [
        {"text": "overcome", "syllables": [
            {"start_s": 0.0, "end_s": 0.2, "nucleus": {"tag": "ow", "start_s": 0.05, "end_s": 0.15}},
            {"start_s": 0.2, "end_s": 0.35, "nucleus": {"phoneme": "ER0", "start_s": 0.22, "end_s": 0.3}},
            {"start_s": 0.35, "end_s": 0.6, "nucleus": {"phoneme": "AH1", "start_s": 0.4, "end_s": 0.55}}]},
        {"text": "cat", "syllables": [
            {"start_s": 0.7, "end_s": 0.9, "nucleus": {"start_s": 0.75, "end_s": 0.85}}]}]}"#;

    #[test]
    fn parses_two_words() {
        let a = parse_alignment(TWO_WORDS, Path::new("u1.json")).unwrap();
        assert_eq!(a.words.len(), 2);
        let types: Vec<_> = a.words[0].syllables.iter().map(|s| s.nucleus.nucleus_type()).collect();
        assert_eq!(types, vec![Some(NucleusType::Ow), Some(NucleusType::Er), Some(NucleusType::Ah)]);
        assert_eq!(a.words[1].syllables[0].nucleus.nucleus_type(), None);
    }

    #[test]
    fn nucleus_outside_syllable_is_rejected() {
        let bad = TWO_WORDS.replace(r#""start_s": 0.75, "end_s": 0.85"#, r#""start_s": 0.75, "end_s": 0.95"#);
        assert!(matches!(parse_alignment(&bad, Path::new("x")), Err(CorpusError::InvalidSpans { .. })));
    }

    #[test]
    fn overlapping_syllables_are_rejected() {
        let bad = TWO_WORDS.replace(r#"{"start_s": 0.2, "end_s": 0.35"#, r#"{"start_s": 0.1, "end_s": 0.35"#);
        assert!(matches!(parse_alignment(&bad, Path::new("x")), Err(CorpusError::InvalidSpans { .. })));
    }

    #[test]
    fn empty_word_list_is_valid() {
        let a = parse_alignment(r#"{"schema": 1, "utterance_id": "e", "words": []}"#, Path::new("e")).unwrap();
        assert!(a.words.is_empty());
    }

    #[test]
    fn schema_errors_carry_position() {
        let err = parse_alignment("{\"schema\": 1,\n \"utterance_id\": 5, \"words\": []}", Path::new("bad.json")).unwrap_err();
        match err {
            CorpusError::AlignmentFormat { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        let unknown = parse_alignment(r#"{"schema": 1, "utterance_id": "e", "words": [], "extra": 1}"#, Path::new("e"));
        assert!(matches!(unknown, Err(CorpusError::AlignmentFormat { .. })));
        let version = parse_alignment(r#"{"schema": 2, "utterance_id": "e", "words": []}"#, Path::new("e"));
        assert!(matches!(version, Err(CorpusError::AlignmentFormat { .. })));
    }
}
