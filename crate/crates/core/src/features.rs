//! The twelve per-syllable prosodic measurements and their sentence-level normalization.
//!
//! Slot order (fixed, also used by feature tables and checkpoints):
//! six measurements over the syllable span followed by the same six over the
//! nucleus span, each group ordered as pitch mean, pitch max, voiced duration,
//! intensity mean, intensity max, duration.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsp::{segment_stats, DspError, IntensityTrack, PitchTrack};
use crate::lexicon::{NucleusType, StressLevel};
use crate::Scalar;

pub const FEATURE_COUNT: usize = 12;
/// Number of syllable-span slots (the first half of the vector).
pub const SYLLABLE_FEATURE_COUNT: usize = 6;

pub const FEATURE_SLOTS: [&str; FEATURE_COUNT] = [
    "syl_pitch_mean",
    "syl_pitch_max",
    "syl_voiced_dur_s",
    "syl_int_mean",
    "syl_int_max",
    "syl_dur_s",
    "nuc_pitch_mean",
    "nuc_pitch_max",
    "nuc_voiced_dur_s",
    "nuc_int_mean",
    "nuc_int_max",
    "nuc_dur_s",
];

/// Offsets within one six-slot group.
pub mod slot {
    pub const PITCH_MEAN: usize = 0;
    pub const PITCH_MAX: usize = 1;
    pub const VOICED_DUR: usize = 2;
    pub const INT_MEAN: usize = 3;
    pub const INT_MAX: usize = 4;
    pub const DUR: usize = 5;
    /// Start of the nucleus group.
    pub const NUCLEUS: usize = 6;
}

pub type FeatureVector = [f64; FEATURE_COUNT];

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("span [{start}, {end}) lies outside the track extent [0, {extent}]")]
    SpanOutOfRange { start: f64, end: f64, extent: f64 },
    #[error("nucleus span [{0}, {1}) is not inside its syllable span")]
    NucleusOutsideSyllable(f64, f64),
    #[error("sentence has no syllables")]
    EmptySentence,
    #[error(transparent)]
    Dsp(#[from] DspError),
}

/// Half-open time interval in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Span {
    pub start_s: f64,
    pub end_s: f64,
}

impl Span {
    pub fn new(start_s: f64, end_s: f64) -> Self {
        Self { start_s, end_s }
    }

    pub fn len(&self) -> f64 {
        self.end_s - self.start_s
    }

    pub fn contains(&self, other: &Span) -> bool {
        other.start_s >= self.start_s && other.end_s <= self.end_s
    }
}

/// Unnormalized measurements; `None` marks an absent statistic (no voiced frame in the span).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RawSyllableFeatures {
    pub slots: [Option<f64>; FEATURE_COUNT],
}

impl RawSyllableFeatures {
    pub fn get(&self, i: usize) -> Option<f64> {
        self.slots[i]
    }

    pub fn syllable_duration(&self) -> Option<f64> {
        self.slots[slot::DUR]
    }

    pub fn nucleus_duration(&self) -> Option<f64> {
        self.slots[slot::NUCLEUS + slot::DUR]
    }
}

/// One syllable as seen by the classifiers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyllableObservation {
    pub features: FeatureVector,
    pub nucleus_type: NucleusType,
    pub position: usize,
    pub stress: Option<StressLevel>,
}

impl SyllableObservation {
    /// Empty slot: zero features, `Pad` type, no label.
    pub fn padding(position: usize) -> Self {
        Self { features: [0.0; FEATURE_COUNT], nucleus_type: NucleusType::Pad, position, stress: None }
    }
}

fn group_stats<F: Scalar>(pitch: &PitchTrack<F>, intensity: &IntensityTrack<F>, span: Span, out: &mut [Option<f64>]) -> Result<(), FeatureError> {
    let (start, end) = (F::of(span.start_s), F::of(span.end_s));
    let p = segment_stats(pitch, start, end)?;
    let i = segment_stats(intensity, start, end)?;
    out[slot::PITCH_MEAN] = p.mean.map(Scalar::as_f64);
    out[slot::PITCH_MAX] = p.max.map(Scalar::as_f64);
    out[slot::VOICED_DUR] = Some(p.voiced_duration_s.as_f64());
    out[slot::INT_MEAN] = i.mean.map(Scalar::as_f64);
    out[slot::INT_MAX] = i.max.map(Scalar::as_f64);
    out[slot::DUR] = Some(span.len());
    Ok(())
}

/// Twelve measurements for one syllable from the utterance's pitch and intensity tracks.
pub fn extract_features<F: Scalar>(
    pitch: &PitchTrack<F>,
    intensity: &IntensityTrack<F>,
    syllable: Span,
    nucleus: Span,
) -> Result<RawSyllableFeatures, FeatureError> {
    let extent = pitch.duration_s.as_f64().max(intensity.duration_s.as_f64());
    for span in [syllable, nucleus] {
        if span.start_s < 0.0 || span.end_s > extent + 1e-6 {
            return Err(FeatureError::SpanOutOfRange { start: span.start_s, end: span.end_s, extent });
        }
    }
    if !syllable.contains(&nucleus) {
        return Err(FeatureError::NucleusOutsideSyllable(nucleus.start_s, nucleus.end_s));
    }
    let mut raw = RawSyllableFeatures::default();
    group_stats(pitch, intensity, syllable, &mut raw.slots[..slot::NUCLEUS])?;
    group_stats(pitch, intensity, nucleus, &mut raw.slots[slot::NUCLEUS..])?;
    Ok(raw)
}

/// Which syllables contribute to the sentence means.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizationPool {
    /// Every syllable of the utterance.
    #[default]
    Sentence,
    /// Only syllables of words with two or more syllables.
    MultisyllabicOnly,
}

/// Subtracts the per-slot sentence mean from every syllable. Absent entries become 0.
pub fn normalize_sentence(raw: &[RawSyllableFeatures]) -> Result<Vec<FeatureVector>, FeatureError> {
    normalize_sentence_pooled(raw, &vec![true; raw.len()])
}

/// Like [`normalize_sentence`] but the means are taken only over syllables with `pool[i]`.
pub fn normalize_sentence_pooled(raw: &[RawSyllableFeatures], pool: &[bool]) -> Result<Vec<FeatureVector>, FeatureError> {
    if raw.is_empty() {
        return Err(FeatureError::EmptySentence);
    }
    assert_eq!(raw.len(), pool.len(), "pool mask must match the syllable count");
    let mut means = [0.0; FEATURE_COUNT];
    for (k, mean) in means.iter_mut().enumerate() {
        let (sum, n) = raw.iter().zip(pool).filter(|(_, &p)| p).filter_map(|(r, _)| r.slots[k]).fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
        *mean = if n > 0 { sum / n as f64 } else { 0.0 };
    }
    Ok(raw
        .iter()
        .map(|r| {
            let mut out = [0.0; FEATURE_COUNT];
            for k in 0..FEATURE_COUNT {
                out[k] = r.slots[k].map_or(0.0, |v| v - means[k]);
            }
            out
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::{IntensityFrame, PitchFrame};

    fn raw_with(slot_idx: usize, values: &[Option<f64>]) -> Vec<RawSyllableFeatures> {
        values
            .iter()
            .map(|v| {
                let mut r = RawSyllableFeatures { slots: [Some(1.0); FEATURE_COUNT] };
                r.slots[slot_idx] = *v;
                r
            })
            .collect()
    }

    fn tracks() -> (PitchTrack<f64>, IntensityTrack<f64>) {
        let f0 = [Some(100.0), Some(120.0), None, Some(140.0), None, None];
        let db = [-30.0, -20.0, -10.0, -12.0, -40.0, -50.0];
        let pitch = PitchTrack {
            frame_hop_s: 0.01,
            duration_s: 0.06,
            frames: f0.iter().enumerate().map(|(i, f)| PitchFrame { time_s: 0.005 + 0.01 * i as f64, f0_hz: *f }).collect(),
        };
        let intensity = IntensityTrack {
            frame_hop_s: 0.01,
            duration_s: 0.06,
            frames: db.iter().enumerate().map(|(i, d)| IntensityFrame { time_s: 0.005 + 0.01 * i as f64, db: *d }).collect(),
        };
        (pitch, intensity)
    }

    fn close(a: Option<f64>, b: f64) -> bool {
        a.is_some_and(|a| (a - b).abs() < 1e-9)
    }

    #[test]
    fn hand_computed_vector() {
        let (p, i) = tracks();
        let r = extract_features(&p, &i, Span::new(0.0, 0.04), Span::new(0.01, 0.03)).unwrap();
        assert!(close(r.get(0), 120.0));
        assert!(close(r.get(1), 140.0));
        assert!(close(r.get(2), 0.03));
        assert!(close(r.get(3), -18.0));
        assert!(close(r.get(4), -10.0));
        assert!(close(r.get(5), 0.04));
        assert!(close(r.get(6), 120.0));
        assert!(close(r.get(7), 120.0));
        assert!(close(r.get(8), 0.01));
        assert!(close(r.get(9), -15.0));
        assert!(close(r.get(10), -10.0));
        assert!(close(r.get(11), 0.02));
    }

    #[test]
    fn unvoiced_syllable_has_absent_pitch() {
        let (p, i) = tracks();
        let r = extract_features(&p, &i, Span::new(0.04, 0.06), Span::new(0.04, 0.05)).unwrap();
        assert_eq!(r.get(0), None);
        assert_eq!(r.get(1), None);
        assert_eq!(r.get(2), Some(0.0));
        assert!(close(r.get(3), -45.0));
        assert!(close(r.get(4), -40.0));
    }

    #[test]
    fn identical_spans_give_identical_halves() {
        let (p, i) = tracks();
        let span = Span::new(0.0, 0.05);
        let r = extract_features(&p, &i, span, span).unwrap();
        assert_eq!(r.slots[..6], r.slots[6..]);
    }

    #[test]
    fn span_errors() {
        let (p, i) = tracks();
        assert!(matches!(extract_features(&p, &i, Span::new(0.0, 0.5), Span::new(0.0, 0.01)), Err(FeatureError::SpanOutOfRange { .. })));
        assert!(matches!(extract_features(&p, &i, Span::new(0.0, 0.02), Span::new(0.01, 0.03)), Err(FeatureError::NucleusOutsideSyllable(..))));
    }

    #[test]
    fn normalization_examples() {
        let out = normalize_sentence(&raw_with(slot::DUR, &[Some(0.1), Some(0.3)])).unwrap();
        assert!((out[0][slot::DUR] + 0.1).abs() < 1e-12);
        assert!((out[1][slot::DUR] - 0.1).abs() < 1e-12);

        let single = normalize_sentence(&raw_with(0, &[Some(42.0)])).unwrap();
        assert!(single[0].iter().all(|&v| v == 0.0));

        let out = normalize_sentence(&raw_with(0, &[Some(100.0), None, Some(140.0)])).unwrap();
        assert_eq!([out[0][0], out[1][0], out[2][0]], [-20.0, 0.0, 20.0]);

        let all_absent = normalize_sentence(&raw_with(1, &[None, None])).unwrap();
        assert!(all_absent.iter().all(|v| v[1] == 0.0));

        assert!(matches!(normalize_sentence(&[]), Err(FeatureError::EmptySentence)));
    }

    #[test]
    fn pooled_means_exclude_unpooled() {
        let raw = raw_with(0, &[Some(10.0), Some(20.0), Some(90.0)]);
        let out = normalize_sentence_pooled(&raw, &[true, true, false]).unwrap();
        assert_eq!([out[0][0], out[1][0], out[2][0]], [-5.0, 5.0, 75.0]);
    }
}
