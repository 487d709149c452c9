//! Synthetic corpus with class-conditioned prosodic measurements.
//!
//! Raw features are drawn directly (no audio is rendered). Each slot family has a
//! scale (duration 0.05 s, pitch 20 Hz, intensity 3 dB); `sigma`, the nucleus-type
//! offsets and `word_jitter` are expressed in units of those scales.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{
    build_instances, label_utterance, AlignedNucleus, AlignedSyllable, AlignedWord, CorpusError, ExclusionScope, UtteranceAlignment, WordInstance,
    ALIGNMENT_SCHEMA,
};
use crate::features::{slot, NormalizationPool, RawSyllableFeatures};
use crate::lexicon::{syllabify, Lexicon, NucleusType, StressLevel};
use crate::MAX_SYLLABLES;

const DURATION_SCALE: f64 = 0.05;
const PITCH_SCALE: f64 = 20.0;
const INTENSITY_SCALE: f64 = 3.0;
const MIN_SYLLABLE_S: f64 = 0.03;

/// Generator parameters. Per-class arrays are indexed by [`StressLevel::index`]
/// (non-stress, primary, secondary).
///
/// The defaults give primary syllables a pitch accent, extra loudness and length,
/// and mark secondary syllables mainly by length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    /// Gaussian noise on every slot, in slot-scale units.
    pub sigma: f64,
    pub base_duration_s: f64,
    pub duration_factors: [f64; 3],
    pub base_pitch_hz: f64,
    pub pitch_offsets_hz: [f64; 3],
    pub base_intensity_db: f64,
    pub intensity_offsets_db: [f64; 3],
    /// Std of the per-nucleus-type base offsets, drawn once per corpus.
    pub type_offset_sd: f64,
    /// Probability that a syllable has no voiced frame (pitch statistics absent).
    pub unvoiced_prob: [f64; 3],
    /// Std of a per-word offset shared by all syllables of a word. Large values
    /// make stress recoverable only relative to neighbouring syllables.
    pub word_jitter: f64,
    /// Fraction of the syllable taken by its nucleus.
    pub nucleus_fraction: f64,
    /// Fraction of the syllable with a detectable pitch when voiced.
    pub voiced_fraction: f64,
    pub min_words: usize,
    pub max_words: usize,
    pub pause_s: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            sigma: 0.5,
            base_duration_s: 0.15,
            duration_factors: [1.0, 1.6, 1.4],
            base_pitch_hz: 120.0,
            pitch_offsets_hz: [0.0, 40.0, 0.0],
            base_intensity_db: -20.0,
            intensity_offsets_db: [0.0, 6.0, 1.0],
            type_offset_sd: 0.2,
            unvoiced_prob: [0.0; 3],
            word_jitter: 0.0,
            nucleus_fraction: 0.6,
            voiced_fraction: 0.8,
            min_words: 4,
            max_words: 10,
            pause_s: 0.05,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<(), CorpusError> {
        let bad = |m: String| Err(CorpusError::InvalidConfig(m));
        if !(self.sigma >= 0.0) {
            return bad(format!("sigma must be >= 0, got {}", self.sigma));
        }
        if !(self.word_jitter >= 0.0 && self.type_offset_sd >= 0.0) {
            return bad("word_jitter and type_offset_sd must be >= 0".into());
        }
        if self.unvoiced_prob.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return bad("unvoiced_prob entries must lie in [0, 1]".into());
        }
        if !(self.nucleus_fraction > 0.0 && self.nucleus_fraction <= 1.0 && self.voiced_fraction > 0.0 && self.voiced_fraction <= 1.0) {
            return bad("nucleus_fraction and voiced_fraction must lie in (0, 1]".into());
        }
        if self.min_words == 0 || self.max_words < self.min_words {
            return bad("need 1 <= min_words <= max_words".into());
        }
        if !(self.base_duration_s > 0.0) || self.duration_factors.iter().any(|f| !(*f > 0.0)) {
            return bad("durations must be positive".into());
        }
        Ok(())
    }
}

/// One generated utterance: its alignment and raw features per aligned word.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthUtterance {
    pub alignment: UtteranceAlignment,
    pub raw: Vec<Vec<RawSyllableFeatures>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthCorpus {
    pub utterances: Vec<SynthUtterance>,
}

impl SynthCorpus {
    /// Labels every utterance against `lexicon` and assembles normalized word instances.
    pub fn instances(&self, lexicon: &Lexicon, scope: ExclusionScope, pool: NormalizationPool) -> Result<Vec<WordInstance>, CorpusError> {
        let mut out = Vec::new();
        for u in &self.utterances {
            let labeling = label_utterance(&u.alignment, lexicon, scope);
            out.extend(build_instances(&u.alignment, &u.raw, &labeling, pool)?);
        }
        Ok(out)
    }
}

#[derive(Clone, Copy, Default)]
struct Offsets {
    dur: f64,
    pitch: f64,
    int: f64,
}

struct Candidate {
    text: String,
    stresses: Vec<StressLevel>,
    nuclei: Vec<NucleusType>,
}

fn candidates(lexicon: &Lexicon) -> Vec<Candidate> {
    lexicon
        .iter()
        .filter(|(w, _)| w.chars().all(|c| c.is_ascii_alphabetic()))
        .filter_map(|(w, variants)| {
            let syl = syllabify(&variants[0]).ok()?;
            (2..=MAX_SYLLABLES).contains(&syl.len()).then(|| Candidate { text: w.to_lowercase(), stresses: syl.stresses(), nuclei: syl.nuclei() })
        })
        .collect()
}

/// Generates `n_utterances` utterances of multi-syllable dictionary words. Deterministic in `seed`.
pub fn synth_corpus(lexicon: &Lexicon, n_utterances: usize, cfg: &GenConfig, seed: u64) -> Result<SynthCorpus, CorpusError> {
    cfg.validate()?;
    let pool = candidates(lexicon);
    if pool.is_empty() {
        return Err(CorpusError::InvalidConfig("lexicon has no multi-syllable words".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let gauss = move |rng: &mut ChaCha8Rng, sd: f64| if sd > 0.0 { sd * std_normal.sample(rng) } else { 0.0 };

    let mut type_offsets = [Offsets::default(); NucleusType::COUNT];
    for o in type_offsets.iter_mut() {
        o.dur = gauss(&mut rng, cfg.type_offset_sd * DURATION_SCALE);
        o.pitch = gauss(&mut rng, cfg.type_offset_sd * PITCH_SCALE);
        o.int = gauss(&mut rng, cfg.type_offset_sd * INTENSITY_SCALE);
    }

    let sd_dur = cfg.sigma * DURATION_SCALE;
    let sd_pitch = cfg.sigma * PITCH_SCALE;
    let sd_int = cfg.sigma * INTENSITY_SCALE;

    let mut utterances = Vec::with_capacity(n_utterances);
    for u in 0..n_utterances {
        let n_words = rng.gen_range(cfg.min_words..=cfg.max_words);
        let mut t = cfg.pause_s;
        let mut words = Vec::with_capacity(n_words);
        let mut raw = Vec::with_capacity(n_words);
        for _ in 0..n_words {
            let cand = pool.choose(&mut rng).expect("non-empty pool");
            let word_off = Offsets {
                dur: gauss(&mut rng, cfg.word_jitter * DURATION_SCALE),
                pitch: gauss(&mut rng, cfg.word_jitter * PITCH_SCALE),
                int: gauss(&mut rng, cfg.word_jitter * INTENSITY_SCALE),
            };
            let mut syllables = Vec::with_capacity(cand.stresses.len());
            let mut word_raw = Vec::with_capacity(cand.stresses.len());
            for (&stress, &nucleus) in cand.stresses.iter().zip(&cand.nuclei) {
                let c = stress.index();
                let to = type_offsets[nucleus.index()];
                let syl_dur = (cfg.base_duration_s * cfg.duration_factors[c] + to.dur + word_off.dur + gauss(&mut rng, sd_dur)).max(MIN_SYLLABLE_S);
                let nuc_dur = (cfg.nucleus_fraction * syl_dur + gauss(&mut rng, sd_dur * cfg.nucleus_fraction)).clamp(0.4 * MIN_SYLLABLE_S, syl_dur);
                let voiced = rng.gen::<f64>() >= cfg.unvoiced_prob[c];

                let mut r = RawSyllableFeatures::default();
                let pitch_mean = cfg.base_pitch_hz + cfg.pitch_offsets_hz[c] + to.pitch + word_off.pitch + gauss(&mut rng, sd_pitch);
                let int_mean = cfg.base_intensity_db + cfg.intensity_offsets_db[c] + to.int + word_off.int + gauss(&mut rng, sd_int);
                let nuc_pitch = pitch_mean + gauss(&mut rng, sd_pitch * 0.5);
                let nuc_int = int_mean + 1.0 + gauss(&mut rng, sd_int * 0.5);
                for (base, mean_pitch, mean_int, dur) in [(0, pitch_mean, int_mean, syl_dur), (slot::NUCLEUS, nuc_pitch, nuc_int, nuc_dur)] {
                    if voiced {
                        r.slots[base + slot::PITCH_MEAN] = Some(mean_pitch);
                        r.slots[base + slot::PITCH_MAX] = Some(mean_pitch + gauss(&mut rng, sd_pitch).abs());
                        let vd = (dur * if base == 0 { cfg.voiced_fraction } else { 1.0 } + gauss(&mut rng, sd_dur * 0.5)).clamp(0.0, dur);
                        r.slots[base + slot::VOICED_DUR] = Some(vd);
                    } else {
                        r.slots[base + slot::VOICED_DUR] = Some(0.0);
                    }
                    r.slots[base + slot::INT_MEAN] = Some(mean_int);
                    r.slots[base + slot::INT_MAX] = Some(mean_int + gauss(&mut rng, sd_int).abs());
                    r.slots[base + slot::DUR] = Some(dur);
                }
                let nuc_start = t + 0.4 * (syl_dur - nuc_dur);
                syllables.push(AlignedSyllable {
                    start_s: t,
                    end_s: t + syl_dur,
                    nucleus: AlignedNucleus { tag: Some(nucleus.tag().to_string()), phoneme: None, start_s: nuc_start, end_s: nuc_start + nuc_dur },
                });
                word_raw.push(r);
                t += syl_dur;
            }
            t += cfg.pause_s;
            words.push(AlignedWord { text: cand.text.clone(), syllables });
            raw.push(word_raw);
        }
        let alignment = UtteranceAlignment { schema: ALIGNMENT_SCHEMA, utterance_id: format!("synth{u:06}"), audio_path: String::new(), words };
        utterances.push(SynthUtterance { alignment, raw });
    }
    Ok(SynthCorpus { utterances })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;
    use std::path::Path;

    const DICT: &str =
        "OVERCOME  OW2 V ER0 K AH1 M\nEMOTION  IH0 M OW1 SH AH0 N\nUNDERWEAR  AH1 N D ER0 W EH2 R\nCAT  K AE1 T\nTABLE  T EY1 B AH0 L\n";

    #[test]
    fn deterministic_in_seed() {
        let lex = Lexicon::parse_str(DICT).unwrap();
        let a = synth_corpus(&lex, 5, &GenConfig::default(), 9).unwrap();
        let b = synth_corpus(&lex, 5, &GenConfig::default(), 9).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let c = synth_corpus(&lex, 5, &GenConfig::default(), 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn alignments_validate_and_only_use_multisyllabic_words() {
        let lex = Lexicon::parse_str(DICT).unwrap();
        let corpus = synth_corpus(&lex, 20, &GenConfig::default(), 1).unwrap();
        for u in &corpus.utterances {
            u.alignment.validate(Path::new("synth")).unwrap();
            assert!(u.alignment.words.iter().all(|w| w.syllables.len() >= 2 && w.text != "cat"));
        }
        let inst = corpus.instances(&lex, ExclusionScope::Word, NormalizationPool::Sentence).unwrap();
        let n_words: usize = corpus.utterances.iter().map(|u| u.alignment.words.len()).sum();
        assert_eq!(inst.len(), n_words);
    }

    #[test]
    fn noiseless_raw_features_are_class_constants() {
        let lex = Lexicon::parse_str(DICT).unwrap();
        let cfg = GenConfig { sigma: 0.0, ..GenConfig::default() };
        let corpus = synth_corpus(&lex, 30, &cfg, 4).unwrap();
        let mut seen: BTreeMap<(NucleusType, StressLevel), RawSyllableFeatures> = BTreeMap::new();
        for u in &corpus.utterances {
            for (w, raw) in u.alignment.words.iter().zip(&u.raw) {
                let syl = syllabify(&lex.lookup(&w.text).unwrap()[0]).unwrap();
                for (s, r) in syl.syllables.iter().zip(raw) {
                    let prev = seen.entry((s.nucleus, s.stress)).or_insert(*r);
                    for k in 0..12 {
                        let (a, b) = (prev.slots[k].unwrap(), r.slots[k].unwrap());
                        assert!((a - b).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn negative_sigma_is_rejected() {
        let lex = Lexicon::parse_str(DICT).unwrap();
        let cfg = GenConfig { sigma: -1.0, ..GenConfig::default() };
        assert!(matches!(synth_corpus(&lex, 1, &cfg, 0), Err(CorpusError::InvalidConfig(_))));
    }
}
