mod common;

use std::f64::consts::PI;
use std::path::Path;

use stressnet::corpus::{
    parse_alignment, read_instances, synth_corpus, write_instances, CorpusError, ExclusionReason, ExclusionScope, GenConfig, WordInstance,
};
use stressnet::dsp::DspConfig;
use stressnet::eval::{render_report, EvalReport};
use stressnet::features::{slot, NormalizationPool};
use stressnet::model::{FeatureMode, ModelConfig, TrainConfig};
use stressnet::pipeline::{featurize_utterance, train_model, Manifest, ModelKind, TrainSettings, TrainedModel};
use stressnet::{ErrorKind, Lexicon, NucleusType, StressLevel};

use common::*;

const SR: u32 = 16_000;

/// (start, end, f0, amplitude) tone segments separated by silence.
fn write_tones(path: &Path, total_s: f64, segments: &[(f64, f64, f64, f64)]) {
    let spec = hound::WavSpec { channels: 1, sample_rate: SR, bits_per_sample: 16, sample_format: hound::SampleFormat::Int };
    let mut w = hound::WavWriter::create(path, spec).unwrap();
    for i in 0..(total_s * SR as f64) as usize {
        let t = i as f64 / SR as f64;
        let v = segments.iter().find(|s| t >= s.0 && t < s.1).map_or(0.0, |s| s.3 * (2.0 * PI * s.2 * t).sin());
        w.write_sample((v * i16::MAX as f64) as i16).unwrap();
    }
    w.finalize().unwrap();
}

const ALIGNMENT: &str = r#"{"schema": 1, "utterance_id": "utt1", "words": [
  {"text": "emotion", "syllables": [
    {"start_s": 0.10, "end_s": 0.25, "nucleus": {"tag": "ih", "start_s": 0.13, "end_s": 0.22}},
    {"start_s": 0.25, "end_s": 0.55, "nucleus": {"phoneme": "OW1", "start_s": 0.30, "end_s": 0.50}},
    {"start_s": 0.55, "end_s": 0.70, "nucleus": {"tag": "ah", "start_s": 0.58, "end_s": 0.67}}]},
  {"text": "zorblax", "syllables": [
    {"start_s": 0.80, "end_s": 0.95, "nucleus": {"tag": "ao", "start_s": 0.83, "end_s": 0.92}},
    {"start_s": 0.95, "end_s": 1.10, "nucleus": {"tag": "ae", "start_s": 0.98, "end_s": 1.07}}]}]}"#;

#[test]
fn featurizes_a_recorded_utterance() {
    let dir = tempfile::tempdir().unwrap();
    // the middle syllable is longer, higher and louder
    write_tones(
        &dir.path().join("utt1.wav"),
        1.3,
        &[(0.10, 0.25, 120.0, 0.2), (0.25, 0.55, 190.0, 0.6), (0.55, 0.70, 120.0, 0.2), (0.80, 0.95, 130.0, 0.25), (0.95, 1.10, 125.0, 0.25)],
    );
    let lex = Lexicon::parse_str(MINI_DICT).unwrap();
    let alignment = parse_alignment(ALIGNMENT, Path::new("utt1.json")).unwrap();
    let dsp = DspConfig::default();
    let (words, labeling) = featurize_utterance(&alignment, dir.path(), &lex, &dsp, ExclusionScope::Word, NormalizationPool::Sentence).unwrap();

    assert_eq!(labeling.exclusions.len(), 1);
    assert_eq!(labeling.exclusions[0].reason, ExclusionReason::NotFound);
    assert_eq!(words.len(), 1);
    let w = &words[0];
    assert!(w.satisfies_padding_invariant());
    let stress: Vec<_> = w.valid().iter().map(|o| o.stress.unwrap()).collect();
    assert_eq!(stress, [StressLevel::NonStress, StressLevel::Primary, StressLevel::NonStress]);
    let types: Vec<_> = w.valid().iter().map(|o| o.nucleus_type).collect();
    assert_eq!(types, [NucleusType::Ih, NucleusType::Ow, NucleusType::Ah]);
    // syllable-span pitch max is left out: the frame on the 0.55 s boundary still hears the previous tone
    for k in [slot::DUR, slot::PITCH_MEAN, slot::INT_MEAN, slot::INT_MAX, slot::NUCLEUS + slot::PITCH_MAX] {
        let v: Vec<f64> = w.valid().iter().map(|o| o.features[k]).collect();
        assert!(v[1] > v[0] && v[1] > v[2], "slot {k}: {v:?}");
    }
    assert!(w.valid().iter().all(|o| o.features.iter().all(|x| x.is_finite())));

    let (strict, _) = featurize_utterance(&alignment, dir.path(), &lex, &dsp, ExclusionScope::Utterance, NormalizationPool::Sentence).unwrap();
    assert!(strict.is_empty());
}

#[test]
fn missing_audio_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let lex = Lexicon::parse_str(MINI_DICT).unwrap();
    let alignment = parse_alignment(ALIGNMENT, Path::new("utt1.json")).unwrap();
    let err =
        featurize_utterance(&alignment, dir.path(), &lex, &DspConfig::default(), ExclusionScope::Word, NormalizationPool::Sentence).unwrap_err();
    assert_eq!(err.kind(), ErrorKind::Data);
}

#[test]
fn alignment_errors_carry_locations() {
    let p = Path::new("bad.json");
    match parse_alignment("{\"schema\": 1,\n \"utterance_id\": 3}", p) {
        Err(CorpusError::AlignmentFormat { line, .. }) => assert_eq!(line, 2),
        other => panic!("{other:?}"),
    }
    assert!(matches!(parse_alignment(&ALIGNMENT.replace("\"schema\": 1", "\"schema\": 2"), p), Err(CorpusError::AlignmentFormat { .. })));
    let overlap = ALIGNMENT.replace("\"start_s\": 0.55, \"end_s\": 0.70", "\"start_s\": 0.50, \"end_s\": 0.70");
    assert!(matches!(parse_alignment(&overlap, p), Err(CorpusError::InvalidSpans { .. })));
    let outside = ALIGNMENT.replace("\"start_s\": 0.13, \"end_s\": 0.22", "\"start_s\": 0.05, \"end_s\": 0.22");
    assert!(matches!(parse_alignment(&outside, p), Err(CorpusError::InvalidSpans { .. })));
    assert!(parse_alignment(&ALIGNMENT.replace("\"text\": \"emotion\"", "\"text\": \"emotion\", \"extra\": 1"), p).is_err());
}

fn small_corpus(seed: u64) -> Vec<WordInstance> {
    let lex = full_lexicon();
    synth_corpus(&lex, 40, &GenConfig::default(), seed).unwrap().instances(&lex, ExclusionScope::Word, NormalizationPool::Sentence).unwrap()
}

#[test]
fn feature_table_round_trips_exactly() {
    let words = small_corpus(1);
    let mut buf = Vec::new();
    write_instances(&mut buf, &words).unwrap();
    assert_eq!(buf.iter().filter(|&&b| b == b'\n').count(), words.len());
    assert_eq!(read_instances(buf.as_slice()).unwrap(), words);
}

#[test]
fn attention_checkpoint_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let words = small_corpus(2);
    let settings = TrainSettings { train: TrainConfig { epochs: 2, ..TrainConfig::default() }, ..TrainSettings::default() };
    let trained = train_model(ModelKind::AttnMedium, &words, &settings).unwrap();
    assert_eq!(trained.history.len(), 3);
    let model = trained.model;
    assert_eq!(model.feature_mode(), FeatureMode::AllFeatures);
    assert!(model.class_weights().is_some());
    let path = dir.path().join("m.ckpt");
    model.save(&path).unwrap();
    let back = TrainedModel::load(&path).unwrap();
    assert_eq!(back, model);
    assert_eq!(back.predict_words(&words).unwrap(), model.predict_words(&words).unwrap());

    let large = TrainSettings {
        feature_mode: Some(FeatureMode::SyllableNumerical),
        model_config: Some(ModelConfig::new(4, 2, 1, FeatureMode::AllFeatures)),
        train: TrainConfig { epochs: 1, ..TrainConfig::default() },
        ..TrainSettings::default()
    };
    let TrainedModel::Attention(m) = train_model(ModelKind::AttnLarge, &words, &large).unwrap().model else { panic!("attention model expected") };
    assert_eq!((m.config.d_model, m.config.feature_mode), (4, FeatureMode::SyllableNumerical));
    assert!(m.class_weights.is_none());
}

#[test]
fn reports_round_trip_and_render() {
    let words = small_corpus(3);
    let model = train_model(ModelKind::Or, &words, &TrainSettings::default()).unwrap().model;
    let report = model.evaluate(&words).unwrap();
    assert!(report.weighted_accuracy.is_none());
    let json = render_report(&report, "json").unwrap();
    assert!(json.ends_with('\n'));
    assert_eq!(serde_json::from_str::<EvalReport>(&json).unwrap(), report);
    let text = render_report(&report, "text").unwrap();
    assert!(text.contains("accuracy") && text.contains("Primary stress"), "{text}");
    assert!(render_report(&report, "yaml").is_err());
}

#[test]
fn manifest_hashes_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.txt");
    std::fs::write(&input, b"abc").unwrap();
    let mut m = Manifest::new("train", serde_json::json!({"seed": 1}));
    m.add_input(&input).unwrap();
    m.seeds.insert("train".into(), 1);
    let out = dir.path().join("manifest.json");
    m.write(&out).unwrap();
    let back: Manifest = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(back, m);
    assert_eq!(back.inputs.values().next().unwrap(), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    assert!(m.add_input(&dir.path().join("missing")).is_err());
}

#[test]
fn unknown_model_kind_is_a_config_error() {
    let err = "svm".parse::<ModelKind>().unwrap_err();
    assert_eq!(err.kind(), ErrorKind::Config);
}
