use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_stressnet");

const MINI_DICT: &str = "\
;;; test fixture
OVERCOME  OW2 V ER0 K AH1 M
EMOTION  IH0 M OW1 SH AH0 N
UNDERWEAR  AH1 N D ER0 W EH2 R
";

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN).current_dir(dir).env_remove("STRESSNET_DICT").args(args).output().expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn lookup_prints_stress_digits() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("mini.dict"), MINI_DICT).unwrap();
    let out = ok(dir.path(), &["lexicon", "lookup", "overcome", "--dict", "mini.dict"]);
    assert!(out.contains("3 syllables") && out.contains("stresses 2,0,1"), "{out}");

    let via_env =
        Command::new(BIN).current_dir(dir.path()).env("STRESSNET_DICT", "mini.dict").args(["lexicon", "lookup", "EMOTION"]).output().unwrap();
    assert!(String::from_utf8_lossy(&via_env.stdout).contains("stresses 0,1,0"));

    let missing = run(dir.path(), &["lexicon", "lookup", "zorblax", "--dict", "mini.dict"]);
    assert_eq!(code(&missing), 4);
}

#[test]
fn exit_codes_follow_the_error_category() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(dir.path(), &["frobnicate"])), 2);
    assert_eq!(code(&run(dir.path(), &["train", "--model", "svm"])), 2);

    let out = run(dir.path(), &["--config", "missing.toml", "synth"]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.toml"));

    std::fs::write(dir.path().join("bad.toml"), "seeed = 1\n").unwrap();
    assert_eq!(code(&run(dir.path(), &["--config", "bad.toml", "synth"])), 3);
    std::fs::write(dir.path().join("bad2.toml"), "train_fraction = 1.5\n").unwrap();
    assert_eq!(code(&run(dir.path(), &["--config", "bad2.toml", "synth"])), 3);
    assert_eq!(code(&run(dir.path(), &["eval", "--format", "yaml"])), 3);

    assert_eq!(code(&run(dir.path(), &["train", "--data", "nope.jsonl"])), 4);
    assert_eq!(code(&run(dir.path(), &["eval"])), 4);
}

/// synth -> train -> eval in `dir`; returns the checkpoint and report bytes.
fn end_to_end(dir: &Path, kind: &str, threads: &str) -> (Vec<u8>, Vec<u8>) {
    std::fs::write(dir.join("run.toml"), "seed = 5\n[train]\nepochs = 2\n[forest]\nn_trees = 10\n").unwrap();
    let common = ["--config", "run.toml", "--threads", threads];
    let synth = ok(dir, &[&common[..], &["synth", "--n", "40", "--seed", "7"]].concat());
    assert!(synth.starts_with("synth: 40 utterances"), "{synth}");
    ok(dir, &[&common[..], &["train", "--model", kind]].concat());
    let eval = ok(dir, &[&common[..], &["eval"]].concat());
    assert!(eval.starts_with("eval: accuracy"), "{eval}");
    let out = dir.join("out");
    for m in ["synth", "train", "eval"] {
        let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join(format!("{m}.manifest.json"))).unwrap()).unwrap();
        assert_eq!(manifest["command"], m);
        assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
    }
    (std::fs::read(out.join("model.ckpt")).unwrap(), std::fs::read(out.join("report.json")).unwrap())
}

#[test]
fn pipeline_is_reproducible_across_thread_counts() {
    for kind in ["attn-medium", "rf"] {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        assert_eq!(end_to_end(a.path(), kind, "1"), end_to_end(b.path(), kind, "3"), "{kind}");
    }
}

#[test]
fn predict_split_label_and_pca() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--n", "30", "--seed", "2"]);
    let split = ok(d, &["split", "--train-fraction", "0.5", "--seed", "3"]);
    assert!(split.starts_with("split:"), "{split}");
    let label = ok(d, &["label", "--alignments", "out/alignments"]);
    assert!(label.contains("30 utterances"), "{label}");
    let first: serde_json::Value =
        serde_json::from_str(std::fs::read_to_string(d.join("out/labels.jsonl")).unwrap().lines().next().unwrap()).unwrap();
    assert!(first["labels"].is_array() && first["exclusions"].is_array());

    ok(d, &["train", "--model", "attn-medium", "--epochs", "1"]);
    ok(d, &["predict"]);
    let line = std::fs::read_to_string(d.join("out/predictions.jsonl")).unwrap();
    let rec: serde_json::Value = serde_json::from_str(line.lines().next().unwrap()).unwrap();
    let p = rec["syllables"][0]["probabilities"].as_array().unwrap();
    assert!((p.iter().map(|v| v.as_f64().unwrap()).sum::<f64>() - 1.0).abs() < 1e-9);

    ok(d, &["pca", "--out", "out/pca.json"]);
    let pca: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("out/pca.json")).unwrap()).unwrap();
    assert_eq!(pca["points"].as_object().unwrap().len(), 16);
    let csv = ok(d, &["pca"]);
    assert!(csv.contains("16 points"));
    assert_eq!(std::fs::read_to_string(d.join("out/pca.csv")).unwrap().lines().count(), 17);

    ok(d, &["train", "--model", "or", "--out", "out/or.ckpt"]);
    assert_eq!(code(&run(d, &["pca", "--model", "out/or.ckpt"])), 4);
    let text = ok(d, &["eval", "--model", "out/or.ckpt", "--format", "text"]);
    assert!(text.contains("report.txt"));
}

fn write_tone_wav(path: &Path, secs: f64, segments: &[(f64, f64, f64)]) {
    let spec = hound::WavSpec { channels: 1, sample_rate: 16_000, bits_per_sample: 16, sample_format: hound::SampleFormat::Int };
    let mut w = hound::WavWriter::create(path, spec).unwrap();
    for i in 0..(secs * 16_000.0) as usize {
        let t = i as f64 / 16_000.0;
        let v = segments.iter().find(|s| t >= s.0 && t < s.1).map_or(0.0, |s| 0.4 * (2.0 * std::f64::consts::PI * s.2 * t).sin());
        w.write_sample((v * 32767.0) as i16).unwrap();
    }
    w.finalize().unwrap();
}

#[test]
fn featurizes_audio_with_alignments() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("mini.dict"), MINI_DICT).unwrap();
    std::fs::create_dir(d.join("align")).unwrap();
    std::fs::write(
        d.join("align/u1.json"),
        r#"{"schema": 1, "utterance_id": "u1", "words": [{"text": "emotion", "syllables": [
            {"start_s": 0.1, "end_s": 0.3, "nucleus": {"start_s": 0.15, "end_s": 0.25}},
            {"start_s": 0.3, "end_s": 0.6, "nucleus": {"start_s": 0.35, "end_s": 0.55}},
            {"start_s": 0.6, "end_s": 0.8, "nucleus": {"start_s": 0.65, "end_s": 0.75}}]}]}"#,
    )
    .unwrap();
    write_tone_wav(&d.join("align/u1.wav"), 1.0, &[(0.1, 0.3, 120.0), (0.3, 0.6, 180.0), (0.6, 0.8, 110.0)]);
    let out = ok(d, &["--dict", "mini.dict", "featurize", "--alignments", "align"]);
    assert!(out.contains("1 word instances"), "{out}");
    let line = std::fs::read_to_string(d.join("out/features.jsonl")).unwrap();
    assert_eq!(line.lines().count(), 1);
    let manifest = std::fs::read_to_string(d.join("out/featurize.manifest.json")).unwrap();
    assert!(manifest.contains("u1.wav") && manifest.contains("mini.dict"));

    std::fs::remove_file(d.join("align/u1.wav")).unwrap();
    assert_eq!(code(&run(d, &["--dict", "mini.dict", "featurize", "--alignments", "align"])), 4);
}
