//! `stressnet` command-line tool.
//!
//! Exit codes: 0 success, 2 usage error, 3 configuration error, 4 data error.

mod config;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use stressnet::corpus::{load_alignment, read_instances, split, synth_corpus, write_instances, Labeling, UtteranceAlignment, WordInstance};
use stressnet::eval::{pca_type_embeddings, render_report};
use stressnet::lexicon::syllabify;
use stressnet::model::FeatureMode;
use stressnet::pipeline::{featurize_utterance, train_model, Manifest, ModelKind, TrainSettings, TrainedModel};
use stressnet::{ErrorKind, Lexicon};

use config::RunConfig;

/// A failed run: message plus process exit code.
#[derive(Debug)]
pub struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    pub fn config(message: impl Into<String>) -> Self {
        Self { code: 3, message: message.into() }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self { code: 4, message: message.into() }
    }
}

impl From<stressnet::Error> for Failure {
    fn from(e: stressnet::Error) -> Self {
        match e.kind() {
            ErrorKind::Config => Failure::config(e.to_string()),
            ErrorKind::Data => Failure::data(e.to_string()),
        }
    }
}

type Result<T> = std::result::Result<T, Failure>;

#[derive(Parser, Debug)]
#[command(name = "stressnet", version, about = "Syllable-level lexical stress detection")]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (results do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Directory for artifacts and manifests (default: `out`).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Pronunciation dictionary (default: config, then $STRESSNET_DICT, then the bundled one).
    #[arg(long, global = true)]
    dict: Option<PathBuf>,
    /// Log more (repeat for debug output).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
enum Command {
    /// Dictionary queries.
    #[command(subcommand)]
    Lexicon(LexiconCommand),
    /// Generate a synthetic corpus with alignments and labeled word instances.
    Synth {
        /// Number of utterances.
        #[arg(long, default_value_t = 200)]
        n: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Noise level (overrides `synth.sigma`).
        #[arg(long)]
        sigma: Option<f64>,
    },
    /// Attach dictionary stress labels to alignments and report exclusions.
    Label {
        #[arg(long)]
        alignments: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Measure audio against alignments and write the feature table.
    Featurize {
        #[arg(long)]
        alignments: Option<PathBuf>,
        /// Directory that relative audio paths are resolved against (default: the alignment directory).
        #[arg(long)]
        audio: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Split a feature table into train and test sets by utterance.
    Split {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        train_fraction: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train a model and write its checkpoint.
    Train {
        /// or | rf | attn-medium | attn-large
        #[arg(long)]
        model: Option<ModelKind>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epochs: Option<usize>,
        /// syllable_numerical | syllable_nucleus_numerical | all_features
        #[arg(long, value_parser = parse_feature_mode)]
        feature_mode: Option<FeatureMode>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-syllable predictions for a feature table.
    Predict {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a model on a labeled feature table.
    Eval {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// json | text
        #[arg(long, default_value = "json")]
        format: String,
    },
    /// Project the nucleus-type embedding onto three principal components.
    Pca {
        #[arg(long)]
        model: Option<PathBuf>,
        /// `.json` for the full projection, anything else for CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
enum LexiconCommand {
    /// Print the syllabification and stress digits of every pronunciation of a word.
    Lookup { word: String },
}

fn parse_feature_mode(s: &str) -> std::result::Result<FeatureMode, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|_| format!("unknown feature mode {s:?}"))
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Lexicon(_) => "lexicon",
            Command::Synth { .. } => "synth",
            Command::Label { .. } => "label",
            Command::Featurize { .. } => "featurize",
            Command::Split { .. } => "split",
            Command::Train { .. } => "train",
            Command::Predict { .. } => "predict",
            Command::Eval { .. } => "eval",
            Command::Pca { .. } => "pca",
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Result<String> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    if let Some(d) = &cli.out_dir {
        cfg.paths.output_dir = Some(d.clone());
    }
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Failure::config("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global().map_err(|e| Failure::config(e.to_string()))?;
    }
    let ctx = Ctx { dict: cfg.dict_path(cli.dict.as_deref()), out_dir: cfg.output_dir(), cfg };
    ctx.cfg.validate()?;
    match &cli.command {
        Command::Lexicon(LexiconCommand::Lookup { word }) => lookup(&ctx, word),
        cmd => {
            std::fs::create_dir_all(&ctx.out_dir).map_err(|e| Failure::data(format!("cannot create {}: {e}", ctx.out_dir.display())))?;
            let mut manifest = Manifest::new(cmd.name(), serde_json::json!({ "command": cmd, "run_config": ctx.cfg }));
            let summary = match cmd {
                Command::Synth { n, seed, sigma } => synth(&ctx, &mut manifest, *n, *seed, *sigma),
                Command::Label { alignments, out } => label(&ctx, &mut manifest, alignments.as_deref(), out.as_deref()),
                Command::Featurize { alignments, audio, out } => {
                    featurize(&ctx, &mut manifest, alignments.as_deref(), audio.as_deref(), out.as_deref())
                }
                Command::Split { input, train_fraction, seed } => split_cmd(&ctx, &mut manifest, input.as_deref(), *train_fraction, *seed),
                Command::Train { model, data, seed, epochs, feature_mode, out } => train(
                    &ctx,
                    &mut manifest,
                    TrainArgs { kind: *model, data: data.as_deref(), seed: *seed, epochs: *epochs, mode: *feature_mode, out: out.as_deref() },
                ),
                Command::Predict { model, input, out } => predict(&ctx, &mut manifest, model.as_deref(), input.as_deref(), out.as_deref()),
                Command::Eval { model, data, out, format } => eval(&ctx, &mut manifest, model.as_deref(), data.as_deref(), out.as_deref(), format),
                Command::Pca { model, out } => pca(&ctx, &mut manifest, model.as_deref(), out.as_deref()),
                Command::Lexicon(_) => unreachable!("handled above"),
            }?;
            let path = ctx.out_dir.join(format!("{}.manifest.json", cmd.name()));
            manifest.write(&path)?;
            Ok(summary)
        }
    }
}

struct Ctx {
    cfg: RunConfig,
    dict: PathBuf,
    out_dir: PathBuf,
}

impl Ctx {
    fn lexicon(&self, manifest: Option<&mut Manifest>) -> Result<Lexicon> {
        require(&self.dict)?;
        let lex = Lexicon::open(&self.dict).map_err(|e| Failure::data(format!("{}: {e}", self.dict.display())))?;
        if let Some(m) = manifest {
            m.add_input(&self.dict)?;
        }
        Ok(lex)
    }

    fn artifact(&self, flag: Option<&Path>, default_name: &str) -> PathBuf {
        flag.map(Path::to_path_buf).unwrap_or_else(|| self.out_dir.join(default_name))
    }

    fn alignment_dir(&self, flag: Option<&Path>) -> Result<PathBuf> {
        flag.map(Path::to_path_buf)
            .or_else(|| self.cfg.paths.alignment_dir.clone())
            .ok_or_else(|| Failure::config("no alignment directory (use --alignments or paths.alignment_dir)"))
    }

    fn settings(&self) -> TrainSettings {
        TrainSettings {
            feature_mode: self.cfg.feature_mode,
            model_config: self.cfg.model_config.clone(),
            train: self.cfg.train.clone(),
            ordinal: self.cfg.ordinal.clone(),
            forest: self.cfg.forest.clone(),
        }
    }
}

/// Input paths are checked up front so long runs do not fail late.
fn require(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Failure::data(format!("{}: not found", path.display())))
    }
}

fn read_words(path: &Path, manifest: &mut Manifest) -> Result<Vec<WordInstance>> {
    require(path)?;
    manifest.add_input(path)?;
    let file = File::open(path).map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
    read_instances(BufReader::new(file)).map_err(|e| Failure::data(format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Failure::data(format!("cannot create {}: {e}", parent.display())))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Failure::data(format!("cannot write {}: {e}", path.display())))
}

fn write_words(path: &Path, words: &[WordInstance], manifest: &mut Manifest) -> Result<()> {
    let mut out = create(path)?;
    write_instances(&mut out, words).map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
    out.flush().map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
    manifest.outputs.push(path.display().to_string());
    Ok(())
}

fn write_text(path: &Path, text: &str, manifest: &mut Manifest) -> Result<()> {
    let mut out = create(path)?;
    out.write_all(text.as_bytes()).and_then(|_| out.flush()).map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
    manifest.outputs.push(path.display().to_string());
    Ok(())
}

fn write_json_lines<T: Serialize>(path: &Path, items: &[T], manifest: &mut Manifest) -> Result<()> {
    let mut s = String::new();
    for item in items {
        s.push_str(&serde_json::to_string(item).expect("record serializes"));
        s.push('\n');
    }
    write_text(path, &s, manifest)
}

fn lookup(ctx: &Ctx, word: &str) -> Result<String> {
    let lex = ctx.lexicon(None)?;
    let variants = lex.lookup(word).ok_or_else(|| Failure::data(format!("{word:?} is not in {}", ctx.dict.display())))?;
    let mut lines = Vec::new();
    for v in variants {
        match syllabify(v) {
            Ok(syl) => {
                let parts: Vec<String> = syl
                    .syllables
                    .iter()
                    .map(|s| s.onset.iter().chain(std::iter::once(&s.nucleus_phoneme)).chain(&s.coda).cloned().collect::<Vec<_>>().join(" "))
                    .collect();
                let digits: Vec<String> = syl.stresses().iter().map(|s| s.digit().to_string()).collect();
                let names: Vec<&str> = syl.stresses().iter().map(|s| s.display_name()).collect();
                lines.push(format!(
                    "{}({}): {} syllable{} [{}] stresses {} ({})",
                    v.word,
                    v.variant_index + 1,
                    syl.len(),
                    if syl.len() == 1 { "" } else { "s" },
                    parts.join(" | "),
                    digits.join(","),
                    names.join(", ")
                ));
            }
            Err(e) => lines.push(format!("{}({}): {e}", v.word, v.variant_index + 1)),
        }
    }
    Ok(lines.join("\n"))
}

fn synth(ctx: &Ctx, manifest: &mut Manifest, n: usize, seed: Option<u64>, sigma: Option<f64>) -> Result<String> {
    let seed = seed.unwrap_or(ctx.cfg.seed);
    let mut gen = ctx.cfg.synth.clone();
    if let Some(s) = sigma {
        gen.sigma = s;
    }
    gen.validate().map_err(|e| Failure::config(e.to_string()))?;
    let lex = ctx.lexicon(Some(manifest))?;
    let corpus = synth_corpus(&lex, n, &gen, seed).map_err(stressnet::Error::from)?;
    let words = corpus.instances(&lex, ctx.cfg.exclusion_scope, ctx.cfg.normalization_pool).map_err(stressnet::Error::from)?;
    let align_dir = ctx.out_dir.join("alignments");
    for u in &corpus.utterances {
        let mut s = serde_json::to_string_pretty(&u.alignment).expect("alignment serializes");
        s.push('\n');
        let mut out = create(&align_dir.join(format!("{}.json", u.alignment.utterance_id)))?;
        out.write_all(s.as_bytes()).and_then(|_| out.flush()).map_err(|e| Failure::data(e.to_string()))?;
    }
    manifest.outputs.push(align_dir.display().to_string());
    let (train, test) = split(words.clone(), ctx.cfg.train_fraction, seed).map_err(stressnet::Error::from)?;
    write_words(&ctx.out_dir.join("features.jsonl"), &words, manifest)?;
    write_words(&ctx.out_dir.join("train.jsonl"), &train, manifest)?;
    write_words(&ctx.out_dir.join("test.jsonl"), &test, manifest)?;
    manifest.seeds.insert("synth".into(), seed);
    manifest.seeds.insert("split".into(), seed);
    Ok(format!(
        "synth: {} utterances, {} words ({} train / {} test) -> {}",
        corpus.utterances.len(),
        words.len(),
        train.len(),
        test.len(),
        ctx.out_dir.display()
    ))
}

fn load_alignments(dir: &Path, manifest: &mut Manifest) -> Result<Vec<UtteranceAlignment>> {
    require(dir)?;
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Failure::data(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Failure::data(format!("{}: no .json alignment files", dir.display())));
    }
    files
        .iter()
        .map(|p| {
            manifest.add_input(p)?;
            load_alignment(p).map_err(|e| Failure::data(e.to_string()))
        })
        .collect()
}

fn label(ctx: &Ctx, manifest: &mut Manifest, alignments: Option<&Path>, out: Option<&Path>) -> Result<String> {
    let dir = ctx.alignment_dir(alignments)?;
    let lex = ctx.lexicon(Some(manifest))?;
    let utts = load_alignments(&dir, manifest)?;
    let labelings: Vec<Labeling> = utts.iter().map(|a| stressnet::corpus::label_utterance(a, &lex, ctx.cfg.exclusion_scope)).collect();
    let path = ctx.artifact(out, "labels.jsonl");
    write_json_lines(&path, &labelings, manifest)?;
    let labeled: usize = labelings.iter().map(|l| l.labels.len()).sum();
    let excluded: usize = labelings.iter().map(|l| l.exclusions.len()).sum();
    Ok(format!("label: {} utterances, {labeled} words labeled, {excluded} excluded -> {}", utts.len(), path.display()))
}

fn featurize(ctx: &Ctx, manifest: &mut Manifest, alignments: Option<&Path>, audio: Option<&Path>, out: Option<&Path>) -> Result<String> {
    let dir = ctx.alignment_dir(alignments)?;
    let audio_dir = audio.map(Path::to_path_buf).or_else(|| ctx.cfg.paths.audio_dir.clone()).unwrap_or_else(|| dir.clone());
    require(&audio_dir)?;
    let lex = ctx.lexicon(Some(manifest))?;
    let utts = load_alignments(&dir, manifest)?;
    let results: Vec<_> = utts
        .par_iter()
        .map(|a| featurize_utterance(a, &audio_dir, &lex, &ctx.cfg.dsp, ctx.cfg.exclusion_scope, ctx.cfg.normalization_pool))
        .collect::<std::result::Result<_, _>>()?;
    for a in &utts {
        manifest.add_input(&stressnet::pipeline::resolve_audio(a, &audio_dir))?;
    }
    let mut words = Vec::new();
    let mut exclusions = Vec::new();
    for (w, labeling) in results {
        words.extend(w);
        exclusions.push(labeling);
    }
    let path = ctx.artifact(out, "features.jsonl");
    write_words(&path, &words, manifest)?;
    let ex_path = path.with_extension("exclusions.jsonl");
    write_json_lines(&ex_path, &exclusions, manifest)?;
    Ok(format!("featurize: {} utterances, {} word instances -> {}", utts.len(), words.len(), path.display()))
}

fn split_cmd(ctx: &Ctx, manifest: &mut Manifest, input: Option<&Path>, fraction: Option<f64>, seed: Option<u64>) -> Result<String> {
    let seed = seed.unwrap_or(ctx.cfg.seed);
    let fraction = fraction.unwrap_or(ctx.cfg.train_fraction);
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Failure::config(format!("train fraction must lie in (0, 1), got {fraction}")));
    }
    let path = ctx.artifact(input, "features.jsonl");
    let words = read_words(&path, manifest)?;
    let (train, test) = split(words, fraction, seed).map_err(stressnet::Error::from)?;
    write_words(&ctx.out_dir.join("train.jsonl"), &train, manifest)?;
    write_words(&ctx.out_dir.join("test.jsonl"), &test, manifest)?;
    manifest.seeds.insert("split".into(), seed);
    Ok(format!("split: {} train / {} test words -> {}", train.len(), test.len(), ctx.out_dir.display()))
}

struct TrainArgs<'a> {
    kind: Option<ModelKind>,
    data: Option<&'a Path>,
    seed: Option<u64>,
    epochs: Option<usize>,
    mode: Option<FeatureMode>,
    out: Option<&'a Path>,
}

fn train(ctx: &Ctx, manifest: &mut Manifest, args: TrainArgs) -> Result<String> {
    let kind = args.kind.unwrap_or(ctx.cfg.model);
    let mut settings = ctx.settings();
    settings.train.seed = args.seed.unwrap_or(ctx.cfg.seed);
    if let Some(e) = args.epochs {
        settings.train.epochs = e;
    }
    if args.mode.is_some() {
        settings.feature_mode = args.mode;
    }
    settings.train.validate().map_err(|e| Failure::config(e.to_string()))?;
    let data = ctx.artifact(args.data, "train.jsonl");
    let words = read_words(&data, manifest)?;
    let result = train_model(kind, &words, &settings)?;
    let path = ctx.artifact(args.out, "model.ckpt");
    result.model.save(&path)?;
    manifest.outputs.push(path.display().to_string());
    if !result.history.is_empty() {
        let mut s = serde_json::to_string_pretty(&result.history).expect("history serializes");
        s.push('\n');
        write_text(&path.with_extension("history.json"), &s, manifest)?;
    }
    manifest.seeds.insert("train".into(), settings.train.seed);
    let last = result.history.last().map(|h| format!(", final train accuracy {:.4}", h.train_accuracy)).unwrap_or_default();
    Ok(format!("train: {kind:?} on {} words ({:?}){last} -> {}", words.len(), result.model.feature_mode(), path.display()))
}

fn load_model(ctx: &Ctx, flag: Option<&Path>, manifest: &mut Manifest) -> Result<TrainedModel> {
    let path = ctx.artifact(flag, "model.ckpt");
    require(&path)?;
    manifest.add_input(&path)?;
    TrainedModel::load(&path).map_err(|e| Failure::data(format!("{}: {e}", path.display())))
}

#[derive(Serialize)]
struct SyllableOut {
    position: usize,
    stress: stressnet::StressLevel,
    probabilities: [f64; 3],
}

#[derive(Serialize)]
struct WordOut<'a> {
    utterance_id: &'a str,
    word: &'a str,
    word_index: usize,
    syllables: Vec<SyllableOut>,
}

fn predict(ctx: &Ctx, manifest: &mut Manifest, model: Option<&Path>, input: Option<&Path>, out: Option<&Path>) -> Result<String> {
    let model = load_model(ctx, model, manifest)?;
    let input = ctx.artifact(input, "test.jsonl");
    let words = read_words(&input, manifest)?;
    let preds = model.predict_words(&words)?;
    let records: Vec<WordOut> = words
        .iter()
        .zip(preds)
        .map(|(w, p)| WordOut {
            utterance_id: &w.utterance_id,
            word: &w.word,
            word_index: w.word_index,
            syllables: p.into_iter().enumerate().map(|(position, (stress, probabilities))| SyllableOut { position, stress, probabilities }).collect(),
        })
        .collect();
    let path = ctx.artifact(out, "predictions.jsonl");
    write_json_lines(&path, &records, manifest)?;
    Ok(format!("predict: {} words -> {}", records.len(), path.display()))
}

fn eval(ctx: &Ctx, manifest: &mut Manifest, model: Option<&Path>, data: Option<&Path>, out: Option<&Path>, format: &str) -> Result<String> {
    format.parse::<stressnet::eval::ReportFormat>().map_err(|e| Failure::config(e.to_string()))?;
    let model = load_model(ctx, model, manifest)?;
    let data = ctx.artifact(data, "test.jsonl");
    let words = read_words(&data, manifest)?;
    let report = model.evaluate(&words)?;
    let text = render_report(&report, format).map_err(stressnet::Error::from)?;
    let default_name = if format == "json" { "report.json" } else { "report.txt" };
    let path = ctx.artifact(out, default_name);
    write_text(&path, &text, manifest)?;
    let weighted = report.weighted_accuracy.map(|w| format!(", weighted {w:.4}")).unwrap_or_default();
    Ok(format!("eval: accuracy {:.4}{weighted} on {} syllables -> {}", report.accuracy, report.n_syllables, path.display()))
}

fn pca(ctx: &Ctx, manifest: &mut Manifest, model: Option<&Path>, out: Option<&Path>) -> Result<String> {
    let TrainedModel::Attention(m) = load_model(ctx, model, manifest)? else {
        return Err(Failure::data("pca needs an attention model trained with all_features"));
    };
    let proj = pca_type_embeddings(&m.params).map_err(stressnet::Error::from)?;
    let path = ctx.artifact(out, "pca.csv");
    let text = if path.extension().is_some_and(|e| e == "json") {
        let mut s = serde_json::to_string_pretty(&proj).expect("projection serializes");
        s.push('\n');
        s
    } else {
        let mut s = String::from("tag,pc1,pc2,pc3\n");
        for (t, p) in &proj.points {
            s.push_str(&format!("{t},{},{},{}\n", p[0], p[1], p[2]));
        }
        s
    };
    write_text(&path, &text, manifest)?;
    let ev = proj.explained_variance;
    Ok(format!("pca: {} points, explained variance {:.4} {:.4} {:.4} -> {}", proj.points.len(), ev[0], ev[1], ev[2], path.display()))
}
