#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stressnet::corpus::WordInstance;
use stressnet::features::FeatureVector;
use stressnet::model::{ModelConfig, ModelParams, Trace};
use stressnet::{Lexicon, NucleusType, StressLevel, MAX_SYLLABLES};

pub const DICT: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/data/cmudict.dict");

pub fn full_lexicon() -> Lexicon {
    Lexicon::open(DICT).expect("vendored dictionary loads")
}

/// Dictionary lines in the classic upper-case, two-space format.
pub const MINI_DICT: &str = "\
;;; test fixture
OVERCOME  OW2 V ER0 K AH1 M
EMOTION  IH0 M OW1 SH AH0 N
UNDERWEAR  AH1 N D ER0 W EH2 R
";

/// A word with `n` labeled syllables, random features and nucleus types.
pub fn random_instance(rng: &mut ChaCha8Rng, n: usize) -> WordInstance {
    let syllables: Vec<(FeatureVector, NucleusType, Option<StressLevel>)> = (0..n)
        .map(|_| {
            let f: FeatureVector = std::array::from_fn(|_| rng.gen_range(-2.0..2.0));
            let t = NucleusType::REAL[rng.gen_range(0..NucleusType::COUNT)];
            let s = StressLevel::ALL[rng.gen_range(0..3)];
            (f, t, Some(s))
        })
        .collect();
    WordInstance::new(format!("u{}", rng.gen::<u32>()), "w", 0, &syllables).unwrap()
}

pub fn random_batch(seed: u64, size: usize) -> Vec<WordInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..size)
        .map(|_| {
            let n = rng.gen_range(1..=MAX_SYLLABLES.min(8));
            random_instance(&mut rng, n)
        })
        .collect()
}

/// Initialized parameters with every tensor jittered, so biases and layer-norm
/// parameters are not at their special initial values.
pub fn jittered_params(cfg: &ModelConfig, seed: u64, scale: f64) -> ModelParams<f64> {
    let mut p = ModelParams::<f64>::init(cfg, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcdef);
    for (name, t) in p.tensors_mut() {
        for (i, v) in t.data_mut().iter_mut().enumerate() {
            // keep the padding type row at zero
            if name == "type_emb" && i / cfg.d_model == NucleusType::Pad.index() {
                continue;
            }
            *v += rng.gen_range(-scale..scale);
        }
    }
    p
}

pub fn relu_patterns(traces: &[Trace<f64>]) -> Vec<bool> {
    traces.iter().flat_map(|t| t.relu_pattern()).collect()
}
