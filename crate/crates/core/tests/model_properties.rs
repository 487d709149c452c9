mod common;

use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stressnet::corpus::{ClassWeights, WordInstance};
use stressnet::model::{
    batch_loss, embed, forward, forward_trace, gradients, softmax_rows, train, FeatureMode, Matrix, ModelConfig, ModelError, ModelParams, TrainConfig,
};
use stressnet::{NucleusType, StressLevel, MAX_SYLLABLES};

use common::*;

fn medium() -> ModelConfig {
    ModelConfig::medium(FeatureMode::AllFeatures)
}

fn refs(words: &[WordInstance]) -> Vec<&WordInstance> {
    words.iter().collect()
}

proptest! {
    #[test]
    fn softmax_rows_are_distributions(values in proptest::collection::vec(-500.0f64..500.0, 3 * MAX_SYLLABLES)) {
        let p = softmax_rows(&Matrix::from_vec(MAX_SYLLABLES, 3, values));
        for r in 0..MAX_SYLLABLES {
            let row = p.row(r);
            prop_assert!(row.iter().all(|&v| (0.0..=1.0).contains(&v)));
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn padded_slots_never_reach_valid_logits(seed in 0u64..1000, n in 1usize..MAX_SYLLABLES) {
        let cfg = medium();
        let params = jittered_params(&cfg, seed, 0.3);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let word = random_instance(&mut rng, n);
        let mut noisy = word.clone();
        for o in &mut noisy.observations[n..] {
            o.features = std::array::from_fn(|_| rng.gen_range(-1e3..1e3));
            o.nucleus_type = NucleusType::Aa;
        }
        let a = forward(&params, &cfg, &word).unwrap();
        let b = forward(&params, &cfg, &noisy).unwrap();
        for i in 0..n {
            prop_assert_eq!(a.logits.row(i), b.logits.row(i));
        }
    }
}

#[test]
fn single_syllable_attends_to_itself() {
    let cfg = medium();
    let params = jittered_params(&cfg, 1, 0.5);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let word = random_instance(&mut rng, 1);
    let trace = forward_trace::<f64, ChaCha8Rng>(&embed(&word, &params, &cfg).unwrap(), &params, &cfg, None).unwrap();
    for l in 0..cfg.layers {
        for h in 0..cfg.heads {
            let a = trace.attention(l, h);
            assert_eq!(a[(0, 0)], 1.0);
            assert!((1..MAX_SYLLABLES).all(|j| a[(0, j)] == 0.0));
        }
    }
}

#[test]
fn zero_head_gives_uniform_loss() {
    let cfg = medium();
    let mut params = jittered_params(&cfg, 2, 0.5);
    params.head_w.fill(0.0);
    params.head_b.fill(0.0);
    let words = random_batch(2, 5);
    let loss = batch_loss(&params, &cfg, &refs(&words), None).unwrap();
    assert_abs_diff_eq!(loss, 3f64.ln(), epsilon = 1e-12);
    let out = forward(&params, &cfg, &words[0]).unwrap();
    assert_abs_diff_eq!(out.probabilities[(0, 1)], 1.0 / 3.0, epsilon = 1e-12);
}

#[test]
fn zero_weights_give_zero_loss_and_gradient() {
    let cfg = medium();
    let params = jittered_params(&cfg, 3, 0.2);
    let words = random_batch(3, 4);
    let mut w = ClassWeights::uniform();
    w.table.values_mut().for_each(|v| *v = [0.0; 3]);
    let (loss, grads) = gradients::<f64, ChaCha8Rng>(&params, &cfg, &refs(&words), Some(&w), None).unwrap();
    assert_eq!(loss, 0.0);
    assert!(grads.tensors().iter().all(|(_, t)| t.data().iter().all(|&g| g == 0.0)));
}

#[test]
fn duplicating_the_batch_keeps_the_mean() {
    let cfg = medium();
    let params = jittered_params(&cfg, 4, 0.2);
    let words = random_batch(4, 5);
    let doubled: Vec<WordInstance> = words.iter().chain(&words).cloned().collect();
    let (l1, g1) = gradients::<f64, ChaCha8Rng>(&params, &cfg, &refs(&words), None, None).unwrap();
    let (l2, g2) = gradients::<f64, ChaCha8Rng>(&params, &cfg, &refs(&doubled), None, None).unwrap();
    assert_abs_diff_eq!(l1, l2, epsilon = 1e-12);
    for ((_, a), (_, b)) in g1.tensors().into_iter().zip(g2.tensors()) {
        for (x, y) in a.data().iter().zip(b.data()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
    }
}

#[test]
fn without_positions_the_encoder_is_permutation_equivariant() {
    let cfg = medium();
    let mut params = jittered_params(&cfg, 5, 0.3);
    params.pos_emb.fill(0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let word = random_instance(&mut rng, 6);
    let perm = [3, 0, 5, 1, 4, 2];
    let syllables: Vec<_> =
        perm.iter().map(|&i| (word.observations[i].features, word.observations[i].nucleus_type, word.observations[i].stress)).collect();
    let permuted = WordInstance::new("p", "w", 0, &syllables).unwrap();
    let a = forward(&params, &cfg, &word).unwrap();
    let b = forward(&params, &cfg, &permuted).unwrap();
    for (new, &old) in perm.iter().enumerate() {
        for c in 0..3 {
            assert_abs_diff_eq!(b.logits[(new, c)], a.logits[(old, c)], epsilon = 1e-12);
        }
    }
}

#[test]
fn f32_and_f64_agree() {
    let cfg = medium();
    let p64 = jittered_params(&cfg, 6, 0.2);
    let p32: ModelParams<f32> = p64.cast();
    let words = random_batch(6, 8);
    for w in &words {
        let a = forward(&p64, &cfg, w).unwrap();
        let b = forward(&p32, &cfg, w).unwrap();
        for i in 0..w.valid_count {
            for c in 0..3 {
                assert_abs_diff_eq!(a.probabilities[(i, c)], b.probabilities[(i, c)] as f64, epsilon = 1e-4);
            }
        }
    }
}

#[test]
fn dropout_changes_training_gradients_only() {
    let cfg = medium();
    let params = jittered_params(&cfg, 7, 0.2);
    let words = random_batch(7, 6);
    let (eval, _) = gradients::<f64, ChaCha8Rng>(&params, &cfg, &refs(&words), None, None).unwrap();
    let run = |seed| gradients(&params, &cfg, &refs(&words), None, Some(&mut ChaCha8Rng::seed_from_u64(seed))).unwrap();
    let (a, ga) = run(1);
    let (b, gb) = run(1);
    let (c, _) = run(2);
    assert_eq!((a, &ga), (b, &gb));
    assert_ne!(a, eval);
    assert_ne!(a, c);
    assert_eq!(eval, batch_loss(&params, &cfg, &refs(&words), None).unwrap());
}

#[test]
fn pad_type_row_gets_no_gradient() {
    let cfg = medium();
    let params = jittered_params(&cfg, 8, 0.2);
    let words = random_batch(8, 6);
    let (_, g) = gradients::<f64, ChaCha8Rng>(&params, &cfg, &refs(&words), None, None).unwrap();
    let t = g.type_emb.unwrap();
    assert!(t.row(NucleusType::Pad.index()).iter().all(|&v| v == 0.0));
    assert!(t.data().iter().any(|&v| v != 0.0));
}

#[test]
fn missing_label_is_reported() {
    let cfg = medium();
    let params = jittered_params(&cfg, 9, 0.2);
    let syllables = vec![([0.0; 12], NucleusType::Iy, Some(StressLevel::Primary)), ([0.0; 12], NucleusType::Ah, None)];
    let w = WordInstance::new("u", "w", 0, &syllables).unwrap();
    let err = gradients::<f64, ChaCha8Rng>(&params, &cfg, &[&w], None, None).unwrap_err();
    assert!(matches!(err, ModelError::Label { position: 1 }));
    assert!(matches!(gradients::<f64, ChaCha8Rng>(&params, &cfg, &[], None, None), Err(ModelError::EmptyData)));
}

#[test]
fn shape_mismatch_is_an_error() {
    let params = ModelParams::<f64>::init(&ModelConfig::medium(FeatureMode::SyllableNumerical), 0);
    let words = random_batch(0, 1);
    assert!(matches!(forward(&params, &medium(), &words[0]), Err(ModelError::Shape(_))));
}

/// Stress = position of the largest first feature; needs attention across the word.
fn argmax_task(seed: u64, n: usize) -> Vec<WordInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|k| {
            let len = rng.gen_range(2..=5);
            let feats: Vec<[f64; 12]> = (0..len).map(|_| std::array::from_fn(|_| rng.gen_range(-1.0..1.0))).collect();
            let best = (0..len).fold(0, |b, i| if feats[i][0] > feats[b][0] { i } else { b });
            let syl: Vec<_> = feats
                .iter()
                .enumerate()
                .map(|(i, f)| (*f, NucleusType::Ah, Some(if i == best { StressLevel::Primary } else { StressLevel::NonStress })))
                .collect();
            WordInstance::new(format!("u{k}"), "w", 0, &syl).unwrap()
        })
        .collect()
}

#[test]
fn training_learns_a_relative_task_and_is_reproducible() {
    let cfg = ModelConfig::medium(FeatureMode::SyllableNucleusNumerical);
    let data = argmax_task(11, 600);
    let (tr, val) = data.split_at(500);
    let tc = TrainConfig { epochs: 25, learning_rate: 1e-2, seed: 3, ..TrainConfig::default() };
    let a = train::<f64>(tr, val, &cfg, &tc).unwrap();
    let b = train::<f64>(tr, val, &cfg, &tc).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.history.len(), tc.epochs + 1);
    let best = &a.history[a.best_epoch];
    assert!(best.val_accuracy.unwrap() > 0.85, "{best:?}");
    assert!(best.train_loss < a.history[0].train_loss);
    assert!(a.history.iter().all(|s| s.val_accuracy <= best.val_accuracy));
    let c = train::<f64>(tr, val, &cfg, &TrainConfig { seed: 4, ..tc.clone() }).unwrap();
    assert_ne!(a.model.params, c.model.params);
}

#[test]
fn f32_training_runs() {
    let cfg = ModelConfig::medium(FeatureMode::SyllableNumerical);
    let data = argmax_task(12, 100);
    let out = train::<f32>(&data, &[], &cfg, &TrainConfig { epochs: 3, ..TrainConfig::default() }).unwrap();
    assert!(out.history.iter().all(|s| s.val_accuracy.is_none() && s.train_loss.is_finite()));
    assert!(out.model.params.is_finite());
}
