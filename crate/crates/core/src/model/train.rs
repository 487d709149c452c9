use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::encoder::{forward, gradients, weighted_cross_entropy};
use super::{AttentionModel, ModelConfig, ModelError, ModelParams, TrainConfig, NUM_CLASSES};
use crate::corpus::{compute_class_weights, ClassWeights, WordInstance};
use crate::lexicon::{NucleusType, StressLevel};
use crate::Scalar;

/// Offset mixed into the training seed for the shuffle/dropout stream, so it
/// differs from the initialization stream.
const SHUFFLE_STREAM: u64 = 0x5eed_0001;

/// Metrics after one epoch (epoch 0 is the initialization).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: Option<f64>,
    pub val_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome<F> {
    pub model: AttentionModel<F>,
    pub history: Vec<EpochStats>,
    /// Epoch whose parameters were returned.
    pub best_epoch: usize,
}

/// Eval-mode loss and accuracy over a set of words.
pub fn evaluate_set<F: Scalar>(
    params: &ModelParams<F>,
    cfg: &ModelConfig,
    set: &[WordInstance],
    weights: Option<&ClassWeights>,
) -> Result<(f64, f64), ModelError> {
    let mut loss = 0.0;
    let mut correct = 0usize;
    let mut total = 0usize;
    for inst in set {
        let out = forward(params, cfg, inst)?;
        loss += weighted_cross_entropy(&out.logits, inst, weights, F::zero())?.0.as_f64();
        for (i, obs) in inst.valid().iter().enumerate() {
            let probs: [F; NUM_CLASSES] = std::array::from_fn(|c| out.probabilities[(i, c)]);
            if Some(argmax(&probs)) == obs.stress {
                correct += 1;
            }
            total += 1;
        }
    }
    let n = total.max(1) as f64;
    Ok((loss / n, correct as f64 / n))
}

/// Class with the highest score; ties go to the lowest index.
pub fn argmax<F: Scalar>(scores: &[F; NUM_CLASSES]) -> StressLevel {
    let mut best = 0;
    for c in 1..NUM_CLASSES {
        if scores[c] > scores[best] {
            best = c;
        }
    }
    StressLevel::from_index(best).expect("class index in range")
}

struct Adam<F> {
    m: ModelParams<F>,
    v: ModelParams<F>,
    step: i32,
}

impl<F: Scalar> Adam<F> {
    fn new(params: &ModelParams<F>) -> Self {
        Self { m: params.zeros_like(), v: params.zeros_like(), step: 0 }
    }

    fn update(&mut self, params: &mut ModelParams<F>, grads: &ModelParams<F>, cfg: &TrainConfig) {
        self.step += 1;
        let (b1, b2) = (F::of(cfg.beta1), F::of(cfg.beta2));
        let bc1 = F::one() - b1.powi(self.step);
        let bc2 = F::one() - b2.powi(self.step);
        let lr = F::of(cfg.learning_rate);
        let eps = F::of(cfg.adam_eps);
        let tensors = params.tensors_mut().into_iter().zip(grads.tensors()).zip(self.m.tensors_mut()).zip(self.v.tensors_mut());
        for ((((_, p), (_, g)), (_, m)), (_, v)) in tensors {
            for (((p, &g), m), v) in p.data_mut().iter_mut().zip(g.data()).zip(m.data_mut()).zip(v.data_mut()) {
                *m = b1 * *m + (F::one() - b1) * g;
                *v = b2 * *v + (F::one() - b2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        if let Some(t) = &mut params.type_emb {
            t.row_mut(NucleusType::Pad.index()).iter_mut().for_each(|x| *x = F::zero());
        }
    }
}

/// Mini-batch Adam training. Returns the parameters with the best validation
/// accuracy, ties going to the lower validation loss (training metrics when `val` is empty).
///
/// Initialization uses `train_cfg.seed`; batch order and dropout use a second
/// stream derived from it. Class weights, when enabled, come from `train`.
pub fn train<F: Scalar>(
    train: &[WordInstance],
    val: &[WordInstance],
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
) -> Result<TrainOutcome<F>, ModelError> {
    model_cfg.validate()?;
    train_cfg.validate()?;
    if train.is_empty() {
        return Err(ModelError::EmptyData);
    }
    let weights = if train_cfg.class_weights_enabled(model_cfg.feature_mode) {
        Some(compute_class_weights(train).map_err(|e| ModelError::InvalidConfig(e.to_string()))?)
    } else {
        None
    };
    let w = weights.as_ref();
    let mut params = ModelParams::<F>::init(model_cfg, train_cfg.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(train_cfg.seed ^ SHUFFLE_STREAM);
    let mut adam = Adam::new(&params);

    let stats = |epoch: usize, params: &ModelParams<F>| -> Result<EpochStats, ModelError> {
        let (train_loss, train_accuracy) = evaluate_set(params, model_cfg, train, w).map_err(|e| diverged(epoch, e))?;
        let (val_loss, val_accuracy) = if val.is_empty() {
            (None, None)
        } else {
            let (l, a) = evaluate_set(params, model_cfg, val, w).map_err(|e| diverged(epoch, e))?;
            (Some(l), Some(a))
        };
        if !train_loss.is_finite() || val_loss.is_some_and(|l| !l.is_finite()) {
            return Err(ModelError::DivergedAtEpoch { epoch, message: "non-finite loss".into() });
        }
        Ok(EpochStats { epoch, train_loss, train_accuracy, val_loss, val_accuracy })
    };
    // higher accuracy first, then lower loss
    let score = |s: &EpochStats| (s.val_accuracy.unwrap_or(s.train_accuracy), -s.val_loss.unwrap_or(s.train_loss));

    let mut history = vec![stats(0, &params)?];
    let mut best = (score(&history[0]), 0, params.clone());
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 1..=train_cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(train_cfg.batch_size) {
            let batch: Vec<&WordInstance> = chunk.iter().map(|&i| &train[i]).collect();
            let (loss, grads) = gradients(&params, model_cfg, &batch, w, Some(&mut rng)).map_err(|e| diverged(epoch, e))?;
            if !loss.is_finite() || !grads.is_finite() {
                return Err(ModelError::DivergedAtEpoch { epoch, message: "non-finite batch loss or gradient".into() });
            }
            adam.update(&mut params, &grads, train_cfg);
        }
        let s = stats(epoch, &params)?;
        log::debug!("epoch {epoch}: train loss {:.4} acc {:.4} val acc {:?}", s.train_loss, s.train_accuracy, s.val_accuracy);
        if score(&s) > best.0 {
            best = (score(&s), epoch, params.clone());
        }
        history.push(s);
    }
    let (_, best_epoch, params) = best;
    Ok(TrainOutcome { model: AttentionModel { config: model_cfg.clone(), params, class_weights: weights }, history, best_epoch })
}

fn diverged(epoch: usize, e: ModelError) -> ModelError {
    match e {
        ModelError::NumericalInstability(message) => ModelError::DivergedAtEpoch { epoch, message },
        other => other,
    }
}

/// Prediction for one valid syllable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyllablePrediction {
    pub position: usize,
    pub stress: StressLevel,
    /// Probabilities in class-index order (NonStress, Primary, Secondary).
    pub probabilities: [f64; NUM_CLASSES],
}

/// Per-syllable argmax predictions for the valid slots of `instance`.
pub fn predict<F: Scalar>(params: &ModelParams<F>, cfg: &ModelConfig, instance: &WordInstance) -> Result<Vec<SyllablePrediction>, ModelError> {
    let out = forward(params, cfg, instance)?;
    Ok((0..instance.valid_count)
        .map(|i| {
            let p: [F; NUM_CLASSES] = std::array::from_fn(|c| out.probabilities[(i, c)]);
            SyllablePrediction { position: i, stress: argmax(&p), probabilities: p.map(|v| v.as_f64()) }
        })
        .collect())
}
