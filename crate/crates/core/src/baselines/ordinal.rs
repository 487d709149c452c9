use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{baseline_width, check_width, BaselineError, Sample};
use crate::lexicon::StressLevel;
use crate::model::{Checkpoint, CheckpointHeader, FeatureMode, ModelError, NamedArray, FORMAT_ORDINAL, NUM_CLASSES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OrdinalConfig {
    /// L2 penalty on the coefficients.
    pub lambda: f64,
    pub learning_rate: f64,
    pub iterations: usize,
}

impl Default for OrdinalConfig {
    fn default() -> Self {
        Self { lambda: 1e-4, learning_rate: 0.05, iterations: 1500 }
    }
}

/// Proportional-odds model over NonStress < Secondary < Primary:
/// `P(rank <= k) = sigmoid(theta_k - beta . z)`, `z` the standardized input.
#[derive(Debug, Clone, PartialEq)]
pub struct OrdinalModel {
    pub feature_mode: FeatureMode,
    pub config: OrdinalConfig,
    /// Coefficients on the standardized features.
    pub coefficients: Vec<f64>,
    pub thresholds: [f64; 2],
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Probabilities by ordinal rank for linear predictor `eta`.
fn rank_probabilities(eta: f64, theta: [f64; 2]) -> [f64; 3] {
    let s0 = sigmoid(theta[0] - eta);
    let s1 = sigmoid(theta[1] - eta);
    [s0, (s1 - s0).max(0.0), 1.0 - s1]
}

const MIN_PROB: f64 = 1e-15;

impl OrdinalModel {
    pub fn width(&self) -> usize {
        self.coefficients.len()
    }

    fn eta(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.mean).zip(&self.scale).zip(&self.coefficients).map(|(((&x, &m), &s), &b)| b * (x - m) / s).sum()
    }

    /// Class probabilities in class-index order.
    pub fn probabilities(&self, x: &[f64]) -> Result<[f64; NUM_CLASSES], BaselineError> {
        check_width(x, self.width())?;
        let by_rank = rank_probabilities(self.eta(x), self.thresholds);
        Ok(std::array::from_fn(|c| by_rank[StressLevel::from_index(c).expect("class").ordinal_rank()]))
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let config = serde_json::to_value(&self.config).expect("config serializes");
        let row = |name: &str, v: &[f64]| NamedArray { name: name.into(), shape: [1, v.len()], data: v.to_vec() };
        Checkpoint {
            header: CheckpointHeader::new(FORMAT_ORDINAL, config, self.feature_mode, None),
            arrays: vec![
                row("coefficients", &self.coefficients),
                row("thresholds", &self.thresholds),
                row("mean", &self.mean),
                row("scale", &self.scale),
            ],
            payload: None,
        }
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self, BaselineError> {
        ckpt.expect_format(FORMAT_ORDINAL)?;
        let k = baseline_width(ckpt.header.feature_mode)?;
        let config: OrdinalConfig =
            serde_json::from_value(ckpt.header.model_config.clone()).map_err(|e| ModelError::Checkpoint(format!("model_config: {e}")))?;
        let get = |name: &str, len: usize| -> Result<Vec<f64>, BaselineError> {
            let a = ckpt.arrays.iter().find(|a| a.name == name).ok_or_else(|| ModelError::Checkpoint(format!("missing array {name}")))?;
            if a.shape != [1, len] {
                return Err(ModelError::Checkpoint(format!("array {name} has shape {:?}, expected [1, {len}]", a.shape)).into());
            }
            Ok(a.data.clone())
        };
        let t = get("thresholds", 2)?;
        if !(t[0] < t[1]) {
            return Err(ModelError::Checkpoint("thresholds not strictly increasing".into()).into());
        }
        Ok(Self {
            feature_mode: ckpt.header.feature_mode,
            config,
            coefficients: get("coefficients", k)?,
            thresholds: [t[0], t[1]],
            mean: get("mean", k)?,
            scale: get("scale", k)?,
        })
    }
}

/// Fits by full-batch Adam on the mean negative log-likelihood plus `lambda/2 * |beta|^2`.
/// Inputs are standardized internally; `theta_1 = theta_0 + exp(delta)` keeps the cut points ordered.
/// `seed` draws the small initial coefficients.
pub fn train_ordinal(samples: &[Sample], mode: FeatureMode, cfg: &OrdinalConfig, seed: u64) -> Result<OrdinalModel, BaselineError> {
    let k = baseline_width(mode)?;
    if samples.is_empty() {
        return Err(BaselineError::EmptyData);
    }
    if !(cfg.lambda >= 0.0) || !(cfg.learning_rate > 0.0) {
        return Err(BaselineError::InvalidConfig("lambda must be >= 0 and learning_rate > 0".into()));
    }
    let mut counts = [0usize; 3];
    for s in samples {
        check_width(&s.features, k)?;
        counts[s.stress.ordinal_rank()] += 1;
    }
    if counts.iter().filter(|&&c| c > 0).count() < 2 {
        return Err(BaselineError::DegenerateData("fewer than two stress classes present".into()));
    }
    let n = samples.len() as f64;
    let mean: Vec<f64> = (0..k).map(|j| samples.iter().map(|s| s.features[j]).sum::<f64>() / n).collect();
    let scale: Vec<f64> = (0..k)
        .map(|j| {
            let var = samples.iter().map(|s| (s.features[j] - mean[j]).powi(2)).sum::<f64>() / n;
            if var > 0.0 {
                var.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    let z: Vec<Vec<f64>> = samples.iter().map(|s| (0..k).map(|j| (s.features[j] - mean[j]) / scale[j]).collect()).collect();
    let ranks: Vec<usize> = samples.iter().map(|s| s.stress.ordinal_rank()).collect();

    // parameters: beta (k), theta0, delta
    let normal = Normal::new(0.0, 0.01).expect("valid normal");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p: Vec<f64> = (0..k).map(|_| normal.sample(&mut rng)).collect();
    p.push(-0.5);
    p.push(0.0);
    let (mut m, mut v) = (vec![0.0; k + 2], vec![0.0; k + 2]);
    let (b1, b2, eps) = (0.9, 0.999, 1e-8);
    for step in 1..=cfg.iterations {
        let mut g = vec![0.0; k + 2];
        let theta0 = p[k];
        let theta1 = theta0 + p[k + 1].exp();
        for (zi, &r) in z.iter().zip(&ranks) {
            let eta: f64 = zi.iter().zip(&p[..k]).map(|(a, b)| a * b).sum();
            let s0 = sigmoid(theta0 - eta);
            let s1 = sigmoid(theta1 - eta);
            let (da0, da1) = match r {
                0 => (-(1.0 - s0), 0.0),
                2 => (0.0, s1),
                _ => {
                    let d = (s1 - s0).max(MIN_PROB);
                    (s0 * (1.0 - s0) / d, -s1 * (1.0 - s1) / d)
                }
            };
            let deta = -(da0 + da1);
            for (gj, &zj) in g[..k].iter_mut().zip(zi) {
                *gj += deta * zj;
            }
            g[k] += da0 + da1;
            g[k + 1] += da1 * (theta1 - theta0);
        }
        for (j, gj) in g.iter_mut().enumerate() {
            *gj /= n;
            if j < k {
                *gj += cfg.lambda * p[j];
            }
        }
        let bc1 = 1.0 - f64::powi(b1, step as i32);
        let bc2 = 1.0 - f64::powi(b2, step as i32);
        for j in 0..k + 2 {
            m[j] = b1 * m[j] + (1.0 - b1) * g[j];
            v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
            p[j] -= cfg.learning_rate * (m[j] / bc1) / ((v[j] / bc2).sqrt() + eps);
        }
    }
    let theta0 = p[k];
    let thresholds = [theta0, theta0 + p[k + 1].exp()];
    if !p.iter().all(|x| x.is_finite()) || !(thresholds[0] < thresholds[1]) {
        return Err(BaselineError::DegenerateData("ordinal fit did not converge to finite, ordered parameters".into()));
    }
    Ok(OrdinalModel { feature_mode: mode, config: cfg.clone(), coefficients: p[..k].to_vec(), thresholds, mean, scale })
}
