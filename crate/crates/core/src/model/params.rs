use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{Matrix, ModelConfig, ModelError};
use crate::lexicon::NucleusType;
use crate::{Scalar, MAX_SYLLABLES};

/// Number of type-embedding rows: sixteen nucleus types plus the padding row.
pub const TYPE_ROWS: usize = NucleusType::COUNT + 1;
pub const NUM_CLASSES: usize = 3;

/// Weights of one pre-norm encoder layer. Vectors are `1 x n` matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams<F> {
    pub ln1_gamma: Matrix<F>,
    pub ln1_beta: Matrix<F>,
    pub wq: Matrix<F>,
    pub bq: Matrix<F>,
    pub wk: Matrix<F>,
    pub bk: Matrix<F>,
    pub wv: Matrix<F>,
    pub bv: Matrix<F>,
    pub wo: Matrix<F>,
    pub bo: Matrix<F>,
    pub ln2_gamma: Matrix<F>,
    pub ln2_beta: Matrix<F>,
    pub w1: Matrix<F>,
    pub b1: Matrix<F>,
    pub w2: Matrix<F>,
    pub b2: Matrix<F>,
}

const LAYER_FIELDS: [&str; 16] = [
    "ln1.gamma",
    "ln1.beta",
    "attn.wq",
    "attn.bq",
    "attn.wk",
    "attn.bk",
    "attn.wv",
    "attn.bv",
    "attn.wo",
    "attn.bo",
    "ln2.gamma",
    "ln2.beta",
    "ffn.w1",
    "ffn.b1",
    "ffn.w2",
    "ffn.b2",
];

impl<F: Scalar> LayerParams<F> {
    fn fields(&self) -> [&Matrix<F>; 16] {
        [
            &self.ln1_gamma,
            &self.ln1_beta,
            &self.wq,
            &self.bq,
            &self.wk,
            &self.bk,
            &self.wv,
            &self.bv,
            &self.wo,
            &self.bo,
            &self.ln2_gamma,
            &self.ln2_beta,
            &self.w1,
            &self.b1,
            &self.w2,
            &self.b2,
        ]
    }

    fn fields_mut(&mut self) -> [&mut Matrix<F>; 16] {
        [
            &mut self.ln1_gamma,
            &mut self.ln1_beta,
            &mut self.wq,
            &mut self.bq,
            &mut self.wk,
            &mut self.bk,
            &mut self.wv,
            &mut self.bv,
            &mut self.wo,
            &mut self.bo,
            &mut self.ln2_gamma,
            &mut self.ln2_beta,
            &mut self.w1,
            &mut self.b1,
            &mut self.w2,
            &mut self.b2,
        ]
    }
}

/// All trainable tensors of the classifier.
///
/// `type_emb` exists only in `AllFeatures` mode; its last row (padding) stays zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<F> {
    pub pos_emb: Matrix<F>,
    pub type_emb: Option<Matrix<F>>,
    pub proj: Matrix<F>,
    pub layers: Vec<LayerParams<F>>,
    pub final_ln_gamma: Matrix<F>,
    pub final_ln_beta: Matrix<F>,
    pub head_w: Matrix<F>,
    pub head_b: Matrix<F>,
}

fn xavier(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize) -> Matrix<f64> {
    let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Matrix::from_fn(fan_in, fan_out, |_, _| rng.gen_range(-a..=a))
}

fn normal(rng: &mut ChaCha8Rng, rows: usize, cols: usize, sd: f64) -> Matrix<f64> {
    let dist = Normal::new(0.0, sd).expect("valid normal");
    Matrix::from_fn(rows, cols, |_, _| dist.sample(rng))
}

impl ModelParams<f64> {
    /// Seeded initialization: embeddings `N(0, 0.02)`, weight matrices uniform in
    /// `±sqrt(6 / (fan_in + fan_out))`, biases 0, layer-norm gains 1.
    /// Values are drawn in a fixed order from a ChaCha8 stream.
    pub fn init_f64(cfg: &ModelConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = cfg.d_model;
        let aw = cfg.attention_width();
        let pos_emb = normal(&mut rng, MAX_SYLLABLES, d, 0.02);
        let type_emb = cfg.feature_mode.uses_type_embedding().then(|| {
            let mut t = normal(&mut rng, TYPE_ROWS, d, 0.02);
            t.row_mut(NucleusType::Pad.index()).iter_mut().for_each(|v| *v = 0.0);
            t
        });
        let proj = xavier(&mut rng, cfg.feature_mode.num_features(), d);
        let layers = (0..cfg.layers)
            .map(|_| LayerParams {
                ln1_gamma: Matrix::filled(1, d, 1.0),
                ln1_beta: Matrix::zeros(1, d),
                wq: xavier(&mut rng, d, aw),
                bq: Matrix::zeros(1, aw),
                wk: xavier(&mut rng, d, aw),
                bk: Matrix::zeros(1, aw),
                wv: xavier(&mut rng, d, aw),
                bv: Matrix::zeros(1, aw),
                wo: xavier(&mut rng, aw, d),
                bo: Matrix::zeros(1, d),
                ln2_gamma: Matrix::filled(1, d, 1.0),
                ln2_beta: Matrix::zeros(1, d),
                w1: xavier(&mut rng, d, cfg.ffn_hidden),
                b1: Matrix::zeros(1, cfg.ffn_hidden),
                w2: xavier(&mut rng, cfg.ffn_hidden, d),
                b2: Matrix::zeros(1, d),
            })
            .collect();
        let head_w = xavier(&mut rng, d, NUM_CLASSES);
        ModelParams {
            pos_emb,
            type_emb,
            proj,
            layers,
            final_ln_gamma: Matrix::filled(1, d, 1.0),
            final_ln_beta: Matrix::zeros(1, d),
            head_w,
            head_b: Matrix::zeros(1, NUM_CLASSES),
        }
    }
}

impl<F: Scalar> ModelParams<F> {
    /// Initializes in `f64` and converts, so both precisions start from the same values.
    pub fn init(cfg: &ModelConfig, seed: u64) -> Self {
        ModelParams::init_f64(cfg, seed).cast()
    }

    pub fn cast<G: Scalar>(&self) -> ModelParams<G> {
        let mut out = ModelParams::<G> {
            pos_emb: self.pos_emb.cast(),
            type_emb: self.type_emb.as_ref().map(Matrix::cast),
            proj: self.proj.cast(),
            layers: Vec::new(),
            final_ln_gamma: self.final_ln_gamma.cast(),
            final_ln_beta: self.final_ln_beta.cast(),
            head_w: self.head_w.cast(),
            head_b: self.head_b.cast(),
        };
        out.layers = self
            .layers
            .iter()
            .map(|l| {
                let f = l.fields();
                LayerParams {
                    ln1_gamma: f[0].cast(),
                    ln1_beta: f[1].cast(),
                    wq: f[2].cast(),
                    bq: f[3].cast(),
                    wk: f[4].cast(),
                    bk: f[5].cast(),
                    wv: f[6].cast(),
                    bv: f[7].cast(),
                    wo: f[8].cast(),
                    bo: f[9].cast(),
                    ln2_gamma: f[10].cast(),
                    ln2_beta: f[11].cast(),
                    w1: f[12].cast(),
                    b1: f[13].cast(),
                    w2: f[14].cast(),
                    b2: f[15].cast(),
                }
            })
            .collect();
        out
    }

    /// Same shapes, all zeros.
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for (_, t) in z.tensors_mut() {
            t.fill(F::zero());
        }
        z
    }

    /// Tensors with stable names, in checkpoint order.
    pub fn tensors(&self) -> Vec<(String, &Matrix<F>)> {
        let mut out = vec![("pos_emb".to_string(), &self.pos_emb)];
        if let Some(t) = &self.type_emb {
            out.push(("type_emb".to_string(), t));
        }
        out.push(("proj".to_string(), &self.proj));
        for (i, l) in self.layers.iter().enumerate() {
            for (name, t) in LAYER_FIELDS.iter().zip(l.fields()) {
                out.push((format!("layers.{i}.{name}"), t));
            }
        }
        out.push(("final_ln.gamma".to_string(), &self.final_ln_gamma));
        out.push(("final_ln.beta".to_string(), &self.final_ln_beta));
        out.push(("head.w".to_string(), &self.head_w));
        out.push(("head.b".to_string(), &self.head_b));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut Matrix<F>)> {
        let mut out = vec![("pos_emb".to_string(), &mut self.pos_emb)];
        if let Some(t) = &mut self.type_emb {
            out.push(("type_emb".to_string(), t));
        }
        out.push(("proj".to_string(), &mut self.proj));
        for (i, l) in self.layers.iter_mut().enumerate() {
            for (name, t) in LAYER_FIELDS.iter().zip(l.fields_mut()) {
                out.push((format!("layers.{i}.{name}"), t));
            }
        }
        out.push(("final_ln.gamma".to_string(), &mut self.final_ln_gamma));
        out.push(("final_ln.beta".to_string(), &mut self.final_ln_beta));
        out.push(("head.w".to_string(), &mut self.head_w));
        out.push(("head.b".to_string(), &mut self.head_b));
        out
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.data().len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.is_finite())
    }

    /// Checks tensor shapes against `cfg`.
    pub fn check_shapes(&self, cfg: &ModelConfig) -> Result<(), ModelError> {
        let expected = ModelParams::<F>::init(cfg, 0);
        if self.layers.len() != expected.layers.len() || self.type_emb.is_some() != expected.type_emb.is_some() {
            return Err(ModelError::Shape("parameter layout does not match the model config".into()));
        }
        for ((name, a), (_, b)) in self.tensors().iter().zip(expected.tensors()) {
            if a.shape() != b.shape() {
                return Err(ModelError::Shape(format!("{name}: shape {:?}, expected {:?}", a.shape(), b.shape())));
            }
        }
        Ok(())
    }

    /// Builds parameters from named arrays (as stored in a checkpoint).
    pub fn from_named(cfg: &ModelConfig, arrays: &[(String, Matrix<F>)]) -> Result<Self, ModelError> {
        let mut params = ModelParams::<F>::init(cfg, 0);
        {
            let mut slots = params.tensors_mut();
            if slots.len() != arrays.len() {
                return Err(ModelError::Shape(format!("expected {} tensors, found {}", slots.len(), arrays.len())));
            }
            for ((name, slot), (got_name, value)) in slots.iter_mut().zip(arrays) {
                if name != got_name || slot.shape() != value.shape() {
                    return Err(ModelError::Shape(format!(
                        "tensor {got_name:?} {:?} does not match expected {name:?} {:?}",
                        value.shape(),
                        slot.shape()
                    )));
                }
                **slot = value.clone();
            }
        }
        Ok(params)
    }
}
