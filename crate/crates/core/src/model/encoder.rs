//! Embedding, masked pre-norm encoder, weighted cross-entropy and reverse-mode gradients.

use rand::Rng;

use super::{Matrix, ModelConfig, ModelError, ModelParams, NUM_CLASSES};
use crate::corpus::{ClassWeights, WordInstance};
use crate::lexicon::NucleusType;
use crate::{Scalar, MAX_SYLLABLES};

pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Embedded word: one row per slot, padded rows zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedded<F> {
    pub v: Matrix<F>,
    pub mask: [bool; MAX_SYLLABLES],
}

/// Input rows: position embedding + type embedding (AllFeatures only) + projected features.
pub fn embed<F: Scalar>(instance: &WordInstance, params: &ModelParams<F>, cfg: &ModelConfig) -> Result<Embedded<F>, ModelError> {
    let k = cfg.feature_mode.num_features();
    let d = cfg.d_model;
    if params.proj.shape() != (k, d) {
        return Err(ModelError::Shape(format!("projection is {:?}, feature mode needs {:?}", params.proj.shape(), (k, d))));
    }
    if params.type_emb.is_some() != cfg.feature_mode.uses_type_embedding() {
        return Err(ModelError::Shape("type embedding presence does not match the feature mode".into()));
    }
    let mut v = Matrix::zeros(MAX_SYLLABLES, d);
    for (i, obs) in instance.valid().iter().enumerate() {
        let row = v.row_mut(i);
        row.copy_from_slice(params.pos_emb.row(i));
        if let Some(types) = &params.type_emb {
            if obs.nucleus_type == NucleusType::Pad {
                return Err(ModelError::Shape(format!("valid slot {i} has the padding nucleus type")));
            }
            for (r, &t) in row.iter_mut().zip(types.row(obs.nucleus_type.index())) {
                *r += t;
            }
        }
        for (f, &x) in obs.features[..k].iter().enumerate() {
            let x = F::of(x);
            for (r, &c) in row.iter_mut().zip(params.proj.row(f)) {
                *r += x * c;
            }
        }
    }
    Ok(Embedded { v, mask: instance.mask })
}

struct LnCache<F> {
    xhat: Matrix<F>,
    inv_std: Vec<F>,
}

fn layer_norm<F: Scalar>(x: &Matrix<F>, gamma: &Matrix<F>, beta: &Matrix<F>) -> (Matrix<F>, LnCache<F>) {
    let (rows, cols) = x.shape();
    let n = F::of(cols as f64);
    let eps = F::of(LAYER_NORM_EPS);
    let mut xhat = Matrix::zeros(rows, cols);
    let mut out = Matrix::zeros(rows, cols);
    let mut inv_std = Vec::with_capacity(rows);
    for r in 0..rows {
        let row = x.row(r);
        let mean = row.iter().copied().sum::<F>() / n;
        let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<F>() / n;
        let inv = F::one() / (var + eps).sqrt();
        inv_std.push(inv);
        for c in 0..cols {
            let h = (row[c] - mean) * inv;
            xhat[(r, c)] = h;
            out[(r, c)] = gamma.data()[c] * h + beta.data()[c];
        }
    }
    (out, LnCache { xhat, inv_std })
}

fn layer_norm_backward<F: Scalar>(dy: &Matrix<F>, cache: &LnCache<F>, gamma: &Matrix<F>, dgamma: &mut Matrix<F>, dbeta: &mut Matrix<F>) -> Matrix<F> {
    let (rows, cols) = dy.shape();
    let n = F::of(cols as f64);
    let mut dx = Matrix::zeros(rows, cols);
    for r in 0..rows {
        let xhat = cache.xhat.row(r);
        let dyr = dy.row(r);
        let mut sum_dxhat = F::zero();
        let mut sum_dxhat_xhat = F::zero();
        for c in 0..cols {
            dgamma.data_mut()[c] += dyr[c] * xhat[c];
            dbeta.data_mut()[c] += dyr[c];
            let dxh = dyr[c] * gamma.data()[c];
            sum_dxhat += dxh;
            sum_dxhat_xhat += dxh * xhat[c];
        }
        let inv = cache.inv_std[r];
        for c in 0..cols {
            let dxh = dyr[c] * gamma.data()[c];
            dx[(r, c)] = inv / n * (n * dxh - sum_dxhat - xhat[c] * sum_dxhat_xhat);
        }
    }
    dx
}

fn linear<F: Scalar>(x: &Matrix<F>, w: &Matrix<F>, b: &Matrix<F>) -> Matrix<F> {
    let mut y = x.matmul(w);
    y.add_row_vector(b);
    y
}

fn dropout_mask<F: Scalar, R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> Vec<F> {
    let keep = F::of(1.0 / (1.0 - p));
    (0..n).map(|_| if rng.gen::<f64>() < p { F::zero() } else { keep }).collect()
}

fn apply_mask<F: Scalar>(m: &mut Matrix<F>, mask: &[F]) {
    for (v, &k) in m.data_mut().iter_mut().zip(mask) {
        *v *= k;
    }
}

struct LayerCache<F> {
    ln1: LnCache<F>,
    a: Matrix<F>,
    q: Matrix<F>,
    k: Matrix<F>,
    v: Matrix<F>,
    probs: Vec<Matrix<F>>,
    o: Matrix<F>,
    drop1: Option<Vec<F>>,
    ln2: LnCache<F>,
    b: Matrix<F>,
    h_pre: Matrix<F>,
    h: Matrix<F>,
    drop2: Option<Vec<F>>,
}

/// Everything the backward pass needs from one forward evaluation.
pub struct Trace<F> {
    mask: [bool; MAX_SYLLABLES],
    layers: Vec<LayerCache<F>>,
    ln_final: LnCache<F>,
    final_out: Matrix<F>,
    pub logits: Matrix<F>,
}

impl<F: Scalar> Trace<F> {
    /// Attention weights of `layer`, `head`: row = query slot, column = key slot.
    pub fn attention(&self, layer: usize, head: usize) -> &Matrix<F> {
        &self.layers[layer].probs[head]
    }

    pub fn mask(&self) -> &[bool; MAX_SYLLABLES] {
        &self.mask
    }

    /// Sign of every feed-forward pre-activation (true = positive), all layers in order.
    pub fn relu_pattern(&self) -> Vec<bool> {
        self.layers.iter().flat_map(|l| l.h_pre.data().iter().map(|&v| v > F::zero())).collect()
    }
}

/// Runs the encoder on an embedded word. With `dropout_rng` set, dropout is active.
pub fn forward_trace<F: Scalar, R: Rng + ?Sized>(
    emb: &Embedded<F>,
    params: &ModelParams<F>,
    cfg: &ModelConfig,
    mut dropout_rng: Option<&mut R>,
) -> Result<Trace<F>, ModelError> {
    let dh = cfg.head_dim();
    let scale = F::one() / F::of(dh as f64).sqrt();
    let n = MAX_SYLLABLES;
    let mut x = emb.v.clone();
    let mut layers = Vec::with_capacity(params.layers.len());
    for lp in &params.layers {
        let (a, ln1) = layer_norm(&x, &lp.ln1_gamma, &lp.ln1_beta);
        let q = linear(&a, &lp.wq, &lp.bq);
        let k = linear(&a, &lp.wk, &lp.bk);
        let v = linear(&a, &lp.wv, &lp.bv);
        let mut o = Matrix::zeros(n, cfg.attention_width());
        let mut probs = Vec::with_capacity(cfg.heads);
        for h in 0..cfg.heads {
            let cols = h * dh..(h + 1) * dh;
            let mut p = Matrix::zeros(n, n);
            for i in 0..n {
                let qi = &q.row(i)[cols.clone()];
                let mut max = F::neg_infinity();
                for j in 0..n {
                    let s =
                        if emb.mask[j] { qi.iter().zip(&k.row(j)[cols.clone()]).map(|(&a, &b)| a * b).sum::<F>() * scale } else { F::neg_infinity() };
                    p[(i, j)] = s;
                    max = max.max(s);
                }
                let mut total = F::zero();
                for j in 0..n {
                    let e = (p[(i, j)] - max).exp();
                    p[(i, j)] = e;
                    total += e;
                }
                for j in 0..n {
                    p[(i, j)] /= total;
                }
                for j in 0..n {
                    let w = p[(i, j)];
                    if w == F::zero() {
                        continue;
                    }
                    for c in cols.clone() {
                        o[(i, c)] += w * v[(j, c)];
                    }
                }
            }
            probs.push(p);
        }
        let mut z = linear(&o, &lp.wo, &lp.bo);
        let drop1 = match dropout_rng.as_deref_mut() {
            Some(rng) if cfg.dropout > 0.0 => {
                let m = dropout_mask(z.data().len(), cfg.dropout, rng);
                apply_mask(&mut z, &m);
                Some(m)
            }
            _ => None,
        };
        let mut x_mid = x;
        x_mid.add_assign(&z);
        let (b, ln2) = layer_norm(&x_mid, &lp.ln2_gamma, &lp.ln2_beta);
        let h_pre = linear(&b, &lp.w1, &lp.b1);
        let mut h = h_pre.clone();
        h.data_mut().iter_mut().for_each(|v| *v = v.max(F::zero()));
        let mut y = linear(&h, &lp.w2, &lp.b2);
        let drop2 = match dropout_rng.as_deref_mut() {
            Some(rng) if cfg.dropout > 0.0 => {
                let m = dropout_mask(y.data().len(), cfg.dropout, rng);
                apply_mask(&mut y, &m);
                Some(m)
            }
            _ => None,
        };
        let mut x_out = x_mid;
        x_out.add_assign(&y);
        layers.push(LayerCache { ln1, a, q, k, v, probs, o, drop1, ln2, b, h_pre, h, drop2 });
        x = x_out;
    }
    let (final_out, ln_final) = layer_norm(&x, &params.final_ln_gamma, &params.final_ln_beta);
    let logits = linear(&final_out, &params.head_w, &params.head_b);
    for i in 0..n {
        if emb.mask[i] && logits.row(i).iter().any(|v| !v.is_finite()) {
            return Err(ModelError::NumericalInstability(format!("non-finite logits at slot {i}")));
        }
    }
    Ok(Trace { mask: emb.mask, layers, ln_final, final_out, logits })
}

/// Accumulates parameter gradients for upstream logit gradients `dlogits` into `grads`.
pub fn backward<F: Scalar>(
    trace: &Trace<F>,
    dlogits: &Matrix<F>,
    instance: &WordInstance,
    params: &ModelParams<F>,
    cfg: &ModelConfig,
    grads: &mut ModelParams<F>,
) {
    let n = MAX_SYLLABLES;
    let dh = cfg.head_dim();
    let scale = F::one() / F::of(dh as f64).sqrt();

    trace.final_out.t_matmul_acc(dlogits, &mut grads.head_w);
    dlogits.sum_rows_acc(&mut grads.head_b);
    let dfinal = dlogits.matmul_t(&params.head_w);
    let mut dx = layer_norm_backward(&dfinal, &trace.ln_final, &params.final_ln_gamma, &mut grads.final_ln_gamma, &mut grads.final_ln_beta);

    for (l, (lp, c)) in params.layers.iter().zip(&trace.layers).enumerate().rev() {
        let g = &mut grads.layers[l];
        // feed-forward branch
        let mut dy = dx.clone();
        if let Some(m) = &c.drop2 {
            apply_mask(&mut dy, m);
        }
        c.h.t_matmul_acc(&dy, &mut g.w2);
        dy.sum_rows_acc(&mut g.b2);
        let mut dh_pre = dy.matmul_t(&lp.w2);
        for (d, &pre) in dh_pre.data_mut().iter_mut().zip(c.h_pre.data()) {
            if pre <= F::zero() {
                *d = F::zero();
            }
        }
        c.b.t_matmul_acc(&dh_pre, &mut g.w1);
        dh_pre.sum_rows_acc(&mut g.b1);
        let db = dh_pre.matmul_t(&lp.w1);
        let mut dx_mid = dx;
        dx_mid.add_assign(&layer_norm_backward(&db, &c.ln2, &lp.ln2_gamma, &mut g.ln2_gamma, &mut g.ln2_beta));

        // attention branch
        let mut dz = dx_mid.clone();
        if let Some(m) = &c.drop1 {
            apply_mask(&mut dz, m);
        }
        c.o.t_matmul_acc(&dz, &mut g.wo);
        dz.sum_rows_acc(&mut g.bo);
        let d_o = dz.matmul_t(&lp.wo);
        let aw = cfg.attention_width();
        let mut dq = Matrix::zeros(n, aw);
        let mut dk = Matrix::zeros(n, aw);
        let mut dv = Matrix::zeros(n, aw);
        for h in 0..cfg.heads {
            let cols = h * dh..(h + 1) * dh;
            let p = &c.probs[h];
            for i in 0..n {
                // dP[i][j] = dO[i] . V[j]; dS = P * (dP - sum_j P dP)
                let mut dp = [F::zero(); MAX_SYLLABLES];
                let mut dot = F::zero();
                for j in 0..n {
                    let w = p[(i, j)];
                    if w == F::zero() {
                        continue;
                    }
                    let mut acc = F::zero();
                    for col in cols.clone() {
                        acc += d_o[(i, col)] * c.v[(j, col)];
                        dv[(j, col)] += w * d_o[(i, col)];
                    }
                    dp[j] = acc;
                    dot += w * acc;
                }
                for j in 0..n {
                    let w = p[(i, j)];
                    if w == F::zero() {
                        continue;
                    }
                    let ds = w * (dp[j] - dot) * scale;
                    for col in cols.clone() {
                        dq[(i, col)] += ds * c.k[(j, col)];
                        dk[(j, col)] += ds * c.q[(i, col)];
                    }
                }
            }
        }
        c.a.t_matmul_acc(&dq, &mut g.wq);
        dq.sum_rows_acc(&mut g.bq);
        c.a.t_matmul_acc(&dk, &mut g.wk);
        dk.sum_rows_acc(&mut g.bk);
        c.a.t_matmul_acc(&dv, &mut g.wv);
        dv.sum_rows_acc(&mut g.bv);
        let mut da = dq.matmul_t(&lp.wq);
        da.add_assign(&dk.matmul_t(&lp.wk));
        da.add_assign(&dv.matmul_t(&lp.wv));
        let mut dx_in = dx_mid;
        dx_in.add_assign(&layer_norm_backward(&da, &c.ln1, &lp.ln1_gamma, &mut g.ln1_gamma, &mut g.ln1_beta));
        dx = dx_in;
    }

    // embedding
    let k = cfg.feature_mode.num_features();
    for (i, obs) in instance.valid().iter().enumerate() {
        let drow = dx.row(i);
        for (g, &d) in grads.pos_emb.row_mut(i).iter_mut().zip(drow) {
            *g += d;
        }
        if let Some(types) = &mut grads.type_emb {
            for (g, &d) in types.row_mut(obs.nucleus_type.index()).iter_mut().zip(drow) {
                *g += d;
            }
        }
        for (f, &x) in obs.features[..k].iter().enumerate() {
            let x = F::of(x);
            for (g, &d) in grads.proj.row_mut(f).iter_mut().zip(drow) {
                *g += x * d;
            }
        }
    }
    if let Some(types) = &mut grads.type_emb {
        types.row_mut(NucleusType::Pad.index()).iter_mut().for_each(|v| *v = F::zero());
    }
}

/// Row-wise softmax over the three classes.
pub fn softmax_rows<F: Scalar>(logits: &Matrix<F>) -> Matrix<F> {
    let mut out = logits.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().copied().fold(F::neg_infinity(), F::max);
        let mut total = F::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    out
}

fn row_weight<F: Scalar>(weights: Option<&ClassWeights>, nucleus: NucleusType, stress: crate::StressLevel) -> F {
    F::of(weights.map_or(1.0, |w| w.weight(nucleus, stress)))
}

/// Sum over valid slots of `w(c_i, s_i) * CE(logits_i, s_i)`, and its gradient
/// w.r.t. the logits scaled by `grad_scale`.
pub fn weighted_cross_entropy<F: Scalar>(
    logits: &Matrix<F>,
    instance: &WordInstance,
    weights: Option<&ClassWeights>,
    grad_scale: F,
) -> Result<(F, Matrix<F>), ModelError> {
    let probs = softmax_rows(logits);
    let mut dlogits = Matrix::zeros(MAX_SYLLABLES, NUM_CLASSES);
    let mut total = F::zero();
    for (i, obs) in instance.valid().iter().enumerate() {
        let Some(stress) = obs.stress else {
            return Err(ModelError::Label { position: i });
        };
        let w: F = row_weight(weights, obs.nucleus_type, stress);
        let row = logits.row(i);
        let max = row.iter().copied().fold(F::neg_infinity(), F::max);
        let lse = max + row.iter().map(|&v| (v - max).exp()).sum::<F>().ln();
        total += w * (lse - row[stress.index()]);
        for c in 0..NUM_CLASSES {
            let target = if c == stress.index() { F::one() } else { F::zero() };
            dlogits[(i, c)] = w * grad_scale * (probs[(i, c)] - target);
        }
    }
    Ok((total, dlogits))
}

/// Mean weighted cross-entropy over the valid slots of one word.
pub fn loss<F: Scalar>(logits: &Matrix<F>, instance: &WordInstance, weights: Option<&ClassWeights>) -> Result<F, ModelError> {
    let (sum, _) = weighted_cross_entropy(logits, instance, weights, F::zero())?;
    Ok(sum / F::of(instance.valid_count as f64))
}

/// Batch loss (mean over all valid slots) and its exact gradient.
pub fn gradients<F: Scalar, R: Rng + ?Sized>(
    params: &ModelParams<F>,
    cfg: &ModelConfig,
    batch: &[&WordInstance],
    weights: Option<&ClassWeights>,
    mut dropout_rng: Option<&mut R>,
) -> Result<(F, ModelParams<F>), ModelError> {
    if batch.is_empty() {
        return Err(ModelError::EmptyData);
    }
    let total_valid: usize = batch.iter().map(|w| w.valid_count).sum();
    let inv_n = F::one() / F::of(total_valid as f64);
    let mut grads = params.zeros_like();
    let mut loss_sum = F::zero();
    for inst in batch {
        let emb = embed(inst, params, cfg)?;
        let trace = forward_trace(&emb, params, cfg, dropout_rng.as_deref_mut())?;
        let (l, dlogits) = weighted_cross_entropy(&trace.logits, inst, weights, inv_n)?;
        loss_sum += l;
        backward(&trace, &dlogits, inst, params, cfg, &mut grads);
    }
    Ok((loss_sum * inv_n, grads))
}

/// Batch loss without gradients, in evaluation mode.
pub fn batch_loss<F: Scalar>(
    params: &ModelParams<F>,
    cfg: &ModelConfig,
    batch: &[&WordInstance],
    weights: Option<&ClassWeights>,
) -> Result<F, ModelError> {
    let total_valid: usize = batch.iter().map(|w| w.valid_count).sum();
    let mut sum = F::zero();
    for inst in batch {
        let emb = embed(inst, params, cfg)?;
        let trace = forward_trace::<F, rand_chacha::ChaCha8Rng>(&emb, params, cfg, None)?;
        sum += weighted_cross_entropy(&trace.logits, inst, weights, F::zero())?.0;
    }
    Ok(sum / F::of(total_valid.max(1) as f64))
}

/// Logits and class probabilities for every slot (padded rows are meaningless).
#[derive(Debug, Clone)]
pub struct ForwardOutput<F> {
    pub logits: Matrix<F>,
    pub probabilities: Matrix<F>,
    pub mask: [bool; MAX_SYLLABLES],
}

/// Evaluation-mode forward pass for one word.
pub fn forward<F: Scalar>(params: &ModelParams<F>, cfg: &ModelConfig, instance: &WordInstance) -> Result<ForwardOutput<F>, ModelError> {
    let emb = embed(instance, params, cfg)?;
    let trace = forward_trace::<F, rand_chacha::ChaCha8Rng>(&emb, params, cfg, None)?;
    let probabilities = softmax_rows(&trace.logits);
    Ok(ForwardOutput { logits: trace.logits, probabilities, mask: emb.mask })
}
