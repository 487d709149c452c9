use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::lexicon::NucleusType;
use crate::model::ModelParams;
use crate::Scalar;

/// Principal axes of a set of rows, centered but not scaled.
#[derive(Debug, Clone, PartialEq)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// Unit-length axes, strongest first; each has its largest-magnitude entry positive.
    pub components: Vec<Vec<f64>>,
    /// Eigenvalues of the sample covariance (denominator `n - 1`), descending, clamped at 0.
    pub explained_variance: Vec<f64>,
}

impl Pca {
    /// Coordinates of `row` on the first `k` axes.
    pub fn project(&self, row: &[f64], k: usize) -> Vec<f64> {
        self.components[..k].iter().map(|c| c.iter().zip(row).zip(&self.mean).map(|((&a, &x), &m)| a * (x - m)).sum()).collect()
    }

    /// Inverse of [`Pca::project`] over all axes, without the mean.
    pub fn reconstruct_centered(&self, coords: &[f64]) -> Vec<f64> {
        let d = self.mean.len();
        (0..d).map(|j| coords.iter().zip(&self.components).map(|(&s, c)| s * c[j]).sum()).collect()
    }
}

/// Full eigen-decomposition of the covariance of `rows` (all the same width).
pub fn pca_full(rows: &[Vec<f64>]) -> Pca {
    let n = rows.len();
    let d = rows.first().map_or(0, Vec::len);
    let mean: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n.max(1) as f64).collect();
    let centered = DMatrix::from_fn(n, d, |i, j| rows[i][j] - mean[j]);
    let denom = (n.saturating_sub(1)).max(1) as f64;
    let cov = (centered.transpose() * &centered) / denom;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let mut components = Vec::with_capacity(d);
    let mut explained_variance = Vec::with_capacity(d);
    for &i in &order {
        let mut v: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
        let mut pivot = 0;
        for j in 1..d {
            if v[j].abs() > v[pivot].abs() {
                pivot = j;
            }
        }
        if v[pivot] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        components.push(v);
        explained_variance.push(eig.eigenvalues[i].max(0.0));
    }
    Pca { mean, components, explained_variance }
}

/// Three-component projection of the sixteen nucleus-type embedding rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingProjection {
    pub points: BTreeMap<NucleusType, [f64; 3]>,
    pub explained_variance: [f64; 3],
    pub components: Vec<Vec<f64>>,
}

/// PCA of the type embedding (padding row excluded).
pub fn pca_type_embeddings<F: Scalar>(params: &ModelParams<F>) -> Result<EmbeddingProjection, EvalError> {
    let table = params.type_emb.as_ref().ok_or(EvalError::NoTypeEmbedding)?;
    if table.cols() < 3 {
        return Err(EvalError::InsufficientDimensions(table.cols()));
    }
    let rows: Vec<Vec<f64>> = NucleusType::REAL.iter().map(|t| table.row(t.index()).iter().map(|v| v.as_f64()).collect()).collect();
    let pca = pca_full(&rows);
    let points = NucleusType::REAL
        .iter()
        .zip(&rows)
        .map(|(&t, r)| {
            let p = pca.project(r, 3);
            (t, [p[0], p[1], p[2]])
        })
        .collect();
    let ev = &pca.explained_variance;
    Ok(EmbeddingProjection { points, explained_variance: [ev[0], ev[1], ev[2]], components: pca.components[..3].to_vec() })
}
