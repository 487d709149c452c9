//! Accuracy, confusion matrices and PCA of learned type embeddings.

mod pca;
mod report;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use pca::{pca_full, pca_type_embeddings, EmbeddingProjection, Pca};
pub use report::{render_report, ReportFormat};

use crate::corpus::{ClassWeights, WordInstance};
use crate::lexicon::{NucleusType, StressLevel};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("alignment error: {0}")]
    Alignment(String),
    #[error("PCA needs at least 3 embedding dimensions, model has {0}")]
    InsufficientDimensions(usize),
    #[error("model has no type embedding (feature mode is not all_features)")]
    NoTypeEmbedding,
    #[error("unknown report format {0:?}")]
    Format(String),
}

/// Counts with rows = gold label and columns = prediction, both in NonStress/Primary/Secondary order.
pub type Confusion = [[u64; 3]; 3];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalReport {
    pub accuracy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weighted_accuracy: Option<f64>,
    pub confusion: Confusion,
    pub per_type_confusion: BTreeMap<NucleusType, Confusion>,
    pub n_syllables: u64,
    pub n_words: u64,
}

pub fn confusion_total(c: &Confusion) -> u64 {
    c.iter().flatten().sum()
}

pub fn confusion_trace(c: &Confusion) -> u64 {
    (0..3).map(|i| c[i][i]).sum()
}

/// Fraction correct derived from a confusion matrix; 0 for an empty matrix.
pub fn confusion_accuracy(c: &Confusion) -> f64 {
    let total = confusion_total(c);
    if total == 0 {
        0.0
    } else {
        confusion_trace(c) as f64 / total as f64
    }
}

/// Scores per-syllable predictions against the gold words.
///
/// `predictions[w]` holds one level per valid syllable of `gold[w]`. Syllables
/// without a gold label are skipped. With `weights`, weighted accuracy is
/// `sum(w * correct) / sum(w)` over the scored syllables.
pub fn evaluate(predictions: &[Vec<StressLevel>], gold: &[WordInstance], weights: Option<&ClassWeights>) -> Result<EvalReport, EvalError> {
    if predictions.len() != gold.len() {
        return Err(EvalError::Alignment(format!("{} prediction rows for {} words", predictions.len(), gold.len())));
    }
    let mut confusion = [[0u64; 3]; 3];
    let mut per_type: BTreeMap<NucleusType, Confusion> = BTreeMap::new();
    let (mut w_correct, mut w_total) = (0.0, 0.0);
    for (w, (pred, word)) in predictions.iter().zip(gold).enumerate() {
        if pred.len() != word.valid_count {
            return Err(EvalError::Alignment(format!("word {w} ({}): {} predictions for {} syllables", word.word, pred.len(), word.valid_count)));
        }
        for (p, obs) in pred.iter().zip(word.valid()) {
            let Some(g) = obs.stress else { continue };
            confusion[g.index()][p.index()] += 1;
            per_type.entry(obs.nucleus_type).or_default()[g.index()][p.index()] += 1;
            if let Some(table) = weights {
                let wt = table.weight(obs.nucleus_type, g);
                w_total += wt;
                if g == *p {
                    w_correct += wt;
                }
            }
        }
    }
    let weighted_accuracy = weights.map(|_| if w_total > 0.0 { w_correct / w_total } else { 0.0 });
    Ok(EvalReport {
        accuracy: confusion_accuracy(&confusion),
        weighted_accuracy,
        n_syllables: confusion_total(&confusion),
        confusion,
        per_type_confusion: per_type,
        n_words: gold.len() as u64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureVector;
    use StressLevel::*;

    fn word(labels: &[StressLevel]) -> WordInstance {
        let s: Vec<(FeatureVector, NucleusType, Option<StressLevel>)> = labels.iter().map(|&l| ([0.0; 12], NucleusType::Ah, Some(l))).collect();
        WordInstance::new("u", "w", 0, &s).unwrap()
    }

    #[test]
    fn hand_counted() {
        let gold = vec![word(&[NonStress, Primary])];
        let r = evaluate(&[vec![Primary, Primary]], &gold, None).unwrap();
        assert_eq!(r.accuracy, 0.5);
        assert_eq!(r.confusion[0], [0, 1, 0]);
        assert_eq!(r.confusion[1], [0, 1, 0]);
        assert_eq!(r.per_type_confusion[&NucleusType::Ah], r.confusion);
        assert!(r.weighted_accuracy.is_none());
        let u = evaluate(&[vec![Primary, Primary]], &gold, Some(&ClassWeights::uniform())).unwrap();
        assert_eq!(u.weighted_accuracy, Some(0.5));
    }

    #[test]
    fn misaligned() {
        let gold = vec![word(&[NonStress, Primary])];
        assert!(matches!(evaluate(&[vec![Primary]], &gold, None), Err(EvalError::Alignment(_))));
        assert!(matches!(evaluate(&[], &gold, None), Err(EvalError::Alignment(_))));
    }
}
