use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{CorpusError, WordInstance};
use crate::lexicon::{NucleusType, StressLevel};

/// Exponent applied to the relative stress-level proportions.
pub const WEIGHT_EXPONENT: f64 = 0.7;

/// `(p_s / max_i p_i)^0.7` for each stress level, indexed by [`StressLevel::index`].
/// A zero proportion gives a zero weight.
pub fn weights_from_proportions(p: [f64; 3]) -> [f64; 3] {
    let max = p.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return [1.0; 3];
    }
    p.map(|v| if v > 0.0 { (v / max).powf(WEIGHT_EXPONENT) } else { 0.0 })
}

/// Loss weight per (nucleus type, stress level). Types missing from the table weigh 1.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ClassWeights {
    pub table: BTreeMap<NucleusType, [f64; 3]>,
}

impl ClassWeights {
    /// All weights 1.
    pub fn uniform() -> Self {
        Self { table: NucleusType::REAL.iter().map(|&t| (t, [1.0; 3])).collect() }
    }

    pub fn weight(&self, nucleus: NucleusType, stress: StressLevel) -> f64 {
        self.table.get(&nucleus).map_or(1.0, |w| w[stress.index()])
    }
}

/// Per-type stress proportions of the valid training syllables, weighted by [`weights_from_proportions`].
pub fn compute_class_weights(train: &[WordInstance]) -> Result<ClassWeights, CorpusError> {
    if train.is_empty() {
        return Err(CorpusError::EmptyTrain);
    }
    let mut counts: BTreeMap<NucleusType, [usize; 3]> = BTreeMap::new();
    for o in train.iter().flat_map(|w| w.valid()) {
        if let Some(s) = o.stress {
            counts.entry(o.nucleus_type).or_default()[s.index()] += 1;
        }
    }
    let mut table = BTreeMap::new();
    for &t in &NucleusType::REAL {
        let w = match counts.get(&t) {
            Some(c) => {
                let total: usize = c.iter().sum();
                weights_from_proportions(c.map(|n| n as f64 / total as f64))
            }
            None => {
                log::info!("nucleus type {t} absent from training data; using unit weights");
                [1.0; 3]
            }
        };
        table.insert(t, w);
    }
    Ok(ClassWeights { table })
}
