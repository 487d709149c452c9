use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{CorpusError, WordInstance};

/// Splits items by group key: groups are sorted, shuffled with `seed`, and the
/// first `round(train_fraction * groups)` go to the training side.
pub fn split_by_group<T>(items: Vec<T>, group: impl Fn(&T) -> &str, train_fraction: f64, seed: u64) -> Result<(Vec<T>, Vec<T>), CorpusError> {
    if !(0.0..=1.0).contains(&train_fraction) {
        return Err(CorpusError::InvalidConfig(format!("train fraction {train_fraction} outside [0, 1]")));
    }
    let mut groups: Vec<String> = items.iter().map(|t| group(t).to_string()).collect::<BTreeSet<_>>().into_iter().collect();
    if groups.len() < 2 {
        return Err(CorpusError::SplitTooSmall(groups.len()));
    }
    groups.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = (train_fraction * groups.len() as f64).round() as usize;
    let side: BTreeMap<String, bool> = groups.into_iter().enumerate().map(|(i, g)| (g, i < n_train)).collect();
    let (train, test) = items.into_iter().partition(|t| side[group(t)]);
    Ok((train, test))
}

/// Utterance-level split of word instances.
pub fn split(instances: Vec<WordInstance>, train_fraction: f64, seed: u64) -> Result<(Vec<WordInstance>, Vec<WordInstance>), CorpusError> {
    split_by_group(instances, |w| w.utterance_id.as_str(), train_fraction, seed)
}
