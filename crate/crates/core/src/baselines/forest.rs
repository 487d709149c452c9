use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{baseline_width, check_width, BaselineError, Sample};
use crate::model::{Checkpoint, CheckpointHeader, FeatureMode, ModelError, FORMAT_FOREST, NUM_CLASSES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    /// Candidate features per split; `None` means `ceil(sqrt(K))`.
    pub features_per_split: Option<usize>,
    pub bootstrap: bool,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self { n_trees: 100, max_depth: 12, features_per_split: None, bootstrap: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Leaf {
        counts: [u32; NUM_CLASSES],
    },
    /// Samples with `x[feature] <= threshold` go to `left`.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Axis-aligned tree stored as a node list; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

fn majority(counts: &[u32; NUM_CLASSES]) -> usize {
    let mut best = 0;
    for c in 1..NUM_CLASSES {
        if counts[c] > counts[best] {
            best = c;
        }
    }
    best
}

impl Tree {
    pub fn leaf_counts(&self, x: &[f64]) -> &[u32; NUM_CLASSES] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { counts } => return counts,
                Node::Split { feature, threshold, left, right } => i = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    /// Majority class of the reached leaf, lowest index on ties.
    pub fn predict_class(&self, x: &[f64]) -> usize {
        majority(self.leaf_counts(x))
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    pub feature_mode: FeatureMode,
    pub config: ForestConfig,
    pub n_features: usize,
    pub features_per_split: usize,
    pub trees: Vec<Tree>,
}

impl ForestModel {
    /// Fraction of trees voting for each class.
    pub fn vote_proportions(&self, x: &[f64]) -> Result<[f64; NUM_CLASSES], BaselineError> {
        check_width(x, self.n_features)?;
        let mut votes = [0usize; NUM_CLASSES];
        for t in &self.trees {
            votes[t.predict_class(x)] += 1;
        }
        let n = self.trees.len() as f64;
        Ok(votes.map(|v| v as f64 / n))
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let config = serde_json::to_value(&self.config).expect("config serializes");
        let payload = serde_json::json!({ "features_per_split": self.features_per_split, "trees": self.trees });
        Checkpoint { header: CheckpointHeader::new(FORMAT_FOREST, config, self.feature_mode, None), arrays: Vec::new(), payload: Some(payload) }
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self, BaselineError> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Payload {
            features_per_split: usize,
            trees: Vec<Tree>,
        }
        ckpt.expect_format(FORMAT_FOREST)?;
        let n_features = baseline_width(ckpt.header.feature_mode)?;
        let bad = |m: String| BaselineError::Checkpoint(ModelError::Checkpoint(m));
        let config: ForestConfig = serde_json::from_value(ckpt.header.model_config.clone()).map_err(|e| bad(format!("model_config: {e}")))?;
        let payload = ckpt.payload.clone().ok_or_else(|| bad("missing forest payload".into()))?;
        let p: Payload = serde_json::from_value(payload).map_err(|e| bad(format!("payload: {e}")))?;
        if p.trees.is_empty() {
            return Err(bad("forest has no trees".into()));
        }
        for t in &p.trees {
            for node in &t.nodes {
                match node {
                    Node::Leaf { counts } if counts.iter().all(|&c| c == 0) => return Err(bad("empty leaf".into())),
                    Node::Split { feature, left, right, .. } if *feature >= n_features || *left >= t.nodes.len() || *right >= t.nodes.len() => {
                        return Err(bad("split refers outside the tree or feature range".into()))
                    }
                    _ => {}
                }
            }
        }
        Ok(Self { feature_mode: ckpt.header.feature_mode, config, n_features, features_per_split: p.features_per_split, trees: p.trees })
    }
}

fn gini(counts: &[u32; NUM_CLASSES], n: u32) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [usize],
    k: usize,
    mtry: usize,
    max_depth: usize,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn counts(&self, idx: &[usize]) -> [u32; NUM_CLASSES] {
        let mut c = [0u32; NUM_CLASSES];
        for &i in idx {
            c[self.y[i]] += 1;
        }
        c
    }

    /// Best (feature, threshold) over the candidate features, by weighted child Gini.
    /// The threshold is the largest value on the left side.
    fn best_split(&self, idx: &[usize], features: &[usize]) -> Option<(usize, f64)> {
        let total = self.counts(idx);
        let n = idx.len() as u32;
        let mut best: Option<(f64, usize, f64)> = None;
        let mut sorted = idx.to_vec();
        for &f in features {
            sorted.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]));
            let mut left = [0u32; NUM_CLASSES];
            for pos in 0..sorted.len() - 1 {
                left[self.y[sorted[pos]]] += 1;
                let (v, next) = (self.x[sorted[pos]][f], self.x[sorted[pos + 1]][f]);
                if v == next {
                    continue;
                }
                let nl = pos as u32 + 1;
                let right: [u32; NUM_CLASSES] = std::array::from_fn(|c| total[c] - left[c]);
                let score = (nl as f64 * gini(&left, nl) + (n - nl) as f64 * gini(&right, n - nl)) / n as f64;
                if best.is_none_or(|(s, _, _)| score < s) {
                    best = Some((score, f, v));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let counts = self.counts(&idx);
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { counts });
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if depth >= self.max_depth || pure || idx.len() < 2 {
            return id;
        }
        let features: Vec<usize> = sample_indices(rng, self.k, self.mtry).into_vec();
        let Some((feature, threshold)) = self.best_split(&idx, &features) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx.into_iter().partition(|&i| self.x[i][feature] <= threshold);
        let left = self.grow(l, depth + 1, rng);
        let right = self.grow(r, depth + 1, rng);
        self.nodes[id] = Node::Split { feature, threshold, left, right };
        id
    }
}

/// Bootstrap-sampled Gini trees. Tree `i` uses the `i`-th seed drawn from a
/// ChaCha8 stream seeded with `seed`, so results do not depend on thread count.
pub fn train_forest(samples: &[Sample], mode: FeatureMode, cfg: &ForestConfig, seed: u64) -> Result<ForestModel, BaselineError> {
    let k = baseline_width(mode)?;
    if samples.is_empty() {
        return Err(BaselineError::EmptyData);
    }
    if cfg.n_trees == 0 {
        return Err(BaselineError::InvalidConfig("n_trees must be >= 1".into()));
    }
    for s in samples {
        check_width(&s.features, k)?;
    }
    let mtry = cfg.features_per_split.unwrap_or_else(|| (k as f64).sqrt().ceil() as usize);
    if mtry == 0 || mtry > k {
        return Err(BaselineError::InvalidConfig(format!("features_per_split must lie in 1..={k}")));
    }
    let x: Vec<Vec<f64>> = samples.iter().map(|s| s.features.clone()).collect();
    let y: Vec<usize> = samples.iter().map(|s| s.stress.index()).collect();
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let seeds: Vec<u64> = (0..cfg.n_trees).map(|_| master.gen()).collect();
    let n = samples.len();
    let trees = seeds
        .par_iter()
        .map(|&s| {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let idx: Vec<usize> = if cfg.bootstrap { (0..n).map(|_| rng.gen_range(0..n)).collect() } else { (0..n).collect() };
            let mut b = Builder { x: &x, y: &y, k, mtry, max_depth: cfg.max_depth, nodes: Vec::new() };
            b.grow(idx, 0, &mut rng);
            Tree { nodes: b.nodes }
        })
        .collect();
    Ok(ForestModel { feature_mode: mode, config: cfg.clone(), n_features: k, features_per_split: mtry, trees })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexicon::StressLevel;

    #[test]
    fn vote_ties_go_low() {
        let leaf = |c: [u32; 3]| Tree { nodes: vec![Node::Leaf { counts: c }] };
        let m = ForestModel {
            feature_mode: FeatureMode::SyllableNumerical,
            config: ForestConfig::default(),
            n_features: 6,
            features_per_split: 3,
            trees: vec![leaf([0, 0, 5]), leaf([0, 3, 0])],
        };
        let p = crate::baselines::predict_baseline(&crate::baselines::Baseline::Forest(m), &[0.0; 6]).unwrap();
        assert_eq!(p.stress, StressLevel::Primary);
        assert_eq!(p.scores, [0.0, 0.5, 0.5]);
        assert_eq!(leaf([2, 2, 2]).predict_class(&[0.0; 6]), 0);
    }
}
