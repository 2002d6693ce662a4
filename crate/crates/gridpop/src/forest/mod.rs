//! A from-scratch random-forest binary classifier.
//!
//! Trees are grown on bootstrap resamples with Gini impurity and a random
//! feature subset at every split; a leaf predicts the positive class
//! fraction of the samples that reached it, and the forest prediction is
//! the mean over trees. Impurity decreases accumulated per feature give
//! the usual importance vector.
//!
//! Determinism contract: for a fixed seed the model is a pure function of
//! the example *set* — training examples are put in a canonical order
//! first, every tree draws from its own RNG stream derived from
//! `(seed, tree_index)` (see [`bootstrap_indices`]), and trees may be grown
//! in parallel without changing the result.

mod persist;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ForestError {
    #[error("need at least 2 training examples, got {0}")]
    TooFewExamples(usize),
    #[error("inconsistent feature arity: expected {expected}, example {index} has {got}")]
    InconsistentArity { expected: usize, got: usize, index: usize },
    #[error("feature arity mismatch: model expects {expected}, got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("gini is undefined for an empty node")]
    EmptyNode,
    #[error("model file is malformed: line {line}: {msg}")]
    MalformedModel { line: usize, msg: String },
    #[error("importances must be non-negative and sum to 1 (or all zero), got sum {0}")]
    BadImportances(f64),
    #[error("io error: {0}")]
    Io(String),
}

/// A training instance: a feature row plus its binary label.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainExample {
    pub features: Vec<f64>,
    pub label: bool,
}

/// Forest hyperparameters. `features_per_split = None` means the usual
/// ceil(sqrt(F)) heuristic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: Option<u32>,
    pub min_samples_leaf: usize,
    pub features_per_split: Option<usize>,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: None,
            min_samples_leaf: 1,
            features_per_split: None,
        }
    }
}

impl ForestParams {
    fn resolve_features_per_split(&self, n_features: usize) -> usize {
        match self.features_per_split {
            Some(k) => k.clamp(1, n_features),
            None => (n_features as f64).sqrt().ceil() as usize,
        }
    }
}

/// One node of a decision tree.
#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    Split {
        feature_index: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        positive_fraction: f64,
        n_samples: usize,
    },
}

impl TreeNode {
    fn predict(&self, features: &[f64]) -> f64 {
        match self {
            TreeNode::Leaf { positive_fraction, .. } => *positive_fraction,
            TreeNode::Split { feature_index, threshold, left, right } => {
                if features[*feature_index] <= *threshold {
                    left.predict(features)
                } else {
                    right.predict(features)
                }
            }
        }
    }

    /// Number of split nodes in the subtree.
    pub fn count_splits(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.count_splits() + right.count_splits(),
        }
    }
}

/// A trained forest: trees, hyperparameters, seed and feature importances.
#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    trees: Vec<TreeNode>,
    n_features: usize,
    params: ForestParams,
    seed: u64,
    importances: Vec<f64>,
}

impl ForestModel {
    pub fn trees(&self) -> &[TreeNode] {
        &self.trees
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn params(&self) -> &ForestParams {
        &self.params
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Per-feature importances: total Gini decrease attributed to each
    /// feature, averaged over trees and normalized to sum 1. All zeros when
    /// no tree contains a split.
    pub fn feature_importances(&self) -> &[f64] {
        &self.importances
    }

    /// Mean over trees of the positive fraction at the leaf each tree
    /// routes `features` to.
    pub fn predict_proba(&self, features: &[f64]) -> Result<f64, ForestError> {
        if features.len() != self.n_features {
            return Err(ForestError::ArityMismatch {
                expected: self.n_features,
                got: features.len(),
            });
        }
        let sum: f64 = self.trees.iter().map(|t| t.predict(features)).sum();
        Ok(sum / self.trees.len() as f64)
    }

    /// Reassembles a model from its parts (deserialization and tests).
    /// Importances are validated but otherwise trusted.
    pub fn from_parts(
        trees: Vec<TreeNode>,
        n_features: usize,
        params: ForestParams,
        seed: u64,
        importances: Vec<f64>,
    ) -> Result<Self, ForestError> {
        if importances.len() != n_features {
            return Err(ForestError::ArityMismatch {
                expected: n_features,
                got: importances.len(),
            });
        }
        let sum: f64 = importances.iter().sum();
        let all_zero = importances.iter().all(|v| *v == 0.0);
        if importances.iter().any(|v| *v < 0.0) || (!all_zero && (sum - 1.0).abs() > 1e-6) {
            return Err(ForestError::BadImportances(sum));
        }
        Ok(Self { trees, n_features, params, seed, importances })
    }
}

/// Gini impurity of a node with `n_pos` positive and `n_neg` negative
/// samples: `1 - p^2 - (1-p)^2`.
pub fn gini(n_pos: usize, n_neg: usize) -> Result<f64, ForestError> {
    let n = n_pos + n_neg;
    if n == 0 {
        return Err(ForestError::EmptyNode);
    }
    let p = n_pos as f64 / n as f64;
    Ok(1.0 - p * p - (1.0 - p) * (1.0 - p))
}

/// The bootstrap resample drawn for one tree: `n` indices into the
/// canonically ordered training set, sampled with replacement from the
/// stream derived from `(seed, tree_index)`. Exposed so the resampling
/// contract can be checked independently.
pub fn bootstrap_indices(seed: u64, tree_index: usize, n: usize) -> Vec<usize> {
    let mut rng = tree_rng(seed, tree_index);
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

fn tree_rng(seed: u64, tree_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tree_index as u64);
    rng
}

/// Trains a forest. The input order of `examples` does not matter: rows are
/// sorted into a canonical order before any random draw.
pub fn train(
    examples: &[TrainExample],
    params: &ForestParams,
    seed: u64,
) -> Result<ForestModel, ForestError> {
    if examples.len() < 2 {
        return Err(ForestError::TooFewExamples(examples.len()));
    }
    let n_features = examples[0].features.len();
    for (index, ex) in examples.iter().enumerate() {
        if ex.features.len() != n_features {
            return Err(ForestError::InconsistentArity {
                expected: n_features,
                got: ex.features.len(),
                index,
            });
        }
    }

    let mut ordered: Vec<&TrainExample> = examples.iter().collect();
    ordered.sort_by(|a, b| {
        let by_features = a
            .features
            .iter()
            .zip(&b.features)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal);
        by_features.then(a.label.cmp(&b.label))
    });

    let k = params.resolve_features_per_split(n_features);
    let grown: Vec<(TreeNode, Vec<f64>)> = (0..params.n_trees)
        .into_par_iter()
        .map(|t| grow_tree(&ordered, n_features, k, params, seed, t))
        .collect();

    let mut trees = Vec::with_capacity(grown.len());
    let mut importances = vec![0.0; n_features];
    for (tree, tree_importance) in grown {
        for (acc, v) in importances.iter_mut().zip(&tree_importance) {
            *acc += v;
        }
        trees.push(tree);
    }
    for v in &mut importances {
        *v /= params.n_trees as f64;
    }
    let total: f64 = importances.iter().sum();
    if total > 0.0 {
        for v in &mut importances {
            *v /= total;
        }
    }

    Ok(ForestModel {
        trees,
        n_features,
        params: params.clone(),
        seed,
        importances,
    })
}

fn grow_tree(
    ordered: &[&TrainExample],
    n_features: usize,
    features_per_split: usize,
    params: &ForestParams,
    seed: u64,
    tree_index: usize,
) -> (TreeNode, Vec<f64>) {
    let n = ordered.len();
    let mut rng = tree_rng(seed, tree_index);
    let indices: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
    let mut importance = vec![0.0; n_features];
    let root = grow_node(ordered, indices, n, features_per_split, params, 0, &mut rng, &mut importance);
    (root, importance)
}

#[allow(clippy::too_many_arguments)]
fn grow_node(
    ordered: &[&TrainExample],
    indices: Vec<usize>,
    n_root: usize,
    features_per_split: usize,
    params: &ForestParams,
    depth: u32,
    rng: &mut ChaCha8Rng,
    importance: &mut [f64],
) -> TreeNode {
    let n = indices.len();
    let n_pos = indices.iter().filter(|&&i| ordered[i].label).count();
    let leaf = |n_pos: usize| TreeNode::Leaf {
        positive_fraction: n_pos as f64 / n as f64,
        n_samples: n,
    };

    let pure = n_pos == 0 || n_pos == n;
    let depth_reached = params.max_depth.is_some_and(|d| depth >= d);
    if pure || depth_reached || n < 2 * params.min_samples_leaf.max(1) {
        return leaf(n_pos);
    }

    let candidates = sample_features(rng, ordered[0].features.len(), features_per_split);
    let Some(split) = best_split(ordered, &indices, n_pos, &candidates, params.min_samples_leaf)
    else {
        return leaf(n_pos);
    };

    // Importance: impurity decrease weighted by the fraction of the
    // bootstrap sample reaching this node.
    importance[split.feature] += (n as f64 / n_root as f64) * split.gain;

    let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = indices
        .into_iter()
        .partition(|&i| ordered[i].features[split.feature] <= split.threshold);
    let left = grow_node(
        ordered, left_idx, n_root, features_per_split, params, depth + 1, rng, importance,
    );
    let right = grow_node(
        ordered, right_idx, n_root, features_per_split, params, depth + 1, rng, importance,
    );
    TreeNode::Split {
        feature_index: split.feature,
        threshold: split.threshold,
        left: Box::new(left),
        right: Box::new(right),
    }
}

/// Distinct feature indices, drawn without replacement and returned in
/// ascending order so the split search is order-deterministic.
fn sample_features(rng: &mut ChaCha8Rng, n_features: usize, k: usize) -> Vec<usize> {
    let mut chosen = rand::seq::index::sample(rng, n_features, k.min(n_features)).into_vec();
    chosen.sort_unstable();
    chosen
}

struct Split {
    feature: usize,
    threshold: f64,
    gain: f64,
}

/// Gains below this are treated as zero; splitting on pure floating-point
/// residue would only add noise to the importances.
const MIN_GAIN: f64 = 1e-12;

/// Exhaustive best Gini split over the candidate features, thresholds at
/// midpoints between consecutive distinct values. Ties go to the lowest
/// feature index, then the lowest threshold (candidates are scanned in that
/// order and replaced only on strict improvement).
fn best_split(
    ordered: &[&TrainExample],
    indices: &[usize],
    n_pos: usize,
    candidate_features: &[usize],
    min_samples_leaf: usize,
) -> Option<Split> {
    let n = indices.len();
    let parent_gini = gini(n_pos, n - n_pos).expect("non-empty node");
    let msl = min_samples_leaf.max(1);
    let mut best: Option<Split> = None;

    let mut column: Vec<(f64, bool)> = Vec::with_capacity(n);
    for &feature in candidate_features {
        column.clear();
        column.extend(
            indices
                .iter()
                .map(|&i| (ordered[i].features[feature], ordered[i].label)),
        );
        column.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut left_n = 0usize;
        let mut left_pos = 0usize;
        for i in 0..n - 1 {
            left_n += 1;
            left_pos += column[i].1 as usize;
            if column[i].0 == column[i + 1].0 {
                continue;
            }
            let right_n = n - left_n;
            if left_n < msl || right_n < msl {
                continue;
            }
            let right_pos = n_pos - left_pos;
            let g_left = gini(left_pos, left_n - left_pos).expect("non-empty side");
            let g_right = gini(right_pos, right_n - right_pos).expect("non-empty side");
            let weighted =
                (left_n as f64 * g_left + right_n as f64 * g_right) / n as f64;
            let gain = parent_gini - weighted;
            if gain <= MIN_GAIN {
                continue;
            }
            if best.as_ref().is_none_or(|b| gain > b.gain) {
                best = Some(Split {
                    feature,
                    threshold: (column[i].0 + column[i + 1].0) / 2.0,
                    gain,
                });
            }
        }
    }
    best
}
