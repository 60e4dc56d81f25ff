//! From-scratch CART decision trees and random-forest ensembles, one
//! binary forest per predictable relation.
//!
//! Trees grow by exhaustive scans over seeded feature subsets, splitting
//! at midpoints between consecutive distinct values to maximize weighted
//! Gini decrease. Forests average each tree's leaf positive fraction.
//! Bootstrap indices are drawn into the canonical row order (sorted by
//! source/target id), so shuffling training rows never changes a model.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::EdgeDataset;
use crate::graph::RelationType;
use crate::rng::derive_seed;

/// Version tag written into every model file.
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ForestError {
    #[error("impurity of zero samples is undefined")]
    EmptyCounts,
    #[error("cannot fit a tree on zero samples")]
    NoSamples,
    #[error("relation {0} is not a predictable label")]
    NotALabel(RelationType),
    #[error("feature vector has length {got}, model expects {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {reason}")]
    Model { path: String, reason: String },
    #[error("model format version {got}, this build reads {expected}")]
    ModelVersion { got: u32, expected: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaxFeatures {
    /// floor(sqrt(feature count)) candidates per split.
    Sqrt,
    All,
    Fixed(usize),
}

impl MaxFeatures {
    fn resolve(&self, n_features: usize) -> usize {
        match self {
            MaxFeatures::Sqrt => (n_features as f64).sqrt().floor() as usize,
            MaxFeatures::All => n_features,
            MaxFeatures::Fixed(n) => *n,
        }
        .clamp(1, n_features)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassWeight {
    None,
    /// Sample weight `n / (2 * class_count)` per class.
    Balanced,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeConfig {
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub max_leaf_nodes: Option<usize>,
    pub max_features: MaxFeatures,
    pub seed: u64,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            max_depth: None,
            min_samples_split: 2,
            min_samples_leaf: 1,
            max_leaf_nodes: None,
            max_features: MaxFeatures::Sqrt,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_estimators: usize,
    pub bootstrap: bool,
    pub class_weight: ClassWeight,
    pub tree: TreeConfig,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_estimators: 70,
            bootstrap: true,
            class_weight: ClassWeight::None,
            tree: TreeConfig::default(),
            seed: 0,
        }
    }
}

/// Gini impurity of a binary count pair: `1 - p+^2 - p-^2`.
pub fn gini_impurity(positives: usize, negatives: usize) -> Result<f64, ForestError> {
    weighted_gini(positives as f64, (positives + negatives) as f64)
}

fn weighted_gini(positive_weight: f64, total_weight: f64) -> Result<f64, ForestError> {
    if total_weight <= 0.0 {
        return Err(ForestError::EmptyCounts);
    }
    let p = positive_weight / total_weight;
    Ok(1.0 - p * p - (1.0 - p) * (1.0 - p))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Split {
        feature: usize,
        /// Samples with `feature <= threshold` go left.
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        /// Weighted positive mass routed here during fitting.
        positive: f64,
        /// Weighted total mass routed here during fitting.
        total: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    nodes: Vec<TreeNode>,
}

impl DecisionTree {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, TreeNode::Leaf { .. }))
            .count()
    }

    /// Positive fraction of the leaf this feature vector routes to.
    pub fn predict_proba(&self, features: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                TreeNode::Leaf { positive, total } => return positive / total,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if features[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }
}

/// Borrowed training view: row-major features plus binary labels and
/// per-sample weights.
pub struct TrainingSet<'a> {
    pub features: &'a [f64],
    pub n_features: usize,
    pub labels: &'a [bool],
    pub weights: &'a [f64],
}

impl<'a> TrainingSet<'a> {
    fn value(&self, sample: usize, feature: usize) -> f64 {
        self.features[sample * self.n_features + feature]
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Winning split from a `best_split` scan.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    /// Parent impurity minus weight-averaged child impurity.
    pub decrease: f64,
}

/// Exhaustive scan over `candidate_features` and midpoints between
/// consecutive distinct sorted values. Returns the split with the
/// largest weighted Gini decrease, ties broken by lowest feature then
/// lowest threshold; `None` when no split strictly decreases impurity
/// or children would fall under `min_samples_leaf`.
pub fn best_split(
    set: &TrainingSet,
    samples: &[usize],
    candidate_features: &[usize],
    cfg: &TreeConfig,
) -> Option<Split> {
    let total_weight: f64 = samples.iter().map(|&s| set.weights[s]).sum();
    let total_positive: f64 = samples
        .iter()
        .filter(|&&s| set.labels[s])
        .map(|&s| set.weights[s])
        .sum();
    let parent_impurity = weighted_gini(total_positive, total_weight).ok()?;
    if parent_impurity == 0.0 {
        return None;
    }

    let mut best: Option<Split> = None;
    let mut column: Vec<(f64, f64, f64)> = Vec::with_capacity(samples.len());
    for &feature in candidate_features {
        column.clear();
        column.extend(samples.iter().map(|&s| {
            let w = set.weights[s];
            let pos = if set.labels[s] { w } else { 0.0 };
            (set.value(s, feature), w, pos)
        }));
        column.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite feature values"));

        let mut left_weight = 0.0;
        let mut left_positive = 0.0;
        for i in 0..column.len() - 1 {
            left_weight += column[i].1;
            left_positive += column[i].2;
            if column[i].0 == column[i + 1].0 {
                continue; // no boundary between equal values
            }
            let left_count = i + 1;
            let right_count = column.len() - left_count;
            if left_count < cfg.min_samples_leaf || right_count < cfg.min_samples_leaf {
                continue;
            }
            let right_weight = total_weight - left_weight;
            let right_positive = total_positive - left_positive;
            let left_imp = weighted_gini(left_positive, left_weight).ok()?;
            let right_imp = weighted_gini(right_positive, right_weight).ok()?;
            let decrease = parent_impurity
                - (left_weight * left_imp + right_weight * right_imp) / total_weight;
            if decrease <= 0.0 {
                continue;
            }
            let threshold = column[i].0 + (column[i + 1].0 - column[i].0) / 2.0;
            let candidate = Split {
                feature,
                threshold,
                decrease,
            };
            let wins = match &best {
                None => true,
                Some(cur) => {
                    decrease > cur.decrease
                        || (decrease == cur.decrease
                            && (feature, threshold) < (cur.feature, cur.threshold))
                }
            };
            if wins {
                best = Some(candidate);
            }
        }
    }
    best
}

/// Fits one CART tree. Each node draws a fresh seeded subset of
/// `max_features` candidate features; recursion stops on a failed split
/// search, the depth limit, or an exhausted leaf budget (consumed
/// depth-first, left subtree first).
pub fn fit_tree(set: &TrainingSet, cfg: &TreeConfig) -> Result<DecisionTree, ForestError> {
    let samples: Vec<usize> = (0..set.len()).collect();
    fit_tree_on(set, samples, cfg)
}

fn fit_tree_on(
    set: &TrainingSet,
    samples: Vec<usize>,
    cfg: &TreeConfig,
) -> Result<DecisionTree, ForestError> {
    if samples.is_empty() {
        return Err(ForestError::NoSamples);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut nodes = Vec::new();
    // A tree with L leaves contains L-1 splits.
    let mut split_budget = cfg.max_leaf_nodes.map(|l| l.saturating_sub(1));
    grow(
        set,
        samples,
        cfg,
        0,
        &mut rng,
        &mut nodes,
        &mut split_budget,
    );
    Ok(DecisionTree { nodes })
}

fn grow(
    set: &TrainingSet,
    samples: Vec<usize>,
    cfg: &TreeConfig,
    depth: usize,
    rng: &mut ChaCha8Rng,
    nodes: &mut Vec<TreeNode>,
    split_budget: &mut Option<usize>,
) -> usize {
    let positive: f64 = samples
        .iter()
        .filter(|&&s| set.labels[s])
        .map(|&s| set.weights[s])
        .sum();
    let total: f64 = samples.iter().map(|&s| set.weights[s]).sum();
    let make_leaf = |nodes: &mut Vec<TreeNode>| {
        nodes.push(TreeNode::Leaf { positive, total });
        nodes.len() - 1
    };

    let depth_ok = cfg.max_depth.is_none_or(|limit| depth < limit);
    let budget_ok = split_budget.is_none_or(|b| b > 0);
    if samples.len() < cfg.min_samples_split || !depth_ok || !budget_ok {
        return make_leaf(nodes);
    }

    let k = cfg.max_features.resolve(set.n_features);
    let mut candidates = sample_indices(rng, set.n_features, k);
    candidates.sort_unstable();

    let split = match best_split(set, &samples, &candidates, cfg) {
        Some(s) => s,
        None => return make_leaf(nodes),
    };
    if let Some(b) = split_budget {
        *b -= 1;
    }

    let (left_samples, right_samples): (Vec<usize>, Vec<usize>) = samples
        .into_iter()
        .partition(|&s| set.value(s, split.feature) <= split.threshold);

    let at = nodes.len();
    nodes.push(TreeNode::Split {
        feature: split.feature,
        threshold: split.threshold,
        left: 0,
        right: 0,
    });
    let left = grow(set, left_samples, cfg, depth + 1, rng, nodes, split_budget);
    let right = grow(set, right_samples, cfg, depth + 1, rng, nodes, split_budget);
    if let TreeNode::Split {
        left: l, right: r, ..
    } = &mut nodes[at]
    {
        *l = left;
        *r = right;
    }
    at
}

/// Draws `k` distinct indices from `0..n` (partial Fisher-Yates).
fn sample_indices(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = rng.gen_range(i..n);
        pool.swap(i, j);
    }
    pool.truncate(k);
    pool
}

/// Ensemble of CART trees predicting one relation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub relation: RelationType,
    pub config: ForestConfig,
    pub n_features: usize,
    /// Set when the training labels were all identical; the forest still
    /// predicts, but probabilities are degenerate.
    pub single_class: bool,
    trees: Vec<DecisionTree>,
}

impl Forest {
    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    /// Mean over trees of each leaf's positive fraction.
    pub fn predict_proba(&self, features: &[f64]) -> Result<f64, ForestError> {
        if features.len() != self.n_features {
            return Err(ForestError::DimensionMismatch {
                got: features.len(),
                expected: self.n_features,
            });
        }
        let sum: f64 = self.trees.iter().map(|t| t.predict_proba(features)).sum();
        Ok(sum / self.trees.len() as f64)
    }

    /// 1 iff `predict_proba >= threshold` (inclusive).
    pub fn predict_label(&self, features: &[f64], threshold: f64) -> Result<bool, ForestError> {
        Ok(self.predict_proba(features)? >= threshold)
    }

    /// Writes the self-describing JSON model container.
    pub fn write_file(&self, path: &Path) -> Result<(), ForestError> {
        let wrap = |source| ForestError::Io {
            path: path.display().to_string(),
            source,
        };
        let file = ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            forest: self.clone(),
        };
        let out = BufWriter::new(File::create(path).map_err(wrap)?);
        serde_json::to_writer(out, &file).map_err(|e| ForestError::Model {
            path: path.display().to_string(),
            reason: e.to_string(),
        })
    }

    pub fn read_file(path: &Path) -> Result<Self, ForestError> {
        let wrap = |source| ForestError::Io {
            path: path.display().to_string(),
            source,
        };
        let file: ModelFile = serde_json::from_reader(BufReader::new(
            File::open(path).map_err(wrap)?,
        ))
        .map_err(|e| ForestError::Model {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        if file.format_version != MODEL_FORMAT_VERSION {
            return Err(ForestError::ModelVersion {
                got: file.format_version,
                expected: MODEL_FORMAT_VERSION,
            });
        }
        Ok(file.forest)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    forest: Forest,
}

/// Extracts the canonical training view for one relation: rows sorted by
/// `(source_id, target_id)`, features flattened row-major.
struct Extracted {
    features: Vec<f64>,
    labels: Vec<bool>,
    n_features: usize,
}

fn extract(train: &EdgeDataset, relation: &RelationType) -> Result<Extracted, ForestError> {
    let slot = relation
        .label_index()
        .ok_or_else(|| ForestError::NotALabel(relation.clone()))?;
    let mut order: Vec<usize> = (0..train.rows.len()).collect();
    order.sort_by_key(|&i| (train.rows[i].source_id, train.rows[i].target_id));
    let mut features = Vec::with_capacity(train.rows.len() * train.feature_dim);
    let mut labels = Vec::with_capacity(train.rows.len());
    for &i in &order {
        features.extend_from_slice(&train.rows[i].features);
        labels.push(train.rows[i].labels[slot]);
    }
    Ok(Extracted {
        features,
        labels,
        n_features: train.feature_dim,
    })
}

/// Fits `n_estimators` trees, each on a seeded bootstrap resample of the
/// full training size (or the full set when `bootstrap` is off).
/// Per-tree seeds derive from `(cfg.seed, tree index)`, so any worker
/// count produces the same forest.
pub fn fit_forest(
    train: &EdgeDataset,
    relation: &RelationType,
    cfg: &ForestConfig,
    workers: usize,
) -> Result<Forest, ForestError> {
    let data = extract(train, relation)?;
    if data.labels.is_empty() {
        return Err(ForestError::NoSamples);
    }
    let n = data.labels.len();

    let positives = data.labels.iter().filter(|&&l| l).count();
    let single_class = positives == 0 || positives == n;
    let weights: Vec<f64> = match cfg.class_weight {
        ClassWeight::None => vec![1.0; n],
        ClassWeight::Balanced => {
            let pos_w = if positives > 0 {
                n as f64 / (2.0 * positives as f64)
            } else {
                0.0
            };
            let neg_w = if n - positives > 0 {
                n as f64 / (2.0 * (n - positives) as f64)
            } else {
                0.0
            };
            data.labels
                .iter()
                .map(|&l| if l { pos_w } else { neg_w })
                .collect()
        }
    };
    let set = TrainingSet {
        features: &data.features,
        n_features: data.n_features,
        labels: &data.labels,
        weights: &weights,
    };

    let fit_one = |tree_idx: usize| -> Result<DecisionTree, ForestError> {
        let tree_seed = derive_seed(cfg.seed, &[tree_idx as u64]);
        let samples: Vec<usize> = if cfg.bootstrap {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(tree_seed, &[0]));
            (0..n).map(|_| rng.gen_range(0..n)).collect()
        } else {
            (0..n).collect()
        };
        let tree_cfg = TreeConfig {
            seed: derive_seed(tree_seed, &[1]),
            ..cfg.tree.clone()
        };
        fit_tree_on(&set, samples, &tree_cfg)
    };

    let trees: Result<Vec<DecisionTree>, ForestError> = if workers > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .expect("worker pool");
        use rayon::prelude::*;
        pool.install(|| (0..cfg.n_estimators).into_par_iter().map(fit_one).collect())
    } else {
        (0..cfg.n_estimators).map(fit_one).collect()
    };

    Ok(Forest {
        relation: relation.clone(),
        config: cfg.clone(),
        n_features: data.n_features,
        single_class,
        trees: trees?,
    })
}

/// Fraction of `rows` whose thresholded prediction matches the label.
pub fn accuracy_on(
    forest: &Forest,
    data: &EdgeDataset,
    threshold: f64,
) -> Result<f64, ForestError> {
    let slot = forest
        .relation
        .label_index()
        .ok_or_else(|| ForestError::NotALabel(forest.relation.clone()))?;
    let mut hits = 0usize;
    for row in &data.rows {
        let pred = forest.predict_label(&row.features, threshold)?;
        if pred == row.labels[slot] {
            hits += 1;
        }
    }
    Ok(hits as f64 / data.rows.len().max(1) as f64)
}

/// Default sweep grid: 10 to 170 in steps of 20.
pub fn default_sweep_grid() -> Vec<usize> {
    (0..9).map(|i| 10 + 20 * i).collect()
}

/// Fits one forest per grid value (fresh seeds derived per value) and
/// reports validation accuracy at threshold 0.5.
pub fn sweep_n_estimators(
    train: &EdgeDataset,
    validation: &EdgeDataset,
    relation: &RelationType,
    grid: &[usize],
    base_cfg: &ForestConfig,
    workers: usize,
) -> Result<Vec<(usize, f64)>, ForestError> {
    let mut results = Vec::with_capacity(grid.len());
    for &n in grid {
        let cfg = ForestConfig {
            n_estimators: n,
            seed: derive_seed(base_cfg.seed, &[n as u64]),
            tree: base_cfg.tree.clone(),
            ..base_cfg.clone()
        };
        let forest = fit_forest(train, relation, &cfg, workers)?;
        results.push((n, accuracy_on(&forest, validation, 0.5)?));
    }
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::DatasetRow;
    use approx::assert_relative_eq;

    fn unit_weights(n: usize) -> Vec<f64> {
        vec![1.0; n]
    }

    #[test]
    fn gini_fixtures() {
        assert_eq!(gini_impurity(5, 5).unwrap(), 0.5);
        assert_eq!(gini_impurity(7, 0).unwrap(), 0.0);
        assert_relative_eq!(gini_impurity(3, 1).unwrap(), 0.375, epsilon = 1e-15);
        assert!(matches!(gini_impurity(0, 0), Err(ForestError::EmptyCounts)));
    }

    #[test]
    fn best_split_two_cluster_fixture() {
        let features = [1.0, 2.0, 9.0, 10.0];
        let labels = [false, false, true, true];
        let set = TrainingSet {
            features: &features,
            n_features: 1,
            labels: &labels,
            weights: &unit_weights(4),
        };
        let split = best_split(&set, &[0, 1, 2, 3], &[0], &TreeConfig::default()).unwrap();
        assert_eq!(split.feature, 0);
        assert_eq!(split.threshold, 5.5);
        assert_relative_eq!(split.decrease, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn best_split_none_when_labels_pure() {
        let features = [1.0, 2.0, 3.0];
        let labels = [true, true, true];
        let set = TrainingSet {
            features: &features,
            n_features: 1,
            labels: &labels,
            weights: &unit_weights(3),
        };
        assert!(best_split(&set, &[0, 1, 2], &[0], &TreeConfig::default()).is_none());
    }

    #[test]
    fn best_split_none_when_values_constant() {
        let features = [4.0, 4.0, 4.0, 4.0];
        let labels = [true, false, true, false];
        let set = TrainingSet {
            features: &features,
            n_features: 1,
            labels: &labels,
            weights: &unit_weights(4),
        };
        assert!(best_split(&set, &[0, 1, 2, 3], &[0], &TreeConfig::default()).is_none());
    }

    #[test]
    fn best_split_tie_prefers_lower_feature() {
        // two identical columns: the tie must resolve to feature 0
        let features = [
            1.0, 1.0, //
            2.0, 2.0, //
            9.0, 9.0, //
            10.0, 10.0,
        ];
        let labels = [false, false, true, true];
        let set = TrainingSet {
            features: &features,
            n_features: 2,
            labels: &labels,
            weights: &unit_weights(4),
        };
        let split = best_split(&set, &[0, 1, 2, 3], &[0, 1], &TreeConfig::default()).unwrap();
        assert_eq!(split.feature, 0);
    }

    #[test]
    fn min_samples_leaf_blocks_tiny_children() {
        let features = [1.0, 2.0, 9.0, 10.0];
        let labels = [false, true, true, true];
        let set = TrainingSet {
            features: &features,
            n_features: 1,
            labels: &labels,
            weights: &unit_weights(4),
        };
        let cfg = TreeConfig {
            min_samples_leaf: 2,
            ..TreeConfig::default()
        };
        let split = best_split(&set, &[0, 1, 2, 3], &[0], &cfg).unwrap();
        // only the 2/2 boundary is admissible
        assert_eq!(split.threshold, 5.5);
    }

    #[test]
    fn single_sample_tree_is_one_confident_leaf() {
        let features = [3.3];
        let labels = [true];
        let set = TrainingSet {
            features: &features,
            n_features: 1,
            labels: &labels,
            weights: &unit_weights(1),
        };
        let tree = fit_tree(&set, &TreeConfig::default()).unwrap();
        assert_eq!(tree.node_count(), 1);
        assert_eq!(tree.predict_proba(&[42.0]), 1.0);
    }

    /// 20 linearly separable points in 2-D.
    fn separable() -> (Vec<f64>, Vec<bool>) {
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for i in 0..10 {
            features.extend_from_slice(&[i as f64 * 0.1, 1.0 + i as f64 * 0.05]);
            labels.push(false);
            features.extend_from_slice(&[3.0 + i as f64 * 0.1, -1.0 - i as f64 * 0.05]);
            labels.push(true);
        }
        (features, labels)
    }

    #[test]
    fn separable_data_reaches_perfect_training_accuracy() {
        let (features, labels) = separable();
        let weights = unit_weights(labels.len());
        let set = TrainingSet {
            features: &features,
            n_features: 2,
            labels: &labels,
            weights: &weights,
        };
        let cfg = TreeConfig {
            max_features: MaxFeatures::All,
            ..TreeConfig::default()
        };
        let tree = fit_tree(&set, &cfg).unwrap();
        for i in 0..labels.len() {
            let proba = tree.predict_proba(&features[i * 2..i * 2 + 2]);
            assert_eq!(proba >= 0.5, labels[i]);
        }
    }

    #[test]
    fn tree_fitting_is_deterministic() {
        let (features, labels) = separable();
        let weights = unit_weights(labels.len());
        let set = TrainingSet {
            features: &features,
            n_features: 2,
            labels: &labels,
            weights: &weights,
        };
        let cfg = TreeConfig {
            seed: 5,
            ..TreeConfig::default()
        };
        let a = fit_tree(&set, &cfg).unwrap();
        let b = fit_tree(&set, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn max_depth_one_gives_a_stump() {
        let (features, labels) = separable();
        let weights = unit_weights(labels.len());
        let set = TrainingSet {
            features: &features,
            n_features: 2,
            labels: &labels,
            weights: &weights,
        };
        let cfg = TreeConfig {
            max_depth: Some(1),
            max_features: MaxFeatures::All,
            ..TreeConfig::default()
        };
        let tree = fit_tree(&set, &cfg).unwrap();
        assert_eq!(tree.node_count(), 3);
    }

    #[test]
    fn max_leaf_nodes_caps_leaves() {
        let (features, labels) = separable();
        let weights = unit_weights(labels.len());
        let set = TrainingSet {
            features: &features,
            n_features: 2,
            labels: &labels,
            weights: &weights,
        };
        for limit in [1, 2, 3] {
            let cfg = TreeConfig {
                max_leaf_nodes: Some(limit),
                max_features: MaxFeatures::All,
                ..TreeConfig::default()
            };
            let tree = fit_tree(&set, &cfg).unwrap();
            assert!(tree.leaf_count() <= limit.max(1));
        }
    }

    fn dataset_from(features: &[f64], dim: usize, labels: &[bool]) -> EdgeDataset {
        let rows = labels
            .iter()
            .enumerate()
            .map(|(i, &l)| DatasetRow {
                source_name: format!("s{i}"),
                target_name: format!("t{i}"),
                source_id: i as u32,
                target_id: 1000 + i as u32,
                features: features[i * dim..(i + 1) * dim].to_vec(),
                labels: [l, false, false, false, false, false],
            })
            .collect();
        EdgeDataset {
            rows,
            feature_dim: dim,
        }
    }

    #[test]
    fn forest_matches_single_tree_without_bootstrap() {
        let (features, labels) = separable();
        let ds = dataset_from(&features, 2, &labels);
        let cfg = ForestConfig {
            n_estimators: 7,
            bootstrap: false,
            tree: TreeConfig {
                max_features: MaxFeatures::All,
                ..TreeConfig::default()
            },
            ..ForestConfig::default()
        };
        let forest = fit_forest(&ds, &RelationType::Syn, &cfg, 1).unwrap();
        // all trees identical: deterministic data, no bootstrap, all features
        let first = &forest.trees()[0];
        for t in forest.trees() {
            assert_eq!(t, first);
        }
        for i in 0..labels.len() {
            let f = &features[i * 2..i * 2 + 2];
            assert_eq!(forest.predict_proba(f).unwrap(), first.predict_proba(f));
        }
    }

    #[test]
    fn forest_has_n_estimators_trees() {
        let (features, labels) = separable();
        let ds = dataset_from(&features, 2, &labels);
        let cfg = ForestConfig {
            n_estimators: 70,
            ..ForestConfig::default()
        };
        let forest = fit_forest(&ds, &RelationType::Syn, &cfg, 2).unwrap();
        assert_eq!(forest.trees().len(), 70);
    }

    #[test]
    fn bootstrap_unique_fraction_near_632() {
        // oracle: with-replacement resampling keeps ~1 - 1/e unique
        let n = 10_000;
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut seen = vec![false; n];
        for _ in 0..n {
            seen[rng.gen_range(0..n)] = true;
        }
        let unique = seen.iter().filter(|&&s| s).count() as f64 / n as f64;
        assert!((unique - (1.0 - (-1.0f64).exp())).abs() < 0.03);
    }

    #[test]
    fn single_class_training_is_flagged() {
        let features = [0.0, 1.0, 2.0, 3.0];
        let labels = [true, true, true, true];
        let ds = dataset_from(&features, 1, &labels);
        let forest = fit_forest(&ds, &RelationType::Syn, &ForestConfig::default(), 1).unwrap();
        assert!(forest.single_class);
        assert_eq!(forest.predict_proba(&[9.0]).unwrap(), 1.0);
    }

    #[test]
    fn balanced_class_weights_shift_leaf_mass() {
        // 6 negatives, 2 positives; balanced weights make the root
        // 50/50 by mass.
        let features = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0];
        let labels = [false, false, false, false, false, false, true, true];
        let ds = dataset_from(&features, 1, &labels);
        let cfg = ForestConfig {
            n_estimators: 1,
            bootstrap: false,
            class_weight: ClassWeight::Balanced,
            tree: TreeConfig {
                max_depth: Some(0),
                ..TreeConfig::default()
            },
            ..ForestConfig::default()
        };
        let forest = fit_forest(&ds, &RelationType::Syn, &cfg, 1).unwrap();
        assert_relative_eq!(forest.predict_proba(&[0.0]).unwrap(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn predict_proba_is_mean_of_leaf_fractions() {
        // 49 pure-positive leaves and 21 pure-negative leaves -> 0.7
        let leaf = |positive: f64| DecisionTree {
            nodes: vec![TreeNode::Leaf {
                positive,
                total: 1.0,
            }],
        };
        let mut trees = Vec::new();
        for _ in 0..49 {
            trees.push(leaf(1.0));
        }
        for _ in 0..21 {
            trees.push(leaf(0.0));
        }
        let forest = Forest {
            relation: RelationType::Syn,
            config: ForestConfig::default(),
            n_features: 1,
            single_class: false,
            trees,
        };
        assert_relative_eq!(forest.predict_proba(&[0.0]).unwrap(), 0.7, epsilon = 1e-12);
    }

    #[test]
    fn predict_label_threshold_is_inclusive() {
        let half_leaf = DecisionTree {
            nodes: vec![TreeNode::Leaf {
                positive: 1.0,
                total: 2.0,
            }],
        };
        let forest = Forest {
            relation: RelationType::Syn,
            config: ForestConfig::default(),
            n_features: 1,
            single_class: false,
            trees: vec![half_leaf],
        };
        assert!(forest.predict_label(&[0.0], 0.5).unwrap());
        assert!(!forest.predict_label(&[0.0], 0.51).unwrap());
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let (features, labels) = separable();
        let ds = dataset_from(&features, 2, &labels);
        let forest = fit_forest(&ds, &RelationType::Syn, &ForestConfig::default(), 1).unwrap();
        assert!(matches!(
            forest.predict_proba(&[1.0]),
            Err(ForestError::DimensionMismatch { got: 1, expected: 2 })
        ));
    }

    #[test]
    fn non_label_relation_is_rejected() {
        let (features, labels) = separable();
        let ds = dataset_from(&features, 2, &labels);
        assert!(matches!(
            fit_forest(&ds, &RelationType::RaffSem, &ForestConfig::default(), 1),
            Err(ForestError::NotALabel(_))
        ));
    }

    #[test]
    fn row_order_does_not_change_the_model() {
        let (features, labels) = separable();
        let ds = dataset_from(&features, 2, &labels);
        let mut shuffled = ds.clone();
        shuffled.rows.reverse();
        let cfg = ForestConfig {
            n_estimators: 5,
            seed: 17,
            ..ForestConfig::default()
        };
        let a = fit_forest(&ds, &RelationType::Syn, &cfg, 1).unwrap();
        let b = fit_forest(&shuffled, &RelationType::Syn, &cfg, 1).unwrap();
        assert_eq!(a.trees(), b.trees());
    }

    #[test]
    fn worker_count_does_not_change_the_model() {
        let (features, labels) = separable();
        let ds = dataset_from(&features, 2, &labels);
        let cfg = ForestConfig {
            n_estimators: 12,
            seed: 3,
            ..ForestConfig::default()
        };
        let a = fit_forest(&ds, &RelationType::Syn, &cfg, 1).unwrap();
        let b = fit_forest(&ds, &RelationType::Syn, &cfg, 4).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn model_file_round_trips_bit_exactly() {
        let (features, labels) = separable();
        let ds = dataset_from(&features, 2, &labels);
        let forest = fit_forest(&ds, &RelationType::AgentInv, &ForestConfig::default(), 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        forest.write_file(&path).unwrap();
        let loaded = Forest::read_file(&path).unwrap();
        assert_eq!(loaded, forest);
        // writing again produces identical bytes
        let path2 = dir.path().join("model2.json");
        loaded.write_file(&path2).unwrap();
        assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(&path2).unwrap()
        );
    }

    #[test]
    fn wrong_model_version_is_rejected() {
        let (features, labels) = separable();
        let ds = dataset_from(&features, 2, &labels);
        let cfg = ForestConfig {
            n_estimators: 1,
            ..ForestConfig::default()
        };
        let forest = fit_forest(&ds, &RelationType::Syn, &cfg, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        forest.write_file(&path).unwrap();
        let tampered = std::fs::read_to_string(&path)
            .unwrap()
            .replace("\"format_version\":1", "\"format_version\":99");
        std::fs::write(&path, tampered).unwrap();
        assert!(matches!(
            Forest::read_file(&path),
            Err(ForestError::ModelVersion {
                got: 99,
                expected: 1
            })
        ));
    }

    #[test]
    fn sweep_covers_grid() {
        let (features, labels) = separable();
        let ds = dataset_from(&features, 2, &labels);
        assert_eq!(default_sweep_grid(), [10, 30, 50, 70, 90, 110, 130, 150, 170]);
        let results = sweep_n_estimators(
            &ds,
            &ds,
            &RelationType::Syn,
            &[1],
            &ForestConfig::default(),
            1,
        )
        .unwrap();
        assert_eq!(results.len(), 1);
        assert_eq!(results[0].0, 1);
        assert!(results[0].1 > 0.9);
    }
}
