//! Regression forest used to rank covariates by how much target variance their
//! splits remove, and to pick the smallest prefix of that ranking carrying more
//! than 95% of the total weight. The fitted forest also serves as a baseline
//! predictor.

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::{derive_seed, rng_from};

pub const DEFAULT_THRESHOLD: f64 = 0.95;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// `None` grows trees until the leaf-size limit stops them.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Candidate features per split; `None` means `ceil(m / 3)`.
    pub features_per_split: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 100,
            max_depth: None,
            min_samples_leaf: 5,
            features_per_split: None,
            bootstrap: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split {
        feature: usize,
        /// Rows with `x[feature] <= threshold` go left.
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

/// Regression tree stored as a node arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if row[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
    pub n_features: usize,
    /// Total sum-of-squares decrease per feature, summed over all trees.
    pub impurity_decrease: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceEntry {
    pub column: usize,
    pub weight: f64,
}

/// Feature weights in descending order, summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceRanking {
    pub entries: Vec<ImportanceEntry>,
}

impl ImportanceRanking {
    /// Weight of `column`, or `None` if the column was not ranked.
    pub fn weight_of(&self, column: usize) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| e.column == column)
            .map(|e| e.weight)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSet {
    pub selected: Vec<usize>,
    pub cumulative_weight: f64,
}

struct TreeBuilder<'a> {
    x: &'a Matrix,
    y: &'a [f64],
    config: &'a ForestConfig,
    features_per_split: usize,
    nodes: Vec<Node>,
    decrease: Vec<f64>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    sse: f64,
    left_len: usize,
}

fn sse_of(y: &[f64], rows: &[usize]) -> (f64, f64) {
    let n = rows.len() as f64;
    let sum: f64 = rows.iter().map(|&r| y[r]).sum();
    let mean = sum / n;
    let sse = rows.iter().map(|&r| (y[r] - mean).powi(2)).sum();
    (mean, sse)
}

impl TreeBuilder<'_> {
    fn build(&mut self, rows: &mut [usize], depth: usize, rng: &mut impl Rng) -> usize {
        let id = self.nodes.len();
        let (mean, sse) = sse_of(self.y, rows);
        self.nodes.push(Node::Leaf { value: mean });

        let min_leaf = self.config.min_samples_leaf;
        let depth_ok = self.config.max_depth.map_or(true, |d| depth < d);
        if !depth_ok || rows.len() < 2 * min_leaf || sse <= 0.0 {
            return id;
        }
        let Some(best) = self.best_split(rows, rng) else {
            return id;
        };
        let decrease = sse - best.sse;
        if decrease <= sse * 1e-12 {
            return id;
        }

        rows.sort_by(|&a, &b| {
            let (va, vb) = (self.x.get(a, best.feature), self.x.get(b, best.feature));
            va.total_cmp(&vb).then(a.cmp(&b))
        });
        let (left_rows, right_rows) = rows.split_at_mut(best.left_len);
        self.decrease[best.feature] += decrease;
        let left = self.build(left_rows, depth + 1, rng);
        let right = self.build(right_rows, depth + 1, rng);
        self.nodes[id] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        id
    }

    fn best_split(&self, rows: &[usize], rng: &mut impl Rng) -> Option<BestSplit> {
        let m = self.x.cols();
        let candidates = sample(rng, m, self.features_per_split);
        let min_leaf = self.config.min_samples_leaf;
        let n = rows.len();
        let mut best: Option<BestSplit> = None;
        let mut sorted: Vec<(f64, f64)> = Vec::with_capacity(n);

        for feature in candidates.iter() {
            sorted.clear();
            sorted.extend(rows.iter().map(|&r| (self.x.get(r, feature), self.y[r])));
            sorted.sort_by(|a, b| a.0.total_cmp(&b.0));

            let total: f64 = sorted.iter().map(|p| p.1).sum();
            let total_sq: f64 = sorted.iter().map(|p| p.1 * p.1).sum();
            let mut left_sum = 0.0;
            let mut left_sq = 0.0;
            for i in 0..n - 1 {
                let (xv, yv) = sorted[i];
                left_sum += yv;
                left_sq += yv * yv;
                let left_len = i + 1;
                if left_len < min_leaf || n - left_len < min_leaf {
                    continue;
                }
                let next = sorted[i + 1].0;
                if next <= xv {
                    continue;
                }
                let right_sum = total - left_sum;
                let right_sq = total_sq - left_sq;
                let sse = (left_sq - left_sum * left_sum / left_len as f64)
                    + (right_sq - right_sum * right_sum / (n - left_len) as f64);
                if best.as_ref().map_or(true, |b| sse < b.sse) {
                    let mut threshold = xv + (next - xv) / 2.0;
                    if threshold >= next {
                        threshold = xv;
                    }
                    best = Some(BestSplit {
                        feature,
                        threshold,
                        sse: sse.max(0.0),
                        left_len,
                    });
                }
            }
        }
        best
    }
}

fn fit_tree(x: &Matrix, y: &[f64], config: &ForestConfig, fps: usize, seed: u64) -> (Tree, Vec<f64>) {
    let mut rng = rng_from(seed);
    let n = y.len();
    let mut rows: Vec<usize> = if config.bootstrap {
        (0..n).map(|_| rng.random_range(0..n)).collect()
    } else {
        (0..n).collect()
    };
    let mut builder = TreeBuilder {
        x,
        y,
        config,
        features_per_split: fps,
        nodes: Vec::new(),
        decrease: vec![0.0; x.cols()],
    };
    builder.build(&mut rows, 0, &mut rng);
    (
        Tree {
            nodes: builder.nodes,
        },
        builder.decrease,
    )
}

/// Fits a regression forest. Tree `k` draws its randomness from a seed derived
/// from `(config.seed, k)`, so the result does not depend on thread scheduling.
pub fn fit_forest(features: &Matrix, target: &[f64], config: &ForestConfig) -> Result<Forest> {
    let m = features.cols();
    if m == 0 {
        return Err(Error::InvalidArgument("empty feature set".into()));
    }
    if features.rows() != target.len() {
        return Err(Error::Shape(format!(
            "{} feature rows for {} targets",
            features.rows(),
            target.len()
        )));
    }
    if config.n_trees == 0 || config.min_samples_leaf == 0 {
        return Err(Error::InvalidArgument(
            "n_trees and min_samples_leaf must be positive".into(),
        ));
    }
    if target.len() < 2 * config.min_samples_leaf {
        return Err(Error::InvalidData(format!(
            "{} rows are fewer than twice min_samples_leaf ({})",
            target.len(),
            config.min_samples_leaf
        )));
    }
    let fps = config.features_per_split.unwrap_or(m.div_ceil(3));
    if fps == 0 || fps > m {
        return Err(Error::InvalidArgument(format!(
            "features_per_split must lie in 1..={m}, got {fps}"
        )));
    }

    let fitted: Vec<(Tree, Vec<f64>)> = (0..config.n_trees)
        .into_par_iter()
        .map(|k| fit_tree(features, target, config, fps, derive_seed(config.seed, k as u64)))
        .collect();

    let mut impurity_decrease = vec![0.0; m];
    let mut trees = Vec::with_capacity(fitted.len());
    for (tree, decrease) in fitted {
        for (acc, d) in impurity_decrease.iter_mut().zip(decrease) {
            *acc += d;
        }
        trees.push(tree);
    }
    Ok(Forest {
        trees,
        n_features: m,
        impurity_decrease,
    })
}

/// Normalized impurity importances, heaviest first. Ties keep column order.
pub fn rank_importances(forest: &Forest) -> ImportanceRanking {
    let m = forest.n_features;
    let total: f64 = forest.impurity_decrease.iter().sum();
    let weights: Vec<f64> = if total > 0.0 {
        forest.impurity_decrease.iter().map(|d| d / total).collect()
    } else {
        // no split anywhere
        vec![1.0 / m as f64; m]
    };
    let mut entries: Vec<ImportanceEntry> = weights
        .into_iter()
        .enumerate()
        .map(|(column, weight)| ImportanceEntry { column, weight })
        .collect();
    entries.sort_by(|a, b| b.weight.total_cmp(&a.weight).then(a.column.cmp(&b.column)));
    ImportanceRanking { entries }
}

/// Walks the ranking, adding features until the running weight strictly exceeds
/// `threshold`; the crossing feature is included.
pub fn select_features(ranking: &ImportanceRanking, threshold: f64) -> Result<FeatureSet> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "importance threshold must lie in (0, 1), got {threshold}"
        )));
    }
    let mut selected = Vec::new();
    let mut cumulative = 0.0;
    for entry in &ranking.entries {
        selected.push(entry.column);
        cumulative += entry.weight;
        if cumulative > threshold {
            break;
        }
    }
    Ok(FeatureSet {
        selected,
        cumulative_weight: cumulative,
    })
}

/// Mean of the tree predictions for every row.
pub fn forest_predict(forest: &Forest, features: &Matrix) -> Result<Vec<f64>> {
    if features.cols() != forest.n_features {
        return Err(Error::Shape(format!(
            "forest expects {} features, got {}",
            forest.n_features,
            features.cols()
        )));
    }
    let k = forest.trees.len() as f64;
    Ok(features
        .row_iter()
        .map(|row| forest.trees.iter().map(|t| t.predict_row(row)).sum::<f64>() / k)
        .collect())
}
