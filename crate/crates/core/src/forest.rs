//! Random forest of Gini-impurity CART trees.

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::argmax;
use crate::nn::init::{derive_seed, seeded_rng};

/// A candidate split must beat the incumbent by more than this.
pub const SPLIT_TIE_EPS: f64 = 1e-12;

/// `1 − Σ p_k²`, evaluated as `(n² − Σ c_k²) / n²` in integers so simple
/// fractions come out exactly.
pub fn gini(counts: &[usize]) -> f64 {
    let n: u128 = counts.iter().map(|&c| c as u128).sum();
    if n == 0 {
        return 0.0;
    }
    let sq: u128 = counts.iter().map(|&c| (c as u128) * (c as u128)).sum();
    (n * n - sq) as f64 / (n * n) as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub n_trees: usize,
    /// `None` grows until leaves are pure or cannot be split.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub bootstrap: bool,
    /// Features sampled per split; `None` means `floor(sqrt(d))`, at least 1.
    pub max_features: Option<usize>,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 250,
            max_depth: None,
            min_samples_leaf: 1,
            bootstrap: true,
            max_features: None,
            seed: 0,
        }
    }
}

impl ForestParams {
    pub fn features_per_split(&self, n_features: usize) -> usize {
        self.max_features
            .unwrap_or_else(|| (n_features as f64).sqrt().floor() as usize)
            .clamp(1, n_features.max(1))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::Config("n_trees must be positive".into()));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::Config("min_samples_leaf must be positive".into()));
        }
        if self.max_features == Some(0) {
            return Err(Error::Config("max_features must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        counts: Vec<usize>,
    },
    /// Samples with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitChoice {
    pub feature: usize,
    pub threshold: f64,
    pub decrease: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
    pub n_classes: usize,
    pub n_features: usize,
}

fn check_training_data(x: &[Vec<f64>], y: &[usize], n_classes: usize) -> Result<usize> {
    if x.is_empty() {
        return Err(Error::Empty("forest training data"));
    }
    if x.len() != y.len() {
        return Err(Error::shape("forest labels", x.len(), y.len()));
    }
    let d = x[0].len();
    if d == 0 {
        return Err(Error::Empty("forest feature vector"));
    }
    for row in x {
        if row.len() != d {
            return Err(Error::shape("forest features", d, row.len()));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("non-finite feature value".into()));
        }
    }
    if let Some(&label) = y.iter().find(|&&l| l >= n_classes) {
        return Err(Error::LabelOutOfRange {
            label,
            classes: n_classes,
        });
    }
    Ok(d)
}

fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    if m >= b {
        a
    } else {
        m
    }
}

/// Scans the boundaries of one feature in ascending value order, replacing
/// `best` whenever a split leaving at least `min_leaf` samples per side
/// beats it by more than [`SPLIT_TIE_EPS`].
#[allow(clippy::too_many_arguments)]
fn scan_feature(
    x: &[Vec<f64>],
    y: &[usize],
    samples: &[usize],
    feature: usize,
    n_classes: usize,
    min_leaf: usize,
    parent_counts: &[usize],
    best: &mut Option<SplitChoice>,
) {
    let mut order: Vec<(f64, usize)> = samples.iter().map(|&i| (x[i][feature], y[i])).collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = order.len();
    let parent = gini(parent_counts);
    let mut left = vec![0usize; n_classes];
    let mut right = parent_counts.to_vec();
    for k in 0..n.saturating_sub(1) {
        let label = order[k].1;
        left[label] += 1;
        right[label] -= 1;
        let n_left = k + 1;
        if order[k].0 == order[k + 1].0 || n_left < min_leaf || n - n_left < min_leaf {
            continue;
        }
        let weighted = (n_left as f64 * gini(&left) + (n - n_left) as f64 * gini(&right)) / n as f64;
        let decrease = parent - weighted;
        if best.is_none_or(|b| decrease > b.decrease + SPLIT_TIE_EPS) {
            *best = Some(SplitChoice {
                feature,
                threshold: midpoint(order[k].0, order[k + 1].0),
                decrease,
            });
        }
    }
}

/// Best Gini split over `features`, searched in ascending feature order.
/// Zero-decrease splits are allowed.
pub fn best_split(
    x: &[Vec<f64>],
    y: &[usize],
    samples: &[usize],
    features: &[usize],
    n_classes: usize,
    min_leaf: usize,
) -> Option<SplitChoice> {
    let mut counts = vec![0usize; n_classes];
    for &i in samples {
        counts[y[i]] += 1;
    }
    let mut sorted = features.to_vec();
    sorted.sort_unstable();
    let mut best = None;
    for f in sorted {
        scan_feature(x, y, samples, f, n_classes, min_leaf, &counts, &mut best);
    }
    best
}

impl DecisionTree {
    /// Grows a tree on `samples` (indices into `x`, repeats allowed).
    pub fn fit_samples<R: Rng + ?Sized>(
        x: &[Vec<f64>],
        y: &[usize],
        samples: Vec<usize>,
        n_classes: usize,
        params: &ForestParams,
        rng: &mut R,
    ) -> Self {
        let n_features = x[0].len();
        let k = params.features_per_split(n_features);
        let mut tree = DecisionTree {
            nodes: Vec::new(),
            n_classes,
            n_features,
        };
        tree.grow(x, y, samples, 0, k, params, rng);
        tree
    }

    pub fn fit(x: &[Vec<f64>], y: &[usize], n_classes: usize, params: &ForestParams, seed: u64) -> Result<Self> {
        params.validate()?;
        check_training_data(x, y, n_classes)?;
        let samples = (0..x.len()).collect();
        Ok(Self::fit_samples(
            x,
            y,
            samples,
            n_classes,
            params,
            &mut seeded_rng(seed),
        ))
    }

    #[allow(clippy::too_many_arguments)]
    fn grow<R: Rng + ?Sized>(
        &mut self,
        x: &[Vec<f64>],
        y: &[usize],
        samples: Vec<usize>,
        depth: usize,
        k: usize,
        params: &ForestParams,
        rng: &mut R,
    ) -> usize {
        let id = self.nodes.len();
        let mut counts = vec![0usize; self.n_classes];
        for &i in &samples {
            counts[y[i]] += 1;
        }
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let depth_capped = params.max_depth.is_some_and(|m| depth >= m);
        let too_small = samples.len() < 2 * params.min_samples_leaf;
        self.nodes.push(Node::Leaf { counts });
        if pure || depth_capped || too_small {
            return id;
        }
        let choice = self.choose_split(x, y, &samples, k, params.min_samples_leaf, rng);
        let Some(choice) = choice else {
            return id;
        };
        let (left_s, right_s): (Vec<usize>, Vec<usize>) = samples
            .into_iter()
            .partition(|&i| x[i][choice.feature] <= choice.threshold);
        let left = self.grow(x, y, left_s, depth + 1, k, params, rng);
        let right = self.grow(x, y, right_s, depth + 1, k, params, rng);
        self.nodes[id] = Node::Split {
            feature: choice.feature,
            threshold: choice.threshold,
            left,
            right,
        };
        id
    }

    /// Tries a random subset of `k` features; if none of them can split the
    /// node, falls back to the remaining features.
    fn choose_split<R: Rng + ?Sized>(
        &self,
        x: &[Vec<f64>],
        y: &[usize],
        samples: &[usize],
        k: usize,
        min_leaf: usize,
        rng: &mut R,
    ) -> Option<SplitChoice> {
        let d = self.n_features;
        let subset: Vec<usize> = if k >= d {
            (0..d).collect()
        } else {
            sample(rng, d, k).into_vec()
        };
        if let Some(c) = best_split(x, y, samples, &subset, self.n_classes, min_leaf) {
            return Some(c);
        }
        if k >= d {
            return None;
        }
        let mut in_subset = vec![false; d];
        subset.iter().for_each(|&f| in_subset[f] = true);
        let rest: Vec<usize> = (0..d).filter(|&f| !in_subset[f]).collect();
        best_split(x, y, samples, &rest, self.n_classes, min_leaf)
    }

    pub fn leaf_counts(&self, v: &[f64]) -> &[usize] {
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                Node::Leaf { counts } => return counts,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => id = if v[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    /// Majority class of the reached leaf; ties go to the lowest index.
    pub fn predict(&self, v: &[f64]) -> usize {
        let counts = self.leaf_counts(v);
        let mut best = 0;
        for (c, &n) in counts.iter().enumerate() {
            if n > counts[best] {
                best = c;
            }
        }
        best
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], id: usize) -> usize {
            match &nodes[id] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub params: ForestParams,
    pub n_classes: usize,
    pub n_features: usize,
    pub trees: Vec<DecisionTree>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestPrediction {
    pub index: usize,
    /// Fraction of trees voting for each class.
    pub votes: Vec<f64>,
}

impl RandomForest {
    /// Trees are grown in parallel; each has its own derived seed, so the
    /// result does not depend on thread scheduling.
    pub fn fit(x: &[Vec<f64>], y: &[usize], n_classes: usize, params: &ForestParams) -> Result<Self> {
        params.validate()?;
        let n_features = check_training_data(x, y, n_classes)?;
        let trees = (0..params.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = seeded_rng(derive_seed(params.seed, &format!("tree-{t}")));
                let samples = if params.bootstrap {
                    (0..x.len()).map(|_| rng.random_range(0..x.len())).collect()
                } else {
                    (0..x.len()).collect()
                };
                DecisionTree::fit_samples(x, y, samples, n_classes, params, &mut rng)
            })
            .collect();
        Ok(RandomForest {
            params: params.clone(),
            n_classes,
            n_features,
            trees,
        })
    }

    pub fn predict(&self, v: &[f64]) -> Result<ForestPrediction> {
        if v.len() != self.n_features {
            return Err(Error::shape("forest_predict", self.n_features, v.len()));
        }
        let mut votes = vec![0.0; self.n_classes];
        for tree in &self.trees {
            votes[tree.predict(v)] += 1.0;
        }
        let n = self.trees.len() as f64;
        votes.iter_mut().for_each(|p| *p /= n);
        Ok(ForestPrediction {
            index: argmax(&votes),
            votes,
        })
    }
}
