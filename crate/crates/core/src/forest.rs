//! CART classification trees and a random forest with Gini importances.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;
use crate::rng::{self, Rng};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension {
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::Dimension {
                    expected: cols,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    /// Matrix made of the given columns, in order.
    pub fn select_columns(&self, cols: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(self.rows * cols.len());
        for i in 0..self.rows {
            let row = self.row(i);
            data.extend(cols.iter().map(|&j| row[j]));
        }
        Matrix {
            rows: self.rows,
            cols: cols.len(),
            data,
        }
    }

    pub fn map_column(&mut self, j: usize, f: impl Fn(f64) -> f64) {
        for i in 0..self.rows {
            let v = &mut self.data[i * self.cols + j];
            *v = f(*v);
        }
    }
}

/// Gini impurity `1 - sum (c_i / N)^2`.
pub fn gini(class_counts: &[usize]) -> Result<f64> {
    let n: usize = class_counts.iter().sum();
    if n == 0 {
        return Err(Error::Empty("class counts"));
    }
    let n = n as f64;
    Ok(1.0 - class_counts.iter().map(|&c| (c as f64 / n) * (c as f64 / n)).sum::<f64>())
}

fn gini2(c: [usize; 2]) -> f64 {
    let n = (c[0] + c[1]) as f64;
    let (p0, p1) = (c[0] as f64 / n, c[1] as f64 / n);
    1.0 - p0 * p0 - p1 * p1
}

pub const LEAF: usize = usize::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    /// Split feature, or [`LEAF`].
    pub feature: usize,
    /// Samples with `value <= threshold` go left.
    pub threshold: f64,
    pub left: usize,
    pub right: usize,
    pub class_counts: [usize; 2],
}

impl Node {
    pub fn is_leaf(&self) -> bool {
        self.feature == LEAF
    }

    /// Class frequencies of the samples that reached this node.
    pub fn proba(&self) -> [f64; 2] {
        let n = (self.class_counts[0] + self.class_counts[1]) as f64;
        [self.class_counts[0] as f64 / n, self.class_counts[1] as f64 / n]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub n_features: usize,
    /// Node 0 is the root.
    pub nodes: Vec<Node>,
    /// Sample-weighted Gini decrease per feature, divided by the root count.
    pub impurity_decrease: Vec<f64>,
}

impl DecisionTree {
    pub fn leaf_for(&self, x: &[f64]) -> &Node {
        let mut node = &self.nodes[0];
        while !node.is_leaf() {
            node = if x[node.feature] <= node.threshold {
                &self.nodes[node.left]
            } else {
                &self.nodes[node.right]
            };
        }
        node
    }

    pub fn predict_proba(&self, x: &[f64]) -> [f64; 2] {
        self.leaf_for(x).proba()
    }

    pub fn predict(&self, x: &[f64]) -> u8 {
        argmax2(self.predict_proba(x))
    }

    pub fn n_splits(&self) -> usize {
        self.nodes.iter().filter(|n| !n.is_leaf()).count()
    }

    /// Impurity decreases normalised to sum to one (all zero without splits).
    pub fn feature_importances(&self) -> Vec<f64> {
        normalized(&self.impurity_decrease)
    }
}

fn normalized(v: &[f64]) -> Vec<f64> {
    let total: f64 = v.iter().sum();
    if total > 0.0 {
        v.iter().map(|x| x / total).collect()
    } else {
        vec![0.0; v.len()]
    }
}

fn argmax2(p: [f64; 2]) -> u8 {
    if p[1] > p[0] {
        1
    } else {
        0
    }
}

fn check_xy(x: &Matrix, y: &[u8]) -> Result<()> {
    if x.rows() == 0 {
        return Err(Error::Empty("training rows"));
    }
    if x.cols() == 0 {
        return Err(Error::Empty("feature columns"));
    }
    if y.len() != x.rows() {
        return Err(Error::Dimension {
            expected: x.rows(),
            found: y.len(),
        });
    }
    if let Some(bad) = y.iter().find(|&&c| c > 1) {
        return Err(Error::InvalidParameter(format!("labels must be 0 or 1, got {bad}")));
    }
    Ok(())
}

struct Split {
    feature: usize,
    threshold: f64,
    decrease: f64,
}

/// Best midpoint split of `idx` on `feature`; `None` when the feature is
/// constant on these samples.
fn best_split_on(
    x: &Matrix,
    y: &[u8],
    idx: &[usize],
    feature: usize,
    parent: [usize; 2],
    buf: &mut Vec<(f64, u8)>,
) -> Option<Split> {
    buf.clear();
    buf.extend(idx.iter().map(|&i| (x.get(i, feature), y[i])));
    buf.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
    if buf[0].0 == buf[buf.len() - 1].0 {
        return None;
    }
    let n = buf.len();
    let parent_impurity = n as f64 * gini2(parent);
    let mut left = [0usize; 2];
    let mut best: Option<Split> = None;
    for i in 0..n - 1 {
        left[buf[i].1 as usize] += 1;
        let (lo, hi) = (buf[i].0, buf[i + 1].0);
        if lo == hi {
            continue;
        }
        let nl = i + 1;
        let right = [parent[0] - left[0], parent[1] - left[1]];
        let decrease =
            parent_impurity - nl as f64 * gini2(left) - (n - nl) as f64 * gini2(right);
        if best.as_ref().is_none_or(|b| decrease > b.decrease) {
            let mut threshold = lo + (hi - lo) / 2.0;
            if threshold >= hi {
                threshold = lo;
            }
            best = Some(Split {
                feature,
                threshold,
                decrease,
            });
        }
    }
    best
}

/// Grows one CART tree on the rows listed in `sample` (repeats allowed).
///
/// At every node the features are visited in a fresh random order until
/// `max_features` non-constant ones have been scored; the split with the
/// largest sample-weighted Gini decrease wins. Nodes stop growing when
/// pure, when they hold fewer than two samples, or when no candidate
/// decreases impurity.
fn grow_tree(x: &Matrix, y: &[u8], mut idx: Vec<usize>, max_features: usize, rng: &mut Rng) -> DecisionTree {
    let d = x.cols();
    let n_root = idx.len() as f64;
    let mut nodes: Vec<Node> = Vec::new();
    let mut decrease = vec![0.0; d];
    let mut features: Vec<usize> = (0..d).collect();
    let mut buf = Vec::with_capacity(idx.len());

    let counts_of = |range: &[usize]| {
        let mut c = [0usize; 2];
        for &i in range {
            c[y[i] as usize] += 1;
        }
        c
    };

    nodes.push(Node {
        feature: LEAF,
        threshold: 0.0,
        left: LEAF,
        right: LEAF,
        class_counts: counts_of(&idx),
    });
    let mut stack = vec![(0usize, 0usize, idx.len())];
    while let Some((node_id, start, end)) = stack.pop() {
        let counts = nodes[node_id].class_counts;
        let n = end - start;
        if n < 2 || counts[0] == 0 || counts[1] == 0 {
            continue;
        }
        let mut best: Option<Split> = None;
        let mut scored = 0;
        let mut remaining = d;
        // Incremental Fisher-Yates: draw features one at a time.
        while scored < max_features && remaining > 0 {
            let pick = rng.random_range(0..remaining);
            remaining -= 1;
            features.swap(pick, remaining);
            let f = features[remaining];
            if let Some(s) = best_split_on(x, y, &idx[start..end], f, counts, &mut buf) {
                scored += 1;
                if best.as_ref().is_none_or(|b| s.decrease > b.decrease) {
                    best = Some(s);
                }
            }
        }
        let Some(split) = best.filter(|s| s.decrease > 1e-12) else {
            continue;
        };
        // Partition idx[start..end] in place: left block first.
        let slice = &mut idx[start..end];
        let mut mid = 0;
        for i in 0..slice.len() {
            if x.get(slice[i], split.feature) <= split.threshold {
                slice.swap(i, mid);
                mid += 1;
            }
        }
        let left_id = nodes.len();
        let right_id = left_id + 1;
        nodes.push(Node {
            feature: LEAF,
            threshold: 0.0,
            left: LEAF,
            right: LEAF,
            class_counts: counts_of(&idx[start..start + mid]),
        });
        nodes.push(Node {
            feature: LEAF,
            threshold: 0.0,
            left: LEAF,
            right: LEAF,
            class_counts: counts_of(&idx[start + mid..end]),
        });
        let node = &mut nodes[node_id];
        node.feature = split.feature;
        node.threshold = split.threshold;
        node.left = left_id;
        node.right = right_id;
        decrease[split.feature] += split.decrease / n_root;
        stack.push((right_id, start + mid, end));
        stack.push((left_id, start, start + mid));
    }
    DecisionTree {
        n_features: d,
        nodes,
        impurity_decrease: decrease,
    }
}

pub fn fit_tree(x: &Matrix, y: &[u8], max_features: usize, rng: &mut Rng) -> Result<DecisionTree> {
    check_xy(x, y)?;
    if max_features == 0 || max_features > x.cols() {
        return Err(Error::InvalidParameter(format!(
            "max_features must be in 1..={}, got {max_features}",
            x.cols()
        )));
    }
    Ok(grow_tree(x, y, (0..x.rows()).collect(), max_features, rng))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// When false every tree sees the full training set.
    pub bootstrap: bool,
    /// `None` means `floor(sqrt(d))`.
    pub max_features: Option<usize>,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            bootstrap: false,
            max_features: None,
            seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }
}

/// `floor(sqrt(d))`, at least one.
pub fn default_max_features(d: usize) -> usize {
    (math::floor(math::sqrt(d as f64)) as usize).max(1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub trees: Vec<DecisionTree>,
    pub max_features: usize,
    pub feature_importances: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub label: u8,
    pub proba: [f64; 2],
}

/// Fits `n_trees` trees; tree `i` draws from the derived seed `seed ^ i`.
/// Importances average the per-tree normalised Gini decreases over trees
/// that split at least once, then renormalise.
pub fn fit_forest(x: &Matrix, y: &[u8], config: &ForestConfig) -> Result<RandomForest> {
    check_xy(x, y)?;
    if config.n_trees < 1 {
        return Err(Error::InvalidParameter("n_trees must be at least 1".into()));
    }
    let max_features = config
        .max_features
        .unwrap_or_else(|| default_max_features(x.cols()));
    if max_features == 0 || max_features > x.cols() {
        return Err(Error::InvalidParameter(format!(
            "max_features must be in 1..={}, got {max_features}",
            x.cols()
        )));
    }
    let trees: Vec<DecisionTree> = (0..config.n_trees)
        .map(|t| {
            let mut rng = rng::indexed(config.seed, "forest/tree", t as u64);
            let idx = if config.bootstrap {
                (0..x.rows()).map(|_| rng.random_range(0..x.rows())).collect()
            } else {
                (0..x.rows()).collect()
            };
            grow_tree(x, y, idx, max_features, &mut rng)
        })
        .collect();
    let mut acc = vec![0.0; x.cols()];
    let mut n_split_trees = 0;
    for t in trees.iter().filter(|t| t.n_splits() > 0) {
        n_split_trees += 1;
        for (a, v) in acc.iter_mut().zip(t.feature_importances()) {
            *a += v;
        }
    }
    if n_split_trees > 0 {
        acc.iter_mut().for_each(|a| *a /= n_split_trees as f64);
    }
    Ok(RandomForest {
        trees,
        max_features,
        feature_importances: normalized(&acc),
    })
}

impl RandomForest {
    pub fn n_features(&self) -> usize {
        self.feature_importances.len()
    }

    pub fn predict_row(&self, row: &[f64]) -> Prediction {
        let mut p = [0.0; 2];
        for t in &self.trees {
            let q = t.predict_proba(row);
            p[0] += q[0];
            p[1] += q[1];
        }
        let n = self.trees.len() as f64;
        let proba = [p[0] / n, p[1] / n];
        Prediction {
            label: argmax2(proba),
            proba,
        }
    }
}

/// Mean of per-tree leaf class frequencies; ties predict class 0.
pub fn predict(forest: &RandomForest, x: &Matrix) -> Result<Vec<Prediction>> {
    if x.cols() != forest.n_features() {
        return Err(Error::Dimension {
            expected: forest.n_features(),
            found: x.cols(),
        });
    }
    Ok((0..x.rows()).map(|i| forest.predict_row(x.row(i))).collect())
}

/// Indices of the `k` largest importances, descending, ties by index.
pub fn top_k(importances: &[f64], k: usize) -> Result<Vec<usize>> {
    if k > importances.len() {
        return Err(Error::InvalidParameter(format!(
            "k = {k} exceeds feature count {}",
            importances.len()
        )));
    }
    let mut order: Vec<usize> = (0..importances.len()).collect();
    order.sort_by(|&a, &b| importances[b].total_cmp(&importances[a]).then(a.cmp(&b)));
    order.truncate(k);
    Ok(order)
}

pub fn top_k_features(forest: &RandomForest, k: usize) -> Result<Vec<usize>> {
    top_k(&forest.feature_importances, k)
}

/// Shuffled copy of `0..n`, handy for tests and splitting.
pub fn permutation(n: usize, rng: &mut Rng) -> Vec<usize> {
    let mut v: Vec<usize> = (0..n).collect();
    v.shuffle(rng);
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn gini_closed_forms() {
        assert_eq!(gini(&[5, 5]).unwrap(), 0.5);
        assert_eq!(gini(&[10, 0]).unwrap(), 0.0);
        assert_eq!(gini(&[3, 1]).unwrap(), 0.375);
        assert_eq!(gini(&[0, 0]), Err(Error::Empty("class counts")));
    }

    #[test]
    fn separable_pair_splits_at_midpoint() {
        let x = mat(&[&[0.0], &[1.0]]);
        let mut r = rng::stream(0, "t");
        let t = fit_tree(&x, &[0, 1], 1, &mut r).unwrap();
        assert_eq!(t.nodes.len(), 3);
        assert_eq!(t.nodes[0].threshold, 0.5);
        assert_eq!(t.predict(&[0.0]), 0);
        assert_eq!(t.predict(&[1.0]), 1);
    }

    #[test]
    fn constant_input_is_single_majority_leaf() {
        let x = mat(&[&[1.0, 2.0], &[1.0, 2.0], &[1.0, 2.0]]);
        let mut r = rng::stream(0, "t");
        let t = fit_tree(&x, &[1, 1, 0], 2, &mut r).unwrap();
        assert_eq!(t.nodes.len(), 1);
        assert_eq!(t.predict(&[5.0, 5.0]), 1);
        let f = fit_forest(&x, &[1, 1, 0], &ForestConfig::default()).unwrap();
        assert_eq!(f.feature_importances, vec![0.0, 0.0]);
        let p = predict(&f, &x).unwrap();
        assert!((p[0].proba[1] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn single_feature_forest_has_unit_importance() {
        let x = mat(&[&[0.0], &[1.0], &[2.0], &[3.0]]);
        let f = fit_forest(&x, &[0, 0, 1, 1], &ForestConfig::default()).unwrap();
        assert_eq!(f.feature_importances, vec![1.0]);
        assert_eq!(f.max_features, 1);
    }

    #[test]
    fn leaf_counts_sum_to_samples() {
        let mut r = rng::stream(4, "data");
        let rows: Vec<Vec<f64>> = (0..60).map(|_| (0..4).map(|_| r.random::<f64>()).collect()).collect();
        let y: Vec<u8> = rows.iter().map(|v| (v[0] + v[1] > 1.0) as u8).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let t = fit_tree(&x, &y, 2, &mut r).unwrap();
        for node in &t.nodes {
            if !node.is_leaf() {
                let (l, rr) = (&t.nodes[node.left], &t.nodes[node.right]);
                assert_eq!(l.class_counts[0] + rr.class_counts[0], node.class_counts[0]);
                assert_eq!(l.class_counts[1] + rr.class_counts[1], node.class_counts[1]);
                assert!(l.class_counts.iter().sum::<usize>() > 0);
                assert!(rr.class_counts.iter().sum::<usize>() > 0);
            }
        }
        let leaves: usize = t.nodes.iter().filter(|n| n.is_leaf()).map(|n| n.class_counts.iter().sum::<usize>()).sum();
        assert_eq!(leaves, 60);
    }

    #[test]
    fn top_k_orders_and_validates() {
        assert_eq!(top_k(&[0.1, 0.7, 0.2], 2).unwrap(), vec![1, 2]);
        assert_eq!(top_k(&[0.5, 0.25, 0.25], 3).unwrap(), vec![0, 1, 2]);
        assert!(top_k(&[0.5], 2).is_err());
    }

    #[test]
    fn errors() {
        let x = mat(&[&[0.0], &[1.0]]);
        let cfg = ForestConfig {
            n_trees: 0,
            ..ForestConfig::default()
        };
        assert!(fit_forest(&x, &[0, 1], &cfg).is_err());
        let f = fit_forest(&x, &[0, 1], &ForestConfig::default()).unwrap();
        assert!(matches!(
            predict(&f, &mat(&[&[0.0, 1.0]])),
            Err(Error::Dimension { expected: 1, found: 2 })
        ));
    }
}
