//! Second-order gradient boosting with exact greedy splits.
//!
//! Each round computes per-sample gradients `g` and hessians `h` of the loss
//! at the current scores and grows one tree per output (one for regression,
//! one per class for softmax). A node with gradient sum `G` and hessian sum
//! `H` has leaf weight `-T(G) / (H + lambda)`, where `T` soft-thresholds by
//! `reg_alpha`. A split is scored by
//!
//! ```text
//! gain = 1/2 [ T(G_L)^2/(H_L+lambda) + T(G_R)^2/(H_R+lambda) - T(G)^2/(H+lambda) ]
//! ```
//!
//! and taken when `gain > gamma` and both children keep a hessian sum of at
//! least `min_child_weight`. Thresholds sit halfway between consecutive
//! distinct feature values; a sample goes left when its value is below the
//! threshold.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_finite, check_inputs, class_ids, softmax, LearnError};
use crate::linalg::Matrix;

pub const GBDT_FORMAT: &str = "gbdt.v1";

/// Gains at or below `gamma + SPLIT_EPS` do not split a node.
const SPLIT_EPS: f64 = 1e-10;
/// Floor on softmax hessians.
const MIN_HESSIAN: f64 = 1e-16;
/// Floor on class priors when forming log-prior base scores.
const MIN_PRIOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Objective {
    SquaredError,
    SoftmaxCrossEntropy { classes: usize },
}

impl Objective {
    pub fn outputs(&self) -> usize {
        match self {
            Objective::SquaredError => 1,
            Objective::SoftmaxCrossEntropy { classes } => *classes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbdtConfig {
    pub learning_rate: f64,
    pub n_estimators: usize,
    pub max_depth: usize,
    pub min_child_weight: f64,
    pub gamma: f64,
    pub subsample: f64,
    pub colsample: f64,
    pub reg_alpha: f64,
    pub reg_lambda: f64,
    pub objective: Objective,
    pub seed: u64,
}

impl Default for GbdtConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.3,
            n_estimators: 100,
            max_depth: 6,
            min_child_weight: 1.0,
            gamma: 0.0,
            subsample: 1.0,
            colsample: 1.0,
            reg_alpha: 0.0,
            reg_lambda: 1.0,
            objective: Objective::SquaredError,
            seed: 0,
        }
    }
}

impl GbdtConfig {
    pub fn validate(&self) -> Result<(), LearnError> {
        let bad = |msg: &str| Err(LearnError::InvalidConfig(msg.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.n_estimators == 0 {
            return bad("n_estimators must be at least 1");
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return bad("subsample must lie in (0, 1]");
        }
        if !(self.colsample > 0.0 && self.colsample <= 1.0) {
            return bad("colsample must lie in (0, 1]");
        }
        if !(self.reg_alpha >= 0.0 && self.reg_lambda >= 0.0) {
            return bad("reg_alpha and reg_lambda must be non-negative");
        }
        if !(self.gamma >= 0.0 && self.min_child_weight >= 0.0) {
            return bad("gamma and min_child_weight must be non-negative");
        }
        if let Objective::SoftmaxCrossEntropy { classes } = self.objective {
            if classes < 2 {
                return bad("softmax needs at least two classes");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    Split { feature: usize, threshold: f64, gain: f64, cover: f64, left: usize, right: usize },
    Leaf { value: f64, cover: f64 },
}

/// Nodes stored flat; the root is `nodes[0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf(value: f64) -> Self {
        Tree { nodes: vec![Node::Leaf { value, cover: 0.0 }] }
    }

    /// Raw leaf weight reached by `row` (before the learning rate).
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { value, .. } => return *value,
                Node::Split { feature, threshold, left, right, .. } => {
                    at = if row[*feature] < *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    pub format: String,
    pub config: GbdtConfig,
    pub schema_id: Option<String>,
    pub num_features: usize,
    /// One entry per output: the label mean, or the class log-priors.
    pub base_score: Vec<f64>,
    /// Round-major: the tree for round `r` and output `c` is `trees[r * outputs + c]`.
    pub trees: Vec<Tree>,
    /// Training loss before the first round.
    pub initial_loss: f64,
    /// Training loss after each round.
    pub train_loss: Vec<f64>,
}

impl GbdtModel {
    pub fn outputs(&self) -> usize {
        self.base_score.len()
    }

    pub fn is_classifier(&self) -> bool {
        matches!(self.config.objective, Objective::SoftmaxCrossEntropy { .. })
    }

    pub fn with_schema(mut self, schema_id: impl Into<String>) -> Self {
        self.schema_id = Some(schema_id.into());
        self
    }

    /// Per-output additive scores: base score plus the shrunk leaf weights.
    pub fn raw_scores(&self, row: &[f64]) -> Vec<f64> {
        let k = self.outputs();
        let mut scores = self.base_score.clone();
        for (i, tree) in self.trees.iter().enumerate() {
            scores[i % k] += self.config.learning_rate * tree.predict_row(row);
        }
        scores
    }
}

fn soft_threshold(g: f64, alpha: f64) -> f64 {
    if g > alpha {
        g - alpha
    } else if g < -alpha {
        g + alpha
    } else {
        0.0
    }
}

fn node_score(g: f64, h: f64, cfg: &GbdtConfig) -> f64 {
    let t = soft_threshold(g, cfg.reg_alpha);
    t * t / (h + cfg.reg_lambda)
}

fn leaf_weight(g: f64, h: f64, cfg: &GbdtConfig) -> f64 {
    -soft_threshold(g, cfg.reg_alpha) / (h + cfg.reg_lambda)
}

/// Split gain for a node with totals `(g, h)` divided into a left part `(gl, hl)`.
pub(crate) fn split_gain(g: f64, h: f64, gl: f64, hl: f64, cfg: &GbdtConfig) -> f64 {
    0.5 * (node_score(gl, hl, cfg) + node_score(g - gl, h - hl, cfg) - node_score(g, h, cfg))
}

fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid > lo {
        mid
    } else {
        hi
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct ScanState {
    gl: f64,
    hl: f64,
    last: f64,
    seen: bool,
}

const NO_NODE: u32 = u32::MAX;

/// Grows one tree level by level. Per level each sampled feature is scanned
/// once in presorted order, with every frontier node accumulating its own
/// left-hand sums.
fn grow_tree(
    x: &Matrix,
    sorted: &[Vec<u32>],
    grad: &[f64],
    hess: &[f64],
    rows: &[usize],
    features: &[usize],
    cfg: &GbdtConfig,
) -> Tree {
    let n = x.rows();
    let mut node_of = vec![NO_NODE; n];
    let (mut g0, mut h0) = (0.0, 0.0);
    for &r in rows {
        node_of[r] = 0;
        g0 += grad[r];
        h0 += hess[r];
    }
    let mut nodes = vec![Node::Leaf { value: 0.0, cover: h0 }];
    let mut sums = vec![(g0, h0)];
    let mut frontier = vec![0usize];
    let mut depth = 0;

    while !frontier.is_empty() {
        if depth >= cfg.max_depth {
            for &id in &frontier {
                let (g, h) = sums[id];
                nodes[id] = Node::Leaf { value: leaf_weight(g, h, cfg), cover: h };
            }
            break;
        }
        let mut slot_of = vec![usize::MAX; nodes.len()];
        for (s, &id) in frontier.iter().enumerate() {
            slot_of[id] = s;
        }
        let mut best: Vec<Option<Candidate>> = vec![None; frontier.len()];
        let mut state = vec![ScanState::default(); frontier.len()];
        for &f in features {
            state.iter_mut().for_each(|s| *s = ScanState::default());
            for &r in &sorted[f] {
                let r = r as usize;
                let id = node_of[r];
                if id == NO_NODE {
                    continue;
                }
                let s = slot_of[id as usize];
                if s == usize::MAX {
                    continue;
                }
                let xv = x[(r, f)];
                let st = &mut state[s];
                if st.seen && xv > st.last {
                    let (g, h) = sums[id as usize];
                    let hr = h - st.hl;
                    if st.hl >= cfg.min_child_weight && hr >= cfg.min_child_weight {
                        let gain = split_gain(g, h, st.gl, st.hl, cfg);
                        if best[s].is_none_or(|b| gain > b.gain) {
                            best[s] = Some(Candidate { gain, feature: f, threshold: midpoint(st.last, xv) });
                        }
                    }
                }
                st.gl += grad[r];
                st.hl += hess[r];
                st.last = xv;
                st.seen = true;
            }
        }

        let mut next = Vec::new();
        let mut split_of = vec![None; nodes.len()];
        for (s, &id) in frontier.iter().enumerate() {
            let (g, h) = sums[id];
            match best[s] {
                Some(c) if c.gain > cfg.gamma + SPLIT_EPS => {
                    let left = nodes.len();
                    let right = left + 1;
                    nodes.push(Node::Leaf { value: 0.0, cover: 0.0 });
                    nodes.push(Node::Leaf { value: 0.0, cover: 0.0 });
                    sums.push((0.0, 0.0));
                    sums.push((0.0, 0.0));
                    nodes[id] = Node::Split {
                        feature: c.feature,
                        threshold: c.threshold,
                        gain: c.gain,
                        cover: h,
                        left,
                        right,
                    };
                    split_of.resize(nodes.len(), None);
                    split_of[id] = Some((c.feature, c.threshold, left, right));
                    next.push(left);
                    next.push(right);
                }
                _ => nodes[id] = Node::Leaf { value: leaf_weight(g, h, cfg), cover: h },
            }
        }
        for &r in rows {
            if let Some((f, t, left, right)) = split_of[node_of[r] as usize] {
                let child = if x[(r, f)] < t { left } else { right };
                node_of[r] = child as u32;
                sums[child].0 += grad[r];
                sums[child].1 += hess[r];
            }
        }
        frontier = next;
        depth += 1;
    }
    Tree { nodes }
}

fn presort(x: &Matrix) -> Vec<Vec<u32>> {
    (0..x.cols())
        .map(|f| {
            let mut order: Vec<u32> = (0..x.rows() as u32).collect();
            order.sort_by(|&a, &b| x[(a as usize, f)].total_cmp(&x[(b as usize, f)]).then(a.cmp(&b)));
            order
        })
        .collect()
}

fn sample_sorted(rng: &mut ChaCha8Rng, total: usize, rate: f64) -> Vec<usize> {
    if rate >= 1.0 {
        return (0..total).collect();
    }
    let count = ((rate * total as f64).round() as usize).clamp(1, total);
    let mut picked = index::sample(rng, total, count).into_vec();
    picked.sort_unstable();
    picked
}

fn mean_loss(objective: Objective, scores: &[f64], y: &[f64], classes: &[usize]) -> f64 {
    let n = y.len();
    match objective {
        Objective::SquaredError => scores.iter().zip(y).map(|(s, t)| (s - t) * (s - t)).sum::<f64>() / n as f64,
        Objective::SoftmaxCrossEntropy { classes: k } => {
            let mut total = 0.0;
            for (i, &c) in classes.iter().enumerate() {
                let row = &scores[i * k..(i + 1) * k];
                let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lse = max + row.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
                total += lse - row[c];
            }
            total / n as f64
        }
    }
}

/// Trains a boosted ensemble. Classification labels are class ids in
/// `0..classes` stored as `f64`.
pub fn gbdt_train(cfg: &GbdtConfig, x: &Matrix, y: &[f64]) -> Result<GbdtModel, LearnError> {
    cfg.validate()?;
    check_inputs(x, y, 2)?;
    let n = x.rows();
    let k = cfg.objective.outputs();
    let classes = match cfg.objective {
        Objective::SquaredError => Vec::new(),
        Objective::SoftmaxCrossEntropy { classes } => class_ids(y, classes)?,
    };

    let base_score = match cfg.objective {
        Objective::SquaredError => vec![y.iter().sum::<f64>() / n as f64],
        Objective::SoftmaxCrossEntropy { classes: kc } => {
            let mut counts = vec![0usize; kc];
            classes.iter().for_each(|&c| counts[c] += 1);
            counts.iter().map(|&c| (c as f64 / n as f64).max(MIN_PRIOR).ln()).collect()
        }
    };
    let degenerate = y.iter().all(|&v| v == y[0]);

    let mut model = GbdtModel {
        format: GBDT_FORMAT.to_string(),
        config: cfg.clone(),
        schema_id: None,
        num_features: x.cols(),
        base_score,
        trees: Vec::with_capacity(cfg.n_estimators * k),
        initial_loss: 0.0,
        train_loss: Vec::with_capacity(cfg.n_estimators),
    };

    if degenerate {
        log::warn!("all {n} labels equal {}; the model predicts the base score", y[0]);
        if cfg.objective == Objective::SquaredError {
            model.base_score = vec![y[0]];
        }
        let scores: Vec<f64> = (0..n).flat_map(|_| model.base_score.clone()).collect();
        model.initial_loss = mean_loss(cfg.objective, &scores, y, &classes);
        for _ in 0..cfg.n_estimators {
            model.trees.extend((0..k).map(|_| Tree::leaf(0.0)));
            model.train_loss.push(model.initial_loss);
        }
        return Ok(model);
    }

    let sorted = presort(x);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut scores: Vec<f64> = (0..n).flat_map(|_| model.base_score.clone()).collect();
    model.initial_loss = mean_loss(cfg.objective, &scores, y, &classes);
    let mut grad = vec![vec![0.0; n]; k];
    let mut hess = vec![vec![0.0; n]; k];

    for _ in 0..cfg.n_estimators {
        match cfg.objective {
            Objective::SquaredError => {
                for i in 0..n {
                    grad[0][i] = scores[i] - y[i];
                    hess[0][i] = 1.0;
                }
            }
            Objective::SoftmaxCrossEntropy { .. } => {
                for i in 0..n {
                    let p = softmax(&scores[i * k..(i + 1) * k]);
                    for c in 0..k {
                        let target = if classes[i] == c { 1.0 } else { 0.0 };
                        grad[c][i] = p[c] - target;
                        hess[c][i] = (p[c] * (1.0 - p[c])).max(MIN_HESSIAN);
                    }
                }
            }
        }
        let first = model.trees.len();
        for c in 0..k {
            let rows = sample_sorted(&mut rng, n, cfg.subsample);
            let features = sample_sorted(&mut rng, x.cols(), cfg.colsample);
            model.trees.push(grow_tree(x, &sorted, &grad[c], &hess[c], &rows, &features, cfg));
        }
        for i in 0..n {
            let row = x.row(i);
            for c in 0..k {
                scores[i * k + c] += cfg.learning_rate * model.trees[first + c].predict_row(row);
            }
        }
        model.train_loss.push(mean_loss(cfg.objective, &scores, y, &classes));
    }
    Ok(model)
}

/// Regression models return one column of predictions; classifiers return
/// the softmax class probabilities.
pub fn gbdt_predict(model: &GbdtModel, x: &Matrix) -> Result<Matrix, LearnError> {
    if x.cols() != model.num_features {
        return Err(LearnError::FeatureCount { expected: model.num_features, found: x.cols() });
    }
    check_finite(x)?;
    let k = model.outputs();
    let mut out = Matrix::zeros(x.rows(), k);
    for i in 0..x.rows() {
        let scores = model.raw_scores(x.row(i));
        let values = if model.is_classifier() { softmax(&scores) } else { scores };
        out.row_mut(i).copy_from_slice(&values);
    }
    Ok(out)
}

/// Total split gain per feature across all trees.
pub fn gbdt_feature_gain(model: &GbdtModel) -> Vec<f64> {
    let mut gains = vec![0.0; model.num_features];
    for tree in &model.trees {
        for node in &tree.nodes {
            if let Node::Split { feature, gain, .. } = node {
                gains[*feature] += gain;
            }
        }
    }
    gains
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn matrix(rows: &[Vec<f64>]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    /// Brute-force best split: every feature, every midpoint, sums recomputed
    /// from scratch. Returns the best gain (or None when no split is allowed).
    fn oracle_best(x: &Matrix, g: &[f64], h: &[f64], rows: &[usize], cfg: &GbdtConfig) -> Option<f64> {
        let gt: f64 = rows.iter().map(|&r| g[r]).sum();
        let ht: f64 = rows.iter().map(|&r| h[r]).sum();
        let mut best: Option<f64> = None;
        for f in 0..x.cols() {
            let mut values: Vec<f64> = rows.iter().map(|&r| x[(r, f)]).collect();
            values.sort_by(f64::total_cmp);
            values.dedup();
            for w in values.windows(2) {
                let t = midpoint(w[0], w[1]);
                let left: Vec<usize> = rows.iter().copied().filter(|&r| x[(r, f)] < t).collect();
                let gl: f64 = left.iter().map(|&r| g[r]).sum();
                let hl: f64 = left.iter().map(|&r| h[r]).sum();
                let hr: f64 = rows.iter().filter(|&&r| x[(r, f)] >= t).map(|&r| h[r]).sum();
                if hl < cfg.min_child_weight || hr < cfg.min_child_weight {
                    continue;
                }
                let s = |a: f64, b: f64| {
                    let t = soft_threshold(a, cfg.reg_alpha);
                    t * t / (b + cfg.reg_lambda)
                };
                let gain = 0.5 * (s(gl, hl) + s(gt - gl, hr) - s(gt, ht));
                if best.is_none_or(|b| gain > b) {
                    best = Some(gain);
                }
            }
        }
        best
    }

    /// Checks every node of `tree` against the brute-force oracle.
    fn check_tree(x: &Matrix, g: &[f64], h: &[f64], tree: &Tree, cfg: &GbdtConfig) {
        let mut stack = vec![(0usize, (0..x.rows()).collect::<Vec<_>>(), 0usize)];
        while let Some((at, rows, depth)) = stack.pop() {
            let oracle = oracle_best(x, g, h, &rows, cfg);
            let tol = 1e-9 * (1.0 + oracle.unwrap_or(0.0).abs());
            match &tree.nodes[at] {
                Node::Split { feature, threshold, gain, left, right, .. } => {
                    let best = oracle.expect("split where the oracle finds none");
                    assert!(depth < cfg.max_depth);
                    assert!((gain - best).abs() <= tol, "gain {gain} vs oracle {best}");
                    let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| x[(i, *feature)] < *threshold);
                    assert!(!l.is_empty() && !r.is_empty());
                    stack.push((*left, l, depth + 1));
                    stack.push((*right, r, depth + 1));
                }
                Node::Leaf { value, .. } => {
                    if depth < cfg.max_depth {
                        assert!(oracle.is_none_or(|b| b <= cfg.gamma + SPLIT_EPS + tol), "missed split {oracle:?}");
                    }
                    let gs: f64 = rows.iter().map(|&r| g[r]).sum();
                    let hs: f64 = rows.iter().map(|&r| h[r]).sum();
                    let expect = leaf_weight(gs, hs, cfg);
                    assert!((value - expect).abs() <= 1e-9 * (1.0 + expect.abs()));
                }
            }
        }
    }

    fn small_data() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>, usize, f64, f64)> {
        (2usize..=30, 1usize..=4).prop_flat_map(|(n, f)| {
            (
                prop::collection::vec(prop::collection::vec((0i32..6).prop_map(f64::from), f), n),
                prop::collection::vec(-5.0f64..5.0, n),
                0usize..4,
                prop_oneof![Just(0.0), Just(1.0), Just(3.0)],
                prop_oneof![Just(0.0), Just(0.5), Just(2.0)],
            )
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn regression_tree_matches_split_oracle((rows, y, depth, mcw, alpha) in small_data()) {
            let x = matrix(&rows);
            let cfg = GbdtConfig {
                n_estimators: 1, max_depth: depth, min_child_weight: mcw, reg_alpha: alpha,
                learning_rate: 0.5, ..Default::default()
            };
            prop_assume!(y.iter().any(|&v| v != y[0]));
            let model = gbdt_train(&cfg, &x, &y).unwrap();
            let base = y.iter().sum::<f64>() / y.len() as f64;
            let g: Vec<f64> = y.iter().map(|t| base - t).collect();
            let h = vec![1.0; y.len()];
            check_tree(&x, &g, &h, &model.trees[0], &cfg);
        }

        #[test]
        fn softmax_trees_match_split_oracle((rows, y, depth, _mcw, alpha) in small_data()) {
            let x = matrix(&rows);
            let labels: Vec<f64> = y.iter().map(|v| ((v + 5.0) / 3.4).floor().min(2.0)).collect();
            prop_assume!(labels.iter().any(|&v| v != labels[0]));
            let cfg = GbdtConfig {
                n_estimators: 1, max_depth: depth, min_child_weight: 0.1, reg_alpha: alpha * 0.1,
                objective: Objective::SoftmaxCrossEntropy { classes: 3 }, ..Default::default()
            };
            let model = gbdt_train(&cfg, &x, &labels).unwrap();
            let n = labels.len() as f64;
            let prior: Vec<f64> = (0..3)
                .map(|c| labels.iter().filter(|&&l| l == c as f64).count() as f64 / n)
                .map(|p| if p > 0.0 { p } else { MIN_PRIOR })
                .collect();
            let total: f64 = prior.iter().sum();
            for c in 0..3 {
                let p = prior[c] / total;
                let g: Vec<f64> = labels.iter().map(|&l| p - if l == c as f64 { 1.0 } else { 0.0 }).collect();
                let h = vec![(p * (1.0 - p)).max(MIN_HESSIAN); labels.len()];
                check_tree(&x, &g, &h, &model.trees[c], &cfg);
            }
        }

        #[test]
        fn prediction_equals_tree_walk_sum((rows, y, depth, mcw, alpha) in small_data()) {
            let x = matrix(&rows);
            prop_assume!(y.iter().any(|&v| v != y[0]));
            let cfg = GbdtConfig {
                n_estimators: 5, max_depth: depth, min_child_weight: mcw, reg_alpha: alpha,
                subsample: 0.8, colsample: 0.8, ..Default::default()
            };
            let model = gbdt_train(&cfg, &x, &y).unwrap();
            let pred = gbdt_predict(&model, &x).unwrap();
            for i in 0..x.rows() {
                let mut manual = model.base_score[0];
                for tree in &model.trees {
                    let mut at = 0;
                    while let Node::Split { feature, threshold, left, right, .. } = &tree.nodes[at] {
                        at = if x[(i, *feature)] < *threshold { *left } else { *right };
                    }
                    if let Node::Leaf { value, .. } = tree.nodes[at] {
                        manual += cfg.learning_rate * value;
                    }
                }
                prop_assert!((pred[(i, 0)] - manual).abs() <= 1e-12 * (1.0 + manual.abs()));
            }
        }
    }

    #[test]
    fn separable_points_split_at_exhaustive_midpoint() {
        let x = matrix(&[vec![1.0, 7.0], vec![2.0, 3.0], vec![4.0, 5.0], vec![6.0, 4.0]]);
        let y = [0.0, 0.0, 10.0, 10.0];
        let cfg = GbdtConfig { n_estimators: 1, max_depth: 1, min_child_weight: 0.0, ..Default::default() };
        let model = gbdt_train(&cfg, &x, &y).unwrap();
        match &model.trees[0].nodes[0] {
            Node::Split { feature, threshold, .. } => {
                assert_eq!(*feature, 0);
                assert_eq!(*threshold, 3.0);
            }
            other => panic!("expected a split, got {other:?}"),
        }
    }

    #[test]
    fn constant_labels_predict_the_constant() {
        let x = matrix(&[vec![1.0, 2.0], vec![3.0, -1.0], vec![0.5, 9.0]]);
        let y = [0.1, 0.1, 0.1];
        let model = gbdt_train(&GbdtConfig::default(), &x, &y).unwrap();
        assert_eq!(model.trees.len(), 100);
        let probe = matrix(&[vec![-100.0, 100.0], vec![2.0, 2.0]]);
        let pred = gbdt_predict(&model, &probe).unwrap();
        assert_eq!(pred.as_slice(), &[0.1, 0.1]);
        assert!(gbdt_feature_gain(&model).iter().all(|&g| g == 0.0));
    }

    #[test]
    fn empty_ensemble_and_single_leaf() {
        let x = matrix(&[vec![1.0], vec![2.0]]);
        let cfg = GbdtConfig { n_estimators: 1, max_depth: 0, learning_rate: 0.5, ..Default::default() };
        let mut model = gbdt_train(&cfg, &x, &[1.0, 3.0]).unwrap();
        let Node::Leaf { value, .. } = model.trees[0].nodes[0] else { panic!() };
        let pred = gbdt_predict(&model, &x).unwrap();
        assert_eq!(pred[(0, 0)], model.base_score[0] + 0.5 * value);
        assert_eq!(value, 0.0, "residuals around the mean sum to zero");
        model.trees.clear();
        assert_eq!(gbdt_predict(&model, &x).unwrap().as_slice(), &[2.0, 2.0]);
    }

    fn synthetic(n: usize, features: usize, seed: u64) -> (Matrix, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Matrix::zeros(n, features);
        let mut y = vec![0.0; n];
        for i in 0..n {
            for f in 0..features {
                x[(i, f)] = rng.random_range(-1.0..1.0);
            }
            y[i] = 100.0 + 40.0 * x[(i, 0)] + 15.0 * (3.0 * x[(i, 1)]).sin() + rng.random_range(-2.0..2.0);
        }
        (x, y)
    }

    #[test]
    fn training_loss_is_non_increasing() {
        let (x, y) = synthetic(500, 6, 3);
        let cfg = GbdtConfig {
            learning_rate: 0.1,
            n_estimators: 271,
            max_depth: 5,
            min_child_weight: 6.0,
            gamma: 0.0,
            reg_alpha: 100.0,
            ..Default::default()
        };
        let model = gbdt_train(&cfg, &x, &y).unwrap();
        assert_eq!(model.train_loss.len(), 271);
        let mut prev = model.initial_loss;
        for &loss in &model.train_loss {
            assert!(loss <= prev, "{loss} > {prev}");
            prev = loss;
        }
        assert!(prev < 0.2 * model.initial_loss);
    }

    #[test]
    fn informative_feature_has_the_largest_gain() {
        let (x, y) = synthetic(400, 5, 9);
        let cfg = GbdtConfig { n_estimators: 30, max_depth: 3, learning_rate: 0.2, ..Default::default() };
        let gains = gbdt_feature_gain(&gbdt_train(&cfg, &x, &y).unwrap());
        assert!(gains.iter().all(|g| g.is_finite() && *g >= 0.0));
        assert_eq!(super::super::argmax(&gains), 0);
    }

    #[test]
    fn classifier_learns_and_outputs_probabilities() {
        let (x, y) = synthetic(300, 3, 5);
        let labels: Vec<f64> = y.iter().map(|v| if *v < 90.0 { 0.0 } else if *v < 110.0 { 1.0 } else { 2.0 }).collect();
        let cfg = GbdtConfig {
            n_estimators: 40,
            max_depth: 3,
            learning_rate: 0.3,
            subsample: 0.8,
            colsample: 0.8,
            objective: Objective::SoftmaxCrossEntropy { classes: 3 },
            ..Default::default()
        };
        let model = gbdt_train(&cfg, &x, &labels).unwrap();
        assert_eq!(model.trees.len(), 120);
        let p = gbdt_predict(&model, &x).unwrap();
        let mut correct = 0;
        for i in 0..x.rows() {
            let row = p.row(i);
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            correct += usize::from(super::super::argmax(row) as f64 == labels[i]);
        }
        assert!(correct as f64 / 300.0 > 0.9);
    }

    #[test]
    fn training_is_bit_deterministic() {
        let (x, y) = synthetic(200, 4, 1);
        let cfg = GbdtConfig { n_estimators: 20, subsample: 0.7, colsample: 0.5, seed: 42, ..Default::default() };
        let a = serde_json::to_string(&gbdt_train(&cfg, &x, &y).unwrap()).unwrap();
        let b = serde_json::to_string(&gbdt_train(&cfg, &x, &y).unwrap()).unwrap();
        assert_eq!(a, b);
        let back: GbdtModel = serde_json::from_str(&a).unwrap();
        assert_eq!(serde_json::to_string(&back).unwrap(), a);
    }

    #[test]
    fn rejects_bad_input() {
        let x = matrix(&[vec![1.0], vec![2.0]]);
        assert!(matches!(gbdt_train(&GbdtConfig::default(), &x, &[1.0]), Err(LearnError::LabelCount { .. })));
        let cls = GbdtConfig { objective: Objective::SoftmaxCrossEntropy { classes: 2 }, ..Default::default() };
        assert!(matches!(gbdt_train(&cls, &x, &[0.0, 2.0]), Err(LearnError::InvalidLabel { .. })));
        let zero = GbdtConfig { n_estimators: 0, ..Default::default() };
        assert!(matches!(gbdt_train(&zero, &x, &[0.0, 1.0]), Err(LearnError::InvalidConfig(_))));
        let model = gbdt_train(&GbdtConfig::default(), &x, &[0.0, 1.0]).unwrap();
        let wide = matrix(&[vec![1.0, 2.0]]);
        assert!(matches!(gbdt_predict(&model, &wide), Err(LearnError::FeatureCount { .. })));
    }
}
