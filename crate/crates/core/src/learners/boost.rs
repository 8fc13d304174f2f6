//! Softmax gradient boosting with second-order regression trees.
//!
//! Class scores start at the log of the training priors, so a zero
//! learning rate reproduces the prior argmax. Each round fits one
//! regression tree per class on the softmax gradient g = p - 1{y=c}
//! and hessian h = p(1-p). Split gain is the regularized Newton gain
//! 0.5 * (GL^2/(HL+l) + GR^2/(HR+l) - G^2/(H+l)); a split is admitted
//! only when the gain strictly exceeds `gamma` and each child's hessian
//! sum reaches `min_child_weight`. Leaf weights are -G/(H+l).

use super::{argmax_tie_low, check_training_input, LearnError, N_CLASSES};
use crate::dataset::BinMatrix;
use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

const P_FLOOR: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoostParams {
    /// Boosting rounds; each round grows one tree per class.
    pub n_estimators: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    /// Minimum split gain.
    pub gamma: f64,
    /// Minimum hessian sum per child.
    pub min_child_weight: f64,
    /// L2 penalty on leaf weights.
    pub lambda: f64,
    /// Row fraction drawn (without replacement) per tree.
    pub subsample: f64,
    /// Column fraction available per tree.
    pub colsample_bytree: f64,
}

impl Default for BoostParams {
    fn default() -> Self {
        BoostParams {
            n_estimators: 100,
            learning_rate: 0.3,
            max_depth: 6,
            gamma: 0.0,
            min_child_weight: 1.0,
            lambda: 1.0,
            subsample: 1.0,
            colsample_bytree: 1.0,
        }
    }
}

impl BoostParams {
    fn validate(&self) -> Result<(), LearnError> {
        let bad = |msg: &str| Err(LearnError::BadParam(msg.into()));
        if self.n_estimators == 0 {
            return bad("n_estimators must be at least 1");
        }
        if !(self.learning_rate >= 0.0) {
            return bad("learning_rate must be non-negative");
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return bad("subsample must be in (0, 1]");
        }
        if !(self.colsample_bytree > 0.0 && self.colsample_bytree <= 1.0) {
            return bad("colsample_bytree must be in (0, 1]");
        }
        if !(self.gamma >= 0.0) {
            return bad("gamma must be non-negative");
        }
        if !(self.min_child_weight >= 0.0) {
            return bad("min_child_weight must be non-negative");
        }
        if !(self.lambda >= 0.0) {
            return bad("lambda must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum RNode {
    Split { feature: usize, left: usize, right: usize },
    Leaf { w: f64 },
}

/// Regression tree over binary columns emitting additive score updates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegTree {
    nodes: Vec<RNode>,
}

impl RegTree {
    fn predict_row(&self, row: &[u8]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                RNode::Split { feature, left, right } => {
                    at = if row[feature] == 0 { left } else { right };
                }
                RNode::Leaf { w } => return w,
            }
        }
    }

    #[cfg(test)]
    fn is_leaf_only(&self) -> bool {
        self.nodes.len() == 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostModel {
    base: [f64; N_CLASSES],
    /// One tree per class per round.
    rounds: Vec<Vec<RegTree>>,
    learning_rate: f64,
    n_cols: usize,
    /// Multiclass log loss on the training rows after each round.
    train_loss: Vec<f64>,
}

impl BoostModel {
    pub fn n_rounds(&self) -> usize {
        self.rounds.len()
    }

    pub fn train_loss(&self) -> &[f64] {
        &self.train_loss
    }

    pub fn decision_scores(&self, x: &BinMatrix) -> Vec<[f64; N_CLASSES]> {
        (0..x.n_rows())
            .map(|i| {
                let row = x.row(i);
                let mut s = self.base;
                for round in &self.rounds {
                    for (c, tree) in round.iter().enumerate() {
                        s[c] += self.learning_rate * tree.predict_row(row);
                    }
                }
                s
            })
            .collect()
    }

    pub fn predict(&self, x: &BinMatrix) -> Vec<u8> {
        self.decision_scores(x).iter().map(|s| argmax_tie_low(s) as u8).collect()
    }
}

fn softmax(scores: &[f64; N_CLASSES]) -> [f64; N_CLASSES] {
    let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut e = [0.0; N_CLASSES];
    let mut z = 0.0;
    for c in 0..N_CLASSES {
        e[c] = (scores[c] - m).exp();
        z += e[c];
    }
    for v in &mut e {
        *v /= z;
    }
    e
}

struct TreeBuilder<'a> {
    x: &'a BinMatrix,
    g: &'a [f64],
    h: &'a [f64],
    cols: &'a [usize],
    params: &'a BoostParams,
    nodes: Vec<RNode>,
}

impl TreeBuilder<'_> {
    fn leaf(&mut self, g_sum: f64, h_sum: f64) -> usize {
        self.nodes.push(RNode::Leaf { w: -g_sum / (h_sum + self.params.lambda) });
        self.nodes.len() - 1
    }

    fn build(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let g_sum: f64 = rows.iter().map(|&i| self.g[i]).sum();
        let h_sum: f64 = rows.iter().map(|&i| self.h[i]).sum();
        if depth >= self.params.max_depth || rows.len() < 2 {
            return self.leaf(g_sum, h_sum);
        }
        let lambda = self.params.lambda;
        let parent_score = g_sum * g_sum / (h_sum + lambda);
        let mut best: Option<(f64, usize)> = None;
        for &f in self.cols {
            let mut gl = 0.0;
            let mut hl = 0.0;
            for &i in &rows {
                if self.x.get(i, f) == 0 {
                    gl += self.g[i];
                    hl += self.h[i];
                }
            }
            let gr = g_sum - gl;
            let hr = h_sum - hl;
            if hl < self.params.min_child_weight || hr < self.params.min_child_weight {
                continue;
            }
            let gain = 0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - parent_score);
            if gain > self.params.gamma && best.map_or(true, |(g, _)| gain > g) {
                best = Some((gain, f));
            }
        }
        let Some((_, feature)) = best else {
            return self.leaf(g_sum, h_sum);
        };
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
            rows.into_iter().partition(|&i| self.x.get(i, feature) == 0);
        let at = self.nodes.len();
        self.nodes.push(RNode::Leaf { w: 0.0 });
        let left = self.build(left_rows, depth + 1);
        let right = self.build(right_rows, depth + 1);
        self.nodes[at] = RNode::Split { feature, left, right };
        at
    }
}

pub fn fit_gradient_boost(
    x: &BinMatrix,
    y: &[u8],
    params: &BoostParams,
    seed: u64,
) -> Result<BoostModel, LearnError> {
    check_training_input(x, y)?;
    params.validate()?;
    let n = x.n_rows();
    let d = x.n_cols();

    let mut base = [0.0; N_CLASSES];
    for c in 0..N_CLASSES {
        let count = y.iter().filter(|&&l| l as usize == c).count();
        base[c] = (count as f64 / n as f64).max(P_FLOOR).ln();
    }

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut scores: Vec<[f64; N_CLASSES]> = vec![base; n];
    let mut rounds = Vec::with_capacity(params.n_estimators);
    let mut train_loss = Vec::with_capacity(params.n_estimators);
    let n_sub = ((params.subsample * n as f64).floor() as usize).max(1);
    let n_cols_sub = ((params.colsample_bytree * d as f64).floor() as usize).max(1);

    for _ in 0..params.n_estimators {
        let probs: Vec<[f64; N_CLASSES]> = scores.iter().map(softmax).collect();
        let mut round = Vec::with_capacity(N_CLASSES);
        for c in 0..N_CLASSES {
            let g: Vec<f64> = (0..n)
                .map(|i| probs[i][c] - if y[i] as usize == c { 1.0 } else { 0.0 })
                .collect();
            let h: Vec<f64> = (0..n).map(|i| probs[i][c] * (1.0 - probs[i][c])).collect();
            let rows: Vec<usize> = if n_sub < n {
                let mut all: Vec<usize> = (0..n).collect();
                all.shuffle(&mut rng);
                all.truncate(n_sub);
                all
            } else {
                (0..n).collect()
            };
            let cols: Vec<usize> = if n_cols_sub < d {
                let mut cols = rand::seq::index::sample(&mut rng, d, n_cols_sub).into_vec();
                cols.sort_unstable();
                cols
            } else {
                (0..d).collect()
            };
            let mut builder =
                TreeBuilder { x, g: &g, h: &h, cols: &cols, params, nodes: Vec::new() };
            let root = builder.build(rows, 0);
            debug_assert_eq!(root, 0);
            round.push(RegTree { nodes: builder.nodes });
        }
        for (i, s) in scores.iter_mut().enumerate() {
            let row = x.row(i);
            for (c, tree) in round.iter().enumerate() {
                s[c] += params.learning_rate * tree.predict_row(row);
            }
        }
        let loss: f64 = scores
            .iter()
            .zip(y)
            .map(|(s, &yi)| -softmax(s)[yi as usize].max(P_FLOOR).ln())
            .sum::<f64>()
            / n as f64;
        train_loss.push(loss);
        rounds.push(round);
    }

    Ok(BoostModel { base, rounds, learning_rate: params.learning_rate, n_cols: d, train_loss })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn tiny_params() -> BoostParams {
        BoostParams {
            n_estimators: 1,
            learning_rate: 0.5,
            max_depth: 1,
            gamma: 0.0,
            min_child_weight: 0.0,
            lambda: 1.0,
            subsample: 1.0,
            colsample_bytree: 1.0,
        }
    }

    #[test]
    fn first_round_matches_hand_computed_newton_step() {
        // Six rows, one binary column, classes 0,0,1,1,2,2. With uniform
        // priors p = 1/3 everywhere: the class-0 tree splits with leaf
        // weights (0.6, -0.6), the class-1 tree has zero total gradient on
        // both sides (gain 0, stays a leaf at 0), the class-2 tree mirrors
        // class 0.
        let x = BinMatrix::from_rows(&[vec![0], vec![0], vec![0], vec![1], vec![1], vec![1]]);
        let y = [0, 0, 1, 1, 2, 2];
        let model = fit_gradient_boost(&x, &y, &tiny_params(), 0).unwrap();
        let base = (1.0f64 / 3.0).ln();
        let scores = model.decision_scores(&x);
        let lr = 0.5;
        assert_relative_eq!(scores[0][0], base + lr * 0.6, epsilon = 1e-12);
        assert_relative_eq!(scores[0][1], base, epsilon = 1e-12);
        assert_relative_eq!(scores[0][2], base - lr * 0.6, epsilon = 1e-12);
        assert_relative_eq!(scores[5][0], base - lr * 0.6, epsilon = 1e-12);
        assert_relative_eq!(scores[5][1], base, epsilon = 1e-12);
        assert_relative_eq!(scores[5][2], base + lr * 0.6, epsilon = 1e-12);
        assert!(model.rounds[0][1].is_leaf_only());
    }

    #[test]
    fn zero_learning_rate_predicts_the_prior() {
        let x = BinMatrix::from_rows(&[vec![0, 1], vec![1, 0], vec![1, 1], vec![0, 0]]);
        let params = BoostParams { learning_rate: 0.0, n_estimators: 5, ..tiny_params() };
        let model = fit_gradient_boost(&x, &[0, 0, 1, 2], &params, 0).unwrap();
        assert_eq!(model.predict(&x), vec![0, 0, 0, 0]);
        let model = fit_gradient_boost(&x, &[2, 1, 1, 2], &params, 0).unwrap();
        // Classes 1 and 2 tie at the prior; the lower index wins.
        assert_eq!(model.predict(&x), vec![1, 1, 1, 1]);
    }

    fn block_data(n_per_class: usize, seed: u64) -> (BinMatrix, Vec<u8>) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for c in 0..3u8 {
            for _ in 0..n_per_class {
                let mut row = vec![0u8; 9];
                row[c as usize * 2] = 1;
                row[c as usize * 2 + 1] = 1;
                for j in 6..9 {
                    row[j] = rng.random_range(0..2);
                }
                rows.push(row);
                y.push(c);
            }
        }
        (BinMatrix::from_rows(&rows), y)
    }

    #[test]
    fn training_loss_falls_and_data_separates() {
        let (x, y) = block_data(15, 17);
        let params = BoostParams {
            n_estimators: 30,
            learning_rate: 0.2,
            max_depth: 3,
            ..BoostParams::default()
        };
        let model = fit_gradient_boost(&x, &y, &params, 5).unwrap();
        let loss = model.train_loss();
        assert_eq!(loss.len(), 30);
        assert!(loss[29] < loss[0], "loss {} -> {}", loss[0], loss[29]);
        let pred = model.predict(&x);
        let hits = pred.iter().zip(&y).filter(|(a, b)| a == b).count();
        assert!(hits as f64 / y.len() as f64 >= 0.95);
    }

    #[test]
    fn huge_gamma_blocks_every_split() {
        let (x, y) = block_data(10, 3);
        let params = BoostParams { gamma: 1e9, n_estimators: 4, ..BoostParams::default() };
        let model = fit_gradient_boost(&x, &y, &params, 1).unwrap();
        assert!(model.rounds.iter().flatten().all(RegTree::is_leaf_only));
    }

    #[test]
    fn huge_min_child_weight_blocks_every_split() {
        let (x, y) = block_data(10, 4);
        let params = BoostParams { min_child_weight: 1e9, n_estimators: 4, ..BoostParams::default() };
        let model = fit_gradient_boost(&x, &y, &params, 1).unwrap();
        assert!(model.rounds.iter().flatten().all(RegTree::is_leaf_only));
    }

    #[test]
    fn subsampling_is_seed_deterministic() {
        let (x, y) = block_data(12, 8);
        let params = BoostParams {
            n_estimators: 10,
            subsample: 0.7,
            colsample_bytree: 0.6,
            ..BoostParams::default()
        };
        let a = fit_gradient_boost(&x, &y, &params, 33).unwrap();
        let b = fit_gradient_boost(&x, &y, &params, 33).unwrap();
        assert_eq!(a.predict(&x), b.predict(&x));
        assert_eq!(a.train_loss(), b.train_loss());
    }

    #[test]
    fn rejects_bad_params() {
        let x = BinMatrix::from_rows(&[vec![0], vec![1]]);
        let y = [0, 1];
        for params in [
            BoostParams { n_estimators: 0, ..BoostParams::default() },
            BoostParams { learning_rate: -0.1, ..BoostParams::default() },
            BoostParams { subsample: 0.0, ..BoostParams::default() },
            BoostParams { subsample: 1.2, ..BoostParams::default() },
            BoostParams { colsample_bytree: 0.0, ..BoostParams::default() },
            BoostParams { gamma: -1.0, ..BoostParams::default() },
            BoostParams { lambda: -0.5, ..BoostParams::default() },
        ] {
            assert!(matches!(
                fit_gradient_boost(&x, &y, &params, 0),
                Err(LearnError::BadParam(_))
            ));
        }
    }

    #[test]
    fn serialization_preserves_predictions() {
        let (x, y) = block_data(8, 21);
        let params = BoostParams { n_estimators: 8, ..BoostParams::default() };
        let model = fit_gradient_boost(&x, &y, &params, 2).unwrap();
        let json = serde_json::to_string(&model).unwrap();
        let back: BoostModel = serde_json::from_str(&json).unwrap();
        assert_eq!(back.predict(&x), model.predict(&x));
    }
}
