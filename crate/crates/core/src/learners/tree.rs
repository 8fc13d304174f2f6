//! Single classification tree over binary features, split by Gini decrease.
//!
//! Every column is 0/1 after one-hot encoding, so each split sends zeros
//! left and ones right; the only search is over which column to test.
//! Candidate columns are scanned in ascending index order and a new best
//! must be strictly better, so equal-gain ties resolve to the lowest
//! column index. Leaves hold class-frequency vectors for soft voting.

use super::{argmax_tie_low, check_training_input, LearnError, N_CLASSES};
use crate::dataset::BinMatrix;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// Depth of the deepest split node; `None` grows until pure.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub min_samples_split: usize,
    /// Columns sampled per node; `None` considers every column.
    pub feature_subsample: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: None,
            min_samples_leaf: 1,
            min_samples_split: 2,
            feature_subsample: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split { feature: usize, left: usize, right: usize },
    Leaf { freq: [f64; N_CLASSES] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    nodes: Vec<Node>,
    n_cols: usize,
    /// Per-column Gini decrease weighted by node size over root size.
    importances: Vec<f64>,
}

impl TreeModel {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn importances_raw(&self) -> &[f64] {
        &self.importances
    }

    pub fn root_split_feature(&self) -> Option<usize> {
        match self.nodes[0] {
            Node::Split { feature, .. } => Some(feature),
            Node::Leaf { .. } => None,
        }
    }

    pub fn predict_row(&self, row: &[u8]) -> [f64; N_CLASSES] {
        assert_eq!(row.len(), self.n_cols, "row width mismatch");
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Split { feature, left, right } => {
                    at = if row[feature] == 0 { left } else { right };
                }
                Node::Leaf { freq } => return freq,
            }
        }
    }

    pub fn predict(&self, x: &BinMatrix) -> Vec<u8> {
        (0..x.n_rows())
            .map(|i| argmax_tie_low(&self.predict_row(x.row(i))) as u8)
            .collect()
    }
}

fn gini(counts: &[usize; N_CLASSES], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let mut sum_sq = 0.0;
    for &c in counts {
        let p = c as f64 / n as f64;
        sum_sq += p * p;
    }
    1.0 - sum_sq
}

fn class_counts(y: &[u8], rows: &[usize]) -> [usize; N_CLASSES] {
    let mut counts = [0; N_CLASSES];
    for &i in rows {
        counts[y[i] as usize] += 1;
    }
    counts
}

struct Builder<'a> {
    x: &'a BinMatrix,
    y: &'a [u8],
    params: &'a TreeParams,
    nodes: Vec<Node>,
    importances: Vec<f64>,
    n_root: usize,
}

impl Builder<'_> {
    fn candidate_columns(&self, rng: &mut ChaCha20Rng) -> Vec<usize> {
        let d = self.x.n_cols();
        match self.params.feature_subsample {
            Some(m) if m < d => {
                let mut cols: Vec<usize> = rand::seq::index::sample(rng, d, m).into_vec();
                cols.sort_unstable();
                cols
            }
            _ => (0..d).collect(),
        }
    }

    fn leaf(&mut self, counts: &[usize; N_CLASSES], n: usize) -> usize {
        let mut freq = [0.0; N_CLASSES];
        for c in 0..N_CLASSES {
            freq[c] = counts[c] as f64 / n as f64;
        }
        self.nodes.push(Node::Leaf { freq });
        self.nodes.len() - 1
    }

    fn build(&mut self, rows: Vec<usize>, depth: usize, rng: &mut ChaCha20Rng) -> usize {
        let n = rows.len();
        let counts = class_counts(self.y, &rows);
        let impurity = gini(&counts, n);
        let depth_capped = self.params.max_depth.is_some_and(|d| depth >= d);
        if impurity == 0.0 || n < self.params.min_samples_split || depth_capped {
            return self.leaf(&counts, n);
        }

        let mut best: Option<(f64, usize)> = None;
        for f in self.candidate_columns(rng) {
            let mut left_counts = [0; N_CLASSES];
            let mut n_left = 0;
            for &i in &rows {
                if self.x.get(i, f) == 0 {
                    left_counts[self.y[i] as usize] += 1;
                    n_left += 1;
                }
            }
            let n_right = n - n_left;
            if n_left < self.params.min_samples_leaf || n_right < self.params.min_samples_leaf {
                continue;
            }
            let mut right_counts = [0; N_CLASSES];
            for c in 0..N_CLASSES {
                right_counts[c] = counts[c] - left_counts[c];
            }
            let weighted = (n_left as f64 * gini(&left_counts, n_left)
                + n_right as f64 * gini(&right_counts, n_right))
                / n as f64;
            // Zero-decrease splits are admitted so that structure only
            // visible deeper down (crossed features) stays reachable.
            let decrease = impurity - weighted;
            if best.map_or(true, |(g, _)| decrease > g) {
                best = Some((decrease, f));
            }
        }

        let Some((decrease, feature)) = best else {
            return self.leaf(&counts, n);
        };
        self.importances[feature] += decrease * n as f64 / self.n_root as f64;

        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
            rows.into_iter().partition(|&i| self.x.get(i, feature) == 0);
        let at = self.nodes.len();
        self.nodes.push(Node::Leaf { freq: [0.0; N_CLASSES] });
        let left = self.build(left_rows, depth + 1, rng);
        let right = self.build(right_rows, depth + 1, rng);
        self.nodes[at] = Node::Split { feature, left, right };
        at
    }
}

/// Fits a tree on the rows listed in `rows` (repeats allowed, as produced
/// by bootstrap resampling).
pub fn fit_decision_tree(
    x: &BinMatrix,
    y: &[u8],
    rows: &[usize],
    params: &TreeParams,
    rng: &mut ChaCha20Rng,
) -> Result<TreeModel, LearnError> {
    check_training_input(x, y)?;
    if rows.is_empty() {
        return Err(LearnError::Empty);
    }
    if params.min_samples_leaf == 0 {
        return Err(LearnError::BadParam("min_samples_leaf must be at least 1".into()));
    }
    if params.min_samples_split < 2 {
        return Err(LearnError::BadParam("min_samples_split must be at least 2".into()));
    }
    if params.feature_subsample == Some(0) {
        return Err(LearnError::BadParam("feature_subsample must be at least 1".into()));
    }
    let mut builder = Builder {
        x,
        y,
        params,
        nodes: Vec::new(),
        importances: vec![0.0; x.n_cols()],
        n_root: rows.len(),
    };
    let root = builder.build(rows.to_vec(), 0, rng);
    debug_assert_eq!(root, 0);
    Ok(TreeModel { nodes: builder.nodes, n_cols: x.n_cols(), importances: builder.importances })
}
