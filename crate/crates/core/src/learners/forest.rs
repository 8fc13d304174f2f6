//! Bagged tree ensemble with soft voting.
//!
//! Each tree draws its own bootstrap sample and samples
//! floor(sqrt(columns)) candidate columns at every node. Tree seeds
//! derive from the forest seed and the tree index, so fits are
//! reproducible regardless of thread scheduling. Predictions average the
//! leaf class frequencies across trees before the argmax.

use super::tree::{fit_decision_tree, TreeModel, TreeParams};
use super::{argmax_tie_low, check_training_input, LearnError, N_CLASSES};
use crate::dataset::BinMatrix;
use crate::seeding::{rng_for, SeedPart};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_estimators: usize,
    pub max_depth: Option<usize>,
    /// Resample rows with replacement per tree; `false` trains every tree
    /// on the full set (they still differ through column sampling).
    pub bootstrap: bool,
    pub min_samples_leaf: usize,
    pub min_samples_split: usize,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_estimators: 100,
            max_depth: None,
            bootstrap: true,
            min_samples_leaf: 1,
            min_samples_split: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    trees: Vec<TreeModel>,
    n_cols: usize,
    /// Mean decrease in impurity, normalized to sum to one.
    importances: Vec<f64>,
}

impl ForestModel {
    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn importances(&self) -> &[f64] {
        &self.importances
    }

    pub fn predict_proba(&self, x: &BinMatrix) -> Vec<[f64; N_CLASSES]> {
        (0..x.n_rows())
            .map(|i| {
                let mut acc = [0.0; N_CLASSES];
                for tree in &self.trees {
                    let freq = tree.predict_row(x.row(i));
                    for c in 0..N_CLASSES {
                        acc[c] += freq[c];
                    }
                }
                for v in &mut acc {
                    *v /= self.trees.len() as f64;
                }
                acc
            })
            .collect()
    }

    pub fn predict(&self, x: &BinMatrix) -> Vec<u8> {
        self.predict_proba(x).iter().map(|p| argmax_tie_low(p) as u8).collect()
    }
}

pub fn fit_random_forest(
    x: &BinMatrix,
    y: &[u8],
    params: &ForestParams,
    seed: u64,
) -> Result<ForestModel, LearnError> {
    check_training_input(x, y)?;
    if params.n_estimators == 0 {
        return Err(LearnError::BadParam("n_estimators must be at least 1".into()));
    }
    let n = x.n_rows();
    let mtry = (x.n_cols() as f64).sqrt().floor().max(1.0) as usize;
    let tree_params = TreeParams {
        max_depth: params.max_depth,
        min_samples_leaf: params.min_samples_leaf,
        min_samples_split: params.min_samples_split,
        feature_subsample: Some(mtry),
    };

    let trees: Vec<TreeModel> = (0..params.n_estimators)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_for(seed, &[SeedPart::Label("tree"), SeedPart::Index(t as u64)]);
            let rows: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            fit_decision_tree(x, y, &rows, &tree_params, &mut rng)
        })
        .collect::<Result<_, _>>()?;

    let mut importances = vec![0.0; x.n_cols()];
    for tree in &trees {
        for (acc, raw) in importances.iter_mut().zip(tree.importances_raw()) {
            *acc += raw;
        }
    }
    let total: f64 = importances.iter().sum();
    if total > 0.0 {
        for v in &mut importances {
            *v /= total;
        }
    }
    Ok(ForestModel { trees, n_cols: x.n_cols(), importances })
}
