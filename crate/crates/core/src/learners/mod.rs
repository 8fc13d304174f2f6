//! From-scratch tri-class learners over one-hot binary matrices.
//!
//! Three families share a common prediction contract: decision-tree
//! ensembles with soft voting, softmax gradient boosting, and a
//! one-vs-one support vector machine trained by sequential minimal
//! optimization. Ties in any argmax resolve to the lowest class index.

mod boost;
mod forest;
mod svm;
mod tree;

pub use boost::{fit_gradient_boost, BoostModel, BoostParams};
pub use forest::{fit_random_forest, ForestModel, ForestParams};
pub use svm::{
    fit_svm, kkt_max_violation, solve_binary, BinaryDual, GammaRule, Kernel, PairClassifier,
    SvmModel, SvmParams,
};
pub use tree::{fit_decision_tree, TreeModel, TreeParams};

use crate::dataset::BinMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const N_CLASSES: usize = 3;

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("empty training set")]
    Empty,
    #[error("feature matrix has {rows} rows but {labels} labels")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("label {0} out of range")]
    LabelOutOfRange(u8),
    #[error("bad parameter: {0}")]
    BadParam(String),
    #[error("optimizer did not converge within {iterations} iterations (violation {violation:.3e})")]
    NoConvergence {
        iterations: usize,
        violation: f64,
        best: Box<BinaryDual>,
    },
}

/// Learner families selectable per experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Rf,
    Gbt,
    Svc,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Rf, Algorithm::Gbt, Algorithm::Svc];

    pub fn as_str(&self) -> &'static str {
        match self {
            Algorithm::Rf => "rf",
            Algorithm::Gbt => "gbt",
            Algorithm::Svc => "svc",
        }
    }

    pub fn parse(s: &str) -> Option<Algorithm> {
        match s {
            "rf" => Some(Algorithm::Rf),
            "gbt" => Some(Algorithm::Gbt),
            "svc" => Some(Algorithm::Svc),
            _ => None,
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Any fitted model, serializable for run artifacts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum TrainedModel {
    Forest(ForestModel),
    Boost(BoostModel),
    Svm(SvmModel),
}

impl TrainedModel {
    pub fn algorithm(&self) -> Algorithm {
        match self {
            TrainedModel::Forest(_) => Algorithm::Rf,
            TrainedModel::Boost(_) => Algorithm::Gbt,
            TrainedModel::Svm(_) => Algorithm::Svc,
        }
    }

    pub fn predict(&self, x: &BinMatrix) -> Vec<u8> {
        match self {
            TrainedModel::Forest(m) => m.predict(x),
            TrainedModel::Boost(m) => m.predict(x),
            TrainedModel::Svm(m) => m.predict(x),
        }
    }
}

/// Index of the largest score; ties go to the lowest index.
pub fn argmax_tie_low(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn check_training_input(x: &BinMatrix, y: &[u8]) -> Result<(), LearnError> {
    if x.n_rows() == 0 || y.is_empty() {
        return Err(LearnError::Empty);
    }
    if x.n_rows() != y.len() {
        return Err(LearnError::LengthMismatch { rows: x.n_rows(), labels: y.len() });
    }
    if let Some(&bad) = y.iter().find(|&&l| l as usize >= N_CLASSES) {
        return Err(LearnError::LabelOutOfRange(bad));
    }
    Ok(())
}
