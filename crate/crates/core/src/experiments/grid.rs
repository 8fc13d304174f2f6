//! Hyperparameter grids and stratified cross-validated search.
//!
//! Cells are enumerated in lexicographic axis order with every axis
//! sorted ascending; ties on the fold-mean score resolve to the first
//! enumerated cell, so the winner is the lexicographically smallest
//! parameter tuple. Support-vector cells whose kernel ignores an axis
//! collapse to one canonical cell before search.

use crate::dataset::BinMatrix;
use crate::learners::{
    fit_gradient_boost, fit_random_forest, fit_svm, Algorithm, BoostParams, ForestParams,
    GammaRule, Kernel, SvmParams, TrainedModel,
};
use crate::metrics::ConfusionMatrix;
use crate::sampling::{rebalance, stratified_kfold, Fold, FoldPlan, RebalanceTargets};
use crate::seeding::{derive_seed, SeedPart};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use super::ExperimentError;

/// Axis values for the random-forest search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestGrid {
    pub n_estimators: Vec<usize>,
    /// None means unlimited depth and sorts after every bounded depth.
    pub max_depth: Vec<Option<usize>>,
    pub bootstrap: Vec<bool>,
}

impl Default for ForestGrid {
    fn default() -> Self {
        ForestGrid {
            n_estimators: vec![100, 200, 300],
            max_depth: vec![Some(7)],
            bootstrap: vec![true],
        }
    }
}

/// Axis values for the gradient-boosting search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostGrid {
    pub n_estimators: Vec<usize>,
    pub learning_rate: Vec<f64>,
    pub gamma: Vec<f64>,
    pub subsample: Vec<f64>,
    pub colsample_bytree: Vec<f64>,
    pub min_child_weight: Vec<f64>,
    pub max_depth: Vec<usize>,
}

impl Default for BoostGrid {
    fn default() -> Self {
        BoostGrid {
            n_estimators: vec![100, 175, 250],
            learning_rate: vec![0.05, 0.125, 0.2],
            gamma: vec![0.85, 0.925, 1.0],
            subsample: vec![0.5, 0.65, 0.8],
            colsample_bytree: vec![0.5, 0.65, 0.8],
            min_child_weight: vec![5.0],
            max_depth: vec![7],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Linear,
    Poly,
    Rbf,
}

/// Axis values for the support-vector search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmGrid {
    pub kernel: Vec<KernelKind>,
    pub degree: Vec<u32>,
    pub gamma: Vec<GammaRule>,
    pub coef0: Vec<f64>,
    pub c: Vec<f64>,
}

impl Default for SvmGrid {
    fn default() -> Self {
        SvmGrid {
            kernel: vec![KernelKind::Linear, KernelKind::Poly, KernelKind::Rbf],
            degree: vec![2, 3, 4],
            gamma: vec![GammaRule::Scale, GammaRule::Auto],
            coef0: vec![0.05, 0.1, 0.5],
            c: vec![1.0, 10.0, 100.0],
        }
    }
}

/// The three per-algorithm search spaces of one experiment.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GridSet {
    pub forest: ForestGrid,
    pub boost: BoostGrid,
    pub svm: SvmGrid,
}

/// One concrete grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum CellParams {
    Forest(ForestParams),
    Boost(BoostParams),
    Svm(SvmParams),
}

impl CellParams {
    /// Stable human-readable label used in reports and provenance.
    pub fn label(&self) -> String {
        match self {
            CellParams::Forest(p) => {
                let depth = p.max_depth.map_or("none".to_string(), |d| d.to_string());
                format!("trees={} depth={} bootstrap={}", p.n_estimators, depth, p.bootstrap)
            }
            CellParams::Boost(p) => format!(
                "rounds={} lr={} gamma={} subsample={} colsample={} mcw={} depth={}",
                p.n_estimators,
                p.learning_rate,
                p.gamma,
                p.subsample,
                p.colsample_bytree,
                p.min_child_weight,
                p.max_depth
            ),
            CellParams::Svm(p) => {
                let mut s = String::new();
                match p.kernel {
                    Kernel::Linear => s.push_str("kernel=linear"),
                    Kernel::Poly { degree, coef0 } => {
                        write!(s, "kernel=poly degree={degree} coef0={coef0}").unwrap();
                    }
                    Kernel::Rbf => s.push_str("kernel=rbf"),
                }
                if !matches!(p.kernel, Kernel::Linear) {
                    match p.gamma {
                        GammaRule::Scale => s.push_str(" gamma=scale"),
                        GammaRule::Auto => s.push_str(" gamma=auto"),
                        GammaRule::Value(v) => write!(s, " gamma={v}").unwrap(),
                    }
                }
                write!(s, " C={}", p.c).unwrap();
                s
            }
        }
    }
}

fn sorted_f64(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("grid axis values are finite"));
    v.dedup();
    v
}

fn sorted_usize(values: &[usize]) -> Vec<usize> {
    let mut v = values.to_vec();
    v.sort_unstable();
    v.dedup();
    v
}

fn sorted_depths(values: &[Option<usize>]) -> Vec<Option<usize>> {
    let mut v = values.to_vec();
    v.sort_by_key(|d| d.map_or(usize::MAX, |x| x));
    v.dedup();
    v
}

fn gamma_rank(rule: &GammaRule) -> (u8, f64) {
    match rule {
        GammaRule::Auto => (0, 0.0),
        GammaRule::Scale => (1, 0.0),
        GammaRule::Value(v) => (2, *v),
    }
}

fn sorted_gammas(values: &[GammaRule]) -> Vec<GammaRule> {
    let mut v = values.to_vec();
    v.sort_by(|a, b| {
        let (ra, va) = gamma_rank(a);
        let (rb, vb) = gamma_rank(b);
        ra.cmp(&rb).then(va.partial_cmp(&vb).expect("finite gamma"))
    });
    v.dedup();
    v
}

/// Enumerates a grid's cells in tie-break order.
pub fn enumerate_cells(algorithm: Algorithm, grids: &GridSet) -> Result<Vec<CellParams>, ExperimentError> {
    let cells = match algorithm {
        Algorithm::Rf => {
            let mut out = Vec::new();
            for &n in &sorted_usize(&grids.forest.n_estimators) {
                for &depth in &sorted_depths(&grids.forest.max_depth) {
                    let mut flags = grids.forest.bootstrap.clone();
                    flags.sort_unstable();
                    flags.dedup();
                    for &bootstrap in &flags {
                        out.push(CellParams::Forest(ForestParams {
                            n_estimators: n,
                            max_depth: depth,
                            bootstrap,
                            ..ForestParams::default()
                        }));
                    }
                }
            }
            out
        }
        Algorithm::Gbt => {
            let mut out = Vec::new();
            for &n in &sorted_usize(&grids.boost.n_estimators) {
                for &lr in &sorted_f64(&grids.boost.learning_rate) {
                    for &gamma in &sorted_f64(&grids.boost.gamma) {
                        for &subsample in &sorted_f64(&grids.boost.subsample) {
                            for &colsample in &sorted_f64(&grids.boost.colsample_bytree) {
                                for &mcw in &sorted_f64(&grids.boost.min_child_weight) {
                                    for &depth in &sorted_usize(&grids.boost.max_depth) {
                                        out.push(CellParams::Boost(BoostParams {
                                            n_estimators: n,
                                            learning_rate: lr,
                                            gamma,
                                            subsample,
                                            colsample_bytree: colsample,
                                            min_child_weight: mcw,
                                            max_depth: depth,
                                            ..BoostParams::default()
                                        }));
                                    }
                                }
                            }
                        }
                    }
                }
            }
            out
        }
        Algorithm::Svc => {
            let mut kernels = grids.svm.kernel.clone();
            kernels.sort();
            kernels.dedup();
            let mut out: Vec<CellParams> = Vec::new();
            let mut seen = std::collections::BTreeSet::new();
            for &kind in &kernels {
                for &degree in &sorted_usize(
                    &grids.svm.degree.iter().map(|&d| d as usize).collect::<Vec<_>>(),
                ) {
                    for &gamma in &sorted_gammas(&grids.svm.gamma) {
                        for &coef0 in &sorted_f64(&grids.svm.coef0) {
                            for &c in &sorted_f64(&grids.svm.c) {
                                let params = SvmParams {
                                    kernel: match kind {
                                        KernelKind::Linear => Kernel::Linear,
                                        KernelKind::Poly => {
                                            Kernel::Poly { degree: degree as u32, coef0 }
                                        }
                                        KernelKind::Rbf => Kernel::Rbf,
                                    },
                                    gamma,
                                    c,
                                    ..SvmParams::default()
                                };
                                // Axes the kernel ignores collapse to one
                                // canonical cell; the first (smallest)
                                // tuple survives.
                                let canon = CellParams::Svm(params.clone()).label();
                                if seen.insert(canon) {
                                    out.push(CellParams::Svm(params));
                                }
                            }
                        }
                    }
                }
            }
            out
        }
    };
    if cells.is_empty() {
        return Err(ExperimentError::EmptyGrid(algorithm));
    }
    Ok(cells)
}

/// Fits one cell on already-selected training rows.
pub fn fit_cell(
    x: &BinMatrix,
    y: &[u8],
    params: &CellParams,
    seed: u64,
) -> Result<TrainedModel, ExperimentError> {
    let model = match params {
        CellParams::Forest(p) => TrainedModel::Forest(fit_random_forest(x, y, p, seed)?),
        CellParams::Boost(p) => TrainedModel::Boost(fit_gradient_boost(x, y, p, seed)?),
        CellParams::Svm(p) => TrainedModel::Svm(fit_svm(x, y, p)?),
    };
    Ok(model)
}

pub(super) fn macro_f1(truth: &[u8], predicted: &[u8]) -> Result<f64, ExperimentError> {
    Ok(ConfusionMatrix::from_labels(truth, predicted)?.macro_metrics().f1)
}

/// Winning cell of one search plus its cross-validation scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridOutcome {
    pub cell_index: usize,
    pub cell_label: String,
    pub params: CellParams,
    /// Winner's macro-F1 per validation fold, percent.
    pub fold_scores: Vec<f64>,
    pub f1_cv_mean: f64,
    /// Sample standard deviation of the winner's fold scores.
    pub f1_cv_std: f64,
    pub n_cells: usize,
}

pub(super) fn mean_and_sample_std(scores: &[f64]) -> (f64, f64) {
    let n = scores.len() as f64;
    let mean = scores.iter().sum::<f64>() / n;
    let std = if scores.len() < 2 {
        0.0
    } else {
        (scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    (mean, std)
}

/// Stratified k-fold search over one bucket's training rows.
///
/// `rows` are global row ids into `x`/`y`. Each fold's training side is
/// rebalanced to the preset before fitting; the rebalance draw is shared
/// by every cell so cells differ only in their parameters. Fold seeds
/// derive from (master seed, bucket, algorithm, cell, fold).
#[allow(clippy::too_many_arguments)]
pub fn grid_search(
    x: &BinMatrix,
    y: &[u8],
    rows: &[usize],
    algorithm: Algorithm,
    grids: &GridSet,
    plan_k: usize,
    targets: &RebalanceTargets,
    master_seed: u64,
    bucket: &str,
) -> Result<GridOutcome, ExperimentError> {
    let cells = enumerate_cells(algorithm, grids)?;
    let labels: Vec<u8> = rows.iter().map(|&r| y[r]).collect();
    let plan = FoldPlan {
        k: plan_k,
        seed: derive_seed(master_seed, &[SeedPart::Label("folds"), SeedPart::Label(bucket)]),
    };
    let folds: Vec<Fold> = stratified_kfold(&labels, &plan)?;

    // One rebalance draw per fold, reused across cells and algorithms.
    let mut fold_sets = Vec::with_capacity(folds.len());
    for (f, fold) in folds.iter().enumerate() {
        let tr_labels: Vec<u8> = fold.train.iter().map(|&i| labels[i]).collect();
        let seed = derive_seed(
            master_seed,
            &[SeedPart::Label("rebalance"), SeedPart::Label(bucket), SeedPart::Index(f as u64)],
        );
        let drawn = rebalance(&tr_labels, targets, seed)?;
        // Map back: fold indices are positions in `rows`.
        let train_rows: Vec<usize> = drawn.iter().map(|&i| rows[fold.train[i]]).collect();
        let val_rows: Vec<usize> = fold.val.iter().map(|&i| rows[i]).collect();
        let train_y: Vec<u8> = train_rows.iter().map(|&r| y[r]).collect();
        let val_y: Vec<u8> = val_rows.iter().map(|&r| y[r]).collect();
        let train_x = x.select_rows(&train_rows);
        let val_x = x.select_rows(&val_rows);
        fold_sets.push((train_x, train_y, val_x, val_y));
    }

    let scored: Vec<Result<Vec<f64>, ExperimentError>> = cells
        .par_iter()
        .enumerate()
        .map(|(cell_index, cell)| {
            let mut scores = Vec::with_capacity(fold_sets.len());
            for (f, (train_x, train_y, val_x, val_y)) in fold_sets.iter().enumerate() {
                let seed = derive_seed(
                    master_seed,
                    &[
                        SeedPart::Label("fit"),
                        SeedPart::Label(bucket),
                        SeedPart::Label(algorithm.as_str()),
                        SeedPart::Index(cell_index as u64),
                        SeedPart::Index(f as u64),
                    ],
                );
                let model = fit_cell(train_x, train_y, cell, seed)?;
                let predicted = model.predict(val_x);
                scores.push(macro_f1(val_y, &predicted)?);
            }
            Ok(scores)
        })
        .collect();

    let mut best: Option<(usize, f64, Vec<f64>)> = None;
    for (cell_index, scores) in scored.into_iter().enumerate() {
        let scores = scores?;
        let (mean, _) = mean_and_sample_std(&scores);
        if best.as_ref().is_none_or(|(_, best_mean, _)| mean > *best_mean) {
            best = Some((cell_index, mean, scores));
        }
    }
    let (cell_index, mean, scores) = best.expect("grid is non-empty");
    let (_, std) = mean_and_sample_std(&scores);
    Ok(GridOutcome {
        cell_index,
        cell_label: cells[cell_index].label(),
        params: cells[cell_index].clone(),
        fold_scores: scores,
        f1_cv_mean: mean,
        f1_cv_std: std,
        n_cells: cells.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::Algorithm;

    #[test]
    fn default_grids_have_published_cell_counts() {
        let grids = GridSet::default();
        let rf = enumerate_cells(Algorithm::Rf, &grids).unwrap();
        assert_eq!(rf.len(), 3);
        let gbt = enumerate_cells(Algorithm::Gbt, &grids).unwrap();
        assert_eq!(gbt.len(), 3 * 3 * 3 * 3 * 3);
        // 162 raw support-vector tuples collapse to 3 linear + 54 poly +
        // 6 rbf canonical cells.
        let svc = enumerate_cells(Algorithm::Svc, &grids).unwrap();
        assert_eq!(svc.len(), 63);
    }

    #[test]
    fn enumeration_is_lexicographic_within_axes() {
        let grids = GridSet {
            forest: ForestGrid {
                n_estimators: vec![300, 100],
                max_depth: vec![None, Some(7)],
                bootstrap: vec![true],
            },
            ..GridSet::default()
        };
        let cells = enumerate_cells(Algorithm::Rf, &grids).unwrap();
        let labels: Vec<String> = cells.iter().map(CellParams::label).collect();
        assert_eq!(
            labels,
            vec![
                "trees=100 depth=7 bootstrap=true",
                "trees=100 depth=none bootstrap=true",
                "trees=300 depth=7 bootstrap=true",
                "trees=300 depth=none bootstrap=true",
            ]
        );
    }

    #[test]
    fn svm_cells_ignore_irrelevant_axes() {
        let grids = GridSet {
            svm: SvmGrid {
                kernel: vec![KernelKind::Linear, KernelKind::Rbf],
                degree: vec![2, 3],
                gamma: vec![GammaRule::Scale, GammaRule::Auto],
                coef0: vec![0.0, 0.5],
                c: vec![1.0],
            },
            ..GridSet::default()
        };
        let cells = enumerate_cells(Algorithm::Svc, &grids).unwrap();
        let labels: Vec<String> = cells.iter().map(CellParams::label).collect();
        assert_eq!(labels, vec!["kernel=linear C=1", "kernel=rbf gamma=auto C=1", "kernel=rbf gamma=scale C=1"]);
    }

    #[test]
    fn empty_grid_is_an_error() {
        let grids = GridSet {
            forest: ForestGrid { n_estimators: vec![], max_depth: vec![], bootstrap: vec![] },
            ..GridSet::default()
        };
        assert!(matches!(
            enumerate_cells(Algorithm::Rf, &grids),
            Err(ExperimentError::EmptyGrid(Algorithm::Rf))
        ));
    }

    #[test]
    fn sample_std_matches_hand_value() {
        let (mean, std) = mean_and_sample_std(&[80.0, 82.0, 84.0, 86.0, 88.0]);
        assert!((mean - 84.0).abs() < 1e-12);
        assert!((std - 10.0_f64.sqrt()).abs() < 1e-12);
    }
}
