//! Seeded splits and class rebalancing.
//!
//! Holdout: the test set size is ceil(test_fraction * n); per-class test
//! counts follow largest-remainder apportionment of that size over the
//! class shares (floor of each proportional share, remainder distributed
//! by descending fractional part, ties to the lower class index). This
//! keeps every class within one row of its proportional share.
//!
//! Rebalancing draws a same-size training multiset at configured class
//! proportions: class 0 (the majority in this corpus) is undersampled
//! without replacement, classes 1 and 2 are oversampled with replacement.
//! Target rounding residue lands on class 0.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

const K_CLASSES: usize = 3;

#[derive(Debug, Error, PartialEq)]
pub enum SamplingError {
    #[error("empty input")]
    Empty,
    #[error("label {0} out of range")]
    LabelOutOfRange(u8),
    #[error("test_fraction must be in (0, 1), got {0}")]
    BadFraction(f64),
    #[error("class {class} has {count} rows, fewer than {k} folds")]
    ClassTooSmallForFolds { class: u8, count: usize, k: usize },
    #[error("fold count must be at least 2, got {0}")]
    BadFoldCount(usize),
    #[error("class {0} is absent; rebalancing needs all three classes")]
    MissingClass(u8),
    #[error("rebalance targets must be non-negative and sum to 1, got {0:?}")]
    BadTargets([f64; 3]),
    #[error("undersampling class 0 to {needed} rows is infeasible, only {available} present")]
    InfeasibleUndersample { needed: usize, available: usize },
}

fn class_indices(labels: &[u8]) -> Result<[Vec<usize>; K_CLASSES], SamplingError> {
    if labels.is_empty() {
        return Err(SamplingError::Empty);
    }
    let mut by_class: [Vec<usize>; K_CLASSES] = Default::default();
    for (i, &l) in labels.iter().enumerate() {
        if l as usize >= K_CLASSES {
            return Err(SamplingError::LabelOutOfRange(l));
        }
        by_class[l as usize].push(i);
    }
    Ok(by_class)
}

/// Largest-remainder apportionment of `total` over class counts.
fn apportion(counts: &[usize; K_CLASSES], total: usize) -> [usize; K_CLASSES] {
    let n: usize = counts.iter().sum();
    let mut quota = [0usize; K_CLASSES];
    let mut frac: Vec<(f64, usize)> = Vec::new();
    let mut assigned = 0;
    for c in 0..K_CLASSES {
        let exact = total as f64 * counts[c] as f64 / n as f64;
        quota[c] = exact.floor() as usize;
        assigned += quota[c];
        frac.push((exact - exact.floor(), c));
    }
    // Descending fractional part, ties to the lower class index.
    frac.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    for &(_, c) in frac.iter().take(total - assigned) {
        quota[c] += 1;
    }
    quota
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub test_fraction: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HoldoutSplit {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Stratified train/test split. Returned index lists are sorted ascending
/// and together cover 0..labels.len() exactly once.
pub fn holdout_split(labels: &[u8], spec: &SplitSpec) -> Result<HoldoutSplit, SamplingError> {
    if !(spec.test_fraction > 0.0 && spec.test_fraction < 1.0) {
        return Err(SamplingError::BadFraction(spec.test_fraction));
    }
    let by_class = class_indices(labels)?;
    let counts = [by_class[0].len(), by_class[1].len(), by_class[2].len()];
    let n_test = (spec.test_fraction * labels.len() as f64).ceil() as usize;
    let quota = apportion(&counts, n_test);

    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    let mut train = Vec::with_capacity(labels.len() - n_test);
    let mut test = Vec::with_capacity(n_test);
    for c in 0..K_CLASSES {
        let mut pool = by_class[c].clone();
        pool.shuffle(&mut rng);
        test.extend_from_slice(&pool[..quota[c]]);
        train.extend_from_slice(&pool[quota[c]..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(HoldoutSplit { train, test })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
}

/// Stratified k-fold assignment. Per-class validation counts differ by at
/// most one across folds. Errors name the first class with fewer rows than
/// folds.
pub fn stratified_kfold(labels: &[u8], plan: &FoldPlan) -> Result<Vec<Fold>, SamplingError> {
    if plan.k < 2 {
        return Err(SamplingError::BadFoldCount(plan.k));
    }
    let by_class = class_indices(labels)?;
    for (c, rows) in by_class.iter().enumerate() {
        if !rows.is_empty() && rows.len() < plan.k {
            return Err(SamplingError::ClassTooSmallForFolds { class: c as u8, count: rows.len(), k: plan.k });
        }
    }
    let mut rng = ChaCha20Rng::seed_from_u64(plan.seed);
    let mut fold_of = vec![0usize; labels.len()];
    for rows in &by_class {
        let mut pool = rows.clone();
        pool.shuffle(&mut rng);
        for (t, &i) in pool.iter().enumerate() {
            fold_of[i] = t % plan.k;
        }
    }
    let folds = (0..plan.k)
        .map(|f| {
            let (val, train): (Vec<usize>, Vec<usize>) = (0..labels.len()).partition(|&i| fold_of[i] == f);
            Fold { train, val }
        })
        .collect();
    Ok(folds)
}

/// Class proportions for the rebalanced training multiset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RebalanceTargets(pub [f64; 3]);

impl RebalanceTargets {
    /// Majority undersampled to 34%, minorities oversampled to 33% each.
    pub fn run1() -> Self {
        RebalanceTargets([0.34, 0.33, 0.33])
    }

    /// Majority undersampled to 40%, minorities oversampled to 30% each.
    pub fn run2() -> Self {
        RebalanceTargets([0.40, 0.30, 0.30])
    }

    fn validate(&self) -> Result<(), SamplingError> {
        let sum: f64 = self.0.iter().sum();
        if self.0.iter().any(|&p| p < 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(SamplingError::BadTargets(self.0));
        }
        Ok(())
    }
}

/// Draws a rebalanced index multiset of the same size as `labels`.
/// Requires all three classes present and a feasible class-0 target.
pub fn rebalance(labels: &[u8], targets: &RebalanceTargets, seed: u64) -> Result<Vec<usize>, SamplingError> {
    targets.validate()?;
    let by_class = class_indices(labels)?;
    for c in 0..K_CLASSES {
        if by_class[c].is_empty() {
            return Err(SamplingError::MissingClass(c as u8));
        }
    }
    let n = labels.len();
    let mut quota: [i64; K_CLASSES] = [0; 3];
    for c in 0..K_CLASSES {
        // Half away from zero, matching the display rounding convention.
        quota[c] = (targets.0[c] * n as f64).round() as i64;
    }
    let residue = n as i64 - quota.iter().sum::<i64>();
    quota[0] += residue;
    if quota[0] < 0 {
        return Err(SamplingError::BadTargets(targets.0));
    }
    let needed = quota[0] as usize;
    if needed > by_class[0].len() {
        return Err(SamplingError::InfeasibleUndersample { needed, available: by_class[0].len() });
    }

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    let mut majority = by_class[0].clone();
    majority.shuffle(&mut rng);
    out.extend_from_slice(&majority[..needed]);
    for c in 1..K_CLASSES {
        let pool = &by_class[c];
        for _ in 0..quota[c] {
            out.push(pool[rng.random_range(0..pool.len())]);
        }
    }
    out.shuffle(&mut rng);
    Ok(out)
}
