//! Tri-class evaluation: confusion matrices, macro-averaged percentage
//! metrics, and Cohen's kappa for annotation agreement.
//!
//! Conventions, fixed across the whole pipeline:
//! - confusion rows index the true class, columns the predicted class;
//! - precision = TP / column sum, recall = TP / row sum, F1 harmonic;
//! - a zero denominator contributes 0 (a class absent from both truth and
//!   prediction counts as 0 toward the macro mean, not as a skipped class);
//! - macro scores are unweighted means over all three classes;
//! - reported values are percentages; display rounding is two decimals,
//!   half away from zero.
//!
//! Micro-averaged variants hide minority-class failures under imbalance,
//! so they only compile with the `micro-metrics` feature and never appear
//! in default reports.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Outcome classes are coded 0, 1, 2 throughout.
pub const N_CLASSES: usize = 3;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("label sequences differ in length: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("label {value} out of range for {classes} classes")]
    LabelOutOfRange { value: u8, classes: usize },
    #[error("empty label sequence")]
    Empty,
}

/// 3x3 contingency table of (true class, predicted class) counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    counts: [[u64; N_CLASSES]; N_CLASSES],
}

impl ConfusionMatrix {
    pub fn from_counts(counts: [[u64; N_CLASSES]; N_CLASSES]) -> Self {
        ConfusionMatrix { counts }
    }

    pub fn from_labels(truth: &[u8], predicted: &[u8]) -> Result<Self, MetricsError> {
        if truth.len() != predicted.len() {
            return Err(MetricsError::LengthMismatch { left: truth.len(), right: predicted.len() });
        }
        if truth.is_empty() {
            return Err(MetricsError::Empty);
        }
        let mut counts = [[0u64; N_CLASSES]; N_CLASSES];
        for (&t, &p) in truth.iter().zip(predicted) {
            for v in [t, p] {
                if v as usize >= N_CLASSES {
                    return Err(MetricsError::LabelOutOfRange { value: v, classes: N_CLASSES });
                }
            }
            counts[t as usize][p as usize] += 1;
        }
        Ok(ConfusionMatrix { counts })
    }

    pub fn count(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth][predicted]
    }

    pub fn counts(&self) -> &[[u64; N_CLASSES]; N_CLASSES] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_total(&self, class: usize) -> u64 {
        self.counts[class].iter().sum()
    }

    pub fn col_total(&self, class: usize) -> u64 {
        self.counts.iter().map(|r| r[class]).sum()
    }

    pub fn diagonal_total(&self) -> u64 {
        (0..N_CLASSES).map(|c| self.counts[c][c]).sum()
    }

    /// Accuracy plus per-class and macro P/R/F1, as percentages.
    pub fn macro_metrics(&self) -> MacroMetrics {
        let total = self.total();
        let accuracy = ratio_pct(self.diagonal_total(), total);
        let mut per_class = [ClassMetrics::default(); N_CLASSES];
        for c in 0..N_CLASSES {
            let tp = self.counts[c][c];
            let precision = ratio_pct(tp, self.col_total(c));
            let recall = ratio_pct(tp, self.row_total(c));
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            per_class[c] = ClassMetrics { precision, recall, f1 };
        }
        let mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / N_CLASSES as f64;
        MacroMetrics {
            accuracy,
            precision: mean(|m| m.precision),
            recall: mean(|m| m.recall),
            f1: mean(|m| m.f1),
            per_class,
        }
    }

    /// Micro-averaged P/R/F1 (all equal to accuracy for single-label
    /// multiclass). Excluded from default builds and reports.
    #[cfg(feature = "micro-metrics")]
    pub fn micro_metrics(&self) -> ClassMetrics {
        let acc = ratio_pct(self.diagonal_total(), self.total());
        ClassMetrics { precision: acc, recall: acc, f1: acc }
    }
}

fn ratio_pct(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

/// Per-class precision/recall/F1 in percent.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Accuracy and macro-averaged scores in percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MacroMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub per_class: [ClassMetrics; N_CLASSES],
}

/// Cohen's kappa over two equal-length label sequences. Works for any
/// label alphabet that fits in u8; agreement is chance-corrected using the
/// product of the two marginal distributions.
pub fn cohens_kappa(a: &[u8], b: &[u8]) -> Result<f64, MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::LengthMismatch { left: a.len(), right: b.len() });
    }
    if a.is_empty() {
        return Err(MetricsError::Empty);
    }
    let n = a.len() as f64;
    let mut marg_a = [0u64; 256];
    let mut marg_b = [0u64; 256];
    let mut agree = 0u64;
    for (&x, &y) in a.iter().zip(b) {
        marg_a[x as usize] += 1;
        marg_b[y as usize] += 1;
        if x == y {
            agree += 1;
        }
    }
    let p_o = agree as f64 / n;
    let p_e: f64 = (0..256).map(|c| (marg_a[c] as f64 / n) * (marg_b[c] as f64 / n)).sum();
    // p_e = 1 only when both sides are constant on the same label; that is
    // full agreement, defined as kappa = 1.
    if (1.0 - p_e).abs() < 1e-15 {
        return Ok(1.0);
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}

/// Rounds a percentage to two decimals, half away from zero.
pub fn round2(pct: f64) -> f64 {
    (pct * 100.0).round() / 100.0
}

/// Canonical display form of a percentage ("90.48").
pub fn format_pct(pct: f64) -> String {
    format!("{:.2}", round2(pct))
}
