//! Per-cell signal tags over the cross-domain macro-F1 matrix.
//!
//! The matrix convention everywhere: rows are models, columns are test
//! sets, specialists first in matching order, the generalist row and the
//! pooled test column last. A specialist's diagonal cell is its
//! in-domain score.

use serde::{Deserialize, Serialize};

/// What one matrix cell says about judge-specific signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalTag {
    /// Diagonal: specialist in-domain beats the generalist on the same
    /// test set.
    SpecialistBeatsGeneralist,
    /// Diagonal: specialist does not beat the generalist there.
    UnderperformsGeneralist,
    /// Off-diagonal: in-domain minus cell exceeds 5 points.
    StrongDrop,
    /// Off-diagonal: drop in (0, 5] points; the 5.0 boundary lands here.
    WeakDrop,
    /// Off-diagonal: no drop at all.
    EqualOrImproved,
}

impl SignalTag {
    pub fn as_str(self) -> &'static str {
        match self {
            SignalTag::SpecialistBeatsGeneralist => "specialist_beats_generalist",
            SignalTag::UnderperformsGeneralist => "underperforms_generalist",
            SignalTag::StrongDrop => "strong_drop",
            SignalTag::WeakDrop => "weak_drop",
            SignalTag::EqualOrImproved => "equal_or_improved",
        }
    }

    /// Compact cell marker for the Markdown matrix.
    pub fn code(self) -> &'static str {
        match self {
            SignalTag::SpecialistBeatsGeneralist => "^",
            SignalTag::UnderperformsGeneralist => "!",
            SignalTag::StrongDrop => "vv",
            SignalTag::WeakDrop => "v",
            SignalTag::EqualOrImproved => "=",
        }
    }
}

/// Tag counts over one matrix; the off-diagonal triple partitions the
/// off-diagonal specialist cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SignalSummary {
    /// Diagonal cells where the specialist beats the generalist.
    pub specialist_wins: usize,
    pub diagonal_cells: usize,
    pub strong_drops: usize,
    pub weak_drops: usize,
    pub equal_or_improved: usize,
    pub off_diagonal_cells: usize,
}

/// Drop threshold separating strong from weak signal, in F1 points.
pub const STRONG_DROP_POINTS: f64 = 5.0;

/// Tags every cell of a (specialists + generalist) square matrix. Cells
/// in the generalist row stay untagged. Returns the tag grid and the
/// summary counts.
pub fn classify_signals(cells: &[Vec<f64>]) -> (Vec<Vec<Option<SignalTag>>>, SignalSummary) {
    let n = cells.len();
    let mut tags = vec![vec![None; n]; n];
    let mut summary = SignalSummary::default();
    if n < 2 {
        return (tags, summary);
    }
    let generalist = n - 1;
    for r in 0..generalist {
        let in_domain = cells[r][r];
        for c in 0..n {
            let tag = if c == r {
                summary.diagonal_cells += 1;
                if in_domain > cells[generalist][c] {
                    summary.specialist_wins += 1;
                    SignalTag::SpecialistBeatsGeneralist
                } else {
                    SignalTag::UnderperformsGeneralist
                }
            } else {
                summary.off_diagonal_cells += 1;
                let drop = in_domain - cells[r][c];
                if drop > STRONG_DROP_POINTS {
                    summary.strong_drops += 1;
                    SignalTag::StrongDrop
                } else if drop > 0.0 {
                    summary.weak_drops += 1;
                    SignalTag::WeakDrop
                } else {
                    summary.equal_or_improved += 1;
                    SignalTag::EqualOrImproved
                }
            };
            tags[r][c] = Some(tag);
        }
    }
    (tags, summary)
}
