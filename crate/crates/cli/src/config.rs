//! Run configuration: one JSON file per run, command-line flags
//! overriding file values, and built-in defaults beneath both.
//!
//! Defaults match the published experiment set-up: the full learner
//! grids, a 0.2 holdout, 5 folds, a 300-ruling specialist threshold,
//! and the run1 rebalance mix. Precedence is flag, then file, then
//! default. The resolved configuration is serialized next to the
//! reports and hashed into the manifest, so a run's provenance never
//! depends on which layer supplied a value.

use crate::error::CliError;
use gavel::experiments::{ExperimentConfig, GridSet};
use gavel::learners::Algorithm;
use gavel::sampling::RebalanceTargets;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// On-disk config. Every field is optional; unknown keys are rejected.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FileConfig {
    pub corpus: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    /// Learner subset, any of "rf", "gbt", "svc".
    pub algorithms: Option<Vec<String>>,
    /// "run1" (34/33/33) or "run2" (40/30/30).
    pub run_preset: Option<String>,
    /// Explicit class targets; mutually exclusive with `run_preset`.
    pub rebalance: Option<[f64; 3]>,
    pub test_fraction: Option<f64>,
    pub folds: Option<usize>,
    pub bucket_threshold: Option<usize>,
    pub grids: Option<GridSet>,
}

/// Values taken from command-line flags.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub config: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub algorithms: Option<Vec<Algorithm>>,
    pub run_preset: Option<RebalanceTargets>,
}

/// Fully resolved run inputs.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub corpus: PathBuf,
    pub out: PathBuf,
    pub jobs: Option<usize>,
    pub experiment: ExperimentConfig,
}

pub fn parse_preset(name: &str) -> Option<RebalanceTargets> {
    match name {
        "run1" => Some(RebalanceTargets::run1()),
        "run2" => Some(RebalanceTargets::run2()),
        _ => None,
    }
}

fn load_file(path: &Path) -> Result<FileConfig, CliError> {
    let text = crate::error::read_input_text(path)?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(format!("bad config {}: {e}", path.display())))
}

/// Merges flags over the optional file over defaults.
pub fn resolve(overrides: Overrides) -> Result<Resolved, CliError> {
    let file = match &overrides.config {
        Some(path) => load_file(path)?,
        None => FileConfig::default(),
    };
    let defaults = ExperimentConfig::default();

    let corpus = overrides
        .corpus
        .or(file.corpus)
        .ok_or_else(|| CliError::Usage("no corpus given (flag --corpus or config key)".into()))?;
    let out = overrides
        .out
        .or(file.out)
        .ok_or_else(|| CliError::Usage("no output directory given (flag --out or config key)".into()))?;

    let jobs = overrides.jobs.or(file.jobs);
    if jobs == Some(0) {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }

    let algorithms = match (overrides.algorithms, &file.algorithms) {
        (Some(flag), _) => flag,
        (None, Some(names)) => names
            .iter()
            .map(|n| {
                Algorithm::parse(n).ok_or_else(|| {
                    CliError::Validation(format!("unknown algorithm {n:?} in config"))
                })
            })
            .collect::<Result<_, _>>()?,
        (None, None) => defaults.algorithms.clone(),
    };

    let rebalance = match (overrides.run_preset, &file.rebalance, &file.run_preset) {
        (Some(preset), _, _) => preset,
        (None, Some(_), Some(_)) => {
            return Err(CliError::Validation(
                "config sets both rebalance and run_preset; keep one".into(),
            ))
        }
        (None, Some(targets), None) => RebalanceTargets(*targets),
        (None, None, Some(name)) => parse_preset(name).ok_or_else(|| {
            CliError::Validation(format!("unknown run_preset {name:?} (expected run1 or run2)"))
        })?,
        (None, None, None) => defaults.rebalance,
    };

    let experiment = ExperimentConfig {
        algorithms,
        grids: file.grids.unwrap_or_else(GridSet::default),
        rebalance,
        test_fraction: file.test_fraction.unwrap_or(defaults.test_fraction),
        folds: file.folds.unwrap_or(defaults.folds),
        bucket_threshold: file.bucket_threshold.unwrap_or(defaults.bucket_threshold),
        seed: overrides.seed.or(file.seed).unwrap_or(defaults.seed),
    };
    Ok(Resolved { corpus, out, jobs, experiment })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn base_overrides() -> Overrides {
        Overrides {
            corpus: Some(PathBuf::from("c.jsonl")),
            out: Some(PathBuf::from("reports")),
            ..Overrides::default()
        }
    }

    #[test]
    fn defaults_match_published_setup() {
        let resolved = resolve(base_overrides()).unwrap();
        let e = &resolved.experiment;
        assert_eq!(e.algorithms, Algorithm::ALL.to_vec());
        assert_eq!(e.rebalance, RebalanceTargets::run1());
        assert_eq!(e.test_fraction, 0.2);
        assert_eq!(e.folds, 5);
        assert_eq!(e.bucket_threshold, 300);
        assert_eq!(e.grids, GridSet::default());
    }

    #[test]
    fn flags_override_file_values() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        write!(
            file,
            r#"{{"corpus":"file.jsonl","out":"file_out","seed":1,"folds":3,"run_preset":"run2"}}"#
        )
        .unwrap();
        let resolved = resolve(Overrides {
            config: Some(file.path().to_path_buf()),
            corpus: Some(PathBuf::from("flag.jsonl")),
            seed: Some(99),
            run_preset: Some(RebalanceTargets::run1()),
            ..Overrides::default()
        })
        .unwrap();
        assert_eq!(resolved.corpus, PathBuf::from("flag.jsonl"));
        assert_eq!(resolved.out, PathBuf::from("file_out"));
        assert_eq!(resolved.experiment.seed, 99);
        assert_eq!(resolved.experiment.folds, 3);
        assert_eq!(resolved.experiment.rebalance, RebalanceTargets::run1());
    }

    #[test]
    fn unknown_config_key_is_rejected() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        write!(file, r#"{{"corpus":"c.jsonl","out":"o","typo_key":1}}"#).unwrap();
        let err = resolve(Overrides {
            config: Some(file.path().to_path_buf()),
            ..Overrides::default()
        })
        .unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(err.to_string().contains("typo_key"));
    }

    #[test]
    fn rebalance_and_preset_together_are_ambiguous() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        write!(
            file,
            r#"{{"corpus":"c.jsonl","out":"o","rebalance":[0.4,0.3,0.3],"run_preset":"run1"}}"#
        )
        .unwrap();
        let err = resolve(Overrides {
            config: Some(file.path().to_path_buf()),
            ..Overrides::default()
        })
        .unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn missing_corpus_is_a_usage_error() {
        let err = resolve(Overrides::default()).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
