//! Per-bucket training and evaluation: grid search, in-domain rows,
//! the cross-domain matrix with signal tags, importance shares, and
//! cluster ablation.
//!
//! A config plus a corpus determines every output value. All randomness
//! derives from the config seed through labeled paths, so buckets,
//! algorithms, grid cells, and folds can be computed in any order or in
//! parallel without changing a single byte of the reports.

mod grid;
mod report;
mod signals;

pub use grid::{
    enumerate_cells, fit_cell, grid_search, BoostGrid, CellParams, ForestGrid, GridOutcome,
    GridSet, KernelKind, SvmGrid,
};
pub use report::{
    ablation_csv, ablation_markdown, bundle_json, cross_matrix_csv, cross_matrix_markdown,
    importance_csv, importance_markdown, in_domain_csv, in_domain_markdown,
};
pub use signals::{classify_signals, SignalSummary, SignalTag, STRONG_DROP_POINTS};

use crate::corpus::{
    partition_buckets, Bucket, BucketKind, ClassDistribution, ColumnLayout, CorpusError,
    EncodedMatrix, FeatureSchema, RulingRecord,
};
use crate::dataset::BinMatrix;
use crate::learners::{Algorithm, LearnError, TrainedModel};
use crate::metrics::{ConfusionMatrix, MetricsError};
use crate::sampling::{holdout_split, rebalance, RebalanceTargets, SamplingError, SplitSpec};
use crate::seeding::{derive_seed, SeedPart};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("no grid cells for {0}")]
    EmptyGrid(Algorithm),
    #[error("corpus has no buckets")]
    NoBuckets,
    #[error("bad config: {0}")]
    BadConfig(String),
    #[error("cluster {0} is not one of 1, 2, 3")]
    UnknownCluster(u8),
    #[error("ablation would remove every feature column")]
    AllClustersAblated,
}

/// Everything a run needs besides the corpus itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub algorithms: Vec<Algorithm>,
    pub grids: GridSet,
    pub rebalance: RebalanceTargets,
    pub test_fraction: f64,
    pub folds: usize,
    /// A judge with strictly more rulings than this gets a specialist
    /// bucket; everyone else pools into the generic bucket.
    pub bucket_threshold: usize,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            algorithms: Algorithm::ALL.to_vec(),
            grids: GridSet::default(),
            rebalance: RebalanceTargets::run1(),
            test_fraction: 0.2,
            folds: 5,
            bucket_threshold: 300,
            seed: 42,
        }
    }
}

impl ExperimentConfig {
    fn validate(&self) -> Result<(), ExperimentError> {
        if self.algorithms.is_empty() {
            return Err(ExperimentError::BadConfig("no algorithms selected".into()));
        }
        if self.folds < 2 {
            return Err(ExperimentError::BadConfig(format!("folds = {} (< 2)", self.folds)));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(ExperimentError::BadConfig(format!(
                "test fraction {} outside (0, 1)",
                self.test_fraction
            )));
        }
        Ok(())
    }
}

/// One line of the per-algorithm in-domain table. Metric fields are
/// percentages at full precision; reports round on emission.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InDomainRow {
    pub bucket: String,
    pub n_test: usize,
    /// Test-set class shares, "majority/…" zero-padded.
    pub distribution: String,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1_cv_mean: f64,
    pub f1_cv_std: f64,
    pub f1_test: f64,
}

/// A bucket that could not be trained, with the reason it was skipped.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedBucket {
    pub bucket: String,
    pub n_rows: usize,
    pub reason: String,
}

/// Trained model plus its evaluation artifacts for one bucket.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketModel {
    pub bucket: String,
    pub kind: BucketKind,
    pub n_train: usize,
    pub grid: GridOutcome,
    pub model: TrainedModel,
    /// Rows are truth, columns predictions, over the bucket's test set.
    pub test_confusion: [[u64; 3]; 3],
    pub row: InDomainRow,
}

/// Cross-domain macro-F1 grid. Row and column order match: specialists
/// in bucket order, the generalist and pooled test set last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossDomainMatrix {
    pub algorithm: Algorithm,
    pub model_names: Vec<String>,
    pub test_names: Vec<String>,
    pub cells: Vec<Vec<f64>>,
    pub tags: Vec<Vec<Option<SignalTag>>>,
    /// Predicted labels per (model, test set); lets the matrix be
    /// recomputed without the models.
    pub predictions: Vec<Vec<Vec<u8>>>,
}

/// All artifacts of one algorithm's pass over the buckets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmRun {
    pub algorithm: Algorithm,
    pub buckets: Vec<BucketModel>,
    pub skipped: Vec<SkippedBucket>,
    /// In-domain rows sorted ascending by F1-test, ties by bucket name.
    pub in_domain: Vec<InDomainRow>,
    pub cross: CrossDomainMatrix,
    pub summary: SignalSummary,
}

/// Sizes of one bucket's split.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BucketSummary {
    pub name: String,
    pub kind: BucketKind,
    pub n_rows: usize,
    pub n_train: usize,
    pub n_test: usize,
}

/// Complete result bundle of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRun {
    pub config: ExperimentConfig,
    pub buckets: Vec<BucketSummary>,
    /// Held-out truth labels per bucket, in bucket order.
    pub test_truth: Vec<(String, Vec<u8>)>,
    pub algorithms: Vec<AlgorithmRun>,
    /// Forest importance shares; None when no forest run was requested.
    pub importances: Option<FeatureImportanceReport>,
}

struct BucketSplit {
    bucket: Bucket,
    train_rows: Vec<usize>,
    test_rows: Vec<usize>,
    test_labels: Vec<u8>,
}

fn split_buckets(
    buckets: Vec<Bucket>,
    labels: &[u8],
    config: &ExperimentConfig,
) -> Result<Vec<BucketSplit>, ExperimentError> {
    buckets
        .into_iter()
        .map(|bucket| {
            let bucket_labels: Vec<u8> = bucket.rows.iter().map(|&r| labels[r]).collect();
            let spec = SplitSpec {
                test_fraction: config.test_fraction,
                seed: derive_seed(
                    config.seed,
                    &[SeedPart::Label("split"), SeedPart::Label(&bucket.name)],
                ),
            };
            let split = holdout_split(&bucket_labels, &spec)?;
            let train_rows: Vec<usize> = split.train.iter().map(|&i| bucket.rows[i]).collect();
            let test_rows: Vec<usize> = split.test.iter().map(|&i| bucket.rows[i]).collect();
            let test_labels: Vec<u8> = test_rows.iter().map(|&r| labels[r]).collect();
            Ok(BucketSplit { bucket, train_rows, test_rows, test_labels })
        })
        .collect()
}

fn train_bucket(
    x: &BinMatrix,
    labels: &[u8],
    split: &BucketSplit,
    algorithm: Algorithm,
    config: &ExperimentConfig,
) -> Result<BucketModel, ExperimentError> {
    let bucket = &split.bucket.name;
    let outcome = grid_search(
        x,
        labels,
        &split.train_rows,
        algorithm,
        &config.grids,
        config.folds,
        &config.rebalance,
        config.seed,
        bucket,
    )?;

    // Refit the winner on the rebalanced full training side.
    let train_labels: Vec<u8> = split.train_rows.iter().map(|&r| labels[r]).collect();
    let rebalance_seed = derive_seed(
        config.seed,
        &[SeedPart::Label("rebalance"), SeedPart::Label(bucket), SeedPart::Label("final")],
    );
    let drawn = rebalance(&train_labels, &config.rebalance, rebalance_seed)?;
    let fit_rows: Vec<usize> = drawn.iter().map(|&i| split.train_rows[i]).collect();
    let fit_y: Vec<u8> = fit_rows.iter().map(|&r| labels[r]).collect();
    let fit_x = x.select_rows(&fit_rows);
    let fit_seed = derive_seed(
        config.seed,
        &[
            SeedPart::Label("fit"),
            SeedPart::Label(bucket),
            SeedPart::Label(algorithm.as_str()),
            SeedPart::Label("final"),
        ],
    );
    let model = fit_cell(&fit_x, &fit_y, &outcome.params, fit_seed)?;

    let test_x = x.select_rows(&split.test_rows);
    let predicted = model.predict(&test_x);
    let confusion = ConfusionMatrix::from_labels(&split.test_labels, &predicted)?;
    let macros = confusion.macro_metrics();
    let row = InDomainRow {
        bucket: bucket.clone(),
        n_test: split.test_rows.len(),
        distribution: ClassDistribution::from_labels(&split.test_labels).compact(),
        accuracy: macros.accuracy,
        precision: macros.precision,
        recall: macros.recall,
        f1_cv_mean: outcome.f1_cv_mean,
        f1_cv_std: outcome.f1_cv_std,
        f1_test: macros.f1,
    };
    Ok(BucketModel {
        bucket: bucket.clone(),
        kind: split.bucket.kind,
        n_train: split.train_rows.len(),
        grid: outcome,
        model,
        test_confusion: *confusion.counts(),
        row,
    })
}

fn run_algorithm(
    x: &BinMatrix,
    labels: &[u8],
    splits: &[BucketSplit],
    algorithm: Algorithm,
    config: &ExperimentConfig,
) -> Result<AlgorithmRun, ExperimentError> {
    // Fail fast on an unusable grid before touching any bucket.
    enumerate_cells(algorithm, &config.grids)?;

    let outcomes: Vec<Result<BucketModel, ExperimentError>> = splits
        .par_iter()
        .map(|split| train_bucket(x, labels, split, algorithm, config))
        .collect();

    let mut buckets = Vec::new();
    let mut skipped = Vec::new();
    let mut kept_splits = Vec::new();
    for (split, outcome) in splits.iter().zip(outcomes) {
        match outcome {
            Ok(bucket) => {
                buckets.push(bucket);
                kept_splits.push(split);
            }
            Err(e) => skipped.push(SkippedBucket {
                bucket: split.bucket.name.clone(),
                n_rows: split.bucket.rows.len(),
                reason: e.to_string(),
            }),
        }
    }

    let mut in_domain: Vec<InDomainRow> = buckets.iter().map(|b| b.row.clone()).collect();
    in_domain.sort_by(|a, b| {
        a.f1_test.partial_cmp(&b.f1_test).expect("finite F1").then(a.bucket.cmp(&b.bucket))
    });

    // Every kept model scored on every kept bucket's untouched test set.
    let test_sets: Vec<(BinMatrix, &[u8])> = kept_splits
        .iter()
        .map(|s| (x.select_rows(&s.test_rows), s.test_labels.as_slice()))
        .collect();
    let cell_jobs: Vec<(usize, usize)> = (0..buckets.len())
        .flat_map(|r| (0..test_sets.len()).map(move |c| (r, c)))
        .collect();
    let scored: Vec<Result<(Vec<u8>, f64), ExperimentError>> = cell_jobs
        .par_iter()
        .map(|&(r, c)| {
            let predicted = buckets[r].model.predict(&test_sets[c].0);
            let f1 = grid::macro_f1(test_sets[c].1, &predicted)?;
            Ok((predicted, f1))
        })
        .collect();
    let n = buckets.len();
    let mut cells = vec![vec![0.0; n]; n];
    let mut predictions = vec![vec![Vec::new(); n]; n];
    for (&(r, c), outcome) in cell_jobs.iter().zip(scored) {
        let (predicted, f1) = outcome?;
        cells[r][c] = f1;
        predictions[r][c] = predicted;
    }

    let has_generalist =
        buckets.last().is_some_and(|b| b.kind == BucketKind::Generic);
    let (tags, summary) = if has_generalist {
        classify_signals(&cells)
    } else {
        (vec![vec![None; n]; n], SignalSummary::default())
    };
    let names: Vec<String> = buckets.iter().map(|b| b.bucket.clone()).collect();
    let cross = CrossDomainMatrix {
        algorithm,
        model_names: names.clone(),
        test_names: names,
        cells,
        tags,
        predictions,
    };
    Ok(AlgorithmRun { algorithm, buckets, skipped, in_domain, cross, summary })
}

fn run_encoded(
    encoded: &EncodedMatrix,
    records: &[RulingRecord],
    config: &ExperimentConfig,
) -> Result<ExperimentRun, ExperimentError> {
    config.validate()?;
    let buckets = partition_buckets(records, config.bucket_threshold);
    if buckets.is_empty() {
        return Err(ExperimentError::NoBuckets);
    }
    let splits = split_buckets(buckets, &encoded.labels, config)?;
    let algorithms = config
        .algorithms
        .iter()
        .map(|&algorithm| run_algorithm(&encoded.x, &encoded.labels, &splits, algorithm, config))
        .collect::<Result<Vec<_>, _>>()?;
    let importances = algorithms
        .iter()
        .find(|run| run.algorithm == Algorithm::Rf)
        .map(|run| top_features_report(run, &encoded.layout, TOP_FEATURES));
    Ok(ExperimentRun {
        config: config.clone(),
        buckets: splits
            .iter()
            .map(|s| BucketSummary {
                name: s.bucket.name.clone(),
                kind: s.bucket.kind,
                n_rows: s.bucket.rows.len(),
                n_train: s.train_rows.len(),
                n_test: s.test_rows.len(),
            })
            .collect(),
        test_truth: splits
            .iter()
            .map(|s| (s.bucket.name.clone(), s.test_labels.clone()))
            .collect(),
        algorithms,
        importances,
    })
}

/// Runs the full experiment over a loaded corpus.
pub fn run_experiment(
    records: &[RulingRecord],
    schema: &FeatureSchema,
    config: &ExperimentConfig,
) -> Result<ExperimentRun, ExperimentError> {
    let encoded = crate::corpus::one_hot_encode(records, schema);
    run_encoded(&encoded, records, config)
}

/// Top-k one-hot columns a report keeps per model.
pub const TOP_FEATURES: usize = 15;

/// One column in a model's top-k importance list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopFeature {
    pub rank: usize,
    pub column: String,
    pub cluster: u8,
    pub importance: f64,
}

/// Importance mass of one model's top-k columns, collapsed by cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFeatureShare {
    pub model: String,
    /// Percent of total importance mass, clusters 1..3.
    pub cluster_share: [f64; 3],
    /// Sum of the three cluster columns.
    pub total: f64,
    pub top: Vec<TopFeature>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportanceReport {
    pub algorithm: Algorithm,
    pub k: usize,
    pub models: Vec<ModelFeatureShare>,
    /// Set when the run's models expose no importances.
    pub note: Option<String>,
}

/// Per-model cluster shares over the top-k columns by importance.
/// Only forest models carry importances; other families yield a note.
pub fn top_features_report(
    run: &AlgorithmRun,
    layout: &ColumnLayout,
    k: usize,
) -> FeatureImportanceReport {
    let mut column_cluster = vec![0u8; layout.n_cols];
    for group in &layout.groups {
        for col in group.columns() {
            column_cluster[col] = group.cluster;
        }
    }
    let mut models = Vec::new();
    for bucket in &run.buckets {
        let TrainedModel::Forest(forest) = &bucket.model else {
            continue;
        };
        let importances = forest.importances();
        let mut order: Vec<usize> = (0..importances.len()).collect();
        order.sort_by(|&a, &b| {
            importances[b].partial_cmp(&importances[a]).expect("finite importance").then(a.cmp(&b))
        });
        let mut share = [0.0f64; 3];
        let mut top = Vec::new();
        for (rank, &col) in order.iter().take(k).enumerate() {
            let cluster = column_cluster[col];
            if (1..=3).contains(&cluster) {
                share[cluster as usize - 1] += importances[col] * 100.0;
            }
            top.push(TopFeature {
                rank: rank + 1,
                column: layout.column_names[col].clone(),
                cluster,
                importance: importances[col],
            });
        }
        models.push(ModelFeatureShare {
            model: bucket.bucket.clone(),
            cluster_share: share,
            total: share.iter().sum(),
            top,
        });
    }
    let note = if models.is_empty() {
        Some(format!("{} models expose no feature importances", run.algorithm))
    } else {
        None
    };
    FeatureImportanceReport { algorithm: run.algorithm, k, models, note }
}

/// Ablated retrain scores for one bucket and algorithm. A missing value
/// means the bucket was skipped in that ablated run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub algorithm: Algorithm,
    pub bucket: String,
    pub baseline_f1: f64,
    /// (cluster id, ablated F1-test) in requested cluster order.
    pub ablated: Vec<(u8, Option<f64>)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub clusters: Vec<u8>,
    pub rows: Vec<AblationRow>,
    pub skipped: Vec<SkippedBucket>,
}

/// Retrains every bucket with one cluster's columns removed, per
/// requested cluster, with a fresh grid search each time. Baseline and
/// ablated scores come from identical pipelines on the same splits.
pub fn run_ablation(
    records: &[RulingRecord],
    schema: &FeatureSchema,
    config: &ExperimentConfig,
    clusters: &[u8],
) -> Result<AblationReport, ExperimentError> {
    if clusters.is_empty() {
        return Err(ExperimentError::BadConfig("no clusters requested".into()));
    }
    let mut requested = Vec::new();
    for &c in clusters {
        if !(1..=3).contains(&c) {
            return Err(ExperimentError::UnknownCluster(c));
        }
        if !requested.contains(&c) {
            requested.push(c);
        }
    }
    let encoded = crate::corpus::one_hot_encode(records, schema);
    let baseline = run_encoded(&encoded, records, config)?;

    let mut ablated_runs = Vec::new();
    for &cluster in &requested {
        let reduced = encoded.without_cluster(cluster);
        if reduced.n_cols() == 0 {
            return Err(ExperimentError::AllClustersAblated);
        }
        ablated_runs.push((cluster, run_encoded(&reduced, records, config)?));
    }

    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for run in &baseline.algorithms {
        for bucket in &run.buckets {
            let ablated = ablated_runs
                .iter()
                .map(|(cluster, ablated_run)| {
                    let f1 = ablated_run
                        .algorithms
                        .iter()
                        .find(|a| a.algorithm == run.algorithm)
                        .and_then(|a| a.buckets.iter().find(|b| b.bucket == bucket.bucket))
                        .map(|b| b.row.f1_test);
                    (*cluster, f1)
                })
                .collect();
            rows.push(AblationRow {
                algorithm: run.algorithm,
                bucket: bucket.bucket.clone(),
                baseline_f1: bucket.row.f1_test,
                ablated,
            });
        }
        skipped.extend(run.skipped.iter().cloned());
    }
    Ok(AblationReport { clusters: requested, rows, skipped })
}
