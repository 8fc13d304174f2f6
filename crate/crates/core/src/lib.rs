//! Toolkit for testing whether the identity of the deciding judge carries
//! predictive signal in structured court rulings.
//!
//! The pipeline: ingest a JSON-lines corpus of per-child custody rulings
//! ([`corpus`]), partition it into per-judge buckets plus a pooled generic
//! bucket, one-hot encode the categorical features, then train specialist
//! and generalist classifiers ([`learners`]) under a fixed protocol of
//! stratified holdout, cross-validated grid search, and class rebalancing
//! ([`sampling`], [`experiments`]). Evaluation compares in-domain against
//! cross-domain macro-F1 ([`metrics`]) and tags each transfer cell with a
//! signal label. A seeded synthetic generator ([`synthgen`]) produces
//! corpora with known per-judge decision policies so the whole chain can be
//! validated against ground truth. Document anonymization ([`pseudonym`])
//! and LLM-based feature extraction scaffolding ([`extraction`]) cover the
//! corpus-preparation half of the workflow.
//!
//! Every fit, split, and sample is deterministic given (data, params, seed);
//! parallel execution never changes results, only wall-clock time.

pub mod corpus;
pub mod dataset;
pub mod experiments;
pub mod extraction;
pub mod learners;
pub mod metrics;
pub mod pseudonym;
pub mod sampling;
pub mod seeding;
pub mod synthgen;

pub use dataset::BinMatrix;
