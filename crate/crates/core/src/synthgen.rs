//! Synthetic corpus generation with controllable judge heterogeneity.
//!
//! Every judge is a log-linear policy over the one-hot columns: class
//! scores are intercept + weight dot row, labels come from the softmax
//! (sampled or argmax). Judge policies perturb a shared base policy with
//! per-coordinate Gaussian noise scaled by `sigma`; the perturbation draw
//! depends only on the seed and judge index, so the same judge's policy
//! moves along a fixed direction as sigma grows and equals the base
//! exactly at sigma 0.
//!
//! Large perturbations push judges toward single-class behavior, which
//! would starve minority classes and make downstream class rebalancing
//! infeasible. Intercept calibration counteracts this: an iterative
//! proportional shift on the intercepts pins each judge's expected class
//! shares to the target priors while leaving the column weights (the
//! judge's "reasoning") untouched. Calibration always runs on one shared
//! feature sample so identical policies calibrate identically.

use crate::corpus::{
    ColumnLayout, FeatureKind, FeatureSchema, FeatureVector, OutcomeClass, RulingRecord,
};
use crate::dataset::BinMatrix;
use crate::learners::argmax_tie_low;
use crate::seeding::{rng_for, SeedPart};
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_TARGET_PRIORS: [f64; 3] = [0.67, 0.22, 0.11];

const CALIBRATION_ROWS: usize = 2000;
const CALIBRATION_MAX_ITERS: usize = 200;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("bad spec: {0}")]
    BadSpec(String),
}

/// Per-feature level probabilities, aligned to schema positions; each
/// inner vector covers the declared levels plus a final missing slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMarginals {
    level_probs: Vec<Vec<f64>>,
}

impl FeatureMarginals {
    pub fn new(schema: &FeatureSchema, level_probs: Vec<Vec<f64>>) -> Result<Self, SynthError> {
        if level_probs.len() != schema.len() {
            return Err(SynthError::BadSpec(format!(
                "marginals cover {} features, schema has {}",
                level_probs.len(),
                schema.len()
            )));
        }
        for (feature, probs) in schema.features().iter().zip(&level_probs) {
            if probs.len() != feature.levels().len() + 1 {
                return Err(SynthError::BadSpec(format!(
                    "feature {} needs {} probabilities (levels plus missing), got {}",
                    feature.name,
                    feature.levels().len() + 1,
                    probs.len()
                )));
            }
            let sum: f64 = probs.iter().sum();
            if probs.iter().any(|&p| p < 0.0) || (sum - 1.0).abs() > 1e-9 {
                return Err(SynthError::BadSpec(format!(
                    "probabilities for {} must be non-negative and sum to 1",
                    feature.name
                )));
            }
        }
        Ok(FeatureMarginals { level_probs })
    }

    pub fn probs(&self, feature_pos: usize) -> &[f64] {
        &self.level_probs[feature_pos]
    }
}

/// Uniform levels with an 8% missing rate on every feature.
pub fn default_marginals(schema: &FeatureSchema) -> FeatureMarginals {
    let missing = 0.08;
    let level_probs = schema
        .features()
        .iter()
        .map(|f| {
            let k = f.levels().len();
            let mut probs = vec![(1.0 - missing) / k as f64; k];
            probs.push(missing);
            probs
        })
        .collect();
    FeatureMarginals::new(schema, level_probs).expect("uniform marginals are valid")
}

/// Log-linear labeling policy over one-hot columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgePolicy {
    /// Column weights per class; outer length 3.
    pub weights: Vec<Vec<f64>>,
    pub intercepts: [f64; 3],
}

impl JudgePolicy {
    pub fn zeros(n_cols: usize) -> Self {
        JudgePolicy { weights: vec![vec![0.0; n_cols]; 3], intercepts: [0.0; 3] }
    }

    pub fn n_cols(&self) -> usize {
        self.weights[0].len()
    }

    pub fn scores(&self, row: &[u8]) -> [f64; 3] {
        let mut s = self.intercepts;
        for c in 0..3 {
            let w = &self.weights[c];
            for (col, &v) in row.iter().enumerate() {
                if v != 0 {
                    s[c] += w[col];
                }
            }
        }
        s
    }

    pub fn probs(&self, row: &[u8]) -> [f64; 3] {
        softmax3(&self.scores(row))
    }

    pub fn label_argmax(&self, row: &[u8]) -> u8 {
        argmax_tie_low(&self.scores(row)) as u8
    }

    pub fn label_sample(&self, row: &[u8], rng: &mut ChaCha20Rng) -> u8 {
        sample_class(&self.probs(row), rng)
    }

    /// Euclidean distance between column weights, ignoring intercepts.
    pub fn weight_distance(&self, other: &JudgePolicy) -> f64 {
        let mut sum = 0.0;
        for c in 0..3 {
            for (a, b) in self.weights[c].iter().zip(&other.weights[c]) {
                sum += (a - b) * (a - b);
            }
        }
        sum.sqrt()
    }
}

fn softmax3(scores: &[f64; 3]) -> [f64; 3] {
    let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e = [
        (scores[0] - m).exp(),
        (scores[1] - m).exp(),
        (scores[2] - m).exp(),
    ];
    let z = e[0] + e[1] + e[2];
    [e[0] / z, e[1] / z, e[2] / z]
}

fn sample_class(probs: &[f64; 3], rng: &mut ChaCha20Rng) -> u8 {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for c in 0..3 {
        acc += probs[c];
        if u < acc {
            return c as u8;
        }
    }
    2
}

fn parent_class(name: &str) -> Option<usize> {
    if name.starts_with("mother") {
        Some(0)
    } else if name.starts_with("father") {
        Some(1)
    } else {
        None
    }
}

/// Base policy with plausible custody semantics: parental requests
/// dominate, fitness and abuse markers weigh in strongly, and material
/// circumstances contribute mildly.
pub fn custody_base_policy(layout: &ColumnLayout, schema: &FeatureSchema) -> JudgePolicy {
    let mut policy = JudgePolicy::zeros(layout.n_cols);
    policy.intercepts = [1.2, 0.2, -1.4];
    for group in &layout.groups {
        let feature = &schema.features()[group.feature_pos];
        let parent = parent_class(&feature.name);
        for (l, level) in feature.levels().iter().enumerate() {
            let col = group.start + l;
            let w: [f64; 3] = match feature.kind {
                FeatureKind::Categorical => match level.as_str() {
                    "mother" => [2.0, -0.5, -0.2],
                    "father" => [-0.5, 2.0, -0.2],
                    "shared" | "both" => [-0.3, -0.3, 2.2],
                    "sole" => match parent {
                        Some(0) => [1.4, -0.3, -0.4],
                        Some(1) => [-0.3, 1.4, -0.4],
                        _ => [0.0; 3],
                    },
                    _ => [0.0; 3],
                },
                FeatureKind::Boolean => {
                    if level != "true" {
                        [0.0; 3]
                    } else {
                        let negative = ["abuse", "neglect", "psych", "addiction"]
                            .iter()
                            .any(|m| feature.name.contains(m));
                        match (parent, negative, feature.cluster) {
                            (Some(p), true, _) => {
                                let mut w = [0.0; 3];
                                w[p] = -1.3;
                                w[1 - p] = 0.4;
                                w
                            }
                            (Some(p), false, 2) => {
                                let mut w = [0.0; 3];
                                w[p] = 1.0;
                                w
                            }
                            (Some(p), false, 3) => {
                                let sign = if feature.name.contains("social_aid")
                                    || feature.name.contains("legal_aid")
                                {
                                    -0.2
                                } else {
                                    0.45
                                };
                                let mut w = [0.0; 3];
                                w[p] = sign;
                                w
                            }
                            (None, _, _) => [0.1, 0.1, 0.8],
                            _ => [0.0; 3],
                        }
                    }
                }
            };
            for c in 0..3 {
                policy.weights[c][col] = w[c];
            }
        }
    }
    policy
}

/// Policy whose signal lives entirely in one feature cluster; every
/// other column has weight zero.
pub fn cluster_signal_policy(layout: &ColumnLayout, cluster: u8, strength: f64) -> JudgePolicy {
    let mut policy = JudgePolicy::zeros(layout.n_cols);
    for group in layout.groups.iter().filter(|g| g.cluster == cluster) {
        for l in 0..group.width - 1 {
            let favored = l % 3;
            for c in 0..3 {
                policy.weights[c][group.start + l] =
                    if c == favored { strength } else { -strength / 2.0 };
            }
        }
    }
    policy
}

/// Perturbs the base policy once per judge. The Gaussian direction for a
/// judge depends only on `seed` and the judge index, so distances from
/// the base grow linearly in `sigma`; at sigma 0 the base is copied
/// verbatim.
pub fn make_policies(
    base: &JudgePolicy,
    n_judges: usize,
    sigma: f64,
    seed: u64,
) -> Vec<JudgePolicy> {
    (0..n_judges)
        .map(|j| {
            if sigma == 0.0 {
                return base.clone();
            }
            let mut rng = rng_for(seed, &[SeedPart::Label("policy"), SeedPart::Index(j as u64)]);
            let mut policy = base.clone();
            for c in 0..3 {
                for w in &mut policy.weights[c] {
                    let delta: f64 = StandardNormal.sample(&mut rng);
                    *w += sigma * delta;
                }
            }
            policy
        })
        .collect()
}

/// Draws feature vectors independently from the marginals.
pub fn sample_features(
    schema: &FeatureSchema,
    marginals: &FeatureMarginals,
    n_rows: usize,
    rng: &mut ChaCha20Rng,
) -> Vec<FeatureVector> {
    (0..n_rows)
        .map(|_| {
            let slots = (0..schema.len())
                .map(|pos| {
                    let probs = marginals.probs(pos);
                    let missing_idx = probs.len() - 1;
                    let u: f64 = rng.random();
                    let mut acc = 0.0;
                    let mut picked = missing_idx;
                    for (l, &p) in probs.iter().enumerate() {
                        acc += p;
                        if u < acc {
                            picked = l;
                            break;
                        }
                    }
                    if picked == missing_idx {
                        None
                    } else {
                        Some(picked as u8)
                    }
                })
                .collect();
            FeatureVector::new(slots)
        })
        .collect()
}

/// Mean softmax class shares of a policy over the given rows.
pub fn expected_shares(policy: &JudgePolicy, x: &BinMatrix) -> [f64; 3] {
    let mut mean = [0.0; 3];
    for i in 0..x.n_rows() {
        let p = policy.probs(x.row(i));
        for c in 0..3 {
            mean[c] += p[c];
        }
    }
    for v in &mut mean {
        *v /= x.n_rows() as f64;
    }
    mean
}

/// Shifts intercepts until the expected class shares over `x` match the
/// targets (iterative proportional fitting on the class marginals).
/// Column weights are never touched. Returns the final maximal log-ratio
/// residual.
pub fn calibrate_intercepts(policy: &mut JudgePolicy, x: &BinMatrix, targets: &[f64; 3]) -> f64 {
    let n = x.n_rows();
    // Weight contributions are intercept-independent; cache them once.
    let base_scores: Vec<[f64; 3]> = (0..n)
        .map(|i| {
            let mut s = policy.scores(x.row(i));
            for c in 0..3 {
                s[c] -= policy.intercepts[c];
            }
            s
        })
        .collect();
    let mut residual = f64::INFINITY;
    for _ in 0..CALIBRATION_MAX_ITERS {
        let mut mean = [0.0; 3];
        for s in &base_scores {
            let shifted = [
                s[0] + policy.intercepts[0],
                s[1] + policy.intercepts[1],
                s[2] + policy.intercepts[2],
            ];
            let p = softmax3(&shifted);
            for c in 0..3 {
                mean[c] += p[c];
            }
        }
        residual = 0.0;
        for c in 0..3 {
            let adj = (targets[c].max(1e-12) / (mean[c] / n as f64).max(1e-12)).ln();
            policy.intercepts[c] += adj;
            residual = residual.max(adj.abs());
        }
        if residual < 1e-10 {
            break;
        }
    }
    // Softmax is shift-invariant; center for a canonical representation.
    let center = (policy.intercepts[0] + policy.intercepts[1] + policy.intercepts[2]) / 3.0;
    for c in 0..3 {
        policy.intercepts[c] -= center;
    }
    residual
}

/// Mean pairwise disagreement over ordered judge pairs on shared probe
/// predictions; 0 when all judges agree everywhere, up to 1.
pub fn inconsistency_coefficient(predictions: &[Vec<u8>]) -> f64 {
    let j = predictions.len();
    if j < 2 {
        return 0.0;
    }
    let n = predictions[0].len();
    assert!(predictions.iter().all(|p| p.len() == n), "ragged prediction matrix");
    assert!(n > 0, "empty probe");
    let mut total = 0.0;
    for a in 0..j {
        for b in 0..j {
            if a == b {
                continue;
            }
            let disagreements =
                predictions[a].iter().zip(&predictions[b]).filter(|(x, y)| x != y).count();
            total += disagreements as f64 / n as f64;
        }
    }
    total / (j * (j - 1)) as f64
}

/// Argmax labels of one policy on every row.
pub fn policy_predictions(policy: &JudgePolicy, x: &BinMatrix) -> Vec<u8> {
    (0..x.n_rows()).map(|i| policy.label_argmax(x.row(i))).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelMode {
    /// Draw the class from the softmax probabilities.
    Sample,
    /// Take the highest-scoring class deterministically.
    Argmax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Calibration {
    /// Leave intercepts as the base policy sets them.
    None,
    /// One shift computed from the base policy, applied to every judge.
    Global,
    /// Each judge's intercepts pinned to the target priors separately.
    PerJudge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub seed: u64,
    pub n_specialists: usize,
    pub rows_per_specialist: usize,
    pub n_pool_judges: usize,
    pub rows_per_pool_judge: usize,
    pub sigma: f64,
    pub label_mode: LabelMode,
    pub calibration: Calibration,
    pub target_priors: [f64; 3],
}

impl SynthSpec {
    fn validate(&self) -> Result<(), SynthError> {
        if self.n_specialists + self.n_pool_judges == 0 {
            return Err(SynthError::BadSpec("at least one judge is required".into()));
        }
        if self.n_specialists > 0 && self.rows_per_specialist == 0 {
            return Err(SynthError::BadSpec("rows_per_specialist must be positive".into()));
        }
        if self.n_pool_judges > 0 && self.rows_per_pool_judge == 0 {
            return Err(SynthError::BadSpec("rows_per_pool_judge must be positive".into()));
        }
        if !(self.sigma >= 0.0) {
            return Err(SynthError::BadSpec("sigma must be non-negative".into()));
        }
        let sum: f64 = self.target_priors.iter().sum();
        if self.target_priors.iter().any(|&p| p <= 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(SynthError::BadSpec(
                "target priors must be positive and sum to 1".into(),
            ));
        }
        Ok(())
    }
}

/// Ground-truth description of how a synthetic corpus was labeled. Kept
/// out of the corpus file so experiments cannot read it by accident.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyOracle {
    pub seed: u64,
    pub sigma: f64,
    pub base: JudgePolicy,
    pub judges: Vec<JudgeOracleEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeOracleEntry {
    pub name: String,
    pub n_rows: usize,
    pub policy: JudgePolicy,
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub records: Vec<RulingRecord>,
    pub oracle: PolicyOracle,
}

fn letter_suffix(mut i: usize, len: usize) -> String {
    let mut s = vec![b'a'; len];
    for pos in (0..len).rev() {
        s[pos] = b'a' + (i % 26) as u8;
        i /= 26;
    }
    String::from_utf8(s).expect("ascii letters")
}

fn judge_name(j: usize, specialist: bool) -> String {
    if specialist {
        format!("judge{}", letter_suffix(j, 2))
    } else {
        format!("pool{}", letter_suffix(j, 3))
    }
}

/// Generates a corpus from the built-in custody base policy.
pub fn generate(spec: &SynthSpec, schema: &FeatureSchema) -> Result<SyntheticCorpus, SynthError> {
    let layout = ColumnLayout::new(schema);
    let base = custody_base_policy(&layout, schema);
    generate_with_base(spec, schema, base)
}

/// Generates a corpus from an explicit base policy.
pub fn generate_with_base(
    spec: &SynthSpec,
    schema: &FeatureSchema,
    base: JudgePolicy,
) -> Result<SyntheticCorpus, SynthError> {
    spec.validate()?;
    let layout = ColumnLayout::new(schema);
    if base.n_cols() != layout.n_cols {
        return Err(SynthError::BadSpec(format!(
            "base policy has {} columns, layout has {}",
            base.n_cols(),
            layout.n_cols
        )));
    }
    let marginals = default_marginals(schema);

    let n_judges = spec.n_specialists + spec.n_pool_judges;
    let mut policies = make_policies(&base, n_judges, spec.sigma, spec.seed);

    let mut calib_rng = rng_for(spec.seed, &[SeedPart::Label("calib")]);
    let calib_features = sample_features(schema, &marginals, CALIBRATION_ROWS, &mut calib_rng);
    let calib_x = encode_features(&layout, &calib_features);
    match spec.calibration {
        Calibration::None => {}
        Calibration::Global => {
            let mut adjusted = base.clone();
            calibrate_intercepts(&mut adjusted, &calib_x, &spec.target_priors);
            let shift = [
                adjusted.intercepts[0] - base.intercepts[0],
                adjusted.intercepts[1] - base.intercepts[1],
                adjusted.intercepts[2] - base.intercepts[2],
            ];
            for policy in &mut policies {
                for c in 0..3 {
                    policy.intercepts[c] += shift[c];
                }
            }
        }
        Calibration::PerJudge => {
            for policy in &mut policies {
                calibrate_intercepts(policy, &calib_x, &spec.target_priors);
            }
        }
    }

    let mut records = Vec::new();
    let mut judges = Vec::new();
    let mut case_counter = 0usize;
    for (j, policy) in policies.iter().enumerate() {
        let specialist = j < spec.n_specialists;
        let name = if specialist {
            judge_name(j, true)
        } else {
            judge_name(j - spec.n_specialists, false)
        };
        let n_rows = if specialist { spec.rows_per_specialist } else { spec.rows_per_pool_judge };

        let mut row_rng = rng_for(spec.seed, &[SeedPart::Label("rows"), SeedPart::Index(j as u64)]);
        let features = sample_features(schema, &marginals, n_rows, &mut row_rng);
        let x = encode_features(&layout, &features);
        let mut label_rng =
            rng_for(spec.seed, &[SeedPart::Label("labels"), SeedPart::Index(j as u64)]);
        for (r, feats) in features.into_iter().enumerate() {
            let label = match spec.label_mode {
                LabelMode::Argmax => policy.label_argmax(x.row(r)),
                LabelMode::Sample => policy.label_sample(x.row(r), &mut label_rng),
            };
            case_counter += 1;
            records.push(RulingRecord {
                case_id: format!("case-{case_counter:06}"),
                child_id: format!("child-{case_counter:06}"),
                judge: name.clone(),
                court_city: format!("city{:02}", j % 7),
                decision_date: format!("{:04}-{:02}-{:02}", 2012 + j % 8, 1 + r % 12, 1 + r % 28),
                outcome: OutcomeClass::from_code(label).expect("labels are 0..3"),
                features: feats,
            });
        }
        judges.push(JudgeOracleEntry { name, n_rows, policy: policy.clone() });
    }

    let oracle = PolicyOracle { seed: spec.seed, sigma: spec.sigma, base, judges };
    Ok(SyntheticCorpus { records, oracle })
}

fn encode_features(layout: &ColumnLayout, features: &[FeatureVector]) -> BinMatrix {
    let mut x = BinMatrix::zeros(features.len(), layout.n_cols);
    for (i, f) in features.iter().enumerate() {
        layout.encode_into(f, x.row_mut(i));
    }
    x
}
