//! Ruling corpus: record model, JSON-lines ingestion, class distribution,
//! and judge-bucket partitioning.
//!
//! A ruling is one (case, child) custody decision. The judge field carries
//! a pseudonym, never an original name; ingestion rejects anything that is
//! not a seven-letter lowercase token. Outcomes are the tri-class custody
//! result: mother = 0, father = 1, shared = 2.

mod encode;
pub mod schema;

pub use encode::{one_hot_encode, ColumnGroup, ColumnLayout, EncodedMatrix};
pub use schema::{FeatureDef, FeatureKind, FeatureSchema, SchemaError};

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("corpus io: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error("line {line}: malformed ruling: {message}")]
    MalformedLine { line: usize, message: String },
    #[error("line {line}: {field} must not be empty")]
    EmptyField { line: usize, field: &'static str },
    #[error("line {line}: judge {judge:?} is not a seven-letter lowercase pseudonym")]
    BadJudgeToken { line: usize, judge: String },
    #[error("line {line}: decision_date {value:?} is not a valid YYYY-MM-DD date")]
    BadDate { line: usize, value: String },
    #[error("line {line}: outcome {value:?} is not one of mother|father|shared")]
    BadOutcome { line: usize, value: String },
    #[error("line {line}: unknown feature {name:?}")]
    UnknownFeature { line: usize, name: String },
    #[error("line {line}: feature {name:?} missing from the features object")]
    MissingFeature { line: usize, name: String },
    #[error("line {line}: feature {feature:?} rejects value {value}")]
    OntologyViolation { line: usize, feature: String, value: String },
    #[error("line {line}: duplicate ruling for case {case_id:?} child {child_id:?}")]
    DuplicateRuling { line: usize, case_id: String, child_id: String },
}

/// Tri-class custody outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutcomeClass {
    Mother,
    Father,
    Shared,
}

impl OutcomeClass {
    pub const ALL: [OutcomeClass; 3] = [OutcomeClass::Mother, OutcomeClass::Father, OutcomeClass::Shared];

    pub fn code(self) -> u8 {
        match self {
            OutcomeClass::Mother => 0,
            OutcomeClass::Father => 1,
            OutcomeClass::Shared => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            OutcomeClass::Mother => "mother",
            OutcomeClass::Father => "father",
            OutcomeClass::Shared => "shared",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.as_str() == s)
    }
}

impl fmt::Display for OutcomeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Feature values in schema order: Some(level slot) or None for missing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureVector(Vec<Option<u8>>);

impl FeatureVector {
    pub fn new(slots: Vec<Option<u8>>) -> Self {
        FeatureVector(slots)
    }

    pub fn slots(&self) -> &[Option<u8>] {
        &self.0
    }
}

/// One per-child ruling.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RulingRecord {
    pub case_id: String,
    pub child_id: String,
    pub judge: String,
    pub court_city: String,
    pub decision_date: String,
    pub outcome: OutcomeClass,
    pub features: FeatureVector,
}

/// Seven lowercase alphabetic characters. Shared with the pseudonym module.
pub fn is_pseudonym_shaped(s: &str) -> bool {
    s.chars().count() == 7 && s.chars().all(|c| c.is_alphabetic() && c.is_lowercase())
}

fn valid_date(s: &str) -> bool {
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .map(|d| d.format("%Y-%m-%d").to_string() == s)
        .unwrap_or(false)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRuling {
    case_id: String,
    child_id: String,
    judge: String,
    court_city: String,
    decision_date: String,
    outcome: String,
    features: serde_json::Map<String, Value>,
}

fn record_from_raw(raw: RawRuling, schema: &FeatureSchema, line: usize) -> Result<RulingRecord, CorpusError> {
    for (value, field) in [
        (&raw.case_id, "case_id"),
        (&raw.child_id, "child_id"),
        (&raw.court_city, "court_city"),
    ] {
        if value.trim().is_empty() {
            return Err(CorpusError::EmptyField { line, field });
        }
    }
    if !is_pseudonym_shaped(&raw.judge) {
        return Err(CorpusError::BadJudgeToken { line, judge: raw.judge });
    }
    if !valid_date(&raw.decision_date) {
        return Err(CorpusError::BadDate { line, value: raw.decision_date });
    }
    let outcome = OutcomeClass::parse(&raw.outcome)
        .ok_or_else(|| CorpusError::BadOutcome { line, value: raw.outcome.clone() })?;

    for name in raw.features.keys() {
        if schema.position(name).is_none() {
            return Err(CorpusError::UnknownFeature { line, name: name.clone() });
        }
    }
    let mut slots = Vec::with_capacity(schema.len());
    for f in schema.features() {
        let value = raw
            .features
            .get(&f.name)
            .ok_or_else(|| CorpusError::MissingFeature { line, name: f.name.clone() })?;
        let slot = match (f.kind, value) {
            (_, Value::Null) => None,
            (FeatureKind::Boolean, Value::Bool(b)) => Some(if *b { 1 } else { 0 }),
            (FeatureKind::Categorical, Value::String(s)) => Some(f.level_of(s).ok_or_else(|| {
                CorpusError::OntologyViolation { line, feature: f.name.clone(), value: value.to_string() }
            })?),
            _ => {
                return Err(CorpusError::OntologyViolation {
                    line,
                    feature: f.name.clone(),
                    value: value.to_string(),
                })
            }
        };
        slots.push(slot);
    }
    Ok(RulingRecord {
        case_id: raw.case_id,
        child_id: raw.child_id,
        judge: raw.judge,
        court_city: raw.court_city,
        decision_date: raw.decision_date,
        outcome,
        features: FeatureVector(slots),
    })
}

/// Parses a JSON-lines corpus. Fails on the first invalid line, reporting
/// its 1-based line number. Blank lines are ignored.
pub fn parse_rulings<R: BufRead>(reader: R, schema: &FeatureSchema) -> Result<Vec<RulingRecord>, CorpusError> {
    let mut records = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let text = line?;
        if text.trim().is_empty() {
            continue;
        }
        let raw: RawRuling = serde_json::from_str(&text)
            .map_err(|e| CorpusError::MalformedLine { line: line_no, message: e.to_string() })?;
        let record = record_from_raw(raw, schema, line_no)?;
        if !seen.insert((record.case_id.clone(), record.child_id.clone())) {
            return Err(CorpusError::DuplicateRuling {
                line: line_no,
                case_id: record.case_id,
                child_id: record.child_id,
            });
        }
        records.push(record);
    }
    Ok(records)
}

pub fn load_rulings(path: &Path, schema: &FeatureSchema) -> Result<Vec<RulingRecord>, CorpusError> {
    let file = std::fs::File::open(path)?;
    parse_rulings(std::io::BufReader::new(file), schema)
}

fn record_to_json(r: &RulingRecord, schema: &FeatureSchema) -> Value {
    let mut features = serde_json::Map::new();
    for (f, &slot) in schema.features().iter().zip(r.features.slots()) {
        let v = match (f.kind, slot) {
            (_, None) => Value::Null,
            (FeatureKind::Boolean, Some(s)) => Value::Bool(s == 1),
            (FeatureKind::Categorical, Some(s)) => Value::String(f.levels()[s as usize].clone()),
        };
        features.insert(f.name.clone(), v);
    }
    serde_json::json!({
        "case_id": r.case_id,
        "child_id": r.child_id,
        "judge": r.judge,
        "court_city": r.court_city,
        "decision_date": r.decision_date,
        "outcome": r.outcome.as_str(),
        "features": features,
    })
}

/// Writes records as JSON-lines, one ruling per line, schema-driven value
/// types (booleans as JSON booleans, missing as null).
pub fn write_rulings<W: Write>(mut w: W, records: &[RulingRecord], schema: &FeatureSchema) -> Result<(), CorpusError> {
    for r in records {
        serde_json::to_writer(&mut w, &record_to_json(r, schema))
            .map_err(|e| CorpusError::MalformedLine { line: 0, message: e.to_string() })?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Class counts and percentage shares.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassDistribution {
    pub counts: [usize; 3],
    pub percent: [f64; 3],
}

impl ClassDistribution {
    pub fn from_labels(labels: &[u8]) -> Self {
        let mut counts = [0usize; 3];
        for &l in labels {
            counts[l as usize] += 1;
        }
        let total = labels.len().max(1) as f64;
        let percent = counts.map(|c| 100.0 * c as f64 / total);
        ClassDistribution { counts, percent }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// Zero-padded integer shares, e.g. "67/23/09".
    pub fn compact(&self) -> String {
        let p = self.percent.map(|v| v.round() as i64);
        format!("{:02}/{:02}/{:02}", p[0], p[1], p[2])
    }
}

pub fn class_distribution(records: &[RulingRecord]) -> ClassDistribution {
    let labels: Vec<u8> = records.iter().map(|r| r.outcome.code()).collect();
    ClassDistribution::from_labels(&labels)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BucketKind {
    Specialist,
    Generic,
}

/// Rulings of one judge (specialist) or the pooled remainder (generic).
/// Row ids index into the loaded corpus, ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bucket {
    pub name: String,
    pub kind: BucketKind,
    pub rows: Vec<usize>,
}

pub const GENERIC_BUCKET: &str = "generic";

/// Splits the corpus into specialist buckets (judges with more rulings than
/// the threshold) plus one pooled generic bucket. Specialists are ordered
/// by descending size, ties by name; the generic bucket comes last.
pub fn partition_buckets(records: &[RulingRecord], threshold: usize) -> Vec<Bucket> {
    let mut per_judge: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        per_judge.entry(&r.judge).or_default().push(i);
    }
    let mut specialists: Vec<Bucket> = Vec::new();
    let mut generic_rows: Vec<usize> = Vec::new();
    for (judge, rows) in per_judge {
        if rows.len() > threshold {
            specialists.push(Bucket { name: judge.to_string(), kind: BucketKind::Specialist, rows });
        } else {
            generic_rows.extend(rows);
        }
    }
    specialists.sort_by(|a, b| b.rows.len().cmp(&a.rows.len()).then_with(|| a.name.cmp(&b.name)));
    let mut buckets = specialists;
    if !generic_rows.is_empty() {
        generic_rows.sort_unstable();
        buckets.push(Bucket { name: GENERIC_BUCKET.to_string(), kind: BucketKind::Generic, rows: generic_rows });
    }
    buckets
}
