//! Structured outcome extraction from ruling texts via a completion
//! provider.
//!
//! The prompt template is frozen byte-for-byte in `prompt_template.txt`;
//! rendering only appends the document under a delimited section.
//! Provider output is parsed strictly: no surrounding prose, no unknown
//! fields, no repair of out-of-ontology values. Malformed outputs are
//! recorded and skipped so extraction quality stays measurable.

use crate::corpus::OutcomeClass;
use crate::metrics::{cohens_kappa, ConfusionMatrix};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Frozen extraction prompt; tests pin its SHA-256.
pub const PROMPT_TEMPLATE: &str = include_str!("prompt_template.txt");

const DOC_OPEN: &str = "\n<DOCUMENT>\n";
const DOC_CLOSE: &str = "\n</DOCUMENT>\n";

#[derive(Debug, Error)]
pub enum ExtractionError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("document text is empty")]
    EmptyDocument,
    #[error("provider output is not a bare JSON object: {0}")]
    Format(String),
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("field {field} holds {value:?}, not in its ontology")]
    Ontology { field: String, value: String },
    #[error("provider {identity} failed after {attempts} attempts: {last_error}")]
    Provider { identity: String, attempts: usize, last_error: String },
    #[error("label sequences differ in length: {predicted} vs {gold}")]
    LengthMismatch { predicted: usize, gold: usize },
    #[error("empty label sequences")]
    EmptyInput,
    #[error("gold annotation row {row}: {reason}")]
    BadGoldRow { row: usize, reason: String },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Where the child lives after the ruling under consideration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LivingWith {
    Mother,
    Father,
    Joint,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Visitation {
    Mother,
    Father,
    Both,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SupportPayer {
    Mother,
    Father,
    Nopayer,
}

impl LivingWith {
    fn parse(value: &str, field: &str) -> Result<Self, ExtractionError> {
        match value {
            "mother" => Ok(LivingWith::Mother),
            "father" => Ok(LivingWith::Father),
            "joint" => Ok(LivingWith::Joint),
            "other" => Ok(LivingWith::Other),
            _ => Err(ontology(field, value)),
        }
    }
}

impl Visitation {
    fn parse(value: &str, field: &str) -> Result<Self, ExtractionError> {
        match value {
            "mother" => Ok(Visitation::Mother),
            "father" => Ok(Visitation::Father),
            "both" => Ok(Visitation::Both),
            "other" => Ok(Visitation::Other),
            _ => Err(ontology(field, value)),
        }
    }
}

impl SupportPayer {
    fn parse(value: &str, field: &str) -> Result<Self, ExtractionError> {
        match value {
            "mother" => Ok(SupportPayer::Mother),
            "father" => Ok(SupportPayer::Father),
            "nopayer" => Ok(SupportPayer::Nopayer),
            _ => Err(ontology(field, value)),
        }
    }
}

fn ontology(field: &str, value: &str) -> ExtractionError {
    ExtractionError::Ontology { field: field.to_string(), value: value.to_string() }
}

/// Per-child custody outcome at both review stages.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChildOutcomeRecord {
    pub child_first_name: String,
    #[serde(rename = "just_before_appeal_review_child_living_with")]
    pub pre_living_with: LivingWith,
    #[serde(rename = "just_before_appeal_review_visitation_rights_granted_to")]
    pub pre_visitation: Visitation,
    #[serde(rename = "just_before_appeal_review_child_support_per_child_per_month_is_equal_to")]
    pub pre_support_amount: i64,
    #[serde(rename = "just_before_appeal_review_child_support_paid_by")]
    pub pre_support_paid_by: SupportPayer,
    #[serde(rename = "after_appeal_review_child_living_with")]
    pub post_living_with: LivingWith,
    #[serde(rename = "after_appeal_review_visitation_rights_granted_to")]
    pub post_visitation: Visitation,
    #[serde(rename = "after_appeal_review_child_support_amount_per_child_per_month_is_equal_to")]
    pub post_support_amount: i64,
    #[serde(rename = "after_appeal_review_child_support_paid_by")]
    pub post_support_paid_by: SupportPayer,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseMetadata {
    pub appeal_decision_date: String,
    pub appeal_case_id: String,
    pub appeal_court_city: String,
}

/// Validated provider output for one ruling.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionResult {
    pub case_metadata: CaseMetadata,
    #[serde(rename = "child_specific_outcome")]
    pub children: Vec<ChildOutcomeRecord>,
}

pub fn render_prompt(document_text: &str) -> Result<String, ExtractionError> {
    if document_text.is_empty() {
        return Err(ExtractionError::EmptyDocument);
    }
    Ok(format!("{PROMPT_TEMPLATE}{DOC_OPEN}{document_text}{DOC_CLOSE}"))
}

/// Recovers the document section a prompt was rendered with.
pub fn document_of_prompt(prompt: &str) -> Option<&str> {
    let start = prompt.find(DOC_OPEN)? + DOC_OPEN.len();
    let end = prompt.rfind(DOC_CLOSE)?;
    (start <= end).then(|| &prompt[start..end])
}

fn expect_object<'a>(
    value: &'a Value,
    path: &str,
) -> Result<&'a serde_json::Map<String, Value>, ExtractionError> {
    value
        .as_object()
        .ok_or_else(|| ExtractionError::Schema(format!("{path} must be an object")))
}

fn take_string<'a>(
    obj: &'a serde_json::Map<String, Value>,
    field: &str,
    path: &str,
) -> Result<&'a str, ExtractionError> {
    let value = obj
        .get(field)
        .ok_or_else(|| ExtractionError::Schema(format!("{path}: missing field {field:?}")))?;
    value
        .as_str()
        .ok_or_else(|| ExtractionError::Schema(format!("{path}.{field} must be a string")))
}

fn take_integer(
    obj: &serde_json::Map<String, Value>,
    field: &str,
    path: &str,
) -> Result<i64, ExtractionError> {
    let value = obj
        .get(field)
        .ok_or_else(|| ExtractionError::Schema(format!("{path}: missing field {field:?}")))?;
    value
        .as_i64()
        .ok_or_else(|| ExtractionError::Schema(format!("{path}.{field} must be an integer")))
}

fn reject_unknown(
    obj: &serde_json::Map<String, Value>,
    allowed: &[&str],
    path: &str,
) -> Result<(), ExtractionError> {
    for key in obj.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(ExtractionError::Schema(format!("{path}: unknown field {key:?}")));
        }
    }
    Ok(())
}

fn valid_iso_date(s: &str) -> bool {
    chrono::NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .map(|d| d.format("%Y-%m-%d").to_string() == s)
        .unwrap_or(false)
}

const CHILD_FIELDS: [&str; 9] = [
    "child_first_name",
    "just_before_appeal_review_child_living_with",
    "just_before_appeal_review_visitation_rights_granted_to",
    "just_before_appeal_review_child_support_per_child_per_month_is_equal_to",
    "just_before_appeal_review_child_support_paid_by",
    "after_appeal_review_child_living_with",
    "after_appeal_review_visitation_rights_granted_to",
    "after_appeal_review_child_support_amount_per_child_per_month_is_equal_to",
    "after_appeal_review_child_support_paid_by",
];

fn parse_child(value: &Value, path: &str) -> Result<ChildOutcomeRecord, ExtractionError> {
    let obj = expect_object(value, path)?;
    reject_unknown(obj, &CHILD_FIELDS, path)?;
    let enum_field = |field: &str| -> Result<String, ExtractionError> {
        take_string(obj, field, path).map(str::to_string)
    };
    Ok(ChildOutcomeRecord {
        child_first_name: take_string(obj, CHILD_FIELDS[0], path)?.to_string(),
        pre_living_with: LivingWith::parse(&enum_field(CHILD_FIELDS[1])?, CHILD_FIELDS[1])?,
        pre_visitation: Visitation::parse(&enum_field(CHILD_FIELDS[2])?, CHILD_FIELDS[2])?,
        pre_support_amount: take_integer(obj, CHILD_FIELDS[3], path)?,
        pre_support_paid_by: SupportPayer::parse(&enum_field(CHILD_FIELDS[4])?, CHILD_FIELDS[4])?,
        post_living_with: LivingWith::parse(&enum_field(CHILD_FIELDS[5])?, CHILD_FIELDS[5])?,
        post_visitation: Visitation::parse(&enum_field(CHILD_FIELDS[6])?, CHILD_FIELDS[6])?,
        post_support_amount: take_integer(obj, CHILD_FIELDS[7], path)?,
        post_support_paid_by: SupportPayer::parse(&enum_field(CHILD_FIELDS[8])?, CHILD_FIELDS[8])?,
    })
}

/// Strict parse of raw provider output. Anything beyond one bare JSON
/// object, any unknown field, and any out-of-ontology value is an error.
pub fn parse_extraction(raw: &str) -> Result<ExtractionResult, ExtractionError> {
    let root: Value =
        serde_json::from_str(raw).map_err(|e| ExtractionError::Format(e.to_string()))?;
    let obj = expect_object(&root, "$")?;
    reject_unknown(obj, &["case_metadata", "child_specific_outcome"], "$")?;

    let meta_value = obj
        .get("case_metadata")
        .ok_or_else(|| ExtractionError::Schema("$: missing field \"case_metadata\"".into()))?;
    let meta = expect_object(meta_value, "$.case_metadata")?;
    reject_unknown(
        meta,
        &["appeal_decision_date", "appeal_case_id", "appeal_court_city"],
        "$.case_metadata",
    )?;
    let date = take_string(meta, "appeal_decision_date", "$.case_metadata")?;
    if !valid_iso_date(date) {
        return Err(ExtractionError::Schema(format!(
            "$.case_metadata.appeal_decision_date {date:?} is not a yyyy-mm-dd date"
        )));
    }
    let case_metadata = CaseMetadata {
        appeal_decision_date: date.to_string(),
        appeal_case_id: take_string(meta, "appeal_case_id", "$.case_metadata")?.to_string(),
        appeal_court_city: take_string(meta, "appeal_court_city", "$.case_metadata")?.to_string(),
    };

    let children_value = obj.get("child_specific_outcome").ok_or_else(|| {
        ExtractionError::Schema("$: missing field \"child_specific_outcome\"".into())
    })?;
    let items = children_value.as_array().ok_or_else(|| {
        ExtractionError::Schema("$.child_specific_outcome must be an array".into())
    })?;
    if items.is_empty() {
        return Err(ExtractionError::Schema("$.child_specific_outcome is empty".into()));
    }
    let children = items
        .iter()
        .enumerate()
        .map(|(i, v)| parse_child(v, &format!("$.child_specific_outcome[{i}]")))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ExtractionResult { case_metadata, children })
}

/// Which ruling the custody label is read from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    PreAppeal,
    PostAppeal,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::PreAppeal => "pre_appeal",
            Stage::PostAppeal => "post_appeal",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "pre_appeal" => Some(Stage::PreAppeal),
            "post_appeal" => Some(Stage::PostAppeal),
            _ => None,
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Tri-class custody label for one child, or None when the residual
/// "other" arrangement excludes the record from training data.
pub fn map_outcome_label(record: &ChildOutcomeRecord, stage: Stage) -> Option<OutcomeClass> {
    let living_with = match stage {
        Stage::PreAppeal => record.pre_living_with,
        Stage::PostAppeal => record.post_living_with,
    };
    match living_with {
        LivingWith::Mother => Some(OutcomeClass::Mother),
        LivingWith::Father => Some(OutcomeClass::Father),
        LivingWith::Joint => Some(OutcomeClass::Shared),
        LivingWith::Other => None,
    }
}

/// Per-class agreement, all rates as fractions in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassAgreement {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub true_positives: u64,
}

/// Agreement between predicted and gold label sequences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub kappa: f64,
    pub per_class: [ClassAgreement; 3],
    pub n: usize,
}

pub fn evaluate_extraction(predicted: &[u8], gold: &[u8]) -> Result<AgreementReport, ExtractionError> {
    if predicted.len() != gold.len() {
        return Err(ExtractionError::LengthMismatch {
            predicted: predicted.len(),
            gold: gold.len(),
        });
    }
    if predicted.is_empty() {
        return Err(ExtractionError::EmptyInput);
    }
    let confusion = ConfusionMatrix::from_labels(gold, predicted)
        .map_err(|e| ExtractionError::Schema(e.to_string()))?;
    let kappa = cohens_kappa(predicted, gold).map_err(|e| ExtractionError::Schema(e.to_string()))?;
    let counts = confusion.counts();
    let mut per_class = [ClassAgreement { precision: 0.0, recall: 0.0, f1: 0.0, true_positives: 0 }; 3];
    for c in 0..3 {
        let tp = counts[c][c];
        let col: u64 = (0..3).map(|r| counts[r][c]).sum();
        let row: u64 = counts[c].iter().sum();
        let precision = if col == 0 { 0.0 } else { tp as f64 / col as f64 };
        let recall = if row == 0 { 0.0 } else { tp as f64 / row as f64 };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        per_class[c] = ClassAgreement { precision, recall, f1, true_positives: tp };
    }
    Ok(AgreementReport { kappa, per_class, n: predicted.len() })
}

/// Synchronous text-in/text-out boundary to the completion backend.
pub trait CompletionProvider {
    /// Provider name/version, recorded alongside run artifacts.
    fn identity(&self) -> String;
    fn send(&mut self, prompt: &str) -> Result<String, String>;
}

/// Canned responses on disk, keyed by the SHA-256 of the document the
/// prompt embeds. Satisfies the provider interface deterministically.
pub struct StubProvider {
    dir: PathBuf,
}

impl StubProvider {
    pub fn new(dir: &Path) -> Self {
        StubProvider { dir: dir.to_path_buf() }
    }

    /// File name a canned response for this document must use.
    pub fn response_file(document_text: &str) -> String {
        format!("{}.json", sha256_hex(document_text.as_bytes()))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

impl CompletionProvider for StubProvider {
    fn identity(&self) -> String {
        format!("stub:{}", self.dir.display())
    }

    fn send(&mut self, prompt: &str) -> Result<String, String> {
        let document = document_of_prompt(prompt)
            .ok_or_else(|| "prompt has no document section".to_string())?;
        let path = self.dir.join(Self::response_file(document));
        std::fs::read_to_string(&path)
            .map_err(|e| format!("no canned response {}: {e}", path.display()))
    }
}

/// One document that failed extraction, with the reason it was skipped.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionFailure {
    pub key: String,
    pub reason: String,
}

/// Outcome of an extraction run over a document batch.
pub struct ExtractionRun {
    pub results: Vec<(String, ExtractionResult)>,
    pub failures: Vec<ExtractionFailure>,
    pub provider_identity: String,
}

pub const PROVIDER_RETRIES: usize = 3;

/// Sends every document through the provider, persisting each raw
/// output under `raw_dir` before parsing it. Provider errors retry up
/// to [`PROVIDER_RETRIES`] times; malformed outputs are recorded and
/// skipped, never repaired.
pub fn run_extraction(
    documents: &[(String, String)],
    provider: &mut dyn CompletionProvider,
    raw_dir: &Path,
) -> Result<ExtractionRun, ExtractionError> {
    std::fs::create_dir_all(raw_dir)?;
    let mut results = Vec::new();
    let mut failures = Vec::new();
    for (key, text) in documents {
        let prompt = match render_prompt(text) {
            Ok(p) => p,
            Err(e) => {
                failures.push(ExtractionFailure { key: key.clone(), reason: e.to_string() });
                continue;
            }
        };
        let mut raw = None;
        let mut last_error = String::new();
        for attempt in 1..=PROVIDER_RETRIES {
            match provider.send(&prompt) {
                Ok(output) => {
                    let mut file =
                        std::fs::File::create(raw_dir.join(format!("{key}.attempt{attempt}.json")))?;
                    file.write_all(output.as_bytes())?;
                    raw = Some(output);
                    break;
                }
                Err(e) => last_error = e,
            }
        }
        let Some(raw) = raw else {
            failures.push(ExtractionFailure {
                key: key.clone(),
                reason: ExtractionError::Provider {
                    identity: provider.identity(),
                    attempts: PROVIDER_RETRIES,
                    last_error,
                }
                .to_string(),
            });
            continue;
        };
        match parse_extraction(&raw) {
            Ok(result) => results.push((key.clone(), result)),
            Err(e) => {
                failures.push(ExtractionFailure { key: key.clone(), reason: e.to_string() })
            }
        }
    }
    Ok(ExtractionRun { results, failures, provider_identity: provider.identity() })
}

/// One human-annotated custody label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoldLabel {
    pub case_id: String,
    pub child_id: String,
    pub stage: Stage,
    pub label: OutcomeClass,
}

/// Reads gold annotations from a CSV with header
/// `case_id,child_id,stage,label`.
pub fn load_gold_labels(path: &Path) -> Result<Vec<GoldLabel>, ExtractionError> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = i + 2;
        if record.len() != 4 {
            return Err(ExtractionError::BadGoldRow {
                row,
                reason: format!("expected 4 columns, found {}", record.len()),
            });
        }
        let stage = Stage::parse(&record[2]).ok_or_else(|| ExtractionError::BadGoldRow {
            row,
            reason: format!("unknown stage {:?}", &record[2]),
        })?;
        let label =
            OutcomeClass::parse(&record[3]).ok_or_else(|| ExtractionError::BadGoldRow {
                row,
                reason: format!("unknown label {:?}", &record[3]),
            })?;
        rows.push(GoldLabel {
            case_id: record[0].to_string(),
            child_id: record[1].to_string(),
            stage,
            label,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const TEMPLATE_SHA256: &str =
        "23fda64efb30552bc5c02adb98733fe85eacda77f74059584f4eb13c2292aa4b";

    fn valid_raw() -> String {
        serde_json::json!({
            "case_metadata": {
                "appeal_decision_date": "2021-03-15",
                "appeal_case_id": "19/02345",
                "appeal_court_city": "Nimes"
            },
            "child_specific_outcome": [{
                "child_first_name": "A",
                "just_before_appeal_review_child_living_with": "mother",
                "just_before_appeal_review_visitation_rights_granted_to": "father",
                "just_before_appeal_review_child_support_per_child_per_month_is_equal_to": 150,
                "just_before_appeal_review_child_support_paid_by": "father",
                "after_appeal_review_child_living_with": "joint",
                "after_appeal_review_visitation_rights_granted_to": "both",
                "after_appeal_review_child_support_amount_per_child_per_month_is_equal_to": 0,
                "after_appeal_review_child_support_paid_by": "nopayer"
            }]
        })
        .to_string()
    }

    #[test]
    fn template_bytes_are_frozen() {
        assert_eq!(sha256_hex(PROMPT_TEMPLATE.as_bytes()), TEMPLATE_SHA256);
        assert!(PROMPT_TEMPLATE.starts_with("SYSTEM_ROLE: LEGAL_DATA_EXTRACTION_AGENT\n"));
        assert!(PROMPT_TEMPLATE.ends_with("EXECUTE_EXTRACTION_MODE: STRICT\n"));
    }

    #[test]
    fn rendered_prompt_wraps_the_frozen_template() {
        let prompt = render_prompt("Par ces motifs ...").unwrap();
        assert!(prompt.starts_with("SYSTEM_ROLE: LEGAL_DATA_EXTRACTION_AGENT"));
        let doc_start = prompt.find(DOC_OPEN).unwrap();
        assert_eq!(sha256_hex(prompt[..doc_start].as_bytes()), TEMPLATE_SHA256);
        assert_eq!(document_of_prompt(&prompt), Some("Par ces motifs ..."));
        assert!(matches!(render_prompt(""), Err(ExtractionError::EmptyDocument)));
    }

    #[test]
    fn parse_accepts_a_valid_output() {
        let result = parse_extraction(&valid_raw()).unwrap();
        assert_eq!(result.case_metadata.appeal_court_city, "Nimes");
        assert_eq!(result.children.len(), 1);
        assert_eq!(result.children[0].post_living_with, LivingWith::Joint);
        assert_eq!(result.children[0].pre_support_amount, 150);
    }

    #[test]
    fn surrounding_prose_is_a_format_error() {
        let raw = format!("Sure! Here is the JSON: {}", valid_raw());
        assert!(matches!(parse_extraction(&raw), Err(ExtractionError::Format(_))));
        let trailing = format!("{} Hope this helps!", valid_raw());
        assert!(matches!(parse_extraction(&trailing), Err(ExtractionError::Format(_))));
        assert!(matches!(parse_extraction("not json"), Err(ExtractionError::Format(_))));
    }

    #[test]
    fn out_of_ontology_values_name_the_field() {
        let raw = valid_raw().replace("\"joint\"", "\"grandmother\"");
        match parse_extraction(&raw) {
            Err(ExtractionError::Ontology { field, value }) => {
                assert_eq!(field, "after_appeal_review_child_living_with");
                assert_eq!(value, "grandmother");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn structural_violations_are_schema_errors() {
        let missing = valid_raw().replace("\"child_first_name\":\"A\",", "");
        assert!(matches!(parse_extraction(&missing), Err(ExtractionError::Schema(_))));

        let unknown = valid_raw().replace("\"child_first_name\"", "\"child_nickname\"");
        assert!(matches!(parse_extraction(&unknown), Err(ExtractionError::Schema(_))));

        let float = valid_raw().replace(":150,", ":150.5,");
        assert!(matches!(parse_extraction(&float), Err(ExtractionError::Schema(_))));

        let no_children = valid_raw().replace(&format!("[{}]", child_json()), "[]");
        assert!(matches!(parse_extraction(&no_children), Err(ExtractionError::Schema(_))));

        let bad_date = valid_raw().replace("2021-03-15", "15/03/2021");
        assert!(matches!(parse_extraction(&bad_date), Err(ExtractionError::Schema(_))));
    }

    fn child_json() -> String {
        let parsed: Value = serde_json::from_str(&valid_raw()).unwrap();
        parsed["child_specific_outcome"][0].to_string()
    }

    #[test]
    fn accepted_output_reserializes_to_an_accepted_form() {
        let result = parse_extraction(&valid_raw()).unwrap();
        let round = serde_json::to_string(&result).unwrap();
        assert!(oracle_accepts(&round), "re-serialized output must stay valid");
        assert_eq!(parse_extraction(&round).unwrap(), result);
    }

    #[test]
    fn outcome_mapping_is_total_over_the_ontology() {
        let mut record = parse_extraction(&valid_raw()).unwrap().children[0].clone();
        let cases = [
            (LivingWith::Mother, Some(OutcomeClass::Mother)),
            (LivingWith::Father, Some(OutcomeClass::Father)),
            (LivingWith::Joint, Some(OutcomeClass::Shared)),
            (LivingWith::Other, None),
        ];
        for (value, expected) in cases {
            record.post_living_with = value;
            assert_eq!(map_outcome_label(&record, Stage::PostAppeal), expected);
            record.pre_living_with = value;
            assert_eq!(map_outcome_label(&record, Stage::PreAppeal), expected);
        }
    }

    #[test]
    fn identical_sequences_agree_perfectly() {
        let labels = vec![0u8, 1, 2, 0, 1, 2, 0];
        let report = evaluate_extraction(&labels, &labels).unwrap();
        assert_eq!(report.kappa, 1.0);
        assert_eq!(report.n, 7);
        for class in report.per_class {
            assert_eq!(class.f1, 1.0);
        }
    }

    #[test]
    fn kappa_matches_the_direct_formula() {
        let report = evaluate_extraction(&[0, 1, 1, 1], &[0, 0, 1, 1]).unwrap();
        assert!((report.kappa - 0.5).abs() < 1e-12);
    }

    #[test]
    fn appeal_stage_fixture_reaches_published_agreement() {
        // Confusion with marginals chosen so the father class lands at
        // F1 0.95 and kappa 0.8914 within the stated tolerances.
        let counts = [[265u64, 7, 13], [2, 120, 2], [3, 2, 60]];
        let mut gold = Vec::new();
        let mut predicted = Vec::new();
        for (truth, row) in counts.iter().enumerate() {
            for (pred, &k) in row.iter().enumerate() {
                gold.extend(std::iter::repeat_n(truth as u8, k as usize));
                predicted.extend(std::iter::repeat_n(pred as u8, k as usize));
            }
        }
        let report = evaluate_extraction(&predicted, &gold).unwrap();
        assert_eq!(report.n, 474);
        assert!((report.per_class[1].f1 - 0.95).abs() < 0.005, "f1 {}", report.per_class[1].f1);
        assert!((report.kappa - 0.8914).abs() < 0.0005, "kappa {}", report.kappa);
        assert_eq!(report.per_class[1].true_positives, 120);
        for class in report.per_class {
            let f1 = 2.0 * class.precision * class.recall / (class.precision + class.recall);
            assert!((class.f1 - f1).abs() < 1e-12);
        }
    }

    #[test]
    fn mismatched_or_empty_sequences_are_errors() {
        assert!(matches!(
            evaluate_extraction(&[0, 1], &[0]),
            Err(ExtractionError::LengthMismatch { predicted: 2, gold: 1 })
        ));
        assert!(matches!(evaluate_extraction(&[], &[]), Err(ExtractionError::EmptyInput)));
    }

    /// Independent acceptance oracle: serde derive with unknown fields
    /// denied, plus the non-structural invariants.
    mod oracle {
        use serde::Deserialize;

        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        pub struct Meta {
            pub appeal_decision_date: String,
            #[allow(dead_code)]
            pub appeal_case_id: String,
            #[allow(dead_code)]
            pub appeal_court_city: String,
        }

        #[derive(Deserialize)]
        #[serde(rename_all = "lowercase")]
        pub enum Living {
            Mother,
            Father,
            Joint,
            Other,
        }

        #[derive(Deserialize)]
        #[serde(rename_all = "lowercase")]
        pub enum Visit {
            Mother,
            Father,
            Both,
            Other,
        }

        #[derive(Deserialize)]
        #[serde(rename_all = "lowercase")]
        pub enum Payer {
            Mother,
            Father,
            Nopayer,
        }

        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        #[allow(dead_code)]
        pub struct Child {
            pub child_first_name: String,
            pub just_before_appeal_review_child_living_with: Living,
            pub just_before_appeal_review_visitation_rights_granted_to: Visit,
            pub just_before_appeal_review_child_support_per_child_per_month_is_equal_to: i64,
            pub just_before_appeal_review_child_support_paid_by: Payer,
            pub after_appeal_review_child_living_with: Living,
            pub after_appeal_review_visitation_rights_granted_to: Visit,
            pub after_appeal_review_child_support_amount_per_child_per_month_is_equal_to: i64,
            pub after_appeal_review_child_support_paid_by: Payer,
        }

        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        pub struct Root {
            pub case_metadata: Meta,
            pub child_specific_outcome: Vec<Child>,
        }
    }

    fn oracle_accepts(raw: &str) -> bool {
        let Ok(root) = serde_json::from_str::<oracle::Root>(raw) else {
            return false;
        };
        !root.child_specific_outcome.is_empty()
            && valid_iso_date(&root.case_metadata.appeal_decision_date)
    }

    /// Mutations a sloppy provider might produce.
    fn mutate(raw: &str, which: u8, token: &str) -> String {
        match which {
            0 => raw.replace("\"mother\"", &format!("{token:?}")),
            1 => raw.replace("\"appeal_case_id\"", &format!("{token:?}")),
            2 => raw.replace(":150", ":\"150\""),
            3 => format!("{raw} "),
            4 => format!("```json\n{raw}\n```"),
            5 => raw.replace("2021-03-15", token),
            6 => raw.replacen('{', "", 1),
            7 => raw.replace(":0,", ":-25,"),
            _ => raw.to_string(),
        }
    }

    proptest! {
        #[test]
        fn parser_agrees_with_the_independent_validator(
            which in 0u8..9,
            token in "[a-z]{1,10}",
        ) {
            let raw = mutate(&valid_raw(), which, &token);
            let accepted = parse_extraction(&raw).is_ok();
            prop_assert_eq!(accepted, oracle_accepts(&raw), "disagree on {}", raw);
        }
    }

    struct FlakyProvider {
        fail_first: usize,
        calls: usize,
    }

    impl CompletionProvider for FlakyProvider {
        fn identity(&self) -> String {
            "flaky/1".into()
        }

        fn send(&mut self, prompt: &str) -> Result<String, String> {
            self.calls += 1;
            if self.calls <= self.fail_first {
                return Err("transient".into());
            }
            let _ = document_of_prompt(prompt).unwrap();
            Ok(valid_raw())
        }
    }

    #[test]
    fn stub_provider_round_trips_canned_responses() {
        let dir = tempfile::tempdir().unwrap();
        let doc = "Arret du 15 mars 2021 ...".to_string();
        std::fs::write(dir.path().join(StubProvider::response_file(&doc)), valid_raw()).unwrap();

        let mut provider = StubProvider::new(dir.path());
        let raw_dir = dir.path().join("raw");
        let docs = vec![("case-7".to_string(), doc), ("case-8".to_string(), "unknown".to_string())];
        let run = run_extraction(&docs, &mut provider, &raw_dir).unwrap();

        assert_eq!(run.results.len(), 1);
        assert_eq!(run.results[0].0, "case-7");
        assert_eq!(run.failures.len(), 1);
        assert!(run.failures[0].reason.contains("3 attempts"));
        assert!(raw_dir.join("case-7.attempt1.json").exists(), "raw output persisted");
    }

    #[test]
    fn provider_errors_retry_then_succeed() {
        let dir = tempfile::tempdir().unwrap();
        let mut provider = FlakyProvider { fail_first: 2, calls: 0 };
        let docs = vec![("k".to_string(), "text".to_string())];
        let run = run_extraction(&docs, &mut provider, &dir.path().join("raw")).unwrap();
        assert_eq!(run.results.len(), 1);
        assert_eq!(provider.calls, 3);
        assert!(dir.path().join("raw/k.attempt3.json").exists());
    }

    #[test]
    fn malformed_outputs_are_skipped_not_repaired() {
        let dir = tempfile::tempdir().unwrap();
        let doc = "some ruling".to_string();
        std::fs::write(
            dir.path().join(StubProvider::response_file(&doc)),
            "Sure! {\"case_metadata\":{}}",
        )
        .unwrap();
        let mut provider = StubProvider::new(dir.path());
        let docs = vec![("k".to_string(), doc)];
        let run = run_extraction(&docs, &mut provider, &dir.path().join("raw")).unwrap();
        assert!(run.results.is_empty());
        assert_eq!(run.failures.len(), 1);
        assert!(run.failures[0].reason.contains("JSON"));
        assert!(dir.path().join("raw/k.attempt1.json").exists(), "audit copy precedes parsing");
    }

    #[test]
    fn gold_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gold.csv");
        std::fs::write(
            &path,
            "case_id,child_id,stage,label\nc1,k1,post_appeal,mother\nc1,k2,pre_appeal,shared\n",
        )
        .unwrap();
        let rows = load_gold_labels(&path).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].label, OutcomeClass::Mother);
        assert_eq!(rows[1].stage, Stage::PreAppeal);

        std::fs::write(&path, "case_id,child_id,stage,label\nc1,k1,post_appeal,uncle\n").unwrap();
        assert!(matches!(
            load_gold_labels(&path),
            Err(ExtractionError::BadGoldRow { row: 2, .. })
        ));
    }
}
