//! The six commands, each a pure function of its inputs and flags.
//!
//! Every command that writes files routes them through one
//! [`OutputWriter`] and closes with a manifest, so artifacts are
//! hash-listed and re-runs can be compared byte for byte. Ground-truth
//! files (pseudonym tables, labeling oracles) are written sealed and
//! owner-only; nothing else in an output directory ever contains an
//! original name.

use crate::config::{resolve, Overrides, Resolved};
use crate::error::{read_input, read_input_text, CliError};
use crate::manifest::OutputWriter;
use gavel::corpus::{
    class_distribution, parse_rulings, partition_buckets, write_rulings, ClassDistribution,
    FeatureSchema, RulingRecord,
};
use gavel::experiments::{
    ablation_csv, ablation_markdown, bundle_json, cross_matrix_csv, cross_matrix_markdown,
    importance_csv, importance_markdown, in_domain_csv, in_domain_markdown, run_ablation,
    run_experiment, ExperimentRun,
};
use gavel::extraction::{evaluate_extraction, load_gold_labels, sha256_hex};
use gavel::pseudonym::{build_pseudonym_table, leakage_scan, load_dictionary, redact_identities};
use gavel::synthgen::{generate, SynthSpec};
use std::path::{Path, PathBuf};

/// Confirms an input path is a readable file before the work starts,
/// so a typo surfaces as a usage error rather than a late failure.
fn require_input(path: &Path) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("{} is not a readable file", path.display())))
    }
}

fn load_schema(path: Option<&Path>) -> Result<FeatureSchema, CliError> {
    match path {
        Some(p) => {
            require_input(p)?;
            Ok(FeatureSchema::from_json(&read_input_text(p)?)?)
        }
        None => Ok(FeatureSchema::custody()),
    }
}

/// Reads and validates a corpus, returning its content hash alongside.
fn load_corpus(
    path: &Path,
    schema: &FeatureSchema,
) -> Result<(Vec<RulingRecord>, String), CliError> {
    require_input(path)?;
    let bytes = read_input(path)?;
    let records = parse_rulings(&bytes[..], schema)?;
    Ok((records, sha256_hex(&bytes)))
}

fn shares_line(dist: &ClassDistribution) -> String {
    format!(
        "mother {} | father {} | shared {} (compact {})",
        gavel::metrics::format_pct(dist.percent[0]),
        gavel::metrics::format_pct(dist.percent[1]),
        gavel::metrics::format_pct(dist.percent[2]),
        dist.compact()
    )
}

pub fn cmd_ingest(corpus: &Path, schema: Option<&Path>, threshold: usize) -> Result<(), CliError> {
    let schema = load_schema(schema)?;
    let (records, corpus_hash) = load_corpus(corpus, &schema)?;
    let dist = class_distribution(&records);
    let buckets = partition_buckets(&records, threshold);

    println!("corpus: {} (sha256 {})", corpus.display(), corpus_hash);
    println!("records: {}", records.len());
    println!("features: {}", schema.len());
    println!(
        "outcome counts: mother {} | father {} | shared {}",
        dist.counts[0], dist.counts[1], dist.counts[2]
    );
    println!("outcome shares: {}", shares_line(&dist));
    println!("buckets at threshold {threshold}: {}", buckets.len());
    for bucket in &buckets {
        let labels: Vec<u8> = bucket.rows.iter().map(|&r| records[r].outcome.code()).collect();
        let bucket_dist = ClassDistribution::from_labels(&labels);
        println!(
            "  {} [{:?}] rows {} shares {}",
            bucket.name,
            bucket.kind,
            bucket.rows.len(),
            bucket_dist.compact()
        );
    }
    Ok(())
}

pub struct PseudonymizeArgs<'a> {
    pub docs: &'a Path,
    pub names: &'a Path,
    pub dictionary: &'a Path,
    pub seed: u64,
    pub out: &'a Path,
    pub exact_accents: bool,
    pub stamp: bool,
}

pub fn cmd_pseudonymize(args: PseudonymizeArgs<'_>) -> Result<(), CliError> {
    require_input(args.names)?;
    require_input(args.dictionary)?;
    if !args.docs.is_dir() {
        return Err(CliError::Usage(format!("{} is not a directory", args.docs.display())));
    }

    let originals: Vec<String> = read_input_text(args.names)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect();
    if originals.is_empty() {
        return Err(CliError::Validation(format!("{} lists no names", args.names.display())));
    }
    let dictionary = load_dictionary(args.dictionary)?;
    let table = build_pseudonym_table(&originals, &dictionary, args.seed)?;

    let mut doc_paths: Vec<PathBuf> = std::fs::read_dir(args.docs)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", args.docs.display())))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    doc_paths.sort();
    if doc_paths.is_empty() {
        return Err(CliError::Validation(format!("{} holds no documents", args.docs.display())));
    }

    // Everything except the sealed table is scanned before a single
    // byte lands on disk; a leak aborts with nothing written.
    let mut outputs: Vec<(String, String)> = Vec::new();
    for path in &doc_paths {
        let name = path
            .file_name()
            .and_then(|n| n.to_str())
            .ok_or_else(|| CliError::Validation(format!("{} is not valid UTF-8", path.display())))?;
        let text = read_input_text(path)?;
        let redacted = redact_identities(&text, &table, !args.exact_accents);
        outputs.push((format!("docs/{name}"), redacted));
    }

    let mut leaks = Vec::new();
    for (rel, content) in &outputs {
        for hit in leakage_scan(content, &originals) {
            leaks.push(format!("{rel}: {:?} at byte {}", hit.name, hit.offset));
        }
        for hit in leakage_scan(rel, &originals) {
            leaks.push(format!("output path {rel:?} contains {:?}", hit.name));
        }
    }
    if !leaks.is_empty() {
        let shown = leaks.iter().take(5).cloned().collect::<Vec<_>>().join("; ");
        return Err(CliError::Validation(format!(
            "leakage scan found {} original-name occurrence(s): {shown}",
            leaks.len()
        )));
    }

    let mut writer = OutputWriter::new(args.out)?;
    for (rel, content) in &outputs {
        writer.write(rel, content.as_bytes())?;
    }
    writer.write_sealed("pseudonyms.sealed.json", serde_json::to_string_pretty(&table)?.as_bytes())?;
    writer.finish("pseudonymize", String::new(), String::new(), args.seed, args.stamp)?;

    println!(
        "redacted {} document(s) with {} pseudonym(s); leakage scan clean; outputs in {}",
        outputs.len(),
        table.len(),
        args.out.display()
    );
    Ok(())
}

/// Runs a closure inside a bounded worker pool when `--jobs` is given.
fn with_pool<T: Send>(jobs: Option<usize>, work: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    match jobs {
        Some(n) => Ok(rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Internal(format!("worker pool: {e}")))?
            .install(work)),
        None => Ok(work()),
    }
}

fn write_run_reports(writer: &mut OutputWriter, run: &ExperimentRun) -> Result<(), CliError> {
    for algo_run in &run.algorithms {
        let algo = algo_run.algorithm.as_str();
        writer.write(&format!("in_domain_{algo}.csv"), in_domain_csv(&algo_run.in_domain).as_bytes())?;
        writer.write(
            &format!("in_domain_{algo}.md"),
            in_domain_markdown(&format!("In-domain results ({algo})"), &algo_run.in_domain)
                .as_bytes(),
        )?;
        writer.write(&format!("cross_matrix_{algo}.csv"), cross_matrix_csv(&algo_run.cross).as_bytes())?;
        writer.write(
            &format!("cross_matrix_{algo}.md"),
            cross_matrix_markdown(&format!("Cross-domain macro-F1 ({algo})"), &algo_run.cross)
                .as_bytes(),
        )?;
    }
    if let Some(importances) = &run.importances {
        writer.write("importances.csv", importance_csv(importances).as_bytes())?;
        writer.write("importances.md", importance_markdown(importances).as_bytes())?;
    }
    writer.write("bundle.json", bundle_json(run).as_bytes())?;
    Ok(())
}

fn print_run_summary(run: &ExperimentRun) {
    for algo_run in &run.algorithms {
        let s = &algo_run.summary;
        println!(
            "{}: {} bucket(s), specialist wins {}/{}, strong drops {}/{} off-diagonal",
            algo_run.algorithm,
            algo_run.buckets.len(),
            s.specialist_wins,
            s.diagonal_cells,
            s.strong_drops,
            s.off_diagonal_cells
        );
        for skip in &algo_run.skipped {
            eprintln!("warning: skipped bucket {} ({} rows): {}", skip.bucket, skip.n_rows, skip.reason);
        }
    }
}

pub fn cmd_run(overrides: Overrides, stamp: bool) -> Result<(), CliError> {
    let Resolved { corpus, out, jobs, experiment } = resolve(overrides)?;
    let schema = FeatureSchema::custody();
    let (records, corpus_hash) = load_corpus(&corpus, &schema)?;

    let config_text = serde_json::to_string_pretty(&experiment)?;
    let config_hash = sha256_hex(config_text.as_bytes());
    let run = with_pool(jobs, || run_experiment(&records, &schema, &experiment))??;

    let mut writer = OutputWriter::new(&out)?;
    writer.write("resolved_config.json", config_text.as_bytes())?;
    write_run_reports(&mut writer, &run)?;
    writer.finish("run", config_hash, corpus_hash, experiment.seed, stamp)?;

    print_run_summary(&run);
    println!("reports written to {}", out.display());
    Ok(())
}

pub fn cmd_ablate(overrides: Overrides, clusters: &[u8], stamp: bool) -> Result<(), CliError> {
    if clusters.is_empty() {
        return Err(CliError::Usage("no clusters given (--clusters 1,2,3)".into()));
    }
    for &c in clusters {
        if !(1..=3).contains(&c) {
            return Err(CliError::Usage(format!("cluster {c} is not one of 1, 2, 3")));
        }
    }
    let Resolved { corpus, out, jobs, experiment } = resolve(overrides)?;
    let schema = FeatureSchema::custody();
    let (records, corpus_hash) = load_corpus(&corpus, &schema)?;

    let config_text = serde_json::to_string_pretty(&experiment)?;
    let config_hash = sha256_hex(config_text.as_bytes());
    let report = with_pool(jobs, || run_ablation(&records, &schema, &experiment, clusters))??;

    let mut writer = OutputWriter::new(&out)?;
    writer.write("resolved_config.json", config_text.as_bytes())?;
    writer.write("ablation.csv", ablation_csv(&report).as_bytes())?;
    writer.write("ablation.md", ablation_markdown(&report).as_bytes())?;
    writer.write("ablation.json", serde_json::to_string_pretty(&report)?.as_bytes())?;
    writer.finish("ablate", config_hash, corpus_hash, experiment.seed, stamp)?;

    println!(
        "ablation over cluster(s) {:?}: {} row(s), reports written to {}",
        report.clusters,
        report.rows.len(),
        out.display()
    );
    Ok(())
}

pub fn cmd_synth(spec_path: &Path, out: &Path, stamp: bool) -> Result<(), CliError> {
    require_input(spec_path)?;
    let spec_bytes = read_input(spec_path)?;
    let spec: SynthSpec = serde_json::from_slice(&spec_bytes)
        .map_err(|e| CliError::Validation(format!("bad spec {}: {e}", spec_path.display())))?;
    let schema = FeatureSchema::custody();
    let corpus = generate(&spec, &schema)?;

    let mut corpus_bytes = Vec::new();
    write_rulings(&mut corpus_bytes, &corpus.records, &schema)?;

    let mut writer = OutputWriter::new(out)?;
    writer.write("corpus.jsonl", &corpus_bytes)?;
    writer.write_sealed(
        "oracle.sealed.json",
        serde_json::to_string_pretty(&corpus.oracle)?.as_bytes(),
    )?;
    writer.finish("synth", sha256_hex(&spec_bytes), String::new(), spec.seed, stamp)?;

    println!(
        "generated {} ruling(s) across {} judge(s); corpus and sealed oracle in {}",
        corpus.records.len(),
        corpus.oracle.judges.len(),
        out.display()
    );
    Ok(())
}

pub fn cmd_extract_eval(
    predictions: &Path,
    gold: &Path,
    out: Option<&Path>,
) -> Result<(), CliError> {
    require_input(predictions)?;
    require_input(gold)?;
    let predicted_rows = load_gold_labels(predictions)?;
    let gold_rows = load_gold_labels(gold)?;
    if predicted_rows.len() != gold_rows.len() {
        return Err(CliError::Validation(format!(
            "predictions list {} row(s), gold lists {}",
            predicted_rows.len(),
            gold_rows.len()
        )));
    }
    for (i, (p, g)) in predicted_rows.iter().zip(&gold_rows).enumerate() {
        if (p.case_id.as_str(), p.child_id.as_str(), p.stage)
            != (g.case_id.as_str(), g.child_id.as_str(), g.stage)
        {
            return Err(CliError::Validation(format!(
                "row {}: predictions describe case {:?} child {:?}, gold {:?} {:?}",
                i + 2,
                p.case_id,
                p.child_id,
                g.case_id,
                g.child_id
            )));
        }
    }
    let predicted: Vec<u8> = predicted_rows.iter().map(|r| r.label.code()).collect();
    let truth: Vec<u8> = gold_rows.iter().map(|r| r.label.code()).collect();
    let report = evaluate_extraction(&predicted, &truth)?;

    let text = serde_json::to_string_pretty(&report)?;
    println!("{text}");
    if let Some(out) = out {
        let mut writer = OutputWriter::new(out)?;
        writer.write("agreement.json", text.as_bytes())?;
        writer.finish(
            "extract-eval",
            String::new(),
            sha256_hex(&read_input(predictions)?),
            0,
            false,
        )?;
    }
    Ok(())
}
