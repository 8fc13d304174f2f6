//! Report emission: CSV and Markdown tables plus the JSON audit bundle.
//!
//! Structs keep full precision; these functions round percentages to
//! two decimals on the way out, so the files are stable across runs.

use crate::metrics::format_pct;
use std::fmt::Write as _;

use super::{
    AblationReport, CrossDomainMatrix, ExperimentRun, FeatureImportanceReport, InDomainRow,
};

fn csv_from_rows(header: &[&str], rows: Vec<Vec<String>>) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(header).expect("in-memory write");
    for row in rows {
        writer.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("utf-8 output")
}

fn markdown_table(header: &[String], rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    writeln!(out, "| {} |", header.join(" | ")).unwrap();
    writeln!(out, "|{}|", header.iter().map(|_| " --- ").collect::<Vec<_>>().join("|")).unwrap();
    for row in rows {
        writeln!(out, "| {} |", row.join(" | ")).unwrap();
    }
    out
}

const IN_DOMAIN_HEADER: [&str; 9] = [
    "bucket",
    "n_test",
    "distr %",
    "accur %",
    "precis %",
    "recall %",
    "f1-cv %",
    "std %",
    "f1-test %",
];

fn in_domain_cells(rows: &[InDomainRow]) -> Vec<Vec<String>> {
    rows.iter()
        .map(|r| {
            vec![
                r.bucket.clone(),
                r.n_test.to_string(),
                r.distribution.clone(),
                format_pct(r.accuracy),
                format_pct(r.precision),
                format_pct(r.recall),
                format_pct(r.f1_cv_mean),
                format_pct(r.f1_cv_std),
                format_pct(r.f1_test),
            ]
        })
        .collect()
}

pub fn in_domain_csv(rows: &[InDomainRow]) -> String {
    csv_from_rows(&IN_DOMAIN_HEADER, in_domain_cells(rows))
}

pub fn in_domain_markdown(title: &str, rows: &[InDomainRow]) -> String {
    let header: Vec<String> = IN_DOMAIN_HEADER.iter().map(|s| s.to_string()).collect();
    format!("## {title}\n\n{}", markdown_table(&header, &in_domain_cells(rows)))
}

pub fn cross_matrix_csv(matrix: &CrossDomainMatrix) -> String {
    let mut header = vec!["model".to_string()];
    header.extend(matrix.test_names.iter().cloned());
    let rows: Vec<Vec<String>> = matrix
        .model_names
        .iter()
        .enumerate()
        .map(|(r, name)| {
            let mut row = vec![name.clone()];
            row.extend(matrix.cells[r].iter().map(|&v| format_pct(v)));
            row
        })
        .collect();
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    csv_from_rows(&header_refs, rows)
}

/// Markdown matrix; tagged cells carry the signal code after the value.
pub fn cross_matrix_markdown(title: &str, matrix: &CrossDomainMatrix) -> String {
    let mut header = vec!["model".to_string()];
    header.extend(matrix.test_names.iter().cloned());
    let rows: Vec<Vec<String>> = matrix
        .model_names
        .iter()
        .enumerate()
        .map(|(r, name)| {
            let mut row = vec![name.clone()];
            for (c, &value) in matrix.cells[r].iter().enumerate() {
                let cell = match matrix.tags[r][c] {
                    Some(tag) => format!("{} {}", format_pct(value), tag.code()),
                    None => format_pct(value),
                };
                row.push(cell);
            }
            row
        })
        .collect();
    let legend = "`^` beats generalist on own test, `!` does not, \
                  `vv` drop > 5 points off-domain, `v` drop in (0, 5], `=` no drop";
    format!("## {title}\n\n{}\n{legend}\n", markdown_table(&header, &rows))
}

pub fn importance_csv(report: &FeatureImportanceReport) -> String {
    let rows: Vec<Vec<String>> = report
        .models
        .iter()
        .map(|m| {
            vec![
                m.model.clone(),
                format_pct(m.cluster_share[0]),
                format_pct(m.cluster_share[1]),
                format_pct(m.cluster_share[2]),
                format_pct(m.total),
            ]
        })
        .collect();
    csv_from_rows(&["model", "cluster1 %", "cluster2 %", "cluster3 %", "total %"], rows)
}

pub fn importance_markdown(report: &FeatureImportanceReport) -> String {
    let mut out = format!(
        "## Importance mass of the top {} columns ({})\n\n",
        report.k, report.algorithm
    );
    if let Some(note) = &report.note {
        writeln!(out, "{note}").unwrap();
        return out;
    }
    let header: Vec<String> =
        ["model", "cluster1 %", "cluster2 %", "cluster3 %", "total %"]
            .iter()
            .map(|s| s.to_string())
            .collect();
    let rows: Vec<Vec<String>> = report
        .models
        .iter()
        .map(|m| {
            vec![
                m.model.clone(),
                format_pct(m.cluster_share[0]),
                format_pct(m.cluster_share[1]),
                format_pct(m.cluster_share[2]),
                format_pct(m.total),
            ]
        })
        .collect();
    out.push_str(&markdown_table(&header, &rows));
    for model in &report.models {
        writeln!(out, "\n### {}\n", model.model).unwrap();
        let header: Vec<String> =
            ["rank", "column", "cluster", "importance"].iter().map(|s| s.to_string()).collect();
        let rows: Vec<Vec<String>> = model
            .top
            .iter()
            .map(|t| {
                vec![
                    t.rank.to_string(),
                    t.column.clone(),
                    t.cluster.to_string(),
                    format!("{:.6}", t.importance),
                ]
            })
            .collect();
        out.push_str(&markdown_table(&header, &rows));
    }
    out
}

fn ablation_cells(report: &AblationReport) -> (Vec<String>, Vec<Vec<String>>) {
    let mut header = vec!["algorithm".to_string(), "bucket".to_string(), "baseline %".to_string()];
    for cluster in &report.clusters {
        header.push(format!("minus cluster{cluster} %"));
    }
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|row| {
            let mut cells = vec![
                row.algorithm.to_string(),
                row.bucket.clone(),
                format_pct(row.baseline_f1),
            ];
            for (_, f1) in &row.ablated {
                cells.push(f1.map_or("skipped".to_string(), format_pct));
            }
            cells
        })
        .collect();
    (header, rows)
}

pub fn ablation_csv(report: &AblationReport) -> String {
    let (header, rows) = ablation_cells(report);
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    csv_from_rows(&header_refs, rows)
}

pub fn ablation_markdown(report: &AblationReport) -> String {
    let (header, rows) = ablation_cells(report);
    format!("## F1-test after cluster ablation\n\n{}", markdown_table(&header, &rows))
}

/// Machine-readable bundle with every cell, seed, and parameter.
pub fn bundle_json(run: &ExperimentRun) -> String {
    serde_json::to_string_pretty(run).expect("run serializes")
}
