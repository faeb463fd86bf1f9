//! Plain-text renderings of evaluation reports.

use nca_core::eval::{DiversityReport, ProbeReport};

/// Right-aligned columns separated by two spaces, with a rule under the
/// header.
pub fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: &mut dyn Iterator<Item = &str>| {
        cells
            .zip(&widths)
            .map(|(c, w)| format!("{c:>w$}"))
            .collect::<Vec<_>>()
            .join("  ")
    };
    let mut out = line(&mut header.iter().copied());
    out.push('\n');
    out.push_str(&line(
        &mut widths
            .iter()
            .map(|w| "-".repeat(*w))
            .collect::<Vec<_>>()
            .iter()
            .map(String::as_str),
    ));
    out.push('\n');
    for row in rows {
        out.push_str(&line(&mut row.iter().map(String::as_str)));
        out.push('\n');
    }
    out
}

pub fn probe_table(report: &ProbeReport) -> String {
    let key = if report.suite == "lr" {
        "lr"
    } else {
        "interactions"
    };
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.lr.map(|x| x.to_string())
                    .or(r.interactions.map(|n| n.to_string()))
                    .unwrap_or_default(),
                format!("{:.3}", r.one_shot_rate),
                format!("{:.3}", r.rephrased_rate),
                format!("{:.3}", r.distinct1),
                format!("{:.3}", r.distinct2),
                format!("{:.3}", r.perplexity_before),
                format!("{:.3}", r.perplexity_after),
                format!("{:+.3}", r.perplexity_drift()),
            ]
        })
        .collect();
    let mut out = format!(
        "suite {}  baseline rate {:.3}\n",
        report.suite, report.baseline_rate
    );
    out.push_str(&table(
        &[
            key,
            "one-shot",
            "rephrased",
            "distinct-1",
            "distinct-2",
            "ppl before",
            "ppl after",
            "drift",
        ],
        &rows,
    ));
    out
}

pub fn diversity_table(report: &DiversityReport) -> String {
    let mut out = format!(
        "suite diversity  k {}  lambda {} / {}  prompts {}\n",
        report.k, report.lambda_first, report.lambda_rest, report.prompts
    );
    out.push_str(&table(
        &["decoder", "distinct-1", "distinct-2"],
        &[
            vec![
                "hamming".into(),
                format!("{:.3}", report.dbs_distinct1),
                format!("{:.3}", report.dbs_distinct2),
            ],
            vec![
                "greedy x k".into(),
                format!("{:.3}", report.greedy_distinct1),
                format!("{:.3}", report.greedy_distinct2),
            ],
        ],
    ));
    out
}
