use std::fmt::Write as _;

use super::report::{EvalReport, MethodReport, MetricSummary, Stat};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Text,
}

impl std::str::FromStr for TableFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Self::Csv),
            "text" | "txt" => Ok(Self::Text),
            other => Err(format!("unknown table format `{other}` (csv or text)")),
        }
    }
}

fn columns(report: &EvalReport) -> Vec<String> {
    let mut cols = vec!["auc".to_string(), "eer".to_string()];
    cols.extend(report.fpr_points.iter().map(|p| format!("tpr@{p}")));
    cols.extend((1..=report.max_rank).map(|k| format!("rank{k}")));
    cols
}

fn stats(summary: &MetricSummary) -> Vec<Option<Stat>> {
    let mut out = vec![summary.auc, summary.eer];
    out.extend(summary.tpr_at_fpr.iter().copied());
    out.extend(summary.rank_accuracy.iter().copied());
    out
}

/// Rows of one level's table: the roster in order, then the complete baseline.
fn level_rows<'a>(report: &'a EvalReport, methods: &'a [MethodReport]) -> impl Iterator<Item = &'a MethodReport> {
    methods.iter().chain(std::iter::once(&report.baseline))
}

/// Render per-level `method | metric mean +- sd` tables.
pub fn summarize(report: &EvalReport, format: TableFormat) -> String {
    match format {
        TableFormat::Csv => csv(report),
        TableFormat::Text => text(report),
    }
}

fn csv(report: &EvalReport) -> String {
    let mut out = String::from("level,method");
    for c in columns(report) {
        let _ = write!(out, ",{c}_mean,{c}_sd");
    }
    out.push('\n');
    for level in &report.levels {
        for m in level_rows(report, &level.methods) {
            let _ = write!(out, "{},{}", level.level, m.method);
            for s in stats(&m.summary) {
                match s {
                    Some(s) => {
                        let _ = write!(out, ",{},{}", s.mean, s.sd);
                    }
                    None => out.push_str(",,"),
                }
            }
            out.push('\n');
        }
    }
    out
}

fn text(report: &EvalReport) -> String {
    let header: Vec<String> = std::iter::once("method".to_string()).chain(columns(report)).collect();
    let mut out = String::new();
    for (i, level) in report.levels.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let _ = writeln!(out, "missing level {}", level.level);
        let mut rows = vec![header.clone()];
        for m in level_rows(report, &level.methods) {
            let mut row = vec![m.method.clone()];
            row.extend(stats(&m.summary).into_iter().map(|s| match s {
                Some(s) => format!("{:.4} ± {:.4}", s.mean, s.sd),
                None => "n/a".to_string(),
            }));
            rows.push(row);
        }
        let widths: Vec<usize> = (0..header.len())
            .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
            .collect();
        for row in &rows {
            let line: Vec<String> = row
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(c, (cell, w))| {
                    let pad = w - cell.chars().count();
                    if c == 0 {
                        format!("{cell}{}", " ".repeat(pad))
                    } else {
                        format!("{}{cell}", " ".repeat(pad))
                    }
                })
                .collect();
            let _ = writeln!(out, "{}", line.join("  ").trim_end());
        }
    }
    out
}
