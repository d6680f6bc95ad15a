//! Ordered key-value experiment reports.
//!
//! The machine form is one `key=value` line per entry in insertion order;
//! the table form aligns the same entries into two columns. Floats are
//! written in shortest round-trip form, so identical runs give identical
//! bytes.

use std::fmt::Write as _;

use crate::metrics::MetricReport;
use crate::trainer::TrainTrace;

pub const REPORT_FORMAT: &str = "depthrank-report";
pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ReportFormat {
    /// `key=value` lines.
    Kv,
    /// Aligned human-readable table.
    Table,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    entries: Vec<(String, String)>,
}

impl Report {
    /// Report preamble: format, version and build identifiers.
    pub fn new(command: &str) -> Self {
        let mut r = Self::default();
        r.push("format", REPORT_FORMAT);
        r.push("version", REPORT_VERSION);
        r.push("build", env!("CARGO_PKG_VERSION"));
        r.push("dataset_format_version", crate::data::DATASET_VERSION);
        r.push("params_format_version", crate::trainer::PARAMS_VERSION);
        r.push("command", command);
        r
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl ToString) {
        self.entries.push((key.into(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn push_metrics(&mut self, prefix: &str, m: &MetricReport) {
        self.push(format!("{prefix}.whdr"), m.whdr);
        self.push(format!("{prefix}.map"), m.map);
        self.push(format!("{prefix}.ndcg"), m.ndcg);
        self.push(format!("{prefix}.n_samples"), m.n_samples);
        self.push(format!("{prefix}.n_pairs"), m.n_pairs);
        self.push(format!("{prefix}.zero_gain_samples"), m.zero_gain_samples);
        self.push(format!("{prefix}.tied_prediction_samples"), m.tied_prediction_samples);
        self.push(format!("{prefix}.degenerate_ties"), m.has_degenerate_ties());
    }

    /// Summary of a trace. Wall-clock time is left out so reports stay
    /// byte-identical across runs.
    pub fn push_trace(&mut self, trace: &TrainTrace) {
        self.push("trace.epochs", trace.len());
        if let (Some(first), Some(last)) = (trace.epochs.first(), trace.last()) {
            self.push("trace.first_train_loss", first.train_loss);
            self.push("trace.final_train_loss", last.train_loss);
            self.push("trace.final_eval_whdr", last.eval_whdr);
            self.push("trace.final_eval_map", last.eval_map);
        }
    }

    pub fn render(&self, format: ReportFormat) -> String {
        let mut out = String::new();
        match format {
            ReportFormat::Kv => {
                for (k, v) in &self.entries {
                    let _ = writeln!(out, "{k}={v}");
                }
            }
            ReportFormat::Table => {
                let width = self.entries.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
                for (k, v) in &self.entries {
                    let _ = writeln!(out, "{k:<width$}  {v}");
                }
            }
        }
        out
    }
}

/// Metrics of two or more models side by side: one row per metric, one
/// column per model. WHDR and MAP are shown in percent.
pub fn comparison_table(models: &[(String, MetricReport)]) -> String {
    let mut header = vec!["metric".to_string()];
    header.extend(models.iter().map(|(name, _)| name.clone()));
    let rows: Vec<Vec<String>> = vec![
        header,
        row("WHDR", models, |m| format!("{:.2}%", 100.0 * m.whdr)),
        row("MAP", models, |m| format!("{:.2}%", 100.0 * m.map)),
        row("NDCG", models, |m| format!("{:.4}", m.ndcg)),
    ];
    let cols = rows[0].len();
    let widths: Vec<usize> = (0..cols)
        .map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0))
        .collect();
    let rule: String = {
        let inner: Vec<String> = widths.iter().map(|w| "-".repeat(w + 2)).collect();
        format!("+{}+", inner.join("+"))
    };
    let mut out = String::new();
    let _ = writeln!(out, "{rule}");
    for (i, r) in rows.iter().enumerate() {
        let cells: Vec<String> = r
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(c, (cell, w))| {
                if c == 0 {
                    format!(" {cell:<w$} ")
                } else {
                    format!(" {cell:>w$} ")
                }
            })
            .collect();
        let _ = writeln!(out, "|{}|", cells.join("|"));
        if i == 0 {
            let _ = writeln!(out, "{rule}");
        }
    }
    let _ = writeln!(out, "{rule}");
    out
}

fn row(label: &str, models: &[(String, MetricReport)], cell: impl Fn(&MetricReport) -> String) -> Vec<String> {
    let mut r = vec![label.to_string()];
    r.extend(models.iter().map(|(_, m)| cell(m)));
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    fn metrics(whdr: f64, map: f64) -> MetricReport {
        MetricReport {
            whdr,
            map,
            ndcg: 0.9,
            n_samples: 3,
            n_pairs: 30,
            zero_gain_samples: 0,
            tied_prediction_samples: 0,
        }
    }

    #[test]
    fn kv_keeps_insertion_order() {
        let mut r = Report::default();
        r.push("b", 2);
        r.push("a", 0.1);
        assert_eq!(r.render(ReportFormat::Kv), "b=2\na=0.1\n");
        assert_eq!(r.get("a"), Some("0.1"));
    }

    #[test]
    fn table_aligns_keys() {
        let mut r = Report::default();
        r.push("long_key", 1);
        r.push("k", 2);
        assert_eq!(r.render(ReportFormat::Table), "long_key  1\nk         2\n");
    }

    #[test]
    fn comparison_layout() {
        let t = comparison_table(&[
            ("pairwise".into(), metrics(0.2513, 0.7001)),
            ("weighted".into(), metrics(0.26, 0.7125)),
        ]);
        let expected = "\
+--------+----------+----------+
| metric | pairwise | weighted |
+--------+----------+----------+
| WHDR   |   25.13% |   26.00% |
| MAP    |   70.01% |   71.25% |
| NDCG   |   0.9000 |   0.9000 |
+--------+----------+----------+
";
        assert_eq!(t, expected);
    }
}
