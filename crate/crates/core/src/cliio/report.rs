//! Training and evaluation reports: versioned JSON for machines, a plain
//! text table for people, and confusion matrices as CSV.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use crate::model::ModelSpec;
use crate::superwin::ConfigId;
use crate::traineval::labels::StageLabel;
use crate::traineval::{Confusion, CvSummary, EvalReport, Metrics, TrainConfig};

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub format_version: u32,
    pub run_config: RunConfig,
    pub config_id: ConfigId,
    pub batch_size: usize,
    pub model_spec: ModelSpec,
    pub train_config: TrainConfig,
    pub num_params: usize,
    pub subjects: Vec<String>,
    /// Manifest subjects without a usable grid.
    pub skipped_subjects: Vec<String>,
    pub summary: CvSummary,
    /// Confusion summed over the folds that ran.
    pub pooled: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalDocument {
    pub format_version: u32,
    pub run_config: RunConfig,
    pub checkpoint: String,
    pub subjects: Vec<String>,
    pub report: EvalReport,
}

/// Rows are true stages, columns predicted stages.
pub fn confusion_csv(c: &Confusion) -> String {
    let names: Vec<&str> = StageLabel::CLASSES.iter().map(|s| s.name()).collect();
    let mut out = format!("true\\pred,{}\n", names.join(","));
    for (name, row) in names.iter().zip(&c.0) {
        let cells: Vec<String> = row.iter().map(u64::to_string).collect();
        let _ = writeln!(out, "{name},{}", cells.join(","));
    }
    out
}

fn metrics_line(label: &str, m: &Metrics) -> String {
    format!(
        "{label:<10} {:>7.4} {:>7.4} {:>7.4} {:>7.4}\n",
        m.acc, m.kappa, m.f1_weighted, m.f1_macro
    )
}

fn confusion_text(c: &Confusion) -> String {
    let mut out = String::new();
    let _ = write!(out, "{:<8}", "true");
    for s in StageLabel::CLASSES {
        let _ = write!(out, "{:>9}", s.name());
    }
    out.push('\n');
    for (s, row) in StageLabel::CLASSES.iter().zip(&c.0) {
        let _ = write!(out, "{:<8}", s.name());
        for v in row {
            let _ = write!(out, "{v:>9}");
        }
        out.push('\n');
    }
    out
}

pub fn render_train_report(r: &TrainReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "configuration {}  batch size {}  epochs {}  lr {}  seed {}  parameters {}",
        r.config_id, r.batch_size, r.train_config.epochs, r.train_config.lr, r.train_config.seed, r.num_params
    );
    let _ = writeln!(out, "subjects {}  skipped {}", r.subjects.len(), r.skipped_subjects.len());
    out.push('\n');
    let _ = writeln!(out, "{:<10} {:>7} {:>7} {:>7} {:>7}", "", "acc", "kappa", "F1-W", "F1-M");
    for f in &r.summary.folds {
        out += &metrics_line(&format!("fold {}", f.fold), &f.val.metrics);
    }
    out += &metrics_line("mean", &r.summary.mean);
    out += &metrics_line("std", &r.summary.std);
    out += &metrics_line("pooled", &r.pooled.metrics);
    out.push('\n');
    out += &confusion_text(&r.pooled.confusion);
    out
}

pub fn render_eval(r: &EvalReport) -> String {
    let mut out = format!("{:<10} {:>7} {:>7} {:>7} {:>7}\n", "", "acc", "kappa", "F1-W", "F1-M");
    out += &metrics_line("eval", &r.metrics);
    let _ = writeln!(out, "positions {}\n", r.positions);
    out += &confusion_text(&r.confusion);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let mut c = Confusion::new();
        c.0[0][1] = 3;
        c.0[3][3] = 7;
        let csv = confusion_csv(&c);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 5);
        assert!(lines[0].starts_with("true\\pred,"));
        assert!(lines[1].ends_with(",0,3,0,0"));
        assert!(lines[4].ends_with(",0,0,0,7"));
    }
}
