//! Collects experiment summaries under a directory into one AUC table.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::experiment::{format_auc, mean_std, ExperimentSummary};

pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("no readable summaries under {0}")]
    NoSummaries(PathBuf),
}

#[derive(Debug, Clone)]
pub struct Report {
    pub rows: Vec<(PathBuf, ExperimentSummary)>,
    /// Summaries that could not be read or parsed, and experiment directories
    /// holding runs but no summary.
    pub problems: Vec<(PathBuf, String)>,
}

fn walk(dir: &Path, report: &mut Report) -> Result<(), ReportError> {
    let io_err = |source| ReportError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err)?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()
        .map_err(io_err)?;
    entries.sort();

    let summary = dir.join(SUMMARY_FILE);
    let has_runs = entries.iter().any(|p| {
        p.is_dir()
            && p.file_name()
                .is_some_and(|n| n.to_string_lossy().starts_with("run_"))
    });
    if summary.is_file() {
        match fs::read_to_string(&summary) {
            Ok(text) => match serde_json::from_str::<ExperimentSummary>(&text) {
                Ok(s) => report.rows.push((summary, s)),
                Err(e) => report.problems.push((summary, format!("corrupt: {e}"))),
            },
            Err(e) => report.problems.push((summary, format!("unreadable: {e}"))),
        }
    } else if has_runs {
        report.problems.push((summary, "missing".to_string()));
    }

    for p in entries {
        let is_run = p
            .file_name()
            .is_some_and(|n| n.to_string_lossy().starts_with("run_"));
        if p.is_dir() && !is_run {
            walk(&p, report)?;
        }
    }
    Ok(())
}

/// Every `summary.json` below `dir`, in path order.
pub fn collect(dir: &Path) -> Result<Report, ReportError> {
    let mut report = Report {
        rows: Vec::new(),
        problems: Vec::new(),
    };
    walk(dir, &mut report)?;
    if report.rows.is_empty() {
        return Err(ReportError::NoSummaries(dir.to_path_buf()));
    }
    Ok(report)
}

/// One row per summary; with two or more rows an `avg:` row follows holding
/// the mean of the mean AUCs and of the standard deviations. Problems are
/// listed after the table.
pub fn render(report: &Report) -> String {
    let names: Vec<&str> = report.rows.iter().map(|(_, s)| s.name.as_str()).collect();
    let width = names
        .iter()
        .map(|n| n.chars().count())
        .chain([10])
        .max()
        .unwrap_or(10);
    let mut out = String::new();
    let _ = writeln!(out, "{:<width$}  {:>4}  AUC (%)", "experiment", "runs");
    for (_, s) in &report.rows {
        let _ = writeln!(
            out,
            "{:<width$}  {:>4}  {}",
            s.name,
            s.runs,
            format_auc(s.mean_auc, s.std_auc)
        );
    }
    if report.rows.len() > 1 {
        let (mean, _) = mean_std(
            &report
                .rows
                .iter()
                .map(|(_, s)| s.mean_auc)
                .collect::<Vec<_>>(),
        );
        let (std, _) = mean_std(
            &report
                .rows
                .iter()
                .map(|(_, s)| s.std_auc)
                .collect::<Vec<_>>(),
        );
        let _ = writeln!(
            out,
            "{:<width$}  {:>4}  {}",
            "avg:",
            "",
            format_auc(mean, std)
        );
    }
    for (path, why) in &report.problems {
        let _ = writeln!(out, "skipped {}: {why}", path.display());
    }
    out
}
