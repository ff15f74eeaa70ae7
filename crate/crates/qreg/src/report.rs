//! R² tables and TTS plot data from a results file.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::bench::{read_results_csv, ResultRow, Solver};

pub const TTS_PLOT_CSV: &str = "tts_plot.csv";

/// Placeholder for cells whose solver failed.
pub const MISSING: &str = "—";

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("results file {0} does not exist")]
    Missing(PathBuf),
    #[error("results file {path} is corrupt: {reason}")]
    Corrupt { path: PathBuf, reason: String },
    #[error("writing {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

/// Mean R² per (features, solver); `None` where every run failed.
pub type R2Matrix = BTreeMap<usize, BTreeMap<Solver, Option<f64>>>;

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub matrix: R2Matrix,
    pub solvers: Vec<Solver>,
    pub table: String,
    pub plot_path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PlotPoint {
    pub features: usize,
    pub solver: Solver,
    pub log10_tts_ms: f64,
}

/// One point per successful row; error rows are dropped.
pub fn plot_points(rows: &[ResultRow]) -> Vec<PlotPoint> {
    rows.iter()
        .filter(|r| !r.is_error() && r.tts_ms > 0.0)
        .map(|r| PlotPoint {
            features: r.features,
            solver: r.solver,
            log10_tts_ms: r.tts_ms.log10(),
        })
        .collect()
}

pub fn r2_matrix(rows: &[ResultRow]) -> (R2Matrix, Vec<Solver>) {
    let solvers: BTreeSet<Solver> = rows.iter().map(|r| r.solver).collect();
    let mut sums: BTreeMap<(usize, Solver), (f64, usize)> = BTreeMap::new();
    for r in rows {
        let e = sums.entry((r.features, r.solver)).or_insert((0.0, 0));
        if let Some(v) = r.r2 {
            e.0 += v;
            e.1 += 1;
        }
    }
    let mut matrix = R2Matrix::new();
    for ((features, solver), (sum, n)) in sums {
        matrix
            .entry(features)
            .or_default()
            .insert(solver, (n > 0).then(|| sum / n as f64));
    }
    (matrix, solvers.into_iter().collect())
}

pub fn format_table(matrix: &R2Matrix, solvers: &[Solver]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# R² by feature count (mean over seeds)");
    let _ = writeln!(
        out,
        "# TTS: wall time of the solver call; data generation and Gram accumulation excluded"
    );
    let _ = write!(out, "{:>8}", "features");
    for s in solvers {
        let _ = write!(out, " {:>8}", s.as_str());
    }
    out.push('\n');
    for (features, row) in matrix {
        let _ = write!(out, "{features:>8}");
        for s in solvers {
            match row.get(s).copied().flatten() {
                Some(v) => {
                    let _ = write!(out, " {v:>8.4}");
                }
                None => {
                    let _ = write!(out, " {MISSING:>8}");
                }
            }
        }
        out.push('\n');
    }
    out
}

/// Reads results.csv, builds the R² table, and writes tts_plot.csv next to it.
pub fn report(results_path: &Path) -> Result<Report, ReportError> {
    if !results_path.is_file() {
        return Err(ReportError::Missing(results_path.to_path_buf()));
    }
    let rows = read_results_csv(results_path).map_err(|e| ReportError::Corrupt {
        path: results_path.to_path_buf(),
        reason: format!("{e:#}"),
    })?;
    let (matrix, solvers) = r2_matrix(&rows);
    let table = format_table(&matrix, &solvers);

    let plot_path = results_path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join(TTS_PLOT_CSV);
    let write_err = |source| ReportError::Write {
        path: plot_path.clone(),
        source,
    };
    let mut w = csv::Writer::from_path(&plot_path).map_err(write_err)?;
    for p in plot_points(&rows) {
        w.serialize(p).map_err(write_err)?;
    }
    w.flush().map_err(|e| write_err(e.into()))?;

    Ok(Report {
        matrix,
        solvers,
        table,
        plot_path,
    })
}
