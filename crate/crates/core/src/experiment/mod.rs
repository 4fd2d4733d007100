//! Batch driver: expands a config into cells, runs them on a bounded pool and writes the
//! reports, an index and per-cell CSVs.

mod cells;
mod config;
mod index;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use cells::{expand_cells, run_cell, Cell, CellOutput, SOFT_VERDICTS};
pub use config::{
    BcSpec, DatumSpec, ExampleKind, ExperimentConfig, ExperimentKind, Manufactured, OperatorSpec, ResolvedTolerances,
    ToleranceProfile, Tolerances, SWEEP_AXES,
};
pub use index::{report_index, IndexRow, ReportIndex};

use crate::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellStatus {
    Pass,
    Fail,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub id: usize,
    pub params: BTreeMap<String, f64>,
    pub status: CellStatus,
    pub failed_verdicts: Vec<String>,
    pub warnings: usize,
    pub error: Option<String>,
    pub report: Option<String>,
}

/// Contents of `index.json`. Wall times live in `timings.csv` so the index stays reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunIndex {
    pub version: String,
    pub kind: ExperimentKind,
    pub config_hash: String,
    pub seed: u64,
    pub tolerance_profile: ToleranceProfile,
    pub tolerances: ResolvedTolerances,
    pub cells: Vec<CellRecord>,
}

/// Process exit codes of the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Ok = 0,
    InvariantFailure = 1,
    ConfigError = 2,
}

impl ExitStatus {
    pub fn for_error(e: &Error) -> Self {
        match e {
            Error::Config { .. } => Self::ConfigError,
            _ => Self::InvariantFailure,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub index: RunIndex,
    pub out_dir: PathBuf,
    pub wall_times: Vec<f64>,
}

impl RunSummary {
    /// Nonzero iff some cell errored or failed a hard verdict.
    pub fn exit_status(&self) -> ExitStatus {
        if self.index.cells.iter().all(|c| c.status == CellStatus::Pass) {
            ExitStatus::Ok
        } else {
            ExitStatus::InvariantFailure
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// Worker count; 0 lets the pool decide.
    pub jobs: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { jobs: 0 }
    }
}

fn stamp(report: &mut crate::norms::NormReport, config: &ExperimentConfig, cell: &Cell, hash: &str, tol: &ResolvedTolerances) {
    report.meta("version", VERSION);
    report.meta("kind", config.kind);
    report.meta("config_hash", hash);
    report.meta("seed", config.seed);
    report.meta("cell", cell.id);
    report.meta("params", cell.labels());
    report.meta("grid_sizes", &config.n);
    report.meta("tolerances", tol);
}

/// Runs every cell and writes `index.json`, `timings.csv` and `cells/cell-NNNN*.{json,csv}`
/// under `out_dir`. Cell failures are recorded and do not stop the run.
pub fn run(config: &ExperimentConfig, out_dir: &Path, options: RunOptions) -> Result<RunSummary> {
    config.validate()?;
    let tol = config.tolerances.resolve(config.tolerance_profile);
    let hash = config.hash();
    let cells = expand_cells(config);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.jobs)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("worker pool: {e}")))?;
    let results: Vec<(Result<CellOutput>, f64)> = pool.install(|| {
        cells
            .par_iter()
            .map(|cell| {
                let start = Instant::now();
                let out = run_cell(config, cell, &tol);
                (out, start.elapsed().as_secs_f64())
            })
            .collect()
    });

    let cell_dir = out_dir.join("cells");
    std::fs::create_dir_all(&cell_dir)?;
    let mut records = Vec::with_capacity(cells.len());
    let mut wall_times = Vec::with_capacity(cells.len());
    for (cell, (result, secs)) in cells.iter().zip(results) {
        wall_times.push(secs);
        let stem = format!("cell-{:04}", cell.id);
        let record = match result {
            Ok(mut out) => {
                stamp(&mut out.report, config, cell, &hash, &tol);
                out.report.write_json(&cell_dir.join(format!("{stem}.json")))?;
                out.report.write_csv(&cell_dir.join(format!("{stem}.csv")))?;
                for (name, body) in &out.artifacts {
                    std::fs::write(cell_dir.join(format!("{stem}-{name}.csv")), body)?;
                }
                let failed: Vec<String> = out
                    .report
                    .verdicts
                    .iter()
                    .filter(|v| !v.pass && !SOFT_VERDICTS.contains(&v.name.as_str()))
                    .map(|v| v.name.clone())
                    .collect();
                CellRecord {
                    id: cell.id,
                    params: cell.labels(),
                    status: if failed.is_empty() { CellStatus::Pass } else { CellStatus::Fail },
                    failed_verdicts: failed,
                    warnings: out.report.warnings.len(),
                    error: None,
                    report: Some(format!("cells/{stem}.json")),
                }
            }
            Err(e) => CellRecord {
                id: cell.id,
                params: cell.labels(),
                status: CellStatus::Error,
                failed_verdicts: Vec::new(),
                warnings: 0,
                error: Some(e.to_string()),
                report: None,
            },
        };
        records.push(record);
    }
    let index = RunIndex {
        version: VERSION.into(),
        kind: config.kind,
        config_hash: hash,
        seed: config.seed,
        tolerance_profile: config.tolerance_profile,
        tolerances: tol,
        cells: records,
    };
    std::fs::write(out_dir.join("index.json"), serde_json::to_string_pretty(&index)?)?;
    let mut timings = String::from("cell,wall_seconds\n");
    for (k, t) in wall_times.iter().enumerate() {
        timings.push_str(&format!("{k},{t:.6}\n"));
    }
    std::fs::write(out_dir.join("timings.csv"), timings)?;
    Ok(RunSummary { index, out_dir: out_dir.to_path_buf(), wall_times })
}

#[cfg(test)]
mod tests;
