//! Parallel sweep of one experiment over a list of speeds.

use std::collections::BTreeSet;
use std::fs;
use std::io;
use std::path::Path;

use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::experiments::run;
use crate::output::{fmt_f64, RunReport, Status, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellStatus {
    Pass,
    Fail,
    Error,
    /// Rejected before running, e.g. a speed outside `0 < |c| < 1`.
    Invalid,
}

impl CellStatus {
    pub fn name(&self) -> &'static str {
        match self {
            CellStatus::Pass => "pass",
            CellStatus::Fail => "fail",
            CellStatus::Error => "error",
            CellStatus::Invalid => "invalid",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepCell {
    pub index: usize,
    pub speed: f64,
    pub status: CellStatus,
    pub report: Option<RunReport>,
    pub reason: Option<String>,
}

fn run_cell(template: &ExperimentConfig, index: usize, speed: f64) -> SweepCell {
    let mut cfg = template.clone();
    cfg.speed = speed;
    match run(&cfg) {
        Ok(report) => SweepCell {
            index,
            speed,
            status: match report.summary.status {
                Status::Pass => CellStatus::Pass,
                Status::Fail => CellStatus::Fail,
                Status::Error => CellStatus::Error,
            },
            reason: report.summary.errors.first().cloned(),
            report: Some(report),
        },
        Err(e) => SweepCell {
            index,
            speed,
            status: CellStatus::Invalid,
            report: None,
            reason: Some(e.to_string()),
        },
    }
}

/// Runs the template at every speed on `workers` threads. Cells come back in
/// input order, so the result does not depend on the worker count.
pub fn sweep(template: &ExperimentConfig, speeds: &[f64], workers: usize) -> io::Result<Vec<SweepCell>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(io::Error::other)?;
    Ok(pool.install(|| {
        speeds
            .par_iter()
            .enumerate()
            .map(|(i, &c)| run_cell(template, i, c))
            .collect()
    }))
}

/// One row per cell with the union of all reported value keys.
pub fn aggregate(cells: &[SweepCell]) -> Table {
    let keys: BTreeSet<&String> = cells
        .iter()
        .filter_map(|c| c.report.as_ref())
        .flat_map(|r| r.summary.values.keys())
        .collect();
    let mut columns = vec!["index", "c", "status"];
    columns.extend(keys.iter().map(|k| k.as_str()));
    let mut table = Table::new("sweep", &columns);
    for cell in cells {
        let mut row = vec![cell.index.to_string(), fmt_f64(cell.speed), cell.status.name().to_string()];
        for k in &keys {
            let v = cell.report.as_ref().and_then(|r| r.summary.values.get(*k));
            row.push(v.cloned().unwrap_or_default());
        }
        table.push_text(row);
    }
    table
}

pub fn run_dir_name(index: usize) -> String {
    format!("run-{index:03}")
}

/// Writes each report into `dir/run-NNN`, invalid cells as `invalid.txt`,
/// and the aggregate `sweep.csv`.
pub fn write_sweep(cells: &[SweepCell], dir: &Path) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    for cell in cells {
        let sub = dir.join(run_dir_name(cell.index));
        match &cell.report {
            Some(r) => r.write(&sub)?,
            None => {
                fs::create_dir_all(&sub)?;
                let reason = cell.reason.clone().unwrap_or_default();
                fs::write(sub.join("invalid.txt"), format!("c = {}\n{reason}\n", fmt_f64(cell.speed)))?;
            }
        }
    }
    fs::write(dir.join("sweep.csv"), aggregate(cells).to_csv())
}
