//! Delimited text tables for plotting.
//!
//! `voltages.csv` has one row per bus: `bus` then `v_<method>` (pu) for
//! every method in the report that produced a solution.
//!
//! `residuals.csv` has one row per outer iteration of every distributed
//! method: `method,iteration,residual,dual_residual`. `residual` is the
//! consensus residual for the fixed-point engine and the primal residual for
//! ADMM; `dual_residual` is empty for the fixed-point engine.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use crate::report::RunReport;

pub const VOLTAGE_FILE: &str = "voltages.csv";
pub const RESIDUAL_FILE: &str = "residuals.csv";

pub fn voltage_table(report: &RunReport) -> Result<String> {
    let runs: Vec<_> = report.runs.iter().filter(|r| !r.voltages.is_empty()).collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["bus".to_string()];
    header.extend(runs.iter().map(|r| format!("v_{}", r.method)));
    w.write_record(&header)?;
    let n = runs.first().map_or(0, |r| r.voltages.len());
    for b in 0..n {
        let mut row = vec![runs[0].voltages[b].bus.clone()];
        row.extend(runs.iter().map(|r| r.voltages[b].v_pu.to_string()));
        w.write_record(&row)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

pub fn residual_table(report: &RunReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["method", "iteration", "residual", "dual_residual"])?;
    for run in &report.runs {
        for (i, r) in run.trace.primal.iter().enumerate() {
            let dual = run.trace.dual.get(i).map(f64::to_string).unwrap_or_default();
            w.write_record([
                run.method.as_str().to_string(),
                (i + 1).to_string(),
                r.to_string(),
                dual,
            ])?;
        }
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

/// Writes both tables into `dir` and returns their paths.
pub fn emit_plotdata(report: &RunReport, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut written = Vec::new();
    for (name, body) in [
        (VOLTAGE_FILE, voltage_table(report)?),
        (RESIDUAL_FILE, residual_table(report)?),
    ] {
        let path = dir.join(name);
        std::fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
        written.push(path);
    }
    Ok(written)
}
