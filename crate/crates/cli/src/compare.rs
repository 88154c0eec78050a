//! Side-by-side comparison of methods and reports.

use anyhow::{bail, ensure, Result};
use serde::{Deserialize, Serialize};

use crate::report::RunReport;
use crate::scenario::Method;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    /// Position of the report in the input list.
    pub report: usize,
    pub method: Method,
    pub objective_kw: Option<f64>,
    pub iterations: usize,
    /// Objective minus the centralized objective of the same report.
    pub delta_vs_copf_kw: Option<f64>,
    /// Iterations divided by the fixed-point engine's in the same report.
    pub iteration_ratio_vs_dopf: Option<f64>,
    /// Objective minus the same method's in the first report.
    pub delta_vs_first_kw: Option<f64>,
    /// Iterations divided by the same method's in the first report.
    pub iteration_ratio_vs_first: Option<f64>,
}

fn ratio(a: usize, b: usize) -> Option<f64> {
    (b > 0).then(|| a as f64 / b as f64)
}

fn delta(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    Some(a? - b?)
}

/// One row per method per report. All reports must come from the same
/// scenario.
pub fn compare_methods(reports: &[RunReport]) -> Result<Vec<ComparisonRow>> {
    let Some(first) = reports.first() else {
        bail!("nothing to compare");
    };
    for (i, r) in reports.iter().enumerate().skip(1) {
        ensure!(
            r.scenario == first.scenario && r.seed == first.seed,
            "report {i} comes from a different scenario than report 0"
        );
    }
    ensure!(
        reports.len() >= 2 || first.runs.len() >= 2,
        "need two reports or two methods in one report"
    );
    let mut rows = Vec::new();
    for (k, rep) in reports.iter().enumerate() {
        let copf = rep.run(Method::Copf);
        let dopf = rep.run(Method::Dopf);
        for run in &rep.runs {
            let base = first.run(run.method);
            rows.push(ComparisonRow {
                report: k,
                method: run.method,
                objective_kw: run.objective_kw,
                iterations: run.iterations,
                delta_vs_copf_kw: copf.and_then(|c| delta(run.objective_kw, c.objective_kw)),
                iteration_ratio_vs_dopf: dopf.and_then(|d| ratio(run.iterations, d.iterations)),
                delta_vs_first_kw: base.and_then(|b| delta(run.objective_kw, b.objective_kw)),
                iteration_ratio_vs_first: base.and_then(|b| ratio(run.iterations, b.iterations)),
            });
        }
    }
    Ok(rows)
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn comparison_table(rows: &[ComparisonRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "report",
        "method",
        "objective_kw",
        "iterations",
        "delta_vs_copf_kw",
        "iteration_ratio_vs_dopf",
        "delta_vs_first_kw",
        "iteration_ratio_vs_first",
    ])?;
    for r in rows {
        w.write_record([
            r.report.to_string(),
            r.method.as_str().to_string(),
            cell(r.objective_kw),
            r.iterations.to_string(),
            cell(r.delta_vs_copf_kw),
            cell(r.iteration_ratio_vs_dopf),
            cell(r.delta_vs_first_kw),
            cell(r.iteration_ratio_vs_first),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}
