//! Run reports and their serialized form.

use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use gridopf_core::der::DerModeKind;
use gridopf_core::feeder::Feeder;
use gridopf_core::opf::OpfSolution;
use gridopf_core::partition::AreaPartition;
use gridopf_core::powerflow::ValidationReport;

use crate::scenario::{Method, Scenario};

pub const TOOL: &str = "gridopf";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    /// Converged and passed the power-flow check.
    Validated,
    /// Converged but the power-flow check failed.
    FailedValidation,
    /// Stopped at the iteration cap; validation is still reported.
    NotConverged,
    /// The solver aborted.
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerRow {
    pub bus: String,
    pub mode: DerModeKind,
    pub s_kva: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeederSummary {
    pub name: String,
    pub buses: usize,
    pub lines: usize,
    pub s_base_va: f64,
    pub v_base_v: f64,
    pub v_sub_pu: f64,
    pub ders: Vec<DerRow>,
}

impl FeederSummary {
    pub fn new(f: &Feeder) -> Self {
        Self {
            name: f.name.clone(),
            buses: f.n_buses(),
            lines: f.n_lines(),
            s_base_va: f.s_base,
            v_base_v: f.v_base,
            v_sub_pu: f.v_sub2.sqrt(),
            ders: f
                .ders
                .iter()
                .map(|d| DerRow {
                    bus: d.bus.clone(),
                    mode: d.mode.kind(),
                    s_kva: f.pu_to_kw(d.s_rating),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaSummary {
    pub id: String,
    pub root: String,
    pub buses: Vec<String>,
}

pub fn area_summaries(f: &Feeder, part: &AreaPartition) -> Vec<AreaSummary> {
    part.areas
        .iter()
        .map(|a| AreaSummary {
            id: a.id.clone(),
            root: f.bus_id(a.root).to_string(),
            buses: a.buses.iter().map(|&b| f.bus_id(b).to_string()).collect(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BusVoltage {
    pub bus: String,
    pub v_pu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerDispatch {
    pub bus: String,
    pub mode: DerModeKind,
    pub p_kw: f64,
    pub q_kvar: f64,
}

/// Convergence history: the consensus residual per macro-iteration for the
/// fixed-point engine, primal and dual residuals for ADMM.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResidualTrace {
    pub primal: Vec<f64>,
    pub dual: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRun {
    pub method: Method,
    pub outcome: Outcome,
    pub error: Option<String>,
    pub converged: bool,
    /// Outer iterations: 1 for the centralized solve, macro-iterations for
    /// the distributed ones.
    pub iterations: usize,
    /// Interior-point iterations summed over every sub-problem solve.
    pub solver_iterations: usize,
    pub objective_pu: Option<f64>,
    pub objective_kw: Option<f64>,
    pub losses_kw: Option<f64>,
    pub penalty_pu: Option<f64>,
    pub final_residual: Option<f64>,
    pub voltages: Vec<BusVoltage>,
    pub dispatch: Vec<DerDispatch>,
    pub validation: Option<ValidationReport>,
    pub trace: ResidualTrace,
    pub solution: Option<OpfSolution>,
}

impl MethodRun {
    pub fn failed(method: Method, error: String) -> Self {
        Self {
            method,
            outcome: Outcome::Error,
            error: Some(error),
            converged: false,
            iterations: 0,
            solver_iterations: 0,
            objective_pu: None,
            objective_kw: None,
            losses_kw: None,
            penalty_pu: None,
            final_residual: None,
            voltages: Vec::new(),
            dispatch: Vec::new(),
            validation: None,
            trace: ResidualTrace::default(),
            solution: None,
        }
    }

    pub fn passed(&self) -> bool {
        self.outcome == Outcome::Validated
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub tool: String,
    pub version: String,
    pub scenario: Scenario,
    pub seed: u64,
    pub feeder: FeederSummary,
    pub areas: Vec<AreaSummary>,
    pub runs: Vec<MethodRun>,
    pub passed: bool,
}

impl RunReport {
    pub fn run(&self, method: Method) -> Option<&MethodRun> {
        self.runs.iter().find(|r| r.method == method)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report is serializable");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).context("reading report")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).with_context(|| format!("writing {}", path.display()))
    }
}
