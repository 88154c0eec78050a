//! Runs the solvers a scenario asks for and collects the report.

use std::time::Instant;

use anyhow::Result;
use serde::{Deserialize, Serialize};

use gridopf_core::admm::{admm_iterate, AdmmOptions};
use gridopf_core::der::DerModeKind;
use gridopf_core::dopf::{macro_iterate, DopfOptions};
use gridopf_core::feeder::{validate_radial, Feeder};
use gridopf_core::nlp::NlpStatus;
use gridopf_core::opf::{solve_copf, OpfOptions, OpfSolution};
use gridopf_core::partition::AreaPartition;
use gridopf_core::powerflow::validate_dispatch;

use crate::report::{
    area_summaries, BusVoltage, DerDispatch, FeederSummary, MethodRun, Outcome, ResidualTrace,
    RunReport, TOOL, VERSION,
};
use crate::scenario::{Method, ModeShares, Scenario};

fn opf_options(s: &Scenario) -> OpfOptions {
    OpfOptions {
        penalty_form: s.solver.penalty_form,
        ..OpfOptions::default()
    }
}

pub fn dopf_options(s: &Scenario) -> DopfOptions {
    DopfOptions {
        opf: opf_options(s),
        eps: s.solver.eps,
        max_macro: s.solver.max_macro,
        damping: s.solver.damping,
        parallel: s.solver.parallel_areas,
    }
}

pub fn admm_options(s: &Scenario) -> AdmmOptions {
    AdmmOptions {
        opf: opf_options(s),
        rho: s.solver.rho,
        eps_pri: s.solver.admm_eps,
        eps_dual: s.solver.admm_eps,
        max_iter: s.solver.admm_max_iter,
        parallel: s.solver.parallel_areas,
    }
}

struct Raw {
    solution: OpfSolution,
    converged: bool,
    iterations: usize,
    solver_iterations: usize,
    trace: ResidualTrace,
}

fn solve(f: &Feeder, part: &AreaPartition, s: &Scenario, method: Method) -> Result<Raw, String> {
    match method {
        Method::Copf => {
            let sol = solve_copf(f, &opf_options(s)).map_err(|e| e.to_string())?;
            Ok(Raw {
                converged: sol.status == NlpStatus::Optimal,
                iterations: 1,
                solver_iterations: sol.iterations,
                trace: ResidualTrace::default(),
                solution: sol,
            })
        }
        Method::Dopf => {
            let r = macro_iterate(f, part, &dopf_options(s)).map_err(|e| e.to_string())?;
            let solver_iterations = r
                .trace
                .iterations
                .iter()
                .flat_map(|it| &it.area_solver_iterations)
                .sum();
            Ok(Raw {
                converged: r.converged,
                iterations: r.macro_iterations,
                solver_iterations,
                trace: ResidualTrace {
                    primal: r.trace.residuals(),
                    dual: Vec::new(),
                },
                solution: r.solution,
            })
        }
        Method::Admm => {
            let r = admm_iterate(f, part, &admm_options(s)).map_err(|e| e.to_string())?;
            Ok(Raw {
                converged: r.converged,
                iterations: r.iterations,
                solver_iterations: r.solution.iterations,
                trace: ResidualTrace {
                    primal: r.trace.iter().map(|t| t.primal).collect(),
                    dual: r.trace.iter().map(|t| t.dual).collect(),
                },
                solution: r.solution,
            })
        }
    }
}

/// Runs one method and validates its solution against the power flow.
pub fn run_method(f: &Feeder, part: &AreaPartition, s: &Scenario, method: Method) -> MethodRun {
    let start = Instant::now();
    let raw = match solve(f, part, s, method) {
        Ok(raw) => raw,
        Err(e) => {
            log::warn!("{method} failed: {e}");
            return MethodRun::failed(method, e);
        }
    };
    log::info!(
        "{method}: {} iterations in {:.2?}",
        raw.iterations,
        start.elapsed()
    );
    let sol = raw.solution;
    let validation = validate_dispatch(f, &sol, s.solver.validation_tol);
    let outcome = match (raw.converged, validation.passed) {
        (false, _) => Outcome::NotConverged,
        (true, true) => Outcome::Validated,
        (true, false) => Outcome::FailedValidation,
    };
    MethodRun {
        method,
        outcome,
        error: None,
        converged: raw.converged,
        iterations: raw.iterations,
        solver_iterations: raw.solver_iterations,
        objective_pu: Some(sol.objective),
        objective_kw: Some(f.pu_to_kw(sol.objective)),
        losses_kw: Some(f.pu_to_kw(sol.losses)),
        penalty_pu: Some(sol.penalty),
        final_residual: raw.trace.primal.last().copied(),
        voltages: f
            .buses
            .iter()
            .zip(&sol.v2)
            .map(|(b, v2)| BusVoltage {
                bus: b.id.clone(),
                v_pu: v2.max(0.0).sqrt(),
            })
            .collect(),
        dispatch: f
            .ders
            .iter()
            .enumerate()
            .map(|(d, der)| DerDispatch {
                bus: der.bus.clone(),
                mode: der.mode.kind(),
                p_kw: f.pu_to_kw(sol.der_p[d]),
                q_kvar: f.pu_to_kw(sol.der_q[d]),
            })
            .collect(),
        validation: Some(validation),
        trace: raw.trace,
        solution: Some(sol),
    }
}

/// Runs every requested method of the scenario.
pub fn run_scenario(s: &Scenario) -> Result<RunReport> {
    let f = s.build_feeder()?;
    let topo = validate_radial(&f);
    anyhow::ensure!(topo.is_ok(), "feeder is not radial: {topo}");
    let part = s.build_partition(&f)?;
    let runs: Vec<MethodRun> = s
        .methods
        .iter()
        .map(|&m| run_method(&f, &part, s, m))
        .collect();
    let passed = runs.iter().all(MethodRun::passed);
    Ok(RunReport {
        tool: TOOL.into(),
        version: VERSION.into(),
        scenario: s.clone(),
        seed: s.seed,
        feeder: FeederSummary::new(&f),
        areas: area_summaries(&f, &part),
        runs,
        passed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub gsi_percent: f64,
    pub gsi_count: usize,
    pub method: Method,
    pub objective_kw: Option<f64>,
    pub losses_kw: Option<f64>,
    pub iterations: usize,
    pub passed: bool,
}

/// Runs the scenario once per GSI share in `s.sweep`, everything else kept.
pub fn run_sweep(s: &Scenario) -> Result<Vec<(f64, RunReport)>> {
    let mut out = Vec::new();
    for &pct in &s.sweep.gsi_percent {
        let mut case = s.clone();
        case.name = format!("{}-gsi{pct}", s.name);
        case.shares = ModeShares {
            gsi: pct,
            ..s.shares.clone()
        };
        // Keep the shares consistent when the base scenario already assigns
        // other modes.
        let rest = case.shares.total() - pct;
        if pct + rest > 100.0 {
            anyhow::bail!("GSI share {pct} plus other shares {rest} exceed 100 %");
        }
        case.check()?;
        out.push((pct, run_scenario(&case)?));
    }
    Ok(out)
}

pub fn sweep_rows(results: &[(f64, RunReport)]) -> Vec<SweepRow> {
    let mut rows = Vec::new();
    for (pct, report) in results {
        let gsi_count = report
            .feeder
            .ders
            .iter()
            .filter(|d| d.mode == DerModeKind::Gsi)
            .count();
        for run in &report.runs {
            rows.push(SweepRow {
                gsi_percent: *pct,
                gsi_count,
                method: run.method,
                objective_kw: run.objective_kw,
                losses_kw: run.losses_kw,
                iterations: run.iterations,
                passed: run.passed(),
            });
        }
    }
    rows
}
