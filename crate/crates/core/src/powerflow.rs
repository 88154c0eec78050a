//! Backward/forward sweep power flow on the branch-flow equations, used to
//! validate OPF dispatches.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::der::{DerMode, DroopCurve};
use crate::feeder::{Feeder, FeederError};
use crate::opf::OpfSolution;

pub const SWEEP_TOL: f64 = 1e-10;
pub const SWEEP_MAX_ITER: usize = 200;

#[derive(Debug, Error)]
pub enum PowerFlowError {
    #[error(transparent)]
    Feeder(#[from] FeederError),

    #[error("dispatch has {got} entries, feeder has {expected} DERs")]
    DispatchLength { expected: usize, got: usize },

    #[error("sweep did not converge in {iterations} iterations (last update {last_update:e})")]
    Diverged { iterations: usize, last_update: f64 },

    #[error("voltage collapse at bus {bus} (v2 = {v2:e})")]
    VoltageCollapse { bus: String, v2: f64 },
}

/// Power injected by one DER during a power-flow solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Injection {
    Fixed { p: f64, q: f64 },
    /// Real output fixed, reactive output follows the droop curve at the
    /// current bus voltage.
    Droop { p: f64, curve: DroopCurve },
}

impl Injection {
    fn p(&self) -> f64 {
        match *self {
            Injection::Fixed { p, .. } | Injection::Droop { p, .. } => p,
        }
    }

    fn q_at(&self, v2: f64) -> f64 {
        match *self {
            Injection::Fixed { q, .. } => q,
            Injection::Droop { curve, .. } => curve.q_linearized(v2),
        }
    }
}

/// Injections that leave every DER idle.
pub fn idle_dispatch(f: &Feeder) -> Vec<Injection> {
    vec![Injection::Fixed { p: 0.0, q: 0.0 }; f.ders.len()]
}

/// Injections implied by the DER modes alone: measured/set real power,
/// droop for grid-supporting units and zero reactive power elsewhere.
pub fn nominal_dispatch(f: &Feeder) -> Vec<Injection> {
    f.ders
        .iter()
        .map(|d| match d.mode {
            DerMode::GridSupporting { p_measured, curve } => Injection::Droop {
                p: p_measured,
                curve,
            },
            _ => Injection::Fixed {
                p: d.mode.fixed_p().unwrap_or(0.0),
                q: 0.0,
            },
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerFlowState {
    pub v2: Vec<f64>,
    /// Sending-end real flow per line.
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub l: Vec<f64>,
    pub losses: f64,
    /// Reactive output of each DER at the solution (droop resolved).
    pub q_der: Vec<f64>,
    pub iterations: usize,
    pub residuals: [f64; 4],
}

fn der_bus_index(f: &Feeder, d: usize) -> usize {
    f.bus_index(&f.ders[d].bus)
        .expect("feeder construction checks DER buses")
}

/// Net (p, q) consumed at each bus for the given DER outputs.
fn net_load(f: &Feeder, der_p: &[f64], der_q: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut p: Vec<f64> = f.buses.iter().map(|b| b.p_load).collect();
    let mut q: Vec<f64> = f.buses.iter().map(|b| b.q_load - b.q_cap).collect();
    for d in 0..f.ders.len() {
        let b = der_bus_index(f, d);
        p[b] -= der_p[d];
        q[b] -= der_q[d];
    }
    (p, q)
}

pub fn solve_powerflow(
    f: &Feeder,
    dispatch: &[Injection],
    v_sub2: f64,
) -> Result<PowerFlowState, PowerFlowError> {
    if dispatch.len() != f.ders.len() {
        return Err(PowerFlowError::DispatchLength {
            expected: f.ders.len(),
            got: dispatch.len(),
        });
    }
    let tree = f.tree()?;
    let nb = f.n_buses();
    let nl = f.n_lines();
    let der_p: Vec<f64> = dispatch.iter().map(Injection::p).collect();
    let mut v2 = vec![v_sub2; nb];
    let mut p = vec![0.0; nl];
    let mut q = vec![0.0; nl];
    let mut l = vec![0.0; nl];
    let mut der_q = vec![0.0; dispatch.len()];

    let mut last_update = f64::INFINITY;
    for iter in 1..=SWEEP_MAX_ITER {
        for (d, inj) in dispatch.iter().enumerate() {
            der_q[d] = inj.q_at(v2[der_bus_index(f, d)]);
        }
        let (pl, ql) = net_load(f, &der_p, &der_q);
        let mut update = 0.0f64;

        for &j in tree.order.iter().rev() {
            let Some(li) = tree.parent_line[j] else {
                continue;
            };
            let line = &f.lines[li];
            let mut pj = pl[j] + line.r * l[li];
            let mut qj = ql[j] + line.x * l[li];
            for &c in &tree.child_lines[j] {
                pj += p[c];
                qj += q[c];
            }
            update = update.max((pj - p[li]).abs()).max((qj - q[li]).abs());
            p[li] = pj;
            q[li] = qj;
        }
        for &j in &tree.order {
            let Some(li) = tree.parent_line[j] else {
                continue;
            };
            let line = &f.lines[li];
            let vi = v2[line.from];
            let vj = vi - 2.0 * (line.r * p[li] + line.x * q[li])
                + (line.r * line.r + line.x * line.x) * l[li];
            if vj <= 0.0 || !vj.is_finite() {
                return Err(PowerFlowError::VoltageCollapse {
                    bus: f.bus_id(j).to_string(),
                    v2: vj,
                });
            }
            let lj = (p[li] * p[li] + q[li] * q[li]) / vi;
            update = update.max((vj - v2[j]).abs()).max((lj - l[li]).abs());
            v2[j] = vj;
            l[li] = lj;
        }
        last_update = update;
        if update < SWEEP_TOL {
            for (d, inj) in dispatch.iter().enumerate() {
                der_q[d] = inj.q_at(v2[der_bus_index(f, d)]);
            }
            let losses = f.lines.iter().zip(&l).map(|(ln, l)| ln.r * l).sum();
            let mut state = PowerFlowState {
                v2,
                p,
                q,
                l,
                losses,
                q_der: der_q,
                iterations: iter,
                residuals: [0.0; 4],
            };
            let fixed: Vec<Injection> = der_p
                .iter()
                .zip(&state.q_der)
                .map(|(&p, &q)| Injection::Fixed { p, q })
                .collect();
            state.residuals = residuals(f, &state, &fixed)?;
            return Ok(state);
        }
        if !update.is_finite() {
            break;
        }
    }
    Err(PowerFlowError::Diverged {
        iterations: SWEEP_MAX_ITER,
        last_update,
    })
}

/// Max absolute violation of the real balance, reactive balance, voltage
/// drop and current definition equations, in that order.
pub fn residuals(
    f: &Feeder,
    s: &PowerFlowState,
    dispatch: &[Injection],
) -> Result<[f64; 4], PowerFlowError> {
    if dispatch.len() != f.ders.len() {
        return Err(PowerFlowError::DispatchLength {
            expected: f.ders.len(),
            got: dispatch.len(),
        });
    }
    let tree = f.tree()?;
    let der_p: Vec<f64> = dispatch.iter().map(Injection::p).collect();
    let der_q: Vec<f64> = dispatch
        .iter()
        .enumerate()
        .map(|(d, inj)| inj.q_at(s.v2[der_bus_index(f, d)]))
        .collect();
    let (pl, ql) = net_load(f, &der_p, &der_q);
    let mut r = [0.0f64; 4];
    for (li, line) in f.lines.iter().enumerate() {
        let j = line.to;
        let (mut out_p, mut out_q) = (0.0, 0.0);
        for &c in &tree.child_lines[j] {
            out_p += s.p[c];
            out_q += s.q[c];
        }
        let r1 = s.p[li] - line.r * s.l[li] - pl[j] - out_p;
        let r2 = s.q[li] - line.x * s.l[li] - ql[j] - out_q;
        let r3 = s.v2[j] - s.v2[line.from] + 2.0 * (line.r * s.p[li] + line.x * s.q[li])
            - (line.r * line.r + line.x * line.x) * s.l[li];
        let r4 = s.v2[line.from] * s.l[li] - s.p[li] * s.p[li] - s.q[li] * s.q[li];
        r[0] = r[0].max(r1.abs());
        r[1] = r[1].max(r2.abs());
        r[2] = r[2].max(r3.abs());
        r[3] = r[3].max(r4.abs());
    }
    Ok(r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub passed: bool,
    /// Max |V_pf - V_opf| over buses, in pu magnitude.
    pub voltage_mismatch: f64,
    pub max_droop_residual: f64,
    pub max_gfi_voltage_residual: f64,
    /// Buses whose droop residual exceeds the tolerance.
    pub droop_flags: Vec<String>,
    pub gfi_flags: Vec<String>,
    pub limit_violations: Vec<String>,
    pub powerflow_error: Option<String>,
}

/// Tolerance on droop, grid-forming voltage and limit checks.
pub const CONSTRAINT_TOL: f64 = 1e-6;

/// Re-solves the power flow with the solution's DER outputs held fixed and
/// compares it with the solution. `tol` bounds the voltage mismatch.
pub fn validate_dispatch(f: &Feeder, sol: &OpfSolution, tol: f64) -> ValidationReport {
    let mut report = ValidationReport {
        passed: false,
        voltage_mismatch: f64::INFINITY,
        max_droop_residual: 0.0,
        max_gfi_voltage_residual: 0.0,
        droop_flags: Vec::new(),
        gfi_flags: Vec::new(),
        limit_violations: Vec::new(),
        powerflow_error: None,
    };
    if sol.v2.len() != f.n_buses() || sol.der_p.len() != f.ders.len() {
        report.powerflow_error = Some("solution does not match feeder dimensions".into());
        return report;
    }
    let dispatch: Vec<Injection> = sol
        .der_p
        .iter()
        .zip(&sol.der_q)
        .map(|(&p, &q)| Injection::Fixed { p, q })
        .collect();
    match solve_powerflow(f, &dispatch, f.v_sub2) {
        Ok(pf) => {
            report.voltage_mismatch = pf
                .v2
                .iter()
                .zip(&sol.v2)
                .map(|(a, b)| (a.sqrt() - b.max(0.0).sqrt()).abs())
                .fold(0.0, f64::max);
        }
        Err(e) => report.powerflow_error = Some(e.to_string()),
    }
    for (d, der) in f.ders.iter().enumerate() {
        let b = der_bus_index(f, d);
        match der.mode {
            DerMode::GridSupporting { curve, .. } => {
                let res = (sol.der_q[d] - curve.q_linearized(sol.v2[b])).abs();
                report.max_droop_residual = report.max_droop_residual.max(res);
                if res > CONSTRAINT_TOL {
                    report.droop_flags.push(der.bus.clone());
                }
            }
            DerMode::GridForming { v_set2 } => {
                let res = (sol.v2[b] - v_set2).abs();
                report.max_gfi_voltage_residual = report.max_gfi_voltage_residual.max(res);
                if res > CONSTRAINT_TOL {
                    report.gfi_flags.push(der.bus.clone());
                }
            }
            _ => {}
        }
    }
    for (i, bus) in f.buses.iter().enumerate() {
        let v = sol.v2[i];
        if v < bus.v_min2 - CONSTRAINT_TOL || v > bus.v_max2 + CONSTRAINT_TOL {
            report
                .limit_violations
                .push(format!("voltage at bus {}: v2 = {v:.6}", bus.id));
        }
    }
    for (li, line) in f.lines.iter().enumerate() {
        if sol.l.get(li).is_some_and(|&l| l > line.i_rated2 + CONSTRAINT_TOL) {
            report
                .limit_violations
                .push(format!("current on line {}: l = {:.6}", f.line_label(li), sol.l[li]));
        }
    }
    report.passed = report.powerflow_error.is_none()
        && report.voltage_mismatch < tol
        && report.droop_flags.is_empty()
        && report.gfi_flags.is_empty()
        && report.limit_violations.is_empty();
    report
}
