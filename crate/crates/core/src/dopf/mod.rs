//! Distributed OPF by fixed-point iteration on boundary values.
//!
//! Every area solves its own sub-problem with the upstream network replaced
//! by a fixed root voltage and each downstream area replaced by a fixed load
//! at the shared bus. After all areas have solved (in parallel, against the
//! previous iteration's values) the upstream side sends the voltage it
//! computed at each shared bus and the downstream side sends the power its
//! root draws. Iteration stops once both sides agree.

mod boundary;

pub use boundary::{
    consensus_residual, init_boundary, BoundaryMessage, BoundaryState, EdgeValues, Payload,
};

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::feeder::Feeder;
use crate::nlp::NlpStatus;
use crate::opf::{
    build_area, solve_area, AreaInputs, AreaModel, AreaResult, EdgeLoad, OpfError, OpfOptions,
    OpfSolution, RootSpec,
};
use crate::partition::AreaPartition;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DopfOptions {
    pub opf: OpfOptions,
    /// Consensus tolerance on boundary values (pu).
    pub eps: f64,
    pub max_macro: usize,
    /// Weight kept on the previous boundary value when updating; 0 is the
    /// plain fixed-point iteration.
    pub damping: f64,
    pub parallel: bool,
}

impl Default for DopfOptions {
    fn default() -> Self {
        Self {
            opf: OpfOptions::default(),
            eps: 1e-4,
            max_macro: 100,
            damping: 0.0,
            parallel: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroIteration {
    pub iteration: usize,
    pub residual: f64,
    pub area_objectives: Vec<f64>,
    pub area_status: Vec<NlpStatus>,
    pub area_solver_iterations: Vec<usize>,
    /// Boundary values used and computed in this iteration.
    pub boundary: BoundaryState,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MacroTrace {
    pub iterations: Vec<MacroIteration>,
}

impl MacroTrace {
    pub fn residuals(&self) -> Vec<f64> {
        self.iterations.iter().map(|it| it.residual).collect()
    }
}

#[derive(Debug, Error)]
pub enum DopfError {
    #[error(transparent)]
    Opf(#[from] OpfError),

    #[error("area {area} solver ended with status {status:?} in macro-iteration {iteration}")]
    AreaFailed {
        area: String,
        status: NlpStatus,
        iteration: usize,
        trace: Box<MacroTrace>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DopfResult {
    pub solution: OpfSolution,
    pub trace: MacroTrace,
    pub converged: bool,
    pub macro_iterations: usize,
}

/// Sub-problem of area `area` for the given boundary values.
pub fn build_subproblem(
    f: &Feeder,
    part: &AreaPartition,
    area: usize,
    bs: &BoundaryState,
    opts: &OpfOptions,
) -> Result<AreaModel, OpfError> {
    let a = &part.areas[area];
    let root = match a.upstream_edge {
        Some(e) => RootSpec::Fixed(bs.edges[e].v0_in),
        None => RootSpec::Fixed(f.v_sub2),
    };
    let edge_loads: BTreeMap<usize, EdgeLoad> = a
        .downstream_edges
        .iter()
        .map(|&e| {
            let v = &bs.edges[e];
            (
                e,
                EdgeLoad::Fixed {
                    p: v.p_out,
                    q: v.q_out,
                },
            )
        })
        .collect();
    build_area(f, part, area, &AreaInputs { root, edge_loads }, opts)
}

/// Solves every area, in parallel when asked; results keep area order.
pub(crate) fn solve_all<T, F>(n: usize, parallel: bool, solve: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    if parallel {
        (0..n).into_par_iter().map(&solve).collect()
    } else {
        (0..n).map(solve).collect()
    }
}

/// Messages each area sends after solving, given the computed values in
/// `bs`.
pub fn outgoing_messages(
    f: &Feeder,
    part: &AreaPartition,
    bs: &BoundaryState,
    iteration: usize,
) -> Vec<BoundaryMessage> {
    let mut out = Vec::new();
    for (e, edge) in part.edges.iter().enumerate() {
        let (ua, da) = (&part.areas[edge.upstream_area], &part.areas[edge.downstream_area]);
        let bus = f.bus_id(edge.shared_bus).to_string();
        out.push(BoundaryMessage {
            from_area: ua.id.clone(),
            to_area: da.id.clone(),
            iteration,
            shared_bus: bus.clone(),
            payload: Payload::Voltage {
                v2: bs.edges[e].v_computed,
            },
        });
        out.push(BoundaryMessage {
            from_area: da.id.clone(),
            to_area: ua.id.clone(),
            iteration,
            shared_bus: bus,
            payload: Payload::Demand {
                p: bs.edges[e].p_computed,
                q: bs.edges[e].q_computed,
            },
        });
    }
    out
}

/// Applies received messages to the boundary state for the next iteration.
pub fn apply_messages(
    f: &Feeder,
    part: &AreaPartition,
    bs: &mut BoundaryState,
    msgs: &[BoundaryMessage],
    damping: f64,
) {
    let mix = |old: f64, new: f64| damping * old + (1.0 - damping) * new;
    for m in msgs {
        let Some(e) = part
            .edges
            .iter()
            .position(|edge| f.bus_id(edge.shared_bus) == m.shared_bus)
        else {
            continue;
        };
        let ev = &mut bs.edges[e];
        match m.payload {
            Payload::Voltage { v2 } => ev.v0_in = mix(ev.v0_in, v2),
            Payload::Demand { p, q } => {
                ev.p_out = mix(ev.p_out, p);
                ev.q_out = mix(ev.q_out, q);
            }
        }
    }
}

/// Runs the fixed-point macro-iterations.
pub fn macro_iterate(
    f: &Feeder,
    part: &AreaPartition,
    opts: &DopfOptions,
) -> Result<DopfResult, DopfError> {
    let mut bs = init_boundary(f, part);
    let mut trace = MacroTrace::default();
    let n = part.len();
    for it in 1..=opts.max_macro.max(1) {
        let results: Vec<Result<(AreaModel, AreaResult), OpfError>> =
            solve_all(n, opts.parallel, |a| {
                let am = build_subproblem(f, part, a, &bs, &opts.opf)?;
                let res = solve_area(f, &am, None, &opts.opf)?;
                Ok((am, res))
            });
        let mut solved = Vec::with_capacity(n);
        for r in results {
            solved.push(r?);
        }

        for (e, edge) in part.edges.iter().enumerate() {
            let (ua_m, ua_r) = &solved[edge.upstream_area];
            let (da_m, da_r) = &solved[edge.downstream_area];
            let vk = ua_m.bus_var(edge.shared_bus).expect("boundary bus modelled");
            bs.edges[e].v_computed = ua_r.nlp.x[vk];
            let (p, q) = da_m.root_inflow(f, &da_r.nlp.x);
            bs.edges[e].p_computed = p;
            bs.edges[e].q_computed = q;
        }
        let residual = consensus_residual(&bs);
        trace.iterations.push(MacroIteration {
            iteration: it,
            residual,
            area_objectives: solved.iter().map(|(_, r)| r.nlp.objective).collect(),
            area_status: solved.iter().map(|(_, r)| r.nlp.status).collect(),
            area_solver_iterations: solved.iter().map(|(_, r)| r.nlp.iterations).collect(),
            boundary: bs.clone(),
        });
        log::debug!("macro-iteration {it}: residual {residual:.3e}");

        if let Some(a) = solved
            .iter()
            .position(|(_, r)| r.nlp.status != NlpStatus::Optimal)
        {
            return Err(DopfError::AreaFailed {
                area: part.areas[a].id.clone(),
                status: solved[a].1.nlp.status,
                iteration: it,
                trace: Box::new(trace),
            });
        }

        let converged = residual < opts.eps;
        if converged || it == opts.max_macro.max(1) {
            let mut sol = OpfSolution::empty(f);
            for (am, r) in &solved {
                sol.absorb(am, &r.nlp.x);
                sol.iterations += r.nlp.iterations;
            }
            sol.status = NlpStatus::Optimal;
            sol.finish(f, opts.opf.penalty_form);
            return Ok(DopfResult {
                solution: sol,
                trace,
                converged,
                macro_iterations: it,
            });
        }
        let msgs = outgoing_messages(f, part, &bs, it);
        apply_messages(f, part, &mut bs, &msgs, opts.damping);
    }
    unreachable!("loop returns on its last iteration")
}
