//! Consensus ADMM over the same area partition, used as a baseline.
//!
//! Each boundary line `(j, k)` shares three quantities between its two
//! areas: the squared voltage at `k` and the real and reactive power drawn
//! at `k`. Both areas keep a local copy of each; the consensus value is the
//! mean of the copies and each copy carries a scaled dual.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dopf::{init_boundary, solve_all};
use crate::feeder::Feeder;
use crate::nlp::NlpStatus;
use crate::opf::{
    build_area, solve_area, AreaInputs, AreaModel, AreaResult, EdgeLoad, OpfError, OpfOptions,
    OpfSolution, RootSpec,
};
use crate::partition::AreaPartition;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmmOptions {
    pub opf: OpfOptions,
    pub rho: f64,
    pub eps_pri: f64,
    pub eps_dual: f64,
    pub max_iter: usize,
    pub parallel: bool,
}

impl Default for AdmmOptions {
    fn default() -> Self {
        Self {
            opf: OpfOptions::default(),
            rho: 1.0,
            eps_pri: 5e-5,
            eps_dual: 5e-5,
            max_iter: 500,
            parallel: false,
        }
    }
}

/// `[v2, p, q]` of one boundary.
pub type Shared = [f64; 3];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmmState {
    pub rho: f64,
    /// Upstream-area copies, one per boundary edge.
    pub upstream: Vec<Shared>,
    /// Downstream-area copies.
    pub downstream: Vec<Shared>,
    pub z: Vec<Shared>,
    pub u_upstream: Vec<Shared>,
    pub u_downstream: Vec<Shared>,
}

impl AdmmState {
    pub fn new(f: &Feeder, part: &AreaPartition, rho: f64) -> Self {
        let bs = init_boundary(f, part);
        let z: Vec<Shared> = bs
            .edges
            .iter()
            .map(|e| [e.v0_in, e.p_out, e.q_out])
            .collect();
        let zero = vec![[0.0; 3]; z.len()];
        Self {
            rho,
            upstream: z.clone(),
            downstream: z.clone(),
            z,
            u_upstream: zero.clone(),
            u_downstream: zero,
        }
    }

    /// Consensus update: arithmetic mean of the two copies. Returns the
    /// largest change of any consensus value.
    pub fn update_z(&mut self) -> f64 {
        let mut change = 0.0f64;
        for e in 0..self.z.len() {
            for c in 0..3 {
                let zn = 0.5 * (self.upstream[e][c] + self.downstream[e][c]);
                change = change.max((zn - self.z[e][c]).abs());
                self.z[e][c] = zn;
            }
        }
        change
    }

    pub fn update_duals(&mut self) {
        for e in 0..self.z.len() {
            for c in 0..3 {
                self.u_upstream[e][c] += self.upstream[e][c] - self.z[e][c];
                self.u_downstream[e][c] += self.downstream[e][c] - self.z[e][c];
            }
        }
    }

    /// Max |copy - z| over all copies.
    pub fn primal_residual(&self) -> f64 {
        let mut r = 0.0f64;
        for e in 0..self.z.len() {
            for c in 0..3 {
                r = r
                    .max((self.upstream[e][c] - self.z[e][c]).abs())
                    .max((self.downstream[e][c] - self.z[e][c]).abs());
            }
        }
        r
    }

    fn target(&self, e: usize, upstream: bool) -> Shared {
        let u = if upstream {
            self.u_upstream[e]
        } else {
            self.u_downstream[e]
        };
        [self.z[e][0] - u[0], self.z[e][1] - u[1], self.z[e][2] - u[2]]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmmIteration {
    pub iteration: usize,
    pub primal: f64,
    pub dual: f64,
    /// Stitched losses plus voltage-target penalties at this iteration.
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmmResult {
    pub solution: OpfSolution,
    pub trace: Vec<AdmmIteration>,
    pub converged: bool,
    pub iterations: usize,
    pub state: AdmmState,
}

#[derive(Debug, Error)]
pub enum AdmmError {
    #[error(transparent)]
    Opf(#[from] OpfError),

    #[error("area {area} solver ended with status {status:?} in ADMM iteration {iteration}")]
    AreaFailed {
        area: String,
        status: NlpStatus,
        iteration: usize,
        trace: Vec<AdmmIteration>,
    },
}

fn area_inputs(f: &Feeder, part: &AreaPartition, area: usize, st: &AdmmState) -> AreaInputs {
    let a = &part.areas[area];
    let root = match a.upstream_edge {
        None => RootSpec::Fixed(f.v_sub2),
        Some(e) => {
            let t = st.target(e, false);
            RootSpec::Proximal {
                v: t[0],
                p: t[1],
                q: t[2],
                rho: st.rho,
            }
        }
    };
    let edge_loads: BTreeMap<usize, EdgeLoad> = a
        .downstream_edges
        .iter()
        .map(|&e| {
            let t = st.target(e, true);
            (
                e,
                EdgeLoad::Proximal {
                    v: t[0],
                    p: t[1],
                    q: t[2],
                    rho: st.rho,
                },
            )
        })
        .collect();
    AreaInputs { root, edge_loads }
}

fn stitch(f: &Feeder, solved: &[(AreaModel, AreaResult)], opts: &OpfOptions) -> OpfSolution {
    let mut sol = OpfSolution::empty(f);
    for (am, r) in solved {
        sol.absorb(am, &r.nlp.x);
        sol.iterations += r.nlp.iterations;
    }
    sol.status = NlpStatus::Optimal;
    sol.finish(f, opts.penalty_form);
    sol
}

pub fn admm_iterate(
    f: &Feeder,
    part: &AreaPartition,
    opts: &AdmmOptions,
) -> Result<AdmmResult, AdmmError> {
    let mut st = AdmmState::new(f, part, opts.rho);
    let mut trace = Vec::new();
    let n = part.len();
    let max_iter = opts.max_iter.max(1);
    for it in 1..=max_iter {
        let results: Vec<Result<(AreaModel, AreaResult), OpfError>> =
            solve_all(n, opts.parallel, |a| {
                let inputs = area_inputs(f, part, a, &st);
                let am = build_area(f, part, a, &inputs, &opts.opf)?;
                let res = solve_area(f, &am, None, &opts.opf)?;
                Ok((am, res))
            });
        let mut solved = Vec::with_capacity(n);
        for r in results {
            solved.push(r?);
        }
        if let Some(a) = solved
            .iter()
            .position(|(_, r)| r.nlp.status != NlpStatus::Optimal)
        {
            return Err(AdmmError::AreaFailed {
                area: part.areas[a].id.clone(),
                status: solved[a].1.nlp.status,
                iteration: it,
                trace,
            });
        }

        for (e, edge) in part.edges.iter().enumerate() {
            let (ua_m, ua_r) = &solved[edge.upstream_area];
            let (da_m, da_r) = &solved[edge.downstream_area];
            let ev = ua_m
                .edges
                .iter()
                .find(|v| v.edge == e)
                .expect("boundary modelled");
            let xu = &ua_r.nlp.x;
            let vk = ua_m.bus_var(edge.shared_bus).expect("boundary bus modelled");
            st.upstream[e] = [
                xu[vk],
                xu[ev.p.expect("proximal form")],
                xu[ev.q.expect("proximal form")],
            ];
            let xd = &da_r.nlp.x;
            let (pin, qin) = da_m.inflow.expect("proximal form");
            st.downstream[e] = [xd[da_m.v[0]], xd[pin], xd[qin]];
        }
        let dz = st.update_z();
        st.update_duals();
        let primal = st.primal_residual();
        let dual = st.rho * dz;
        let sol = stitch(f, &solved, &opts.opf);
        trace.push(AdmmIteration {
            iteration: it,
            primal,
            dual,
            objective: sol.objective,
        });
        log::debug!("ADMM iteration {it}: r={primal:.3e} s={dual:.3e}");
        let converged = primal < opts.eps_pri && dual < opts.eps_dual;
        if converged || it == max_iter {
            return Ok(AdmmResult {
                solution: sol,
                trace,
                converged,
                iterations: it,
                state: st,
            });
        }
    }
    unreachable!("loop returns on its last iteration")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoSweepRow {
    pub rho: f64,
    pub iterations: usize,
    pub converged: bool,
    pub objective: Option<f64>,
    pub error: Option<String>,
}

/// Runs ADMM once per penalty value.
pub fn rho_sweep(
    f: &Feeder,
    part: &AreaPartition,
    rhos: &[f64],
    opts: &AdmmOptions,
) -> Vec<RhoSweepRow> {
    rhos.iter()
        .map(|&rho| {
            match admm_iterate(f, part, &AdmmOptions { rho, ..*opts }) {
                Ok(r) => RhoSweepRow {
                    rho,
                    iterations: r.iterations,
                    converged: r.converged,
                    objective: Some(r.solution.objective),
                    error: None,
                },
                Err(e) => RhoSweepRow {
                    rho,
                    iterations: 0,
                    converged: false,
                    objective: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::der::{DerMode, DerSpec};
    use crate::feeder::{Bus, LineSpec};
    use crate::opf::solve_copf;
    use crate::partition::{partition_by_roots, single_area};

    fn chain() -> Feeder {
        let buses = (0..6)
            .map(|i| Bus::new(i.to_string(), if i == 0 { 0.0 } else { 0.05 }, 0.02))
            .collect();
        let lines = (0..5)
            .map(|i| LineSpec::new(i.to_string(), (i + 1).to_string(), 0.01, 0.02))
            .collect();
        let ders = vec![DerSpec::new(
            "3",
            0.04,
            DerMode::GridFollowingQ { p_measured: 0.02 },
        )];
        Feeder::new("chain", buses, lines, ders, "0", 1.0609, 1e6, 4160.0).unwrap()
    }

    #[test]
    fn single_area_is_one_iteration() {
        let f = chain();
        let part = single_area(&f).unwrap();
        let r = admm_iterate(&f, &part, &AdmmOptions::default()).unwrap();
        assert!(r.converged);
        assert_eq!(r.iterations, 1);
        let c = solve_copf(&f, &OpfOptions::default()).unwrap();
        assert!((r.solution.objective - c.objective).abs() < 1e-8);
    }

    #[test]
    fn z_is_the_mean_of_copies() {
        let f = chain();
        let part = partition_by_roots(&f, &["0".into(), "3".into()]).unwrap();
        let mut st = AdmmState::new(&f, &part, 1.0);
        st.upstream[0] = [1.0, 0.2, 0.1];
        st.downstream[0] = [1.02, 0.1, 0.05];
        st.update_z();
        assert!((st.z[0][0] - 1.01).abs() < 1e-15);
        assert!((st.z[0][1] - 0.15).abs() < 1e-15);
        assert!((st.primal_residual() - 0.05).abs() < 1e-15);
    }

    #[test]
    fn two_areas_reach_consensus() {
        let f = chain();
        let part = partition_by_roots(&f, &["0".into(), "3".into()]).unwrap();
        let r = admm_iterate(&f, &part, &AdmmOptions::default()).unwrap();
        assert!(r.converged, "{:?}", r.trace.last());
        let c = solve_copf(&f, &OpfOptions::default()).unwrap();
        let rel = (r.solution.objective - c.objective).abs() / c.objective;
        assert!(rel < 1e-2);
    }
}
