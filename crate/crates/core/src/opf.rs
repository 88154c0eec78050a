//! Loss-minimizing optimal power flow over a whole feeder or one area of a
//! partitioned feeder.
//!
//! The same builder produces the centralized problem (one area, root pinned
//! to the substation voltage), the fixed-point sub-problems (root pinned to
//! a received voltage, downstream areas replaced by fixed loads) and the
//! ADMM sub-problems (boundary copies free, with proximal penalties).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::der::{gfli_q_bounds, pvbus_objective_term, DerMode, PenaltyForm};
use crate::feeder::{Feeder, FeederError, UNLIMITED_I2};
use crate::nlp::{
    solve_nlp, NlpError, NlpOptions, NlpSolution, NlpStatus, QcqpModel, QuadExpr, VarId,
};
use crate::partition::{single_area, AreaPartition, PartitionError};

pub const BINDING_TOL: f64 = 1e-5;

#[derive(Debug, Error)]
pub enum OpfError {
    #[error(transparent)]
    Feeder(#[from] FeederError),

    #[error(transparent)]
    Partition(#[from] PartitionError),

    #[error(transparent)]
    Nlp(#[from] NlpError),

    #[error("grid-forming DER at bus {bus} sits on the root of area {area}, whose voltage is set by its neighbour")]
    GridFormingAtAreaRoot { bus: String, area: String },

    #[error("no boundary value for line {line} of area {area}")]
    MissingBoundary { area: String, line: String },

    #[error("DER at bus {bus} has zero rating in a mode that needs a capability disk")]
    ZeroRatingDisk { bus: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpfOptions {
    pub nlp: NlpOptions,
    pub penalty_form: PenaltyForm,
}

impl Default for OpfOptions {
    fn default() -> Self {
        Self {
            nlp: NlpOptions::default(),
            penalty_form: PenaltyForm::Squared,
        }
    }
}

/// How an area's root voltage enters its sub-problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RootSpec {
    /// Pinned (substation or received upstream voltage).
    Fixed(f64),
    /// Root voltage and inflow are local copies pulled towards targets by
    /// `(rho / 2) * (copy - target)^2`.
    Proximal {
        v: f64,
        p: f64,
        q: f64,
        rho: f64,
    },
}

/// What a sub-problem sees at the far end of a boundary line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EdgeLoad {
    Fixed { p: f64, q: f64 },
    Proximal { v: f64, p: f64, q: f64, rho: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AreaInputs {
    pub root: RootSpec,
    /// Keyed by boundary edge index.
    pub edge_loads: BTreeMap<usize, EdgeLoad>,
}

impl AreaInputs {
    pub fn substation(f: &Feeder) -> Self {
        Self {
            root: RootSpec::Fixed(f.v_sub2),
            edge_loads: BTreeMap::new(),
        }
    }
}

/// Boundary-line demand variables of an upstream area (ADMM form only).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeVars {
    pub edge: usize,
    pub p: Option<VarId>,
    pub q: Option<VarId>,
}

/// A built sub-problem together with the map back to feeder elements.
#[derive(Debug, Clone)]
pub struct AreaModel {
    pub model: QcqpModel,
    pub area: usize,
    /// Modelled buses: owned buses, then boundary load buses.
    pub buses: Vec<usize>,
    pub owned_buses: usize,
    /// Modelled lines (own and downstream boundary lines).
    pub lines: Vec<usize>,
    /// DER indices owned by the area.
    pub ders: Vec<usize>,
    pub v: Vec<VarId>,
    pub p: Vec<VarId>,
    pub q: Vec<VarId>,
    pub l: Vec<VarId>,
    pub der_p: Vec<VarId>,
    pub der_q: Vec<VarId>,
    pub edges: Vec<EdgeVars>,
    /// Root inflow copies (ADMM form only).
    pub inflow: Option<(VarId, VarId)>,
    pub x0: Vec<f64>,
    bus_slot: BTreeMap<usize, usize>,
    line_slot: BTreeMap<usize, usize>,
}

impl AreaModel {
    pub fn bus_var(&self, bus: usize) -> Option<VarId> {
        self.bus_slot.get(&bus).map(|&s| self.v[s])
    }

    pub fn line_vars(&self, line: usize) -> Option<(VarId, VarId, VarId)> {
        self.line_slot
            .get(&line)
            .map(|&s| (self.p[s], self.q[s], self.l[s]))
    }

    /// Line losses `sum r l` over the modelled lines at `x`.
    pub fn losses(&self, f: &Feeder, x: &[f64]) -> f64 {
        self.lines
            .iter()
            .zip(&self.l)
            .map(|(&li, &lv)| f.lines[li].r * x[lv])
            .sum()
    }

    /// Net power entering the area root from its parent line at `x`: flow
    /// into the root's lines plus the root's own net consumption.
    pub fn root_inflow(&self, f: &Feeder, x: &[f64]) -> (f64, f64) {
        let r = self.buses[0];
        let bus = &f.buses[r];
        let (mut p, mut q) = (bus.p_load, bus.q_load - bus.q_cap);
        for (li, line) in f.lines.iter().enumerate() {
            if line.from == r {
                if let Some((pv, qv, _)) = self.line_vars(li) {
                    p += x[pv];
                    q += x[qv];
                }
            }
        }
        for (k, &d) in self.ders.iter().enumerate() {
            if f.ders[d].bus == bus.id {
                p -= x[self.der_p[k]];
                q -= x[self.der_q[k]];
            }
        }
        (p, q)
    }
}

fn thermal_bound(i_rated2: f64) -> f64 {
    if i_rated2 >= UNLIMITED_I2 {
        f64::INFINITY
    } else {
        i_rated2
    }
}

/// Builds the sub-problem of `area` in `part`.
pub fn build_area(
    f: &Feeder,
    part: &AreaPartition,
    area: usize,
    inputs: &AreaInputs,
    opts: &OpfOptions,
) -> Result<AreaModel, OpfError> {
    let tree = f.tree()?;
    let a = &part.areas[area];
    let mut m = QcqpModel::new();

    let mut buses = a.buses.clone();
    let owned_buses = buses.len();
    let lines = a.model_lines(part);
    for &e in &a.downstream_edges {
        buses.push(part.edges[e].shared_bus);
    }
    let bus_slot: BTreeMap<usize, usize> = buses.iter().enumerate().map(|(s, &b)| (b, s)).collect();
    let line_slot: BTreeMap<usize, usize> = lines.iter().enumerate().map(|(s, &l)| (l, s)).collect();

    let ders: Vec<usize> = (0..f.ders.len())
        .filter(|&d| {
            let b = f.bus_index(&f.ders[d].bus).expect("validated");
            bus_slot.get(&b).is_some_and(|&s| s < owned_buses)
        })
        .collect();
    let root = buses[0];
    if a.upstream_edge.is_some() {
        for &d in &ders {
            if f.ders[d].bus == f.buses[root].id {
                if let DerMode::GridForming { .. } = f.ders[d].mode {
                    return Err(OpfError::GridFormingAtAreaRoot {
                        bus: f.ders[d].bus.clone(),
                        area: a.id.clone(),
                    });
                }
            }
        }
    }

    // Voltages.
    let mut v = Vec::with_capacity(buses.len());
    for (s, &b) in buses.iter().enumerate() {
        let bus = &f.buses[b];
        let (lo, hi) = if s == 0 {
            match inputs.root {
                RootSpec::Fixed(v0) => (v0, v0),
                RootSpec::Proximal { .. } => (bus.v_min2, bus.v_max2),
            }
        } else {
            (bus.v_min2, bus.v_max2)
        };
        v.push(m.add_var(format!("v[{}]", bus.id), lo, hi));
    }

    // Line flows.
    let (mut p, mut q, mut l) = (Vec::new(), Vec::new(), Vec::new());
    for &li in &lines {
        let lab = f.line_label(li);
        p.push(m.add_var(format!("P[{lab}]"), f64::NEG_INFINITY, f64::INFINITY));
        q.push(m.add_var(format!("Q[{lab}]"), f64::NEG_INFINITY, f64::INFINITY));
        l.push(m.add_var(
            format!("l[{lab}]"),
            0.0,
            thermal_bound(f.lines[li].i_rated2),
        ));
    }

    // DER outputs and mode constraints.
    let mut der_p = Vec::with_capacity(ders.len());
    let mut der_q = Vec::with_capacity(ders.len());
    let mut der_at: BTreeMap<usize, usize> = BTreeMap::new();
    let mut objective = QuadExpr::new();
    for (k, &d) in ders.iter().enumerate() {
        let der = &f.ders[d];
        let b = f.bus_index(&der.bus).expect("validated");
        der_at.insert(b, k);
        let s = der.s_rating;
        let vb = v[bus_slot[&b]];
        let (pv, qv) = match der.mode {
            DerMode::GridFollowingQ { p_measured } => {
                let iv = gfli_q_bounds(s, p_measured).map_err(FeederError::from)?;
                (
                    m.add_var(format!("pD[{}]", der.bus), p_measured, p_measured),
                    m.add_var(format!("qD[{}]", der.bus), iv.lo, iv.hi),
                )
            }
            DerMode::GridFollowingP => (
                m.add_var(format!("pD[{}]", der.bus), 0.0, s),
                m.add_var(format!("qD[{}]", der.bus), 0.0, 0.0),
            ),
            DerMode::GridSupporting { p_measured, curve } => {
                let pv = m.add_var(format!("pD[{}]", der.bus), p_measured, p_measured);
                let qv = m.add_var(format!("qD[{}]", der.bus), f64::NEG_INFINITY, f64::INFINITY);
                m.add_eq(
                    format!("droop[{}]", der.bus),
                    QuadExpr::new()
                        .lin(qv, 1.0)
                        .lin(vb, -curve.slope_v2())
                        .constant(-curve.q_linearized(0.0)),
                );
                (pv, qv)
            }
            DerMode::GridForming { v_set2 } => {
                if s <= 0.0 {
                    return Err(OpfError::ZeroRatingDisk { bus: der.bus.clone() });
                }
                let pv = m.add_var(format!("pD[{}]", der.bus), -s, s);
                let qv = m.add_var(format!("qD[{}]", der.bus), -s, s);
                m.add_eq(
                    format!("vset[{}]", der.bus),
                    QuadExpr::new().lin(vb, 1.0).constant(-v_set2),
                );
                m.add_ineq(format!("disk[{}]", der.bus), disk(pv, qv, s));
                (pv, qv)
            }
            DerMode::PvTypeBus {
                v_set2,
                p_set,
                penalty_m,
            } => {
                if s <= 0.0 {
                    return Err(OpfError::ZeroRatingDisk { bus: der.bus.clone() });
                }
                let pv = m.add_var(format!("pD[{}]", der.bus), p_set, p_set);
                let qv = m.add_var(format!("qD[{}]", der.bus), -s, s);
                m.add_ineq(format!("disk[{}]", der.bus), disk(pv, qv, s));
                objective = match opts.penalty_form {
                    PenaltyForm::Squared => objective.square_deviation(vb, v_set2, penalty_m),
                    PenaltyForm::Linear => objective.lin(vb, penalty_m).constant(-penalty_m * v_set2),
                };
                (pv, qv)
            }
        };
        der_p.push(pv);
        der_q.push(qv);
    }

    // Boundary loads.
    let mut edges = Vec::new();
    let mut demand: BTreeMap<usize, (QuadExpr, QuadExpr)> = BTreeMap::new();
    for &e in &a.downstream_edges {
        let edge = &part.edges[e];
        let k = edge.shared_bus;
        let Some(load) = inputs.edge_loads.get(&e) else {
            return Err(OpfError::MissingBoundary {
                area: a.id.clone(),
                line: f.line_label(edge.line),
            });
        };
        match *load {
            EdgeLoad::Fixed { p, q } => {
                demand.insert(k, (QuadExpr::new().constant(p), QuadExpr::new().constant(q)));
                edges.push(EdgeVars {
                    edge: e,
                    p: None,
                    q: None,
                });
            }
            EdgeLoad::Proximal {
                v: tv,
                p: tp,
                q: tq,
                rho,
            } => {
                let id = f.bus_id(k);
                let pv = m.add_var(format!("pB[{id}]"), f64::NEG_INFINITY, f64::INFINITY);
                let qv = m.add_var(format!("qB[{id}]"), f64::NEG_INFINITY, f64::INFINITY);
                objective = objective
                    .square_deviation(v[bus_slot[&k]], tv, rho / 2.0)
                    .square_deviation(pv, tp, rho / 2.0)
                    .square_deviation(qv, tq, rho / 2.0);
                demand.insert(k, (QuadExpr::new().lin(pv, 1.0), QuadExpr::new().lin(qv, 1.0)));
                edges.push(EdgeVars {
                    edge: e,
                    p: Some(pv),
                    q: Some(qv),
                });
            }
        }
    }

    // Branch-flow equations for every modelled line i -> j.
    for (s, &li) in lines.iter().enumerate() {
        let line = &f.lines[li];
        let j = line.to;
        let lab = f.line_label(li);
        let vi = v[bus_slot[&line.from]];
        let vj = v[bus_slot[&j]];
        let mut ep = QuadExpr::new().lin(p[s], 1.0).lin(l[s], -line.r);
        let mut eq = QuadExpr::new().lin(q[s], 1.0).lin(l[s], -line.x);
        if let Some((dp, dq)) = demand.get(&j) {
            ep = add_scaled(ep, dp, -1.0);
            eq = add_scaled(eq, dq, -1.0);
        } else {
            let bus = &f.buses[j];
            ep = ep.constant(-bus.p_load);
            eq = eq.constant(-bus.q_load + bus.q_cap);
            if let Some(&k) = der_at.get(&j) {
                ep = ep.lin(der_p[k], 1.0);
                eq = eq.lin(der_q[k], 1.0);
            }
            for &c in &tree.child_lines[j] {
                let cs = line_slot[&c];
                ep = ep.lin(p[cs], -1.0);
                eq = eq.lin(q[cs], -1.0);
            }
        }
        m.add_eq(format!("pbal[{lab}]"), ep);
        m.add_eq(format!("qbal[{lab}]"), eq);
        m.add_eq(
            format!("vdrop[{lab}]"),
            QuadExpr::new()
                .lin(vj, 1.0)
                .lin(vi, -1.0)
                .lin(p[s], 2.0 * line.r)
                .lin(q[s], 2.0 * line.x)
                .lin(l[s], -(line.r * line.r + line.x * line.x)),
        );
        m.add_eq(
            format!("current[{lab}]"),
            QuadExpr::new()
                .quad(vi, l[s], 1.0)
                .quad(p[s], p[s], -1.0)
                .quad(q[s], q[s], -1.0),
        );
        objective = objective.lin(l[s], line.r);
    }

    // Root inflow copies.
    let mut inflow = None;
    if let RootSpec::Proximal { v: tv, p: tp, q: tq, rho } = inputs.root {
        let id = f.bus_id(root);
        let pin = m.add_var(format!("pIn[{id}]"), f64::NEG_INFINITY, f64::INFINITY);
        let qin = m.add_var(format!("qIn[{id}]"), f64::NEG_INFINITY, f64::INFINITY);
        let bus = &f.buses[root];
        let mut ep = QuadExpr::new().lin(pin, 1.0).constant(-bus.p_load);
        let mut eq = QuadExpr::new().lin(qin, 1.0).constant(-bus.q_load + bus.q_cap);
        if let Some(&k) = der_at.get(&root) {
            ep = ep.lin(der_p[k], 1.0);
            eq = eq.lin(der_q[k], 1.0);
        }
        for &c in &tree.child_lines[root] {
            let cs = line_slot[&c];
            ep = ep.lin(p[cs], -1.0);
            eq = eq.lin(q[cs], -1.0);
        }
        m.add_eq(format!("pin[{id}]"), ep);
        m.add_eq(format!("qin[{id}]"), eq);
        objective = objective
            .square_deviation(v[0], tv, rho / 2.0)
            .square_deviation(pin, tp, rho / 2.0)
            .square_deviation(qin, tq, rho / 2.0);
        inflow = Some((pin, qin));
    }
    m.add_objective(objective);

    let mut am = AreaModel {
        model: m,
        area,
        buses,
        owned_buses,
        lines,
        ders,
        v,
        p,
        q,
        l,
        der_p,
        der_q,
        edges,
        inflow,
        x0: Vec::new(),
        bus_slot,
        line_slot,
    };
    am.x0 = initial_point(f, &am, inputs, &demand_targets(inputs));
    Ok(am)
}

fn disk(p: VarId, q: VarId, s: f64) -> QuadExpr {
    let w = 1.0 / (s * s);
    QuadExpr::new().quad(p, p, w).quad(q, q, w).constant(-1.0)
}

fn add_scaled(mut a: QuadExpr, b: &QuadExpr, w: f64) -> QuadExpr {
    a.constant += w * b.constant;
    a.linear.extend(b.linear.iter().map(|&(i, c)| (i, w * c)));
    a.quadratic
        .extend(b.quadratic.iter().map(|&(i, j, c)| (i, j, w * c)));
    a
}

fn demand_targets(inputs: &AreaInputs) -> BTreeMap<usize, (f64, f64)> {
    inputs
        .edge_loads
        .iter()
        .map(|(&e, load)| match *load {
            EdgeLoad::Fixed { p, q } | EdgeLoad::Proximal { p, q, .. } => (e, (p, q)),
        })
        .collect()
}

/// Flat voltages, lossless flows, DER outputs at mid-range.
fn initial_point(
    f: &Feeder,
    am: &AreaModel,
    inputs: &AreaInputs,
    targets: &BTreeMap<usize, (f64, f64)>,
) -> Vec<f64> {
    let m = &am.model;
    let n = crate::nlp::NlpProblem::n_vars(m);
    let lb = crate::nlp::NlpProblem::lower_bounds(m);
    let ub = crate::nlp::NlpProblem::upper_bounds(m);
    let mut x = vec![0.0; n];
    let v0 = match inputs.root {
        RootSpec::Fixed(v) | RootSpec::Proximal { v, .. } => v,
    };
    for &vv in &am.v {
        x[vv] = v0.clamp(lb[vv], ub[vv]);
    }
    let mut net_p = vec![0.0; am.buses.len()];
    let mut net_q = vec![0.0; am.buses.len()];
    for (s, &b) in am.buses.iter().enumerate().take(am.owned_buses) {
        net_p[s] = f.buses[b].p_load;
        net_q[s] = f.buses[b].q_load - f.buses[b].q_cap;
    }
    for (k, &d) in am.ders.iter().enumerate() {
        let (pv, qv) = (am.der_p[k], am.der_q[k]);
        let der = &f.ders[d];
        x[pv] = mid(lb[pv], ub[pv]);
        x[qv] = match der.mode {
            DerMode::GridSupporting { curve, .. } => curve.q_linearized(v0),
            _ => mid(lb[qv], ub[qv]),
        };
        let s = am.bus_slot[&f.bus_index(&der.bus).expect("validated")];
        net_p[s] -= x[pv];
        net_q[s] -= x[qv];
    }
    for (n, ev) in am.edges.iter().enumerate() {
        let (tp, tq) = targets[&ev.edge];
        let slot = am.owned_buses + n;
        net_p[slot] = tp;
        net_q[slot] = tq;
        if let (Some(pv), Some(qv)) = (ev.p, ev.q) {
            x[pv] = tp;
            x[qv] = tq;
        }
    }
    // Subtree sums, children before parents.
    let mut order: Vec<usize> = (0..am.lines.len()).collect();
    let tree = f.tree().expect("validated");
    order.sort_by_key(|&s| std::cmp::Reverse(tree.rank[f.lines[am.lines[s]].to]));
    let mut sub_p = net_p.clone();
    let mut sub_q = net_q.clone();
    for s in order {
        let line = &f.lines[am.lines[s]];
        let j = am.bus_slot[&line.to];
        let i = am.bus_slot[&line.from];
        x[am.p[s]] = sub_p[j];
        x[am.q[s]] = sub_q[j];
        let lv = (sub_p[j] * sub_p[j] + sub_q[j] * sub_q[j]) / v0;
        x[am.l[s]] = lv.min(ub[am.l[s]]);
        sub_p[i] += sub_p[j];
        sub_q[i] += sub_q[j];
    }
    if let Some((pin, qin)) = am.inflow {
        x[pin] = sub_p[0];
        x[qin] = sub_q[0];
    }
    x
}

fn mid(lo: f64, hi: f64) -> f64 {
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => 0.5 * (lo + hi),
        (true, false) => lo,
        (false, true) => hi,
        (false, false) => 0.0,
    }
}

/// Solver outcome of one area sub-problem.
#[derive(Debug, Clone)]
pub struct AreaResult {
    pub nlp: NlpSolution,
    /// Losses over the modelled lines.
    pub losses: f64,
}

pub fn solve_area(
    f: &Feeder,
    am: &AreaModel,
    x0: Option<&[f64]>,
    opts: &OpfOptions,
) -> Result<AreaResult, OpfError> {
    let start = x0.unwrap_or(&am.x0);
    let nlp = solve_nlp(&am.model, start, &opts.nlp)?;
    let losses = am.losses(f, &nlp.x);
    Ok(AreaResult { nlp, losses })
}

/// Solution over the whole feeder, indexed like the feeder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpfSolution {
    pub v2: Vec<f64>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub l: Vec<f64>,
    pub der_p: Vec<f64>,
    pub der_q: Vec<f64>,
    /// Line losses `sum r l` (pu).
    pub losses: f64,
    /// Voltage-target penalty of PV-type buses.
    pub penalty: f64,
    /// `losses + penalty`.
    pub objective: f64,
    pub binding: Vec<String>,
    pub status: NlpStatus,
    pub iterations: usize,
}

impl OpfSolution {
    pub fn empty(f: &Feeder) -> Self {
        Self {
            v2: vec![0.0; f.n_buses()],
            p: vec![0.0; f.n_lines()],
            q: vec![0.0; f.n_lines()],
            l: vec![0.0; f.n_lines()],
            der_p: vec![0.0; f.ders.len()],
            der_q: vec![0.0; f.ders.len()],
            losses: 0.0,
            penalty: 0.0,
            objective: 0.0,
            binding: Vec::new(),
            status: NlpStatus::Optimal,
            iterations: 0,
        }
    }

    /// Copies the owned part of an area solution into `self`.
    pub fn absorb(&mut self, am: &AreaModel, x: &[f64]) {
        for (s, &b) in am.buses.iter().enumerate().take(am.owned_buses) {
            self.v2[b] = x[am.v[s]];
        }
        for (s, &li) in am.lines.iter().enumerate() {
            self.p[li] = x[am.p[s]];
            self.q[li] = x[am.q[s]];
            self.l[li] = x[am.l[s]];
        }
        for (k, &d) in am.ders.iter().enumerate() {
            self.der_p[d] = x[am.der_p[k]];
            self.der_q[d] = x[am.der_q[k]];
        }
        self.binding.extend(binding_report(&am.model, x));
    }

    /// Recomputes losses, penalty and objective from the stored values.
    pub fn finish(&mut self, f: &Feeder, form: PenaltyForm) {
        self.losses = f.lines.iter().zip(&self.l).map(|(ln, l)| ln.r * l).sum();
        self.penalty = 0.0;
        for der in &f.ders {
            if let DerMode::PvTypeBus {
                v_set2, penalty_m, ..
            } = der.mode
            {
                let b = f.bus_index(&der.bus).expect("validated");
                self.penalty += pvbus_objective_term(self.v2[b], v_set2, penalty_m, form);
            }
        }
        self.objective = self.losses + self.penalty;
        self.binding.sort();
    }
}

/// Names of bounds and inequalities within [`BINDING_TOL`] of being active.
pub fn binding_report(m: &QcqpModel, x: &[f64]) -> Vec<String> {
    use crate::nlp::NlpProblem;
    let mut out = Vec::new();
    let (lb, ub) = (m.lower_bounds(), m.upper_bounds());
    for i in 0..m.n_vars() {
        if lb[i] == ub[i] {
            continue;
        }
        if lb[i].is_finite() && x[i] - lb[i] <= BINDING_TOL {
            out.push(format!("{} at lower bound", m.var_name(i)));
        }
        if ub[i].is_finite() && ub[i] - x[i] <= BINDING_TOL {
            out.push(format!("{} at upper bound", m.var_name(i)));
        }
    }
    let mut g = vec![0.0; m.n_ineq()];
    m.ineq_constraints(x, &mut g);
    for (r, gv) in g.iter().enumerate() {
        if *gv >= -BINDING_TOL {
            out.push(format!("{} active", m.ineq_name(r)));
        }
    }
    out
}

/// Centralized problem over the whole feeder.
pub fn build_copf(f: &Feeder, opts: &OpfOptions) -> Result<AreaModel, OpfError> {
    let part = single_area(f)?;
    build_area(f, &part, 0, &AreaInputs::substation(f), opts)
}

pub fn solve_copf(f: &Feeder, opts: &OpfOptions) -> Result<OpfSolution, OpfError> {
    let am = build_copf(f, opts)?;
    let res = solve_area(f, &am, None, opts)?;
    let mut sol = OpfSolution::empty(f);
    sol.absorb(&am, &res.nlp.x);
    sol.status = res.nlp.status;
    sol.iterations = res.nlp.iterations;
    sol.finish(f, opts.penalty_form);
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::der::{DerSpec, DroopCurve};
    use crate::feeder::{Bus, LineSpec};
    use crate::nlp::NlpProblem;

    fn two_bus(ders: Vec<DerSpec>) -> Feeder {
        Feeder::new(
            "two-bus",
            vec![Bus::new("0", 0.0, 0.0), Bus::new("1", 0.1, 0.05)],
            vec![LineSpec::new("0", "1", 0.01, 0.01)],
            ders,
            "0",
            1.0,
            1e6,
            4160.0,
        )
        .unwrap()
    }

    #[test]
    fn counts_without_ders() {
        let m = build_copf(&two_bus(vec![]), &OpfOptions::default()).unwrap();
        assert_eq!(m.model.n_vars(), 5);
        assert_eq!(m.model.n_eq(), 4);
        assert_eq!(m.model.n_ineq(), 0);
        let lb = m.model.lower_bounds();
        assert_eq!(lb[m.v[0]], 1.0);
        assert_eq!(m.model.upper_bounds()[m.v[0]], 1.0);
    }

    #[test]
    fn gsi_adds_one_affine_equality() {
        let curve = DroopCurve {
            q_ref: 0.0,
            v_ref: 1.0,
            k_q: 1.0,
        };
        let der = DerSpec::new(
            "1",
            0.2,
            DerMode::GridSupporting {
                p_measured: 0.05,
                curve,
            },
        );
        let m = build_copf(&two_bus(vec![der]), &OpfOptions::default()).unwrap();
        assert_eq!(m.model.n_eq(), 5);
        assert!(m.model.eq_expr(0).quadratic.is_empty());
    }

    #[test]
    fn gfi_adds_equality_and_disk() {
        let der = DerSpec::new("1", 0.2, DerMode::GridForming { v_set2: 1.0 });
        let m = build_copf(&two_bus(vec![der]), &OpfOptions::default()).unwrap();
        assert_eq!(m.model.n_eq(), 5);
        assert_eq!(m.model.n_ineq(), 1);
    }

    #[test]
    fn no_der_matches_powerflow_losses() {
        let f = two_bus(vec![]);
        let sol = solve_copf(&f, &OpfOptions::default()).unwrap();
        assert_eq!(sol.status, NlpStatus::Optimal);
        let pf = crate::powerflow::solve_powerflow(&f, &[], f.v_sub2).unwrap();
        assert!((sol.objective - pf.losses).abs() < 1e-9);
    }

    #[test]
    fn idle_ders_on_no_load_feeder() {
        let f = Feeder::new(
            "idle",
            vec![Bus::new("0", 0.0, 0.0), Bus::new("1", 0.0, 0.0)],
            vec![LineSpec::new("0", "1", 0.01, 0.01)],
            vec![DerSpec::new("1", 0.1, DerMode::GridFollowingQ { p_measured: 0.0 })],
            "0",
            1.0,
            1e6,
            4160.0,
        )
        .unwrap();
        let sol = solve_copf(&f, &OpfOptions::default()).unwrap();
        assert!(sol.objective.abs() < 1e-9, "{sol:?}");
    }
}
