//! Balanced radial feeder data model in per-unit.
//!
//! A [`Feeder`] is built either programmatically through [`Feeder::new`] or
//! from a TOML document through [`parse_feeder`]. Construction checks
//! element-level invariants (ids, endpoints, bounds). Topology is checked
//! separately by [`validate_radial`], so a malformed network can still be
//! loaded and reported on.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::der::{DerError, DerMode, DerSpec, DroopCurve, DEFAULT_PENALTY_M};

pub const DEFAULT_V_MIN: f64 = 0.95;
pub const DEFAULT_V_MAX: f64 = 1.05;
/// Squared-current limit used when a line has no ampacity in the document.
pub const UNLIMITED_I2: f64 = 1.0e4;

#[derive(Debug, Error)]
pub enum FeederError {
    #[error("feeder document is not valid TOML or violates the schema: {0}")]
    Schema(String),

    #[error("duplicate bus id {0:?}")]
    DuplicateBus(String),

    #[error("line {line} references unknown bus {bus:?}")]
    DanglingEndpoint { line: String, bus: String },

    #[error("base quantity {name} = {value} must be positive")]
    NonPositiveBase { name: &'static str, value: f64 },

    #[error("bus {bus:?}: {reason}")]
    InvalidBus { bus: String, reason: String },

    #[error("line {line}: {reason}")]
    InvalidLine { line: String, reason: String },

    #[error("DER references unknown bus {0:?}")]
    UnknownDerBus(String),

    #[error("more than one DER at bus {0:?}")]
    ConflictingDers(String),

    #[error(transparent)]
    Der(#[from] DerError),

    #[error("feeder is not radial: {0}")]
    NotRadial(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: String,
    /// Real demand (pu).
    pub p_load: f64,
    /// Reactive demand (pu).
    pub q_load: f64,
    /// Shunt capacitor injection (pu).
    pub q_cap: f64,
    /// Squared voltage bounds (pu²).
    pub v_min2: f64,
    pub v_max2: f64,
}

impl Bus {
    /// Bus with the given demand and default voltage limits.
    pub fn new(id: impl Into<String>, p_load: f64, q_load: f64) -> Self {
        Self {
            id: id.into(),
            p_load,
            q_load,
            q_cap: 0.0,
            v_min2: DEFAULT_V_MIN * DEFAULT_V_MIN,
            v_max2: DEFAULT_V_MAX * DEFAULT_V_MAX,
        }
    }

    pub fn with_cap(mut self, q_cap: f64) -> Self {
        self.q_cap = q_cap;
        self
    }

    pub fn with_limits(mut self, v_min: f64, v_max: f64) -> Self {
        self.v_min2 = v_min * v_min;
        self.v_max2 = v_max * v_max;
        self
    }
}

/// Directed line `from -> to` (indices into [`Feeder::buses`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub from: usize,
    pub to: usize,
    pub r: f64,
    pub x: f64,
    /// Squared ampacity (pu²).
    pub i_rated2: f64,
}

/// Input for [`Feeder::new`]: a line given by bus ids.
#[derive(Debug, Clone)]
pub struct LineSpec {
    pub from: String,
    pub to: String,
    pub r: f64,
    pub x: f64,
    pub i_rated2: f64,
}

impl LineSpec {
    pub fn new(from: impl Into<String>, to: impl Into<String>, r: f64, x: f64) -> Self {
        Self {
            from: from.into(),
            to: to.into(),
            r,
            x,
            i_rated2: UNLIMITED_I2,
        }
    }

    pub fn with_rating2(mut self, i_rated2: f64) -> Self {
        self.i_rated2 = i_rated2;
        self
    }
}

/// Ordering used wherever buses must be ranked: numeric ids compare as
/// numbers, everything else lexicographically, numbers first.
pub fn compare_bus_ids(a: &str, b: &str) -> Ordering {
    match (a.parse::<u64>(), b.parse::<u64>()) {
        (Ok(x), Ok(y)) => x.cmp(&y).then_with(|| a.cmp(b)),
        (Ok(_), Err(_)) => Ordering::Less,
        (Err(_), Ok(_)) => Ordering::Greater,
        (Err(_), Err(_)) => a.cmp(b),
    }
}

/// Parent/child structure of a radial feeder.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    /// Root-first order, ties broken by bus id.
    pub order: Vec<usize>,
    /// Position of each bus in `order`.
    pub rank: Vec<usize>,
    pub parent: Vec<Option<usize>>,
    /// Line feeding each bus.
    pub parent_line: Vec<Option<usize>>,
    /// Lines leaving each bus, sorted by child id.
    pub child_lines: Vec<Vec<usize>>,
}

#[derive(Debug, Clone)]
pub struct Feeder {
    pub name: String,
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
    /// DERs declared in the feeder document.
    pub ders: Vec<DerSpec>,
    /// Index of the substation bus.
    pub substation: usize,
    /// Squared substation voltage (pu²).
    pub v_sub2: f64,
    /// Power base (VA).
    pub s_base: f64,
    /// Voltage base (V, line-to-line).
    pub v_base: f64,
    index: BTreeMap<String, usize>,
    tree: Option<Tree>,
}

impl Feeder {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        buses: Vec<Bus>,
        lines: Vec<LineSpec>,
        ders: Vec<DerSpec>,
        substation: &str,
        v_sub2: f64,
        s_base: f64,
        v_base: f64,
    ) -> Result<Self, FeederError> {
        if !(s_base > 0.0) {
            return Err(FeederError::NonPositiveBase {
                name: "s_base",
                value: s_base,
            });
        }
        if !(v_base > 0.0) {
            return Err(FeederError::NonPositiveBase {
                name: "v_base",
                value: v_base,
            });
        }
        if !(v_sub2 > 0.0) || !v_sub2.is_finite() {
            return Err(FeederError::InvalidBus {
                bus: substation.to_string(),
                reason: format!("substation squared voltage {v_sub2} must be positive"),
            });
        }
        let mut index = BTreeMap::new();
        for (i, bus) in buses.iter().enumerate() {
            check_bus(bus)?;
            if index.insert(bus.id.clone(), i).is_some() {
                return Err(FeederError::DuplicateBus(bus.id.clone()));
            }
        }
        let mut built = Vec::with_capacity(lines.len());
        for spec in &lines {
            let label = format!("{}->{}", spec.from, spec.to);
            let lookup = |id: &str| {
                index
                    .get(id)
                    .copied()
                    .ok_or_else(|| FeederError::DanglingEndpoint {
                        line: label.clone(),
                        bus: id.to_string(),
                    })
            };
            let from = lookup(&spec.from)?;
            let to = lookup(&spec.to)?;
            let line = Line {
                from,
                to,
                r: spec.r,
                x: spec.x,
                i_rated2: spec.i_rated2,
            };
            check_line(&label, &line)?;
            built.push(line);
        }
        let substation = *index
            .get(substation)
            .ok_or_else(|| FeederError::InvalidBus {
                bus: substation.to_string(),
                reason: "substation is not a declared bus".into(),
            })?;
        let mut with_der = vec![false; buses.len()];
        for der in &ders {
            der.validate()?;
            let b = *index
                .get(&der.bus)
                .ok_or_else(|| FeederError::UnknownDerBus(der.bus.clone()))?;
            if std::mem::replace(&mut with_der[b], true) {
                return Err(FeederError::ConflictingDers(der.bus.clone()));
            }
        }
        let mut feeder = Self {
            name: name.into(),
            buses,
            lines: built,
            ders,
            substation,
            v_sub2,
            s_base,
            v_base,
            index,
            tree: None,
        };
        if validate_radial(&feeder).is_ok() {
            feeder.tree = Some(build_tree(&feeder));
        }
        Ok(feeder)
    }

    pub fn bus_index(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn bus_id(&self, idx: usize) -> &str {
        &self.buses[idx].id
    }

    pub fn n_buses(&self) -> usize {
        self.buses.len()
    }

    pub fn n_lines(&self) -> usize {
        self.lines.len()
    }

    /// Radial structure; fails when [`validate_radial`] reports violations.
    pub fn tree(&self) -> Result<&Tree, FeederError> {
        self.tree.as_ref().ok_or_else(|| {
            let report = validate_radial(self);
            FeederError::NotRadial(report.to_string())
        })
    }

    /// Human label `from->to` for a line.
    pub fn line_label(&self, line: usize) -> String {
        let l = &self.lines[line];
        format!("{}->{}", self.bus_id(l.from), self.bus_id(l.to))
    }

    /// Converts a real/reactive power in kW/kvar to pu.
    pub fn kw_to_pu(&self, kw: f64) -> f64 {
        kw * 1e3 / self.s_base
    }

    pub fn pu_to_kw(&self, pu: f64) -> f64 {
        pu * self.s_base / 1e3
    }

    /// Same network with every bus id passed through `rename`. DER bus
    /// references follow.
    pub fn relabeled(&self, rename: impl Fn(&str) -> String) -> Result<Self, FeederError> {
        let buses = self
            .buses
            .iter()
            .map(|b| Bus {
                id: rename(&b.id),
                ..b.clone()
            })
            .collect::<Vec<_>>();
        let lines = self
            .lines
            .iter()
            .map(|l| LineSpec {
                from: buses[l.from].id.clone(),
                to: buses[l.to].id.clone(),
                r: l.r,
                x: l.x,
                i_rated2: l.i_rated2,
            })
            .collect();
        let ders = self
            .ders
            .iter()
            .map(|d| DerSpec {
                bus: rename(&d.bus),
                ..d.clone()
            })
            .collect();
        let sub = buses[self.substation].id.clone();
        Self::new(
            self.name.clone(),
            buses,
            lines,
            ders,
            &sub,
            self.v_sub2,
            self.s_base,
            self.v_base,
        )
    }

    /// Same network with its DER set replaced.
    pub fn with_ders(&self, ders: Vec<DerSpec>) -> Result<Self, FeederError> {
        let mut with_der = vec![false; self.buses.len()];
        for der in &ders {
            der.validate()?;
            let b = self
                .bus_index(&der.bus)
                .ok_or_else(|| FeederError::UnknownDerBus(der.bus.clone()))?;
            if std::mem::replace(&mut with_der[b], true) {
                return Err(FeederError::ConflictingDers(der.bus.clone()));
            }
        }
        Ok(Self {
            ders,
            ..self.clone()
        })
    }
}

fn check_bus(bus: &Bus) -> Result<(), FeederError> {
    let bad = |reason: String| FeederError::InvalidBus {
        bus: bus.id.clone(),
        reason,
    };
    for (name, v) in [
        ("p_load", bus.p_load),
        ("q_load", bus.q_load),
        ("q_cap", bus.q_cap),
        ("v_min2", bus.v_min2),
        ("v_max2", bus.v_max2),
    ] {
        if !v.is_finite() {
            return Err(bad(format!("{name} is not finite")));
        }
    }
    if !(bus.v_min2 < bus.v_max2) {
        return Err(bad(format!(
            "v_min2 {} must be below v_max2 {}",
            bus.v_min2, bus.v_max2
        )));
    }
    if bus.v_min2 <= 0.0 {
        return Err(bad("v_min2 must be positive".into()));
    }
    Ok(())
}

fn check_line(label: &str, line: &Line) -> Result<(), FeederError> {
    let bad = |reason: String| FeederError::InvalidLine {
        line: label.to_string(),
        reason,
    };
    if !(line.r.is_finite() && line.x.is_finite() && line.i_rated2.is_finite()) {
        return Err(bad("non-finite parameter".into()));
    }
    if line.r < 0.0 || line.x < 0.0 || line.r + line.x <= 0.0 {
        return Err(bad(format!(
            "impedance r={} x={} must be non-negative and non-zero",
            line.r, line.x
        )));
    }
    if line.i_rated2 <= 0.0 {
        return Err(bad(format!("ampacity {} must be positive", line.i_rated2)));
    }
    if line.from == line.to {
        return Err(bad("self loop".into()));
    }
    Ok(())
}

/// A topology problem found by [`validate_radial`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// `|lines| != |buses| - 1`.
    EdgeCount { lines: usize, buses: usize },
    /// Buses not reachable from the substation.
    Disconnected { unreached: Vec<String> },
    /// Bus fed by more than one line.
    MultipleParents { bus: String, lines: Vec<String> },
    /// A line points into the substation.
    RootHasParent { line: String },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::EdgeCount { lines, buses } => {
                write!(f, "|E| = {lines} but |N| - 1 = {}", buses.saturating_sub(1))
            }
            Violation::Disconnected { unreached } => {
                write!(f, "disconnected: unreachable buses {unreached:?}")
            }
            Violation::MultipleParents { bus, lines } => {
                write!(f, "bus {bus:?} fed by several lines {lines:?}")
            }
            Violation::RootHasParent { line } => {
                write!(f, "line {line} feeds the substation")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TopologyReport {
    pub violations: Vec<Violation>,
}

impl TopologyReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl std::fmt::Display for TopologyReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_ok() {
            return f.write_str("ok");
        }
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        f.write_str(&parts.join("; "))
    }
}

/// Checks that the lines form a tree directed away from the substation.
pub fn validate_radial(f: &Feeder) -> TopologyReport {
    let n = f.buses.len();
    let mut violations = Vec::new();
    if f.lines.len() + 1 != n {
        violations.push(Violation::EdgeCount {
            lines: f.lines.len(),
            buses: n,
        });
    }
    let mut incoming: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut outgoing: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (k, line) in f.lines.iter().enumerate() {
        incoming[line.to].push(k);
        outgoing[line.from].push(k);
    }
    for (b, lines) in incoming.iter().enumerate() {
        if b == f.substation {
            for &k in lines {
                violations.push(Violation::RootHasParent {
                    line: f.line_label(k),
                });
            }
        } else if lines.len() > 1 {
            violations.push(Violation::MultipleParents {
                bus: f.buses[b].id.clone(),
                lines: lines.iter().map(|&k| f.line_label(k)).collect(),
            });
        }
    }
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([f.substation]);
    seen[f.substation] = true;
    while let Some(b) = queue.pop_front() {
        for &k in &outgoing[b] {
            let c = f.lines[k].to;
            if !seen[c] {
                seen[c] = true;
                queue.push_back(c);
            }
        }
    }
    let mut unreached: Vec<String> = (0..n)
        .filter(|&b| !seen[b])
        .map(|b| f.buses[b].id.clone())
        .collect();
    if !unreached.is_empty() {
        unreached.sort_by(|a, b| compare_bus_ids(a, b));
        violations.push(Violation::Disconnected { unreached });
    }
    TopologyReport { violations }
}

#[derive(PartialEq, Eq)]
struct Ready<'a> {
    id: &'a str,
    bus: usize,
}

impl Ord for Ready<'_> {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap; smallest id pops first.
        compare_bus_ids(other.id, self.id)
    }
}

impl PartialOrd for Ready<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn build_tree(f: &Feeder) -> Tree {
    let n = f.buses.len();
    let mut parent = vec![None; n];
    let mut parent_line = vec![None; n];
    let mut child_lines: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (k, line) in f.lines.iter().enumerate() {
        parent[line.to] = Some(line.from);
        parent_line[line.to] = Some(k);
        child_lines[line.from].push(k);
    }
    for lines in &mut child_lines {
        lines.sort_by(|&a, &b| compare_bus_ids(f.bus_id(f.lines[a].to), f.bus_id(f.lines[b].to)));
    }
    let mut order = Vec::with_capacity(n);
    let mut heap = BinaryHeap::new();
    heap.push(Ready {
        id: f.bus_id(f.substation),
        bus: f.substation,
    });
    while let Some(Ready { bus, .. }) = heap.pop() {
        order.push(bus);
        for &k in &child_lines[bus] {
            let c = f.lines[k].to;
            heap.push(Ready {
                id: f.bus_id(c),
                bus: c,
            });
        }
    }
    let mut rank = vec![0; n];
    for (pos, &b) in order.iter().enumerate() {
        rank[b] = pos;
    }
    Tree {
        order,
        rank,
        parent,
        parent_line,
        child_lines,
    }
}

/// Root-first bus ordering. Among buses whose parent is already placed, the
/// smallest id goes next.
pub fn topological_order(f: &Feeder) -> Result<Vec<String>, FeederError> {
    let tree = f.tree()?;
    Ok(tree.order.iter().map(|&b| f.buses[b].id.clone()).collect())
}

// ---------------------------------------------------------------------------
// Document schema

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFeeder {
    meta: RawMeta,
    buses: Vec<RawBus>,
    #[serde(default)]
    lines: Vec<RawLine>,
    #[serde(default)]
    ders: Vec<RawDer>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMeta {
    #[serde(default)]
    name: Option<String>,
    #[serde(default)]
    description: Option<String>,
    /// VA.
    s_base: f64,
    /// V.
    v_base: f64,
    substation: String,
    /// Magnitude, pu.
    v_sub: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBus {
    id: String,
    p_kw: Option<f64>,
    q_kvar: Option<f64>,
    p_pu: Option<f64>,
    q_pu: Option<f64>,
    q_cap_kvar: Option<f64>,
    q_cap_pu: Option<f64>,
    v_min: Option<f64>,
    v_max: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLine {
    from: String,
    to: String,
    r_ohm: Option<f64>,
    x_ohm: Option<f64>,
    r_pu: Option<f64>,
    x_pu: Option<f64>,
    i_max_a: Option<f64>,
    i_max_pu: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDer {
    bus: String,
    mode: String,
    s_kva: Option<f64>,
    s_pu: Option<f64>,
    p_kw: Option<f64>,
    p_pu: Option<f64>,
    q_ref_pu: Option<f64>,
    v_ref: Option<f64>,
    k_q: Option<f64>,
    v_set: Option<f64>,
    penalty_m: Option<f64>,
}

fn pick(
    what: &str,
    physical: Option<f64>,
    per_unit: Option<f64>,
    to_pu: impl Fn(f64) -> f64,
) -> Result<Option<f64>, FeederError> {
    match (physical, per_unit) {
        (Some(_), Some(_)) => Err(FeederError::Schema(format!(
            "{what}: give either the physical or the per-unit field, not both"
        ))),
        (Some(v), None) => Ok(Some(to_pu(v))),
        (None, p) => Ok(p),
    }
}

/// Reads a feeder document (TOML). Physical quantities (kW, kvar, kVA, ohm,
/// A) are converted with the document's `s_base`/`v_base`; `*_pu` fields are
/// taken as is.
pub fn parse_feeder(source: &str) -> Result<Feeder, FeederError> {
    let raw: RawFeeder = toml::from_str(source).map_err(|e| FeederError::Schema(e.to_string()))?;
    let m = &raw.meta;
    if !(m.s_base > 0.0) {
        return Err(FeederError::NonPositiveBase {
            name: "s_base",
            value: m.s_base,
        });
    }
    if !(m.v_base > 0.0) {
        return Err(FeederError::NonPositiveBase {
            name: "v_base",
            value: m.v_base,
        });
    }
    let s_base = m.s_base;
    let z_base = m.v_base * m.v_base / s_base;
    let i_base = s_base / (3f64.sqrt() * m.v_base);
    let kw = |v: f64| v * 1e3 / s_base;
    let ohm = |v: f64| v / z_base;
    let amp = |v: f64| v / i_base;

    let mut buses = Vec::with_capacity(raw.buses.len());
    for b in &raw.buses {
        let ctx = format!("bus {}", b.id);
        let p = pick(&ctx, b.p_kw, b.p_pu, kw)?.unwrap_or(0.0);
        let q = pick(&ctx, b.q_kvar, b.q_pu, kw)?.unwrap_or(0.0);
        let cap = pick(&ctx, b.q_cap_kvar, b.q_cap_pu, kw)?.unwrap_or(0.0);
        let v_min = b.v_min.unwrap_or(DEFAULT_V_MIN);
        let v_max = b.v_max.unwrap_or(DEFAULT_V_MAX);
        buses.push(
            Bus::new(b.id.clone(), p, q)
                .with_cap(cap)
                .with_limits(v_min, v_max),
        );
    }
    let mut lines = Vec::with_capacity(raw.lines.len());
    for l in &raw.lines {
        let ctx = format!("line {}->{}", l.from, l.to);
        let r = pick(&ctx, l.r_ohm, l.r_pu, ohm)?
            .ok_or_else(|| FeederError::Schema(format!("{ctx}: missing resistance")))?;
        let x = pick(&ctx, l.x_ohm, l.x_pu, ohm)?
            .ok_or_else(|| FeederError::Schema(format!("{ctx}: missing reactance")))?;
        let i_rated2 = pick(&ctx, l.i_max_a, l.i_max_pu, amp)?
            .map(|i| i * i)
            .unwrap_or(UNLIMITED_I2);
        lines.push(LineSpec {
            from: l.from.clone(),
            to: l.to.clone(),
            r,
            x,
            i_rated2,
        });
    }
    let mut ders = Vec::with_capacity(raw.ders.len());
    for d in &raw.ders {
        ders.push(parse_der(d, &kw)?);
    }
    let name = m
        .name
        .clone()
        .or_else(|| m.description.clone())
        .unwrap_or_else(|| "feeder".into());
    Feeder::new(
        name,
        buses,
        lines,
        ders,
        &m.substation,
        m.v_sub * m.v_sub,
        s_base,
        m.v_base,
    )
}

fn parse_der(d: &RawDer, kw: &impl Fn(f64) -> f64) -> Result<DerSpec, FeederError> {
    let ctx = format!("DER at bus {}", d.bus);
    let s_rating = pick(&ctx, d.s_kva, d.s_pu, kw)?
        .ok_or_else(|| FeederError::Schema(format!("{ctx}: missing rating (s_kva or s_pu)")))?;
    let p = pick(&ctx, d.p_kw, d.p_pu, kw)?;
    let need = |name: &str, v: Option<f64>| {
        v.ok_or_else(|| FeederError::Schema(format!("{ctx}: mode {} needs {name}", d.mode)))
    };
    let mode = match d.mode.as_str() {
        "gfl-q" => DerMode::GridFollowingQ {
            p_measured: p.unwrap_or(0.0),
        },
        "gfl-p" => DerMode::GridFollowingP,
        "gsi" => DerMode::GridSupporting {
            p_measured: p.unwrap_or(0.0),
            curve: DroopCurve {
                q_ref: d.q_ref_pu.unwrap_or(0.0),
                v_ref: d.v_ref.unwrap_or(1.0),
                k_q: need("k_q", d.k_q)?,
            },
        },
        "gfi" => DerMode::GridForming {
            v_set2: need("v_set", d.v_set)?.powi(2),
        },
        "pv" => DerMode::PvTypeBus {
            v_set2: need("v_set", d.v_set)?.powi(2),
            p_set: p.unwrap_or(0.0),
            penalty_m: d.penalty_m.unwrap_or(DEFAULT_PENALTY_M),
        },
        other => {
            return Err(FeederError::Schema(format!(
                "{ctx}: unknown mode {other:?} (expected gfl-q, gfl-p, gsi, gfi, pv)"
            )))
        }
    };
    Ok(DerSpec {
        bus: d.bus.clone(),
        s_rating,
        mode,
    })
}
