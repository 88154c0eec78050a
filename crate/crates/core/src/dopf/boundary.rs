//! Values exchanged across area boundaries.

use serde::{Deserialize, Serialize};

use crate::der::DerMode;
use crate::feeder::Feeder;
use crate::partition::AreaPartition;

/// State of one boundary line `(j, k)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeValues {
    /// Squared voltage the downstream area pins its root to.
    pub v0_in: f64,
    /// Demand the upstream area places at `k`.
    pub p_out: f64,
    pub q_out: f64,
    /// Squared voltage at `k` computed by the upstream area.
    pub v_computed: f64,
    /// Root inflow computed by the downstream area.
    pub p_computed: f64,
    pub q_computed: f64,
}

impl EdgeValues {
    /// Largest disagreement between the two sides.
    pub fn mismatch(&self) -> f64 {
        (self.v_computed - self.v0_in)
            .abs()
            .max((self.p_out - self.p_computed).abs())
            .max((self.q_out - self.q_computed).abs())
    }
}

/// Boundary values indexed like [`AreaPartition::edges`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryState {
    pub edges: Vec<EdgeValues>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Payload {
    Voltage { v2: f64 },
    Demand { p: f64, q: f64 },
}

/// One value sent from an area to a neighbour after a macro-iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryMessage {
    pub from_area: String,
    pub to_area: String,
    pub iteration: usize,
    pub shared_bus: String,
    #[serde(flatten)]
    pub payload: Payload,
}

/// Flat voltages and lossless subtree demand behind every boundary line.
/// DER real output counts when it is fixed data (measured or set).
pub fn init_boundary(f: &Feeder, part: &AreaPartition) -> BoundaryState {
    let tree = f.tree().expect("partitioned feeders are radial");
    let mut net_p: Vec<f64> = f.buses.iter().map(|b| b.p_load).collect();
    let mut net_q: Vec<f64> = f.buses.iter().map(|b| b.q_load - b.q_cap).collect();
    for der in &f.ders {
        let b = f.bus_index(&der.bus).expect("validated");
        if let Some(p) = der.mode.fixed_p() {
            net_p[b] -= p;
        }
        if let DerMode::GridSupporting { curve, .. } = der.mode {
            net_q[b] -= curve.q_linearized(f.v_sub2);
        }
    }
    for &j in tree.order.iter().rev() {
        if let Some(parent) = tree.parent[j] {
            net_p[parent] += net_p[j];
            net_q[parent] += net_q[j];
        }
    }
    let edges = part
        .edges
        .iter()
        .map(|e| {
            let (p, q) = (net_p[e.shared_bus], net_q[e.shared_bus]);
            EdgeValues {
                v0_in: f.v_sub2,
                p_out: p,
                q_out: q,
                v_computed: f.v_sub2,
                p_computed: p,
                q_computed: q,
            }
        })
        .collect();
    BoundaryState { edges }
}

/// Max over boundaries of the voltage and demand disagreements; zero when
/// there are no boundaries.
pub fn consensus_residual(bs: &BoundaryState) -> f64 {
    bs.edges.iter().map(EdgeValues::mismatch).fold(0.0, f64::max)
}
