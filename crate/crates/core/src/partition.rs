//! Area decomposition of a radial feeder.
//!
//! Every area is a connected subtree. A non-root area is entered through a
//! single boundary line `(j, k)`: `j` belongs to the upstream area, `k` is the
//! downstream area's root. Bus `k` is listed once, in the downstream area; the
//! [`BoundaryEdge`] records that the upstream area also sees it as a load
//! node at the end of line `(j, k)`.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::feeder::{compare_bus_ids, Feeder, FeederError};

#[derive(Debug, Error)]
pub enum PartitionError {
    #[error(transparent)]
    Feeder(#[from] FeederError),

    #[error("bus {0:?} has no area assignment")]
    Unassigned(String),

    #[error("assignment names unknown bus {0:?}")]
    UnknownBus(String),

    #[error("area {area:?} is not connected: entered at {roots:?}")]
    AreaNotConnected { area: String, roots: Vec<String> },

    #[error("area quotient graph is not a tree: {0}")]
    QuotientNotTree(String),
}

/// Line `(j, k)` crossing from an upstream area into a downstream one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryEdge {
    /// Line index.
    pub line: usize,
    /// Upstream end `j`.
    pub parent_bus: usize,
    /// Shared bus `k`: upstream load node and downstream root.
    pub shared_bus: usize,
    pub upstream_area: usize,
    pub downstream_area: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Area {
    pub id: String,
    pub root: usize,
    /// Buses owned by the area, root first, in feeder order.
    pub buses: Vec<usize>,
    /// Lines whose both ends are owned by the area.
    pub lines: Vec<usize>,
    /// Index into [`AreaPartition::edges`] of the line feeding this area.
    pub upstream_edge: Option<usize>,
    /// Indices into [`AreaPartition::edges`] of lines leaving this area.
    pub downstream_edges: Vec<usize>,
}

impl Area {
    /// Lines the area's sub-problem models: its own lines plus the boundary
    /// lines to its downstream areas.
    pub fn model_lines(&self, partition: &AreaPartition) -> Vec<usize> {
        let mut lines = self.lines.clone();
        lines.extend(self.downstream_edges.iter().map(|&e| partition.edges[e].line));
        lines
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AreaPartition {
    /// Areas ordered by the feeder position of their root; the substation's
    /// area comes first.
    pub areas: Vec<Area>,
    pub edges: Vec<BoundaryEdge>,
    area_of: Vec<usize>,
}

impl AreaPartition {
    pub fn area_of(&self, bus: usize) -> usize {
        self.area_of[bus]
    }

    pub fn len(&self) -> usize {
        self.areas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.areas.is_empty()
    }

    /// Edge entering `area`, if any.
    pub fn upstream_edge(&self, area: usize) -> Option<&BoundaryEdge> {
        self.areas[area].upstream_edge.map(|e| &self.edges[e])
    }

    /// Union of the area bus sets, sorted.
    pub fn merged_buses(&self) -> Vec<usize> {
        let mut all: Vec<usize> = self.areas.iter().flat_map(|a| a.buses.iter().copied()).collect();
        all.sort_unstable();
        all
    }

    /// Union of area lines and boundary lines, sorted.
    pub fn merged_lines(&self) -> Vec<usize> {
        let mut all: Vec<usize> = self
            .areas
            .iter()
            .flat_map(|a| a.lines.iter().copied())
            .chain(self.edges.iter().map(|e| e.line))
            .collect();
        all.sort_unstable();
        all
    }

    /// Area adjacency `(upstream, downstream)` pairs.
    pub fn quotient_edges(&self) -> Vec<(usize, usize)> {
        self.edges
            .iter()
            .map(|e| (e.upstream_area, e.downstream_area))
            .collect()
    }
}

/// Splits the feeder according to `assignment` (bus id -> area id).
pub fn partition(
    f: &Feeder,
    assignment: &BTreeMap<String, String>,
) -> Result<AreaPartition, PartitionError> {
    let tree = f.tree()?;
    for bus in assignment.keys() {
        if f.bus_index(bus).is_none() {
            return Err(PartitionError::UnknownBus(bus.clone()));
        }
    }
    let mut label = Vec::with_capacity(f.n_buses());
    for bus in &f.buses {
        label.push(
            assignment
                .get(&bus.id)
                .ok_or_else(|| PartitionError::Unassigned(bus.id.clone()))?
                .as_str(),
        );
    }

    // An area is connected iff exactly one of its buses has its parent
    // outside the area (or no parent).
    let mut entries: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for &b in &tree.order {
        let entered = match tree.parent[b] {
            None => true,
            Some(p) => label[p] != label[b],
        };
        if entered {
            entries.entry(label[b]).or_default().push(b);
        }
    }
    for (area, roots) in &entries {
        if roots.len() != 1 {
            let mut ids: Vec<String> = roots.iter().map(|&b| f.bus_id(b).to_string()).collect();
            ids.sort_by(|a, b| compare_bus_ids(a, b));
            return Err(PartitionError::AreaNotConnected {
                area: area.to_string(),
                roots: ids,
            });
        }
    }

    let mut roots: Vec<(usize, &str)> = entries.iter().map(|(a, r)| (r[0], *a)).collect();
    roots.sort_by_key(|&(root, _)| tree.rank[root]);
    let index: BTreeMap<&str, usize> = roots.iter().enumerate().map(|(i, (_, a))| (*a, i)).collect();
    let area_of: Vec<usize> = label.iter().map(|a| index[a]).collect();

    let mut areas: Vec<Area> = roots
        .iter()
        .map(|&(root, id)| Area {
            id: id.to_string(),
            root,
            buses: Vec::new(),
            lines: Vec::new(),
            upstream_edge: None,
            downstream_edges: Vec::new(),
        })
        .collect();
    for &b in &tree.order {
        areas[area_of[b]].buses.push(b);
    }
    let mut edges = Vec::new();
    for &b in &tree.order {
        let Some(line) = tree.parent_line[b] else {
            continue;
        };
        let p = tree.parent[b].expect("parent line implies parent");
        if area_of[p] == area_of[b] {
            areas[area_of[b]].lines.push(line);
        } else {
            let e = edges.len();
            edges.push(BoundaryEdge {
                line,
                parent_bus: p,
                shared_bus: b,
                upstream_area: area_of[p],
                downstream_area: area_of[b],
            });
            areas[area_of[p]].downstream_edges.push(e);
            areas[area_of[b]].upstream_edge = Some(e);
        }
    }

    check_quotient_tree(&areas, &edges)?;
    Ok(AreaPartition {
        areas,
        edges,
        area_of,
    })
}

fn check_quotient_tree(areas: &[Area], edges: &[BoundaryEdge]) -> Result<(), PartitionError> {
    if edges.len() + 1 != areas.len() {
        return Err(PartitionError::QuotientNotTree(format!(
            "{} areas joined by {} boundary lines",
            areas.len(),
            edges.len()
        )));
    }
    let mut reached = BTreeSet::from([0usize]);
    let mut frontier = vec![0usize];
    while let Some(a) = frontier.pop() {
        for &e in &areas[a].downstream_edges {
            let d = edges[e].downstream_area;
            if !reached.insert(d) {
                return Err(PartitionError::QuotientNotTree(format!(
                    "area {} reached twice",
                    areas[d].id
                )));
            }
            frontier.push(d);
        }
    }
    if reached.len() != areas.len() {
        return Err(PartitionError::QuotientNotTree(
            "areas not reachable from the substation area".into(),
        ));
    }
    Ok(())
}

/// Every bus in one area named after the substation.
pub fn single_area(f: &Feeder) -> Result<AreaPartition, PartitionError> {
    let id = f.bus_id(f.substation).to_string();
    let assignment = f.buses.iter().map(|b| (b.id.clone(), id.clone())).collect();
    partition(f, &assignment)
}

/// Areas rooted at the substation and at each bus in `roots`; every bus joins
/// the area of its nearest root at or above it. Area ids are the root ids.
pub fn partition_by_roots(f: &Feeder, roots: &[String]) -> Result<AreaPartition, PartitionError> {
    let tree = f.tree()?;
    let mut is_root = vec![false; f.n_buses()];
    is_root[f.substation] = true;
    for r in roots {
        let b = f
            .bus_index(r)
            .ok_or_else(|| PartitionError::UnknownBus(r.clone()))?;
        is_root[b] = true;
    }
    let mut owner = vec![0usize; f.n_buses()];
    for &b in &tree.order {
        owner[b] = match tree.parent[b] {
            _ if is_root[b] => b,
            Some(p) => owner[p],
            None => b,
        };
    }
    let assignment = f
        .buses
        .iter()
        .enumerate()
        .map(|(b, bus)| (bus.id.clone(), f.bus_id(owner[b]).to_string()))
        .collect();
    partition(f, &assignment)
}
