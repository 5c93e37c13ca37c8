//! Healing algorithms for the recovery phase.
//!
//! Every healer sees the same protocol: one [`Healer::preprocess`] call over
//! `G_0`, then one [`Healer::on_insert`] or [`Healer::on_delete`] call per
//! timestep. Each call returns a [`HealerReport`] with the edge changes and
//! their communication cost.

mod baseline;
mod reconstruction;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::graph::{Graph, NodeId};
use crate::haft::ceil_log2;
use crate::virtual_graph::{VirtualGraph, Violation};

pub use baseline::BaselineHealer;
pub use reconstruction::{RepairMode, ReconstructionHealer};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HealError {
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("node {0} already exists")]
    DuplicateNode(NodeId),
    #[error("insert of {node} names unknown neighbor {neighbor}")]
    UnknownNeighbor { node: NodeId, neighbor: NodeId },
    #[error("insert of {0} has no neighbors")]
    EmptyNeighbors(NodeId),
    #[error("internal healer failure: {0}")]
    Internal(String),
}

/// Cost and effect of one recovery phase.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct HealerReport {
    pub edges_added: BTreeSet<(NodeId, NodeId)>,
    pub edges_dropped: BTreeSet<(NodeId, NodeId)>,
    pub virtual_nodes_created: usize,
    pub messages: u64,
    pub rounds: u32,
    pub touched: BTreeSet<NodeId>,
    /// Farthest touched processor from the deleted node, measured in the
    /// pre-deletion graph.
    pub max_hops: u32,
}

impl HealerReport {
    /// Diffs the healed graph against the pre-deletion graph minus `v`.
    fn edge_changes(before: &Graph, after: &Graph, v: NodeId) -> (BTreeSet<(NodeId, NodeId)>, BTreeSet<(NodeId, NodeId)>) {
        let old: BTreeSet<_> = before.edges().filter(|&(a, b)| a != v && b != v).collect();
        let new = after.edge_set();
        let added = new.difference(&old).copied().collect();
        let dropped = old.difference(&new).copied().collect();
        (added, dropped)
    }

    /// Fills `max_hops` from breadth-first distances around `v` in `before`.
    fn measure_hops(&mut self, before: &Graph, v: NodeId) {
        let dist = before.bfs(v).unwrap_or_default();
        self.max_hops = self
            .touched
            .iter()
            .filter_map(|p| dist.get(p))
            .copied()
            .max()
            .unwrap_or(0);
    }
}

/// Rounds for tree-local parallel propagation over `touched` processors.
pub fn tree_rounds(touched: usize) -> u32 {
    if touched == 0 {
        0
    } else {
        1 + ceil_log2(touched)
    }
}

/// Healer selection by name.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum HealerKind {
    Null,
    Star,
    Ring,
    Rebuild,
    Haft,
}

impl HealerKind {
    pub const ALL: [HealerKind; 5] = [
        HealerKind::Null,
        HealerKind::Star,
        HealerKind::Ring,
        HealerKind::Rebuild,
        HealerKind::Haft,
    ];

    pub fn name(self) -> &'static str {
        match self {
            HealerKind::Null => "null",
            HealerKind::Star => "star",
            HealerKind::Ring => "ring",
            HealerKind::Rebuild => "rebuild",
            HealerKind::Haft => "haft",
        }
    }

    /// A fresh healer of this kind, preprocessed over `initial`.
    pub fn preprocess(self, initial: &Graph, options: HealerOptions) -> (Box<dyn Healer>, u64) {
        let mut h: Box<dyn Healer> = match self {
            HealerKind::Null | HealerKind::Star | HealerKind::Ring => {
                Box::new(BaselineHealer::new(self))
            }
            HealerKind::Rebuild => Box::new(ReconstructionHealer::new(RepairMode::Rebuild, options)),
            HealerKind::Haft => Box::new(ReconstructionHealer::new(RepairMode::Merge, options)),
        };
        let setup = h.preprocess(initial);
        (h, setup)
    }
}

impl fmt::Display for HealerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown healer {0:?} (expected null, star, ring, rebuild or haft)")]
pub struct UnknownHealer(pub String);

impl FromStr for HealerKind {
    type Err = UnknownHealer;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        HealerKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| UnknownHealer(s.to_string()))
    }
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq)]
pub struct HealerOptions {
    /// Keep one leaf slot per processor per reconstruction tree instead of
    /// one per orphaned edge.
    pub dedup_slots: bool,
}

pub trait Healer: Send {
    fn kind(&self) -> HealerKind;

    /// Initializes state over `G_0`; returns the setup message count.
    fn preprocess(&mut self, initial: &Graph) -> u64;

    fn on_insert(&mut self, v: NodeId, neighbors: &BTreeSet<NodeId>) -> Result<HealerReport, HealError>;

    fn on_delete(&mut self, v: NodeId) -> Result<HealerReport, HealError>;

    /// The real network `G_t`.
    fn live_graph(&self) -> Graph;

    /// The virtual graph whose image is [`Healer::live_graph`], if the
    /// healer keeps one.
    fn virtual_graph(&self) -> Option<&VirtualGraph> {
        None
    }

    fn virtual_count(&self) -> usize {
        self.virtual_graph().map_or(0, VirtualGraph::virtual_count)
    }

    /// Internal consistency findings; empty when healthy.
    fn audit(&self) -> Vec<Violation>;

    /// Snapshot of reconstruction-tree sizes, keyed by tree id.
    fn tree_sizes(&self) -> BTreeMap<u64, usize> {
        BTreeMap::new()
    }
}

fn check_insert(
    is_live: impl Fn(NodeId) -> bool,
    ever: impl Fn(NodeId) -> bool,
    v: NodeId,
    neighbors: &BTreeSet<NodeId>,
) -> Result<(), HealError> {
    if ever(v) {
        return Err(HealError::DuplicateNode(v));
    }
    if neighbors.is_empty() {
        return Err(HealError::EmptyNeighbors(v));
    }
    if let Some(&u) = neighbors.iter().find(|&&u| !is_live(u)) {
        return Err(HealError::UnknownNeighbor { node: v, neighbor: u });
    }
    Ok(())
}
