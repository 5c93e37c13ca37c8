use std::collections::{BTreeMap, BTreeSet};

use super::{check_insert, tree_rounds, HealError, HealerKind, HealerOptions, HealerReport, Healer};
use crate::graph::{Graph, NodeId};
use crate::haft::{
    assign_simulators, build_haft, check_assignment, merge_trees, real_endpoint, remove_from_trees,
    to_virtual_edges, EdgeKey, Haft, LeafSlot, Tree, VirtualTree,
};
use crate::virtual_graph::{vedge, VEdge, VNodeId, Vid, VidAllocator, VirtualGraph, Violation};

/// How a reconstruction tree is repaired after a deletion.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum RepairMode {
    /// Keep intact complete subtrees and merge them by binary addition.
    Merge,
    /// Discard the touched trees and build one from scratch.
    Rebuild,
}

#[derive(Clone, Debug, Default)]
struct Cluster {
    members: BTreeSet<NodeId>,
    haft: Option<Haft>,
    footprint: VirtualTree,
}

/// Healer backed by one reconstruction tree per connected region of deleted
/// nodes in the shadow graph. Leaves are (live endpoint, orphaned edge)
/// pairs; internal nodes are virtual and simulated by live leaves.
#[derive(Clone, Debug)]
pub struct ReconstructionHealer {
    mode: RepairMode,
    options: HealerOptions,
    shadow: Graph,
    deleted: BTreeSet<NodeId>,
    cluster_of: BTreeMap<NodeId, u64>,
    clusters: BTreeMap<u64, Cluster>,
    next_cluster: u64,
    vg: VirtualGraph,
    edge_refs: BTreeMap<VEdge, u32>,
    vids: VidAllocator,
}

fn real(p: NodeId) -> VNodeId {
    VNodeId::Real(p)
}

/// Virtual footprint of `haft`. Two leaves are joined directly; larger trees
/// get one virtual node per internal node.
fn materialize(haft: &Haft) -> Result<VirtualTree, HealError> {
    let slots = haft.slots();
    match slots.as_slice() {
        [_] => Ok(VirtualTree::default()),
        [a, b] => {
            let mut t = VirtualTree::default();
            if a.endpoint != b.endpoint {
                t.edges.insert(vedge(a.endpoint, b.endpoint));
            }
            Ok(t)
        }
        _ => {
            let s = assign_simulators(haft, real_endpoint).map_err(|e| HealError::Internal(e.to_string()))?;
            Ok(to_virtual_edges(haft, &s))
        }
    }
}

impl ReconstructionHealer {
    pub fn new(mode: RepairMode, options: HealerOptions) -> Self {
        ReconstructionHealer {
            mode,
            options,
            shadow: Graph::new(),
            deleted: BTreeSet::new(),
            cluster_of: BTreeMap::new(),
            clusters: BTreeMap::new(),
            next_cluster: 0,
            vg: VirtualGraph::new(),
            edge_refs: BTreeMap::new(),
            vids: VidAllocator::new(),
        }
    }

    pub fn mode(&self) -> RepairMode {
        self.mode
    }

    /// All nodes ever created, with original and insertion edges.
    pub fn shadow(&self) -> &Graph {
        &self.shadow
    }

    pub fn is_live(&self, p: NodeId) -> bool {
        self.shadow.contains(p) && !self.deleted.contains(&p)
    }

    /// Reconstruction trees by cluster id.
    pub fn hafts(&self) -> impl Iterator<Item = (u64, &Haft)> + '_ {
        self.clusters
            .iter()
            .filter_map(|(&id, c)| c.haft.as_ref().map(|h| (id, h)))
    }

    /// Deleted nodes grouped by cluster id.
    pub fn clusters(&self) -> impl Iterator<Item = (u64, &BTreeSet<NodeId>)> + '_ {
        self.clusters.iter().map(|(&id, c)| (id, &c.members))
    }

    fn incref(&mut self, e: VEdge) -> Result<(), HealError> {
        let n = self.edge_refs.entry(e).or_insert(0);
        *n += 1;
        if *n == 1 {
            self.vg
                .add_edge(e.0, e.1)
                .map_err(|err| HealError::Internal(err.to_string()))?;
        }
        Ok(())
    }

    fn decref(&mut self, e: VEdge) -> Result<(), HealError> {
        let n = self
            .edge_refs
            .get_mut(&e)
            .ok_or_else(|| HealError::Internal(format!("edge {}-{} not referenced", e.0, e.1)))?;
        *n -= 1;
        if *n == 0 {
            self.edge_refs.remove(&e);
            self.vg.remove_edge(e.0, e.1);
        }
        Ok(())
    }

    fn dedup(&self, pieces: Vec<Tree>) -> Vec<Tree> {
        let mut keep: BTreeMap<VNodeId, LeafSlot> = BTreeMap::new();
        for slot in pieces.iter().flat_map(Tree::slots) {
            keep.entry(slot.endpoint)
                .and_modify(|k| *k = (*k).min(slot))
                .or_insert(slot);
        }
        remove_from_trees(pieces, |s| keep[&s.endpoint] != *s).pieces
    }

    fn repair(&mut self, old: Vec<Haft>, v: NodeId, fresh: Vec<LeafSlot>) -> Result<Option<Haft>, HealError> {
        let gone = real(v);
        match self.mode {
            RepairMode::Merge => {
                let mut pieces = Vec::new();
                for h in old {
                    pieces.extend(h.remove_slots(|s| s.endpoint == gone).pieces);
                }
                pieces.extend(fresh.into_iter().map(Tree::Leaf));
                if self.options.dedup_slots {
                    pieces = self.dedup(pieces);
                }
                Ok(merge_trees(pieces, &mut self.vids))
            }
            RepairMode::Rebuild => {
                let mut slots: Vec<LeafSlot> = old
                    .iter()
                    .flat_map(Haft::slots)
                    .filter(|s| s.endpoint != gone)
                    .chain(fresh)
                    .collect();
                slots.sort();
                if self.options.dedup_slots {
                    slots.dedup_by_key(|s| s.endpoint);
                }
                if slots.is_empty() {
                    return Ok(None);
                }
                build_haft(slots, &mut self.vids)
                    .map(Some)
                    .map_err(|e| HealError::Internal(e.to_string()))
            }
        }
    }
}

impl Healer for ReconstructionHealer {
    fn kind(&self) -> HealerKind {
        match self.mode {
            RepairMode::Merge => HealerKind::Haft,
            RepairMode::Rebuild => HealerKind::Rebuild,
        }
    }

    fn preprocess(&mut self, initial: &Graph) -> u64 {
        *self = ReconstructionHealer::new(self.mode, self.options);
        self.shadow = initial.clone();
        self.vg = VirtualGraph::from_graph(initial);
        for (a, b) in initial.edges() {
            self.edge_refs.insert(vedge(real(a), real(b)), 1);
        }
        2 * initial.edge_count() as u64
    }

    fn on_insert(&mut self, v: NodeId, neighbors: &BTreeSet<NodeId>) -> Result<HealerReport, HealError> {
        check_insert(|x| self.is_live(x), |x| self.shadow.contains(x), v, neighbors)?;
        self.shadow.add_node(v).map_err(|e| HealError::Internal(e.to_string()))?;
        self.vg
            .add_real_node(v)
            .map_err(|e| HealError::Internal(e.to_string()))?;
        for &u in neighbors {
            self.shadow.add_edge(v, u).map_err(|e| HealError::Internal(e.to_string()))?;
            self.incref(vedge(real(v), real(u)))?;
        }
        Ok(HealerReport {
            messages: neighbors.len() as u64,
            rounds: 1,
            touched: neighbors.clone(),
            max_hops: 1,
            ..HealerReport::default()
        })
    }

    fn on_delete(&mut self, v: NodeId) -> Result<HealerReport, HealError> {
        if !self.is_live(v) {
            return Err(HealError::UnknownNode(v));
        }
        let before = self.vg.de_simulate();
        let informed = before.neighbors(v).cloned().unwrap_or_default();
        let shadow_nbrs = self.shadow.neighbors(v).cloned().unwrap_or_default();
        let adjacent: BTreeSet<u64> = shadow_nbrs
            .iter()
            .filter_map(|u| self.cluster_of.get(u))
            .copied()
            .collect();
        let direct: Vec<NodeId> = shadow_nbrs
            .iter()
            .copied()
            .filter(|u| !self.deleted.contains(u))
            .collect();

        // Tear down the footprints of every cluster that v joins.
        let mut members = BTreeSet::from([v]);
        let mut old_hafts = Vec::new();
        let mut old_virtuals: BTreeMap<Vid, NodeId> = BTreeMap::new();
        let mut delta: BTreeMap<VEdge, i64> = BTreeMap::new();
        for cid in adjacent {
            let c = self.clusters.remove(&cid).expect("indexed cluster");
            for &e in &c.footprint.edges {
                self.decref(e)?;
                *delta.entry(e).or_default() -= 1;
            }
            for &vid in c.footprint.nodes.keys() {
                self.vg
                    .remove_virtual_node(vid)
                    .map_err(|e| HealError::Internal(e.to_string()))?;
            }
            old_virtuals.extend(c.footprint.nodes);
            members.extend(c.members);
            old_hafts.extend(c.haft);
        }
        for &u in &direct {
            self.decref(vedge(real(v), real(u)))?;
        }
        let orphaned = self
            .vg
            .remove_processor(v)
            .map_err(|e| HealError::Internal(e.to_string()))?;
        if orphaned.values().any(|s| !s.is_empty()) {
            return Err(HealError::Internal(format!("{v} kept edges outside any footprint")));
        }
        self.deleted.insert(v);

        let fresh: Vec<LeafSlot> = direct
            .iter()
            .map(|&u| LeafSlot::real(u, EdgeKey::new(u, v)))
            .collect();
        let haft = self.repair(old_hafts, v, fresh)?;
        let footprint = match &haft {
            Some(h) => materialize(h)?,
            None => VirtualTree::default(),
        };
        for (&vid, &p) in &footprint.nodes {
            self.vg
                .insert_virtual_node(vid, p)
                .map_err(|e| HealError::Internal(e.to_string()))?;
        }
        for &e in &footprint.edges {
            self.incref(e)?;
            *delta.entry(e).or_default() += 1;
        }

        let id = self.next_cluster;
        self.next_cluster += 1;
        for &m in &members {
            self.cluster_of.insert(m, id);
        }
        let created = footprint
            .nodes
            .keys()
            .filter(|vid| !old_virtuals.contains_key(vid))
            .count();
        let mut simulators = old_virtuals;
        simulators.extend(footprint.nodes.iter().map(|(&k, &p)| (k, p)));
        self.clusters.insert(
            id,
            Cluster {
                members,
                haft,
                footprint,
            },
        );

        let after = self.vg.de_simulate();
        let (edges_added, edges_dropped) = HealerReport::edge_changes(&before, &after, v);
        let resolve = |x: VNodeId| match x {
            VNodeId::Real(p) => Some(p),
            VNodeId::Virtual(vid) => simulators.get(&vid).copied(),
        };
        let mut changed = 0u64;
        let mut touched = informed.clone();
        for (&(a, b), &d) in &delta {
            if d != 0 {
                changed += d.unsigned_abs();
                touched.extend(resolve(a));
                touched.extend(resolve(b));
            }
        }
        for &(a, b) in edges_added.iter().chain(&edges_dropped) {
            touched.insert(a);
            touched.insert(b);
        }
        touched.remove(&v);
        let mut report = HealerReport {
            edges_added,
            edges_dropped,
            virtual_nodes_created: created,
            messages: informed.len() as u64 + 2 * changed,
            rounds: tree_rounds(touched.len()),
            touched,
            max_hops: 0,
        };
        report.measure_hops(&before, v);
        Ok(report)
    }

    fn live_graph(&self) -> Graph {
        self.vg.de_simulate()
    }

    fn virtual_graph(&self) -> Option<&VirtualGraph> {
        Some(&self.vg)
    }

    fn audit(&self) -> Vec<Violation> {
        let mut out = self.vg.audit();
        let live: BTreeSet<NodeId> = self
            .shadow
            .nodes()
            .filter(|p| !self.deleted.contains(p))
            .collect();
        if &live != self.vg.reals() {
            out.push(Violation::new("live-set", "virtual graph processors differ from live shadow nodes"));
        }

        let mut expected_refs: BTreeMap<VEdge, u32> = BTreeMap::new();
        for (a, b) in self.shadow.edges() {
            if live.contains(&a) && live.contains(&b) {
                *expected_refs.entry(vedge(real(a), real(b))).or_default() += 1;
            }
        }
        let mut expected_virtuals: BTreeMap<Vid, NodeId> = BTreeMap::new();
        for (id, c) in &self.clusters {
            for m in &c.members {
                if !self.deleted.contains(m) {
                    out.push(Violation::new("cluster-member", format!("cluster {id} holds live node {m}")));
                }
                if self.cluster_of.get(m) != Some(id) {
                    out.push(Violation::new("cluster-index", format!("{m} not indexed to cluster {id}")));
                }
                for u in self.shadow.neighbors(*m).into_iter().flatten() {
                    if self.deleted.contains(u) && !c.members.contains(u) {
                        out.push(Violation::new(
                            "cluster-split",
                            format!("deleted neighbors {m} and {u} in different clusters"),
                        ));
                    }
                }
            }
            let boundary: BTreeSet<LeafSlot> = c
                .members
                .iter()
                .flat_map(|&m| {
                    self.shadow
                        .neighbors(m)
                        .into_iter()
                        .flatten()
                        .filter(|u| live.contains(u))
                        .map(move |&u| LeafSlot::real(u, EdgeKey::new(u, m)))
                })
                .collect();
            let slots: BTreeSet<LeafSlot> = c.haft.iter().flat_map(Haft::slots).collect();
            let endpoints = |s: &BTreeSet<LeafSlot>| s.iter().map(|x| x.endpoint).collect::<BTreeSet<_>>();
            let slots_ok = if self.options.dedup_slots {
                slots.is_subset(&boundary)
                    && endpoints(&slots) == endpoints(&boundary)
                    && endpoints(&slots).len() == slots.len()
            } else {
                slots == boundary
            };
            if !slots_ok {
                out.push(Violation::new(
                    "cluster-boundary",
                    format!("cluster {id} leaves do not match its live boundary"),
                ));
            }
            let Some(h) = &c.haft else {
                if !c.footprint.nodes.is_empty() || !c.footprint.edges.is_empty() {
                    out.push(Violation::new("footprint", format!("treeless cluster {id} has a footprint")));
                }
                continue;
            };
            out.extend(h.check_shape());
            if h.leaf_count() >= 3 {
                match assign_simulators(h, real_endpoint) {
                    Ok(s) => out.extend(check_assignment(h, &s)),
                    Err(e) => out.push(Violation::new("sim-unassignable", e.to_string())),
                }
            }
            match materialize(h) {
                Ok(f) if f == c.footprint => {}
                _ => out.push(Violation::new("footprint", format!("cluster {id} footprint is stale"))),
            }
            for (&vid, &p) in &c.footprint.nodes {
                if self.vg.simulator(vid) != Some(p) {
                    out.push(Violation::new("footprint", format!("virtual {vid} not simulated by {p}")));
                }
                if expected_virtuals.insert(vid, p).is_some() {
                    out.push(Violation::new("footprint", format!("virtual {vid} shared by two clusters")));
                }
            }
            for &e in &c.footprint.edges {
                *expected_refs.entry(e).or_default() += 1;
            }
        }
        for p in &self.deleted {
            if !self.cluster_of.contains_key(p) {
                out.push(Violation::new("cluster-index", format!("deleted {p} belongs to no cluster")));
            }
        }
        let actual_virtuals: BTreeMap<Vid, NodeId> = self.vg.virtuals().collect();
        if actual_virtuals != expected_virtuals {
            out.push(Violation::new("footprint", "virtual nodes differ from cluster footprints"));
        }
        if expected_refs != self.edge_refs {
            out.push(Violation::new("edge-refs", "edge reference counts differ from footprints"));
        }
        let vg_edges: BTreeSet<VEdge> = self.vg.edges().collect();
        if vg_edges != self.edge_refs.keys().copied().collect() {
            out.push(Violation::new("edge-refs", "virtual graph edges differ from referenced edges"));
        }
        out
    }

    fn tree_sizes(&self) -> BTreeMap<u64, usize> {
        self.hafts().map(|(id, h)| (id, h.leaf_count())).collect()
    }
}
