//! The adversary: scripted traces and online strategies that see the whole
//! topology before choosing the next event.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng as _, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Graph, NodeId};
use crate::virtual_graph::Violation;
use crate::Rng;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Event {
    Insert { node: NodeId, neighbors: BTreeSet<NodeId> },
    Delete { node: NodeId },
}

impl Event {
    pub fn node(&self) -> NodeId {
        match self {
            Event::Insert { node, .. } | Event::Delete { node } => *node,
        }
    }

    pub fn op(&self) -> &'static str {
        match self {
            Event::Insert { .. } => "insert",
            Event::Delete { .. } => "delete",
        }
    }

    pub fn is_delete(&self) -> bool {
        matches!(self, Event::Delete { .. })
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Event::Delete { node } => write!(f, "delete {node}"),
            Event::Insert { node, neighbors } => {
                write!(f, "insert {node} [")?;
                for (i, u) in neighbors.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{u}")?;
                }
                f.write_str("]")
            }
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum StrategyKind {
    Scripted,
    Random,
    MaxDegree,
    Articulation,
    /// Deletes a live neighbor of the previous deletion when one exists.
    Clustered,
    /// Picks one of the online deletion rules uniformly per deletion.
    Mixed,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 6] = [
        StrategyKind::Scripted,
        StrategyKind::Random,
        StrategyKind::MaxDegree,
        StrategyKind::Articulation,
        StrategyKind::Clustered,
        StrategyKind::Mixed,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Scripted => "scripted",
            StrategyKind::Random => "random",
            StrategyKind::MaxDegree => "max-degree",
            StrategyKind::Articulation => "articulation",
            StrategyKind::Clustered => "clustered",
            StrategyKind::Mixed => "mixed",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown strategy {0:?}")]
pub struct UnknownStrategy(pub String);

impl FromStr for StrategyKind {
    type Err = UnknownStrategy;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| UnknownStrategy(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StrategyError {
    #[error("p_delete must lie in [0, 1], got {0}")]
    PDelete(f64),
    #[error("insert_degree must be at least 1")]
    InsertDegree,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StrategySpec {
    pub kind: StrategyKind,
    /// Probability that an online step is a deletion.
    pub p_delete: f64,
    pub insert_degree: usize,
    pub seed: u64,
}

impl StrategySpec {
    pub fn new(kind: StrategyKind, seed: u64) -> Self {
        StrategySpec {
            kind,
            p_delete: 1.0,
            insert_degree: 2,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), StrategyError> {
        if !(0.0..=1.0).contains(&self.p_delete) {
            return Err(StrategyError::PDelete(self.p_delete));
        }
        if self.insert_degree == 0 {
            return Err(StrategyError::InsertDegree);
        }
        Ok(())
    }
}

/// Event source for one run. Online strategies keep only their generator
/// and the previous deletion; everything else is read from the graphs.
#[derive(Clone, Debug)]
pub struct Adversary {
    spec: StrategySpec,
    rng: Rng,
    script: VecDeque<Event>,
    last_deleted: Option<NodeId>,
}

const DELETE_RULES: [StrategyKind; 4] = [
    StrategyKind::Random,
    StrategyKind::MaxDegree,
    StrategyKind::Articulation,
    StrategyKind::Clustered,
];

impl Adversary {
    pub fn new(spec: StrategySpec) -> Result<Self, StrategyError> {
        spec.validate()?;
        Ok(Adversary {
            rng: Rng::seed_from_u64(spec.seed),
            spec,
            script: VecDeque::new(),
            last_deleted: None,
        })
    }

    /// Replays `events` in order.
    pub fn scripted(events: Vec<Event>) -> Self {
        Adversary {
            spec: StrategySpec::new(StrategyKind::Scripted, 0),
            rng: Rng::seed_from_u64(0),
            script: events.into(),
            last_deleted: None,
        }
    }

    pub fn spec(&self) -> &StrategySpec {
        &self.spec
    }

    /// The next event against `live` (the current network) and `shadow`
    /// (every node ever created), or `None` when no legal event remains.
    pub fn next_event(&mut self, live: &Graph, shadow: &Graph) -> Option<Event> {
        if self.spec.kind == StrategyKind::Scripted {
            return self.script.pop_front();
        }
        if live.is_empty() {
            return None;
        }
        let delete = self.rng.gen_bool(self.spec.p_delete);
        let event = if delete {
            let rule = match self.spec.kind {
                StrategyKind::Mixed => *DELETE_RULES.choose(&mut self.rng).expect("non-empty"),
                k => k,
            };
            Event::Delete {
                node: self.delete_target(rule, live, shadow),
            }
        } else {
            self.insertion(live, shadow)
        };
        if let Event::Delete { node } = event {
            self.last_deleted = Some(node);
        }
        Some(event)
    }

    fn delete_target(&mut self, rule: StrategyKind, live: &Graph, shadow: &Graph) -> NodeId {
        match rule {
            StrategyKind::MaxDegree => max_degree(live),
            StrategyKind::Articulation => live
                .articulation_points()
                .first()
                .copied()
                .unwrap_or_else(|| max_degree(live)),
            StrategyKind::Clustered => {
                let near: Vec<NodeId> = self
                    .last_deleted
                    .and_then(|d| shadow.neighbors(d))
                    .into_iter()
                    .flatten()
                    .copied()
                    .filter(|&u| live.contains(u))
                    .collect();
                let pool = if near.is_empty() { boundary(live, shadow) } else { near };
                if pool.is_empty() {
                    self.uniform(live)
                } else {
                    *pool.choose(&mut self.rng).expect("non-empty")
                }
            }
            _ => self.uniform(live),
        }
    }

    fn uniform(&mut self, live: &Graph) -> NodeId {
        let nodes: Vec<NodeId> = live.nodes().collect();
        *nodes.choose(&mut self.rng).expect("live graph non-empty")
    }

    fn insertion(&mut self, live: &Graph, shadow: &Graph) -> Event {
        let node = NodeId(shadow.max_node_id().map_or(0, |m| m.0 + 1));
        let nodes: Vec<NodeId> = live.nodes().collect();
        let k = self.spec.insert_degree.min(nodes.len());
        let neighbors = nodes.choose_multiple(&mut self.rng, k).copied().collect();
        Event::Insert { node, neighbors }
    }
}

/// Live node of maximum degree, smallest id on ties.
fn max_degree(live: &Graph) -> NodeId {
    let mut best: Option<(usize, NodeId)> = None;
    for v in live.nodes() {
        let d = live.degree(v).unwrap_or(0);
        if best.is_none_or(|(bd, _)| d > bd) {
            best = Some((d, v));
        }
    }
    best.expect("live graph non-empty").1
}

/// Live nodes adjacent in the shadow graph to some deleted node.
fn boundary(live: &Graph, shadow: &Graph) -> Vec<NodeId> {
    live.nodes()
        .filter(|&v| {
            shadow
                .neighbors(v)
                .is_some_and(|ns| ns.iter().any(|&u| !live.contains(u)))
        })
        .collect()
}

/// Model-constraint findings for `e`; empty when legal.
pub fn validate_event(e: &Event, live: &Graph, shadow: &Graph) -> Vec<Violation> {
    let mut out = Vec::new();
    match e {
        Event::Delete { node } => {
            if !live.contains(*node) {
                out.push(Violation::new("unknown-target", format!("{node} is not live")));
            }
        }
        Event::Insert { node, neighbors } => {
            if shadow.contains(*node) || live.contains(*node) {
                out.push(Violation::new("id-reuse", format!("{node} already existed")));
            }
            if neighbors.is_empty() {
                out.push(Violation::new("unattached-insert", format!("{node} has no neighbors")));
            }
            for u in neighbors.iter().filter(|&&u| !live.contains(u)) {
                out.push(Violation::new("unknown-neighbor", format!("{u} is not live")));
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("trace line {line}: {reason}")]
pub struct TraceError {
    pub line: usize,
    pub reason: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TraceLine {
    t: u64,
    op: String,
    node: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    neighbors: Option<Vec<u64>>,
}

/// JSON-lines trace, one event per line with `t` counting from 1.
pub fn write_trace(events: &[Event]) -> String {
    let mut out = String::new();
    for (i, e) in events.iter().enumerate() {
        let line = TraceLine {
            t: i as u64 + 1,
            op: e.op().to_string(),
            node: e.node().0,
            neighbors: match e {
                Event::Insert { neighbors, .. } => Some(neighbors.iter().map(|n| n.0).collect()),
                Event::Delete { .. } => None,
            },
        };
        out.push_str(&serde_json::to_string(&line).expect("plain struct"));
        out.push('\n');
    }
    out
}

/// Parses a JSON-lines trace. Blank lines are skipped; `t` must strictly
/// increase.
pub fn read_trace(text: &str) -> Result<Vec<(u64, Event)>, TraceError> {
    let mut out = Vec::new();
    let mut last_t = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let err = |reason: String| TraceError { line, reason };
        let rec: TraceLine = serde_json::from_str(raw).map_err(|e| err(e.to_string()))?;
        if last_t.is_some_and(|p| rec.t <= p) {
            return Err(err(format!("t={} does not increase", rec.t)));
        }
        last_t = Some(rec.t);
        let node = NodeId(rec.node);
        let event = match (rec.op.as_str(), rec.neighbors) {
            ("delete", None) => Event::Delete { node },
            ("delete", Some(_)) => return Err(err("delete carries neighbors".into())),
            ("insert", ns) => Event::Insert {
                node,
                neighbors: ns.unwrap_or_default().into_iter().map(NodeId).collect(),
            },
            (op, _) => return Err(err(format!("unknown op {op:?}"))),
        };
        out.push((rec.t, event));
    }
    Ok(out)
}
