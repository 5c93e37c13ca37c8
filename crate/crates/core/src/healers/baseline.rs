use std::collections::BTreeSet;

use super::{check_insert, HealError, Healer, HealerKind, HealerReport};
use crate::graph::{edge, EdgeInsert, Graph, NodeId};
use crate::virtual_graph::Violation;

/// Null, star and ring healers. They operate on the real graph directly and
/// reconnect the live neighbors of each deleted node.
#[derive(Clone, Debug)]
pub struct BaselineHealer {
    kind: HealerKind,
    graph: Graph,
    ever: BTreeSet<NodeId>,
}

impl BaselineHealer {
    pub fn new(kind: HealerKind) -> Self {
        assert!(
            matches!(kind, HealerKind::Null | HealerKind::Star | HealerKind::Ring),
            "{kind} is not a baseline healer"
        );
        BaselineHealer {
            kind,
            graph: Graph::new(),
            ever: BTreeSet::new(),
        }
    }

    fn plan(&self, orphans: &[NodeId]) -> Vec<(NodeId, NodeId)> {
        match (self.kind, orphans) {
            (HealerKind::Null, _) | (_, []) | (_, [_]) => vec![],
            (HealerKind::Star, [hub, rest @ ..]) => rest.iter().map(|&o| (*hub, o)).collect(),
            (HealerKind::Ring, [a, b]) => vec![(*a, *b)],
            (HealerKind::Ring, _) => {
                let mut out: Vec<_> = orphans.windows(2).map(|w| (w[0], w[1])).collect();
                out.push((orphans[orphans.len() - 1], orphans[0]));
                out
            }
            _ => unreachable!("baseline kinds only"),
        }
    }
}

impl Healer for BaselineHealer {
    fn kind(&self) -> HealerKind {
        self.kind
    }

    fn preprocess(&mut self, initial: &Graph) -> u64 {
        self.graph = initial.clone();
        self.ever = initial.nodes().collect();
        2 * initial.edge_count() as u64
    }

    fn on_insert(&mut self, v: NodeId, neighbors: &BTreeSet<NodeId>) -> Result<HealerReport, HealError> {
        check_insert(|x| self.graph.contains(x), |x| self.ever.contains(&x), v, neighbors)?;
        self.graph.add_node(v).expect("fresh id");
        for &u in neighbors {
            self.graph.add_edge(v, u).expect("live neighbor");
        }
        self.ever.insert(v);
        Ok(HealerReport {
            messages: neighbors.len() as u64,
            rounds: 1,
            touched: neighbors.clone(),
            max_hops: 1,
            ..HealerReport::default()
        })
    }

    fn on_delete(&mut self, v: NodeId) -> Result<HealerReport, HealError> {
        if !self.graph.contains(v) {
            return Err(HealError::UnknownNode(v));
        }
        let before = self.graph.clone();
        let orphans: Vec<NodeId> = self
            .graph
            .remove_node(v)
            .expect("checked")
            .into_iter()
            .collect();
        let mut report = HealerReport {
            touched: orphans.iter().copied().collect(),
            ..HealerReport::default()
        };
        for (a, b) in self.plan(&orphans) {
            if self.graph.add_edge(a, b).expect("live orphans") == EdgeInsert::Added {
                report.edges_added.insert(edge(a, b));
            }
        }
        report.messages = orphans.len() as u64 + 2 * report.edges_added.len() as u64;
        report.rounds = u32::from(!orphans.is_empty());
        report.measure_hops(&before, v);
        Ok(report)
    }

    fn live_graph(&self) -> Graph {
        self.graph.clone()
    }

    fn audit(&self) -> Vec<Violation> {
        self.graph
            .audit()
            .into_iter()
            .map(|d| Violation::new("graph", d))
            .collect()
    }
}
