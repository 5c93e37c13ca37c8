//! Seeded initial-graph families. Node ids are `0..n`.

use std::fmt;

use rand::{Rng as _, SeedableRng};
use thiserror::Error;

use crate::graph::{Graph, NodeId};
use crate::virtual_graph::{VNodeId, VirtualGraph};
use crate::Rng;

#[derive(Clone, Debug, PartialEq)]
pub enum Family {
    Path { n: u64 },
    /// Center 0 with `n - 1` leaves.
    Star { n: u64 },
    /// Each node `i > 0` attaches to a uniform earlier node.
    RandomTree { n: u64 },
    /// Erdős–Rényi `G(n, p)`, resampled until connected.
    Er { n: u64, p: f64 },
    Complete { n: u64 },
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Path { n } => write!(f, "path(n={n})"),
            Family::Star { n } => write!(f, "star(n={n})"),
            Family::RandomTree { n } => write!(f, "random-tree(n={n})"),
            Family::Er { n, p } => write!(f, "er(n={n}, p={p})"),
            Family::Complete { n } => write!(f, "complete(n={n})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenError {
    #[error("edge probability {0} outside [0, 1]")]
    Probability(f64),
    #[error("no connected sample of {family} after {attempts} attempts")]
    NeverConnected { family: String, attempts: u32 },
}

/// Connectivity resampling budget for [`Family::Er`].
pub const ER_ATTEMPTS: u32 = 10_000;

fn nodes(n: u64) -> Graph {
    let mut g = Graph::new();
    for i in 0..n {
        g.add_node(NodeId(i)).expect("fresh");
    }
    g
}

fn link(g: &mut Graph, a: u64, b: u64) {
    g.add_edge(NodeId(a), NodeId(b)).expect("distinct known nodes");
}

pub fn path(n: u64) -> Graph {
    let mut g = nodes(n);
    for i in 1..n {
        link(&mut g, i - 1, i);
    }
    g
}

pub fn star(n: u64) -> Graph {
    let mut g = nodes(n);
    for i in 1..n {
        link(&mut g, 0, i);
    }
    g
}

pub fn complete(n: u64) -> Graph {
    let mut g = nodes(n);
    for i in 0..n {
        for j in i + 1..n {
            link(&mut g, i, j);
        }
    }
    g
}

pub fn random_tree(n: u64, rng: &mut Rng) -> Graph {
    let mut g = nodes(n);
    for i in 1..n {
        let j = rng.gen_range(0..i);
        link(&mut g, j, i);
    }
    g
}

pub fn erdos_renyi(n: u64, p: f64, rng: &mut Rng) -> Result<Graph, GenError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(GenError::Probability(p));
    }
    for _ in 0..ER_ATTEMPTS {
        let mut g = nodes(n);
        for i in 0..n {
            for j in i + 1..n {
                if rng.gen_bool(p) {
                    link(&mut g, i, j);
                }
            }
        }
        if g.is_connected() {
            return Ok(g);
        }
    }
    Err(GenError::NeverConnected {
        family: Family::Er { n, p }.to_string(),
        attempts: ER_ATTEMPTS,
    })
}

/// One graph from `family`, deterministic in `seed`.
pub fn generate(family: &Family, seed: u64) -> Result<Graph, GenError> {
    let mut rng = Rng::seed_from_u64(seed);
    Ok(match *family {
        Family::Path { n } => path(n),
        Family::Star { n } => star(n),
        Family::RandomTree { n } => random_tree(n, &mut rng),
        Family::Er { n, p } => erdos_renyi(n, p, &mut rng)?,
        Family::Complete { n } => complete(n),
    })
}

/// Random virtual graph: `reals` processors, `virtuals` virtual nodes with
/// uniform simulators, and each node pair joined with probability `p`.
pub fn random_virtual_graph(reals: u64, virtuals: u64, p: f64, rng: &mut Rng) -> VirtualGraph {
    let mut vg = VirtualGraph::new();
    for i in 0..reals {
        vg.add_real_node(NodeId(i)).expect("fresh");
    }
    let mut all: Vec<VNodeId> = (0..reals).map(|i| VNodeId::Real(NodeId(i))).collect();
    if reals > 0 {
        for _ in 0..virtuals {
            let sim = NodeId(rng.gen_range(0..reals));
            all.push(VNodeId::Virtual(vg.add_virtual_node(sim).expect("known simulator")));
        }
    }
    for (i, &a) in all.iter().enumerate() {
        for &b in &all[i + 1..] {
            if rng.gen_bool(p) {
                vg.add_edge(a, b).expect("distinct known nodes");
            }
        }
    }
    vg
}
