//! Deterministic simulator for self-healing reconfigurable networks.
//!
//! An omniscient adversary inserts or deletes one node per timestep; a
//! healer answers every deletion by adding (and possibly dropping) edges
//! among the survivors. The flagship healer replaces each connected region
//! of deleted nodes by a half-full reconstruction tree over a virtual graph,
//! whose homomorphic image is the real network.
//!
//! Module map:
//! - [`graph`]: undirected simple graphs and breadth-first metrics.
//! - [`virtual_graph`]: real/virtual nodes, simulation and de-simulation.
//! - [`haft`]: half-full trees, binary-addition merging, simulator rule.
//! - [`healers`]: null/star/ring baselines plus the rebuild and haft healers.
//! - [`adversary`]: scripted and online event generators, JSONL traces.
//! - [`engine`]: the insert/delete/repair loop and the shadow graph.
//! - [`metrics`]: degree factor, stretch, diameter, summaries and CSV.
//! - [`generators`]: seeded initial-graph families.

pub mod adversary;
pub mod engine;
pub mod generators;
pub mod graph;
pub mod haft;
pub mod healers;
pub mod metrics;
pub mod virtual_graph;

pub use adversary::{Adversary, Event, StrategyKind, StrategySpec};
pub use engine::{run, Engine, RunConfig, RunState, RunStatus};
pub use graph::{Graph, Hops, NodeId};
pub use haft::{build_haft, merge_hafts, Haft, LeafSlot};
pub use healers::{Healer, HealerKind, HealerReport};
pub use metrics::{MetricsRecord, Summary, Thresholds};
pub use virtual_graph::{VNodeId, Vid, VirtualGraph};

/// Generator behind every random choice in a run.
pub type Rng = rand_chacha::ChaCha8Rng;

/// Identity of [`Rng`], recorded in manifests.
pub const RNG_IDENTITY: &str = "rand_chacha::ChaCha8Rng (rand_chacha 0.3, rand 0.8)";
