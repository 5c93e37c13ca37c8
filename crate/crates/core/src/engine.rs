//! The adversary/healer alternation and the shadow graph `G′`.

use std::collections::BTreeSet;

use rand::SeedableRng;
use thiserror::Error;

use crate::adversary::{validate_event, Adversary, Event, StrategyError, StrategyKind, StrategySpec};
use crate::graph::{Graph, GraphError, Hops, NodeId};
use crate::healers::{HealError, Healer, HealerKind, HealerOptions, HealerReport};
use crate::metrics::{self, MetricOptions, MetricsError, MetricsRecord, Op};
use crate::virtual_graph::Violation;
use crate::Rng;

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub initial: Graph,
    pub healer: HealerKind,
    pub strategy: StrategySpec,
    /// Events replayed when `strategy.kind` is scripted.
    pub script: Vec<Event>,
    /// `T`.
    pub steps: u64,
    /// Seeds metric sampling.
    pub seed: u64,
    pub metrics: MetricOptions,
    pub healer_options: HealerOptions,
}

impl RunConfig {
    /// An online run of `steps` events with default metric options.
    pub fn online(initial: Graph, healer: HealerKind, strategy: StrategySpec, steps: u64) -> Self {
        RunConfig {
            initial,
            healer,
            seed: strategy.seed,
            strategy,
            script: Vec::new(),
            steps,
            metrics: MetricOptions::default(),
            healer_options: HealerOptions::default(),
        }
    }

    /// Replays `script` in full.
    pub fn scripted(initial: Graph, healer: HealerKind, script: Vec<Event>) -> Self {
        RunConfig {
            initial,
            healer,
            strategy: StrategySpec::new(StrategyKind::Scripted, 0),
            steps: script.len() as u64,
            script,
            seed: 0,
            metrics: MetricOptions::default(),
            healer_options: HealerOptions::default(),
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum RunStatus {
    Running,
    /// All `T` steps applied.
    Completed,
    /// The adversary had no legal event left.
    Exhausted,
    /// Every node was deleted.
    Annihilated,
}

impl RunStatus {
    pub fn name(self) -> &'static str {
        match self {
            RunStatus::Running => "running",
            RunStatus::Completed => "completed",
            RunStatus::Exhausted => "exhausted",
            RunStatus::Annihilated => "annihilated",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunState {
    pub t: u64,
    /// Every node ever created with original and insertion edges only.
    pub shadow: Graph,
    pub deleted: BTreeSet<NodeId>,
    /// Snapshot of `G_0` before any event.
    pub baseline: MetricsRecord,
    pub records: Vec<MetricsRecord>,
    pub events: Vec<Event>,
    pub setup_messages: u64,
    pub status: RunStatus,
    pub warnings: Vec<String>,
}

impl RunState {
    pub fn is_live(&self, v: NodeId) -> bool {
        self.shadow.contains(v) && !self.deleted.contains(&v)
    }

    /// Hop distance in `G′`, through deleted nodes as well.
    pub fn shadow_distance(&self, u: NodeId, v: NodeId) -> Result<Hops, GraphError> {
        self.shadow.distance(u, v)
    }
}

/// Free-function form of [`RunState::shadow_distance`].
pub fn shadow_distance(state: &RunState, u: NodeId, v: NodeId) -> Result<Hops, GraphError> {
    state.shadow_distance(u, v)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("invalid event at t={t} ({event}): {violations:?}")]
    InvalidEvent {
        t: u64,
        event: String,
        violations: Vec<Violation>,
    },
    #[error(transparent)]
    Heal(#[from] HealError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
}

pub struct Engine {
    config: RunConfig,
    healer: Box<dyn Healer>,
    adversary: Adversary,
    state: RunState,
}

impl Engine {
    pub fn new(config: RunConfig) -> Result<Self, EngineError> {
        let adversary = if config.strategy.kind == StrategyKind::Scripted {
            Adversary::scripted(config.script.clone())
        } else {
            Adversary::new(config.strategy.clone())?
        };
        let (healer, setup) = config.healer.preprocess(&config.initial, config.healer_options);
        let mut warnings = Vec::new();
        if !config.initial.is_connected() {
            warnings.push("initial graph is not connected".to_string());
        }
        let baseline = measure(
            &config,
            0,
            Op::Init,
            None,
            &HealerReport::default(),
            healer.as_ref(),
            &config.initial,
        )?;
        let status = if config.steps == 0 {
            RunStatus::Completed
        } else {
            RunStatus::Running
        };
        let state = RunState {
            t: 0,
            shadow: config.initial.clone(),
            deleted: BTreeSet::new(),
            baseline,
            records: Vec::new(),
            events: Vec::new(),
            setup_messages: setup,
            status,
            warnings,
        };
        Ok(Engine {
            config,
            healer,
            adversary,
            state,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn state(&self) -> &RunState {
        &self.state
    }

    pub fn healer(&self) -> &dyn Healer {
        self.healer.as_ref()
    }

    pub fn into_parts(self) -> (RunState, Box<dyn Healer>) {
        (self.state, self.healer)
    }

    /// Applies `e` as timestep `t + 1` and returns its record.
    pub fn step(&mut self, e: Event) -> Result<&MetricsRecord, EngineError> {
        let t = self.state.t + 1;
        let live = self.healer.live_graph();
        let violations = validate_event(&e, &live, &self.state.shadow);
        if !violations.is_empty() {
            return Err(EngineError::InvalidEvent {
                t,
                event: e.to_string(),
                violations,
            });
        }
        let (op, report) = match &e {
            Event::Insert { node, neighbors } => {
                let report = self.healer.on_insert(*node, neighbors)?;
                self.state.shadow.add_node(*node).expect("validated fresh id");
                for &u in neighbors {
                    self.state.shadow.add_edge(*node, u).expect("validated neighbor");
                }
                (Op::Insert, report)
            }
            Event::Delete { node } => {
                let report = self.healer.on_delete(*node)?;
                self.state.deleted.insert(*node);
                (Op::Delete, report)
            }
        };
        let record = measure(
            &self.config,
            t,
            op,
            Some(e.node()),
            &report,
            self.healer.as_ref(),
            &self.state.shadow,
        )?;
        self.state.t = t;
        self.state.events.push(e);
        self.state.records.push(record);
        if t >= self.config.steps {
            self.state.status = RunStatus::Completed;
        } else if self.state.records.last().is_some_and(|r| r.live_nodes == 0) {
            self.state.status = RunStatus::Annihilated;
        }
        Ok(self.state.records.last().expect("just pushed"))
    }

    /// Draws and applies the next adversary event. `Ok(false)` once the run
    /// has ended.
    pub fn advance(&mut self) -> Result<bool, EngineError> {
        if self.state.status != RunStatus::Running {
            return Ok(false);
        }
        let live = self.healer.live_graph();
        match self.adversary.next_event(&live, &self.state.shadow) {
            Some(e) => {
                self.step(e)?;
                Ok(true)
            }
            None => {
                self.state.status = if live.is_empty() && !self.state.deleted.is_empty() {
                    RunStatus::Annihilated
                } else {
                    RunStatus::Exhausted
                };
                Ok(false)
            }
        }
    }

    pub fn run_to_end(&mut self) -> Result<(), EngineError> {
        while self.advance()? {}
        Ok(())
    }
}

/// Runs `config` to the end and returns the final state with the healer.
pub fn run(config: RunConfig) -> Result<(RunState, Box<dyn Healer>), EngineError> {
    let mut engine = Engine::new(config)?;
    engine.run_to_end()?;
    Ok(engine.into_parts())
}

fn metrics_rng(seed: u64, t: u64) -> Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&t.to_le_bytes());
    key[16..24].copy_from_slice(b"metrics\0");
    Rng::from_seed(key)
}

fn measure(
    config: &RunConfig,
    t: u64,
    op: Op,
    node: Option<NodeId>,
    report: &HealerReport,
    healer: &dyn Healer,
    shadow: &Graph,
) -> Result<MetricsRecord, EngineError> {
    let live = healer.live_graph();
    let mut rng = metrics_rng(config.seed, t);
    let opts = config.metrics;
    let (ratio, _) = metrics::degree_ratio_max(&live, shadow)?;
    let (stretch, mode) = metrics::stretch_max(&live, shadow, opts, &mut rng);
    let samples = opts.stretch_samples.max(1);
    Ok(MetricsRecord {
        t,
        op,
        node,
        connected: live.is_connected(),
        max_degree_ratio: ratio,
        max_stretch: stretch,
        stretch_mode: mode,
        diameter_live: metrics::diameter(&live, opts.exact_cap, samples, &mut rng),
        diameter_shadow: metrics::diameter(shadow, opts.exact_cap, samples, &mut rng),
        messages: report.messages,
        rounds: report.rounds,
        max_hops: report.max_hops,
        edges_added: report.edges_added.len(),
        edges_dropped: report.edges_dropped.len(),
        virtual_count: healer.virtual_count(),
        shadow_nodes: shadow.node_count(),
        live_nodes: live.node_count(),
        touched: report.touched.len(),
    })
}
