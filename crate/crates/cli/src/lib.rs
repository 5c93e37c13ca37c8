//! Front end for the `selfheal` binary: trace generation, runs,
//! verification and benchmark sweeps over flat config files.

pub mod config;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;
use selfheal_core::adversary::{read_trace, write_trace, Adversary, StrategyKind, StrategySpec};
use selfheal_core::engine::{Engine, RunConfig, RunStatus};
use selfheal_core::generators::{generate, Family};
use selfheal_core::healers::{HealerKind, HealerOptions};
use selfheal_core::metrics::{
    check_record, format_frac, median, read_csv, summarize, write_csv, Frac, MetricOptions, MetricsRecord, Op,
    RecordViolation, Stretch, Summary, Thresholds,
};
use selfheal_core::{Event, Graph, VirtualGraph, RNG_IDENTITY};
use serde::Serialize;

pub use config::Config;

/// Exit status: run succeeded, no hard violations.
pub const EXIT_OK: u8 = 0;
/// Verification found hard violations.
pub const EXIT_VIOLATION: u8 = 1;
/// Input, parse or output failure.
pub const EXIT_IO: u8 = 2;

/// Settings shared by every subcommand after flags, environment and config
/// file have been merged.
#[derive(Clone, Debug)]
pub struct Ctx {
    pub config: Config,
    pub out: PathBuf,
    pub seed: u64,
    pub healer: HealerKind,
    pub trials: usize,
    pub quiet: bool,
}

/// Overrides coming from the command line and environment.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub env_seed: Option<String>,
    pub healer: Option<String>,
    pub trials: Option<usize>,
    pub quiet: bool,
}

impl Ctx {
    /// Flag beats `SELFHEAL_SEED`, which beats the config file.
    pub fn resolve(mut config: Config, out: PathBuf, o: Overrides) -> Result<Self> {
        let env_seed = o
            .env_seed
            .as_deref()
            .map(|s| s.trim().parse::<u64>().map_err(|e| anyhow!("SELFHEAL_SEED: {e}")))
            .transpose()?;
        let seed = match (o.seed, env_seed) {
            (Some(s), _) | (None, Some(s)) => s,
            (None, None) => config.get_or("seed", 0u64)?,
        };
        config.set("seed", seed);
        let healer: HealerKind = match o.healer {
            Some(h) => h.parse()?,
            None => config.get_or("healer", HealerKind::Haft)?,
        };
        config.set("healer", healer);
        let trials = match o.trials {
            Some(t) => t,
            None => config.get_or("trials", 1usize)?,
        };
        Ok(Ctx {
            config,
            out,
            seed,
            healer,
            trials,
            quiet: o.quiet,
        })
    }

    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", msg.as_ref());
        }
    }

    fn write(&self, name: &str, contents: &str) -> Result<PathBuf> {
        fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))?;
        let path = self.out.join(name);
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

/// Graph family from the `family`, `n` and `p` keys.
pub fn family(config: &Config) -> Result<Option<Family>> {
    let n = config.get_or("n", 32u64)?;
    let p = config.get_or("p", 0.15f64)?;
    Ok(Some(match config.raw("family").unwrap_or("random-tree") {
        "path" => Family::Path { n },
        "star" => Family::Star { n },
        "random-tree" => Family::RandomTree { n },
        "er" | "erdos-renyi" => Family::Er { n, p },
        "complete" => Family::Complete { n },
        "file" => return Ok(None),
        other => bail!("config key family: unknown family {other:?}"),
    }))
}

/// `G_0`: the `graph` file when given, else a generated family member.
pub fn initial_graph(ctx: &Ctx) -> Result<Graph> {
    if let Some(path) = ctx.config.path("graph") {
        return Graph::parse_edge_list(&read(&path)?).with_context(|| format!("parsing {}", path.display()));
    }
    match family(&ctx.config)? {
        Some(f) => Ok(generate(&f, ctx.seed)?),
        None => bail!("family = file requires a graph key"),
    }
}

pub fn strategy(ctx: &Ctx) -> Result<StrategySpec> {
    let kind: StrategyKind = ctx.config.get_or("strategy", StrategyKind::Mixed)?;
    let spec = StrategySpec {
        kind,
        p_delete: ctx.config.get_or("p_delete", 0.7)?,
        insert_degree: ctx.config.get_or("insert_degree", 2usize)?,
        seed: ctx.seed,
    };
    spec.validate()?;
    Ok(spec)
}

pub fn run_config(ctx: &Ctx, initial: Graph) -> Result<RunConfig> {
    let metrics = MetricOptions {
        exact_cap: ctx.config.get_or("exact_cap", 256usize)?,
        stretch_samples: ctx.config.get_or("stretch_samples", 1000usize)?,
    };
    if metrics.exact_cap == 0 || metrics.stretch_samples == 0 {
        bail!("exact_cap and stretch_samples must be positive");
    }
    let healer_options = HealerOptions {
        dedup_slots: ctx.config.get_or("dedup_slots", false)?,
    };
    let mut cfg = if let Some(path) = ctx.config.path("trace") {
        let events: Vec<Event> = read_trace(&read(&path)?)
            .with_context(|| format!("parsing {}", path.display()))?
            .into_iter()
            .map(|(_, e)| e)
            .collect();
        let mut cfg = RunConfig::scripted(initial, ctx.healer, events);
        if let Some(steps) = ctx.config.get::<u64>("steps")? {
            cfg.steps = steps.min(cfg.steps);
        }
        cfg
    } else {
        let spec = strategy(ctx)?;
        if spec.kind == StrategyKind::Scripted {
            bail!("strategy = scripted requires a trace key");
        }
        RunConfig::online(initial, ctx.healer, spec, ctx.config.get_or("steps", 128u64)?)
    };
    cfg.seed = ctx.seed;
    cfg.metrics = metrics;
    cfg.healer_options = healer_options;
    Ok(cfg)
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    rng: &'a str,
    seed: u64,
    healer: &'a str,
    config: &'a BTreeMap<String, String>,
    outputs: Vec<String>,
}

fn manifest(ctx: &Ctx, command: &str, outputs: &[&str]) -> String {
    let m = Manifest {
        command,
        version: env!("CARGO_PKG_VERSION"),
        rng: RNG_IDENTITY,
        seed: ctx.seed,
        healer: ctx.healer.name(),
        config: ctx.config.entries(),
        outputs: outputs.iter().map(|s| s.to_string()).collect(),
    };
    let mut s = serde_json::to_string_pretty(&m).expect("plain struct");
    s.push('\n');
    s
}

/// Writes `graph.txt`, `trace.jsonl` and `manifest.json`.
pub fn cmd_gen(ctx: &Ctx) -> Result<u8> {
    let initial = initial_graph(ctx)?;
    let mut cfg = run_config(ctx, initial.clone())?;
    if cfg.strategy.kind == StrategyKind::Scripted {
        bail!("gen needs an online strategy");
    }
    // The adversary answers the configured healer's live graph.
    cfg.metrics = MetricOptions {
        exact_cap: 0,
        stretch_samples: 1,
    };
    let mut engine = Engine::new(cfg)?;
    engine.run_to_end()?;
    let events = &engine.state().events;
    ctx.write("graph.txt", &initial.to_edge_list())?;
    ctx.write("trace.jsonl", &write_trace(events))?;
    ctx.write("manifest.json", &manifest(ctx, "gen", &["graph.txt", "trace.jsonl"]))?;
    ctx.say(format!(
        "gen: {} nodes, {} edges, {} events ({}) -> {}",
        initial.node_count(),
        initial.edge_count(),
        events.len(),
        engine.state().status.name(),
        ctx.out.display()
    ));
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct RunSummary<'a> {
    healer: &'a str,
    status: &'a str,
    seed: u64,
    initial_nodes: usize,
    initial_edges: usize,
    setup_messages: u64,
    final_live_nodes: usize,
    final_virtual_nodes: usize,
    warnings: &'a [String],
    thresholds: Thresholds,
    summary: Summary,
}

/// Output of one completed engine run.
pub struct RunOutput {
    pub records: Vec<MetricsRecord>,
    pub csv: String,
    pub live_dot: String,
    pub virtual_dot: String,
    pub summary_json: String,
    pub audit: Vec<(u64, String)>,
}

/// Executes the configured run, auditing the healer after every step.
pub fn execute(ctx: &Ctx) -> Result<RunOutput> {
    let initial = initial_graph(ctx)?;
    let cfg = run_config(ctx, initial.clone())?;
    let mut engine = Engine::new(cfg)?;
    let mut audit = Vec::new();
    while engine.advance()? {
        for v in engine.healer().audit() {
            audit.push((engine.state().t, v.to_string()));
        }
    }
    let (state, healer) = engine.into_parts();
    let live = healer.live_graph();
    let vg = healer
        .virtual_graph()
        .cloned()
        .unwrap_or_else(|| VirtualGraph::from_graph(&live));
    let th = Thresholds::default();
    let summary = RunSummary {
        healer: ctx.healer.name(),
        status: state.status.name(),
        seed: ctx.seed,
        initial_nodes: initial.node_count(),
        initial_edges: initial.edge_count(),
        setup_messages: state.setup_messages,
        final_live_nodes: live.node_count(),
        final_virtual_nodes: vg.virtual_count(),
        warnings: &state.warnings,
        thresholds: th,
        summary: summarize(&state.records, &th),
    };
    let mut summary_json = serde_json::to_string_pretty(&summary).expect("plain struct");
    summary_json.push('\n');
    Ok(RunOutput {
        csv: write_csv(&state.records),
        records: state.records,
        live_dot: live.to_dot("live"),
        virtual_dot: vg.to_dot("virtual"),
        summary_json,
        audit,
    })
}

/// Writes `metrics.csv`, `live.dot`, `virtual.dot`, `summary.json` and
/// `manifest.json`.
pub fn cmd_run(ctx: &Ctx) -> Result<u8> {
    let out = execute(ctx)?;
    ctx.write("metrics.csv", &out.csv)?;
    ctx.write("live.dot", &out.live_dot)?;
    ctx.write("virtual.dot", &out.virtual_dot)?;
    ctx.write("summary.json", &out.summary_json)?;
    ctx.write(
        "manifest.json",
        &manifest(ctx, "run", &["metrics.csv", "live.dot", "virtual.dot", "summary.json"]),
    )?;
    let hard = out
        .records
        .iter()
        .flat_map(|r| check_record(r, &Thresholds::default()))
        .filter(|v| v.hard)
        .count();
    ctx.say(format!(
        "run: {} with {} timesteps, {hard} hard violations -> {}",
        ctx.healer,
        out.records.len(),
        ctx.out.display()
    ));
    Ok(EXIT_OK)
}

/// Violation report for `cmd_verify`.
pub fn verify_report(ctx: &Ctx) -> Result<Vec<String>> {
    let th = Thresholds::default();
    let mut lines = Vec::new();
    let records = if let Some(csv) = ctx.config.path("metrics_csv") {
        let n0 = initial_graph(ctx)?.node_count();
        read_csv(&read(&csv)?, n0).with_context(|| format!("parsing {}", csv.display()))?
    } else {
        let out = execute(ctx)?;
        for (t, v) in &out.audit {
            lines.push(format!("t={t} audit (hard): {v}"));
        }
        out.records
    };
    let violations: Vec<RecordViolation> = records.iter().flat_map(|r| check_record(r, &th)).collect();
    lines.extend(violations.iter().filter(|v| v.hard).map(|v| v.to_string()));
    Ok(lines)
}

/// Exit 0 when no hard violation is found, 1 otherwise.
pub fn cmd_verify(ctx: &Ctx) -> Result<u8> {
    let lines = verify_report(ctx)?;
    let mut report = String::new();
    for l in &lines {
        writeln!(report, "{l}").expect("string write");
    }
    if !ctx.quiet {
        print!("{report}");
    }
    ctx.write("violations.txt", &report)?;
    ctx.say(format!("verify: {} hard violations", lines.len()));
    Ok(if lines.is_empty() { EXIT_OK } else { EXIT_VIOLATION })
}

pub const BENCH_HEADER: &str = "n,healer,trials,deletions,median_messages,median_rounds,median_max_hops,median_touched,max_degree_ratio,max_stretch";

/// One `(n, healer)` point of the sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub n: u64,
    pub healer: HealerKind,
    pub trials: usize,
    pub deletions: usize,
    pub median_messages: Frac,
    pub median_rounds: Frac,
    pub median_max_hops: Frac,
    pub median_touched: Frac,
    pub max_degree_ratio: Frac,
    pub max_stretch: Stretch,
}

impl BenchRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.n,
            self.healer,
            self.trials,
            self.deletions,
            format_frac(self.median_messages),
            format_frac(self.median_rounds),
            format_frac(self.median_max_hops),
            format_frac(self.median_touched),
            format_frac(self.max_degree_ratio),
            self.max_stretch,
        )
    }
}

fn trial(ctx: &Ctx, healer: HealerKind, n: u64, seed: u64) -> Result<Vec<MetricsRecord>> {
    let mut c = ctx.clone();
    c.seed = seed;
    c.healer = healer;
    c.config.set("n", n);
    if c.config.raw("steps").is_none() {
        c.config.set("steps", n / 2);
    }
    if c.config.raw("strategy").is_none() {
        c.config.set("strategy", StrategyKind::Clustered.name());
    }
    if c.config.raw("p_delete").is_none() {
        c.config.set("p_delete", 1);
    }
    let cfg = run_config(&c, initial_graph(&c)?)?;
    let mut engine = Engine::new(cfg)?;
    engine.run_to_end()?;
    let state = engine.into_parts().0;
    if state.status == RunStatus::Running {
        bail!("engine stopped early");
    }
    Ok(state.records)
}

/// Per-`(n, healer)` medians over `trials` seeded runs, trials in parallel.
pub fn bench_rows(ctx: &Ctx) -> Result<Vec<BenchRow>> {
    let grid: Vec<u64> = ctx.config.list("bench_n")?.unwrap_or_else(|| vec![32, 64, 128]);
    let healers: Vec<HealerKind> = ctx
        .config
        .list("bench_healers")?
        .unwrap_or_else(|| vec![HealerKind::Haft, HealerKind::Rebuild]);
    let mut points = Vec::new();
    for &n in &grid {
        for &h in &healers {
            points.push((n, h));
        }
    }
    let trials = ctx.trials.max(1);
    let jobs: Vec<(u64, HealerKind, u64)> = points
        .iter()
        .flat_map(|&(n, h)| (0..trials as u64).map(move |k| (n, h, k)))
        .collect();
    let results: Vec<Result<Vec<MetricsRecord>>> = jobs
        .par_iter()
        .map(|&(n, h, k)| trial(ctx, h, n, ctx.seed.wrapping_add(k)))
        .collect();
    let mut by_point: BTreeMap<(u64, HealerKind), Vec<MetricsRecord>> = BTreeMap::new();
    for (&(n, h, _), r) in jobs.iter().zip(results) {
        by_point.entry((n, h)).or_default().extend(r?);
    }
    let mut rows = Vec::new();
    for (n, h) in points {
        let recs = by_point.remove(&(n, h)).unwrap_or_default();
        let dels: Vec<&MetricsRecord> = recs.iter().filter(|r| r.op == Op::Delete).collect();
        let med = |f: &dyn Fn(&MetricsRecord) -> u64| {
            let mut xs: Vec<u64> = dels.iter().map(|r| f(r)).collect();
            median(&mut xs).unwrap_or_default()
        };
        rows.push(BenchRow {
            n,
            healer: h,
            trials,
            deletions: dels.len(),
            median_messages: med(&|r| r.messages),
            median_rounds: med(&|r| u64::from(r.rounds)),
            median_max_hops: med(&|r| u64::from(r.max_hops)),
            median_touched: med(&|r| r.touched as u64),
            max_degree_ratio: recs.iter().map(|r| r.max_degree_ratio).max().unwrap_or_default(),
            max_stretch: recs
                .iter()
                .map(|r| r.max_stretch)
                .filter(|s| *s != Stretch::NotComputed)
                .max()
                .unwrap_or(Stretch::NotComputed),
        });
    }
    Ok(rows)
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from(BENCH_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.csv_line());
        out.push('\n');
    }
    out
}

/// Writes `bench.csv` and `manifest.json`.
pub fn cmd_bench(ctx: &Ctx) -> Result<u8> {
    let rows = bench_rows(ctx)?;
    let text = bench_csv(&rows);
    ctx.write("bench.csv", &text)?;
    ctx.write("manifest.json", &manifest(ctx, "bench", &["bench.csv"]))?;
    if !ctx.quiet {
        print!("{text}");
    }
    Ok(EXIT_OK)
}

/// Online adversary access for callers that drive a healer themselves.
pub fn adversary(ctx: &Ctx) -> Result<Adversary> {
    Ok(Adversary::new(strategy(ctx)?)?)
}
