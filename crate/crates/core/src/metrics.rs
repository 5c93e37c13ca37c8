//! Per-timestep measurements, threshold checks, summaries and CSV.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use rand::Rng as _;
use serde::Serialize;
use thiserror::Error;

use crate::graph::{Graph, Hops, IndexedGraph, NodeId, UNREACHABLE};
use crate::haft::ceil_log2;
use crate::Rng;

/// Exact non-negative ratio.
pub type Frac = Ratio<u64>;

/// Decimal rendering with at most six fractional digits, rounded half up,
/// trailing zeros removed.
pub fn format_frac(r: Frac) -> String {
    const SCALE: u64 = 1_000_000;
    let (n, d) = (*r.numer() as u128, *r.denom() as u128);
    let scaled = (n * SCALE as u128 * 2 + d) / (2 * d);
    let int = scaled / SCALE as u128;
    let frac = scaled % SCALE as u128;
    if frac == 0 {
        return int.to_string();
    }
    let digits = format!("{frac:06}");
    format!("{int}.{}", digits.trim_end_matches('0'))
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed number {0:?}")]
pub struct NumberError(pub String);

/// Inverse of [`format_frac`] for decimals without exponent.
pub fn parse_frac(s: &str) -> Result<Frac, NumberError> {
    let bad = || NumberError(s.to_string());
    let (int, frac) = s.split_once('.').unwrap_or((s, ""));
    if int.is_empty() || !int.bytes().all(|b| b.is_ascii_digit()) || !frac.bytes().all(|b| b.is_ascii_digit()) {
        return Err(bad());
    }
    if s.contains('.') && frac.is_empty() || frac.len() > 18 {
        return Err(bad());
    }
    let denom = 10u64.pow(frac.len() as u32);
    let int: u64 = int.parse().map_err(|_| bad())?;
    let frac: u64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
    let numer = int
        .checked_mul(denom)
        .and_then(|x| x.checked_add(frac))
        .ok_or_else(bad)?;
    Ok(Frac::new(numer, denom))
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stretch {
    Finite(Frac),
    Infinite,
    NotComputed,
}

impl fmt::Display for Stretch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stretch::Finite(r) => f.write_str(&format_frac(*r)),
            Stretch::Infinite => f.write_str("inf"),
            Stretch::NotComputed => f.write_str("na"),
        }
    }
}

impl FromStr for Stretch {
    type Err = NumberError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "inf" => Ok(Stretch::Infinite),
            "na" => Ok(Stretch::NotComputed),
            _ => parse_frac(s).map(Stretch::Finite),
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum StretchMode {
    Exact,
    Sampled,
    /// Fewer than two live nodes.
    None,
}

impl StretchMode {
    pub fn name(self) -> &'static str {
        match self {
            StretchMode::Exact => "exact",
            StretchMode::Sampled => "sampled",
            StretchMode::None => "na",
        }
    }
}

impl FromStr for StretchMode {
    type Err = NumberError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exact" => Ok(StretchMode::Exact),
            "sampled" => Ok(StretchMode::Sampled),
            "na" => Ok(StretchMode::None),
            _ => Err(NumberError(s.to_string())),
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum Op {
    /// The `G_0` snapshot before any event.
    Init,
    Insert,
    Delete,
}

impl Op {
    pub fn name(self) -> &'static str {
        match self {
            Op::Init => "init",
            Op::Insert => "insert",
            Op::Delete => "delete",
        }
    }
}

impl FromStr for Op {
    type Err = NumberError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "init" => Ok(Op::Init),
            "insert" => Ok(Op::Insert),
            "delete" => Ok(Op::Delete),
            _ => Err(NumberError(s.to_string())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MetricsRecord {
    pub t: u64,
    pub op: Op,
    pub node: Option<NodeId>,
    pub connected: bool,
    pub max_degree_ratio: Frac,
    pub max_stretch: Stretch,
    pub stretch_mode: StretchMode,
    pub diameter_live: Hops,
    pub diameter_shadow: Hops,
    pub messages: u64,
    pub rounds: u32,
    pub max_hops: u32,
    pub edges_added: usize,
    pub edges_dropped: usize,
    pub virtual_count: usize,
    /// `n′`: shadow node count after this step. Not a CSV column; readers
    /// reconstruct it from the initial size and the op sequence.
    pub shadow_nodes: usize,
    pub live_nodes: usize,
    /// Processors taking part in the repair. Not a CSV column; 0 when read
    /// back.
    pub touched: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("live node {0} has positive degree but no shadow edges")]
    ZeroShadowDegree(NodeId),
    #[error("live node {0} missing from the shadow graph")]
    NotInShadow(NodeId),
}

/// Maximum of `degree(v, live) / degree(v, shadow)` over live nodes, with
/// the smallest id among maximizers. Nodes isolated in both graphs are
/// skipped; an empty evaluation yields ratio 0.
pub fn degree_ratio_max(live: &Graph, shadow: &Graph) -> Result<(Frac, Option<NodeId>), MetricsError> {
    let mut best: Option<(Frac, NodeId)> = None;
    for v in live.nodes() {
        let dl = live.degree(v).unwrap_or(0) as u64;
        let ds = shadow.degree(v).ok_or(MetricsError::NotInShadow(v))? as u64;
        if ds == 0 {
            if dl > 0 {
                return Err(MetricsError::ZeroShadowDegree(v));
            }
            continue;
        }
        let r = Frac::new(dl, ds);
        if best.is_none_or(|(b, _)| r > b) {
            best = Some((r, v));
        }
    }
    Ok(best.map_or((Frac::from_integer(0), None), |(r, v)| (r, Some(v))))
}

/// Metric evaluation knobs.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct MetricOptions {
    /// All-pairs evaluation up to this many live nodes.
    pub exact_cap: usize,
    /// Pairs sampled beyond the cap.
    pub stretch_samples: usize,
}

impl Default for MetricOptions {
    fn default() -> Self {
        MetricOptions {
            exact_cap: 256,
            stretch_samples: 1000,
        }
    }
}

fn shadow_dists(shadow: &IndexedGraph, u: NodeId) -> Vec<u32> {
    shadow.index_of(u).map(|i| shadow.bfs(i)).unwrap_or_default()
}

/// Maximum of `dist(u, v, live) / dist(u, v, shadow)` over live pairs:
/// every pair up to the exact cap, else `stretch_samples` random pairs.
pub fn stretch_max(live: &Graph, shadow: &Graph, opts: MetricOptions, rng: &mut Rng) -> (Stretch, StretchMode) {
    let n = live.node_count();
    if n < 2 {
        return (Stretch::NotComputed, StretchMode::None);
    }
    let mode = if n <= opts.exact_cap {
        StretchMode::Exact
    } else {
        StretchMode::Sampled
    };
    if !live.is_connected() {
        return (Stretch::Infinite, mode);
    }
    let li = live.indexed();
    let si = shadow.indexed();
    let pairs: BTreeMap<usize, BTreeSet<usize>> = match mode {
        StretchMode::Exact => (0..n).map(|i| (i, (i + 1..n).collect())).collect(),
        _ => {
            let mut m: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
            for _ in 0..opts.stretch_samples {
                let a = rng.gen_range(0..n);
                let mut b = rng.gen_range(0..n - 1);
                if b >= a {
                    b += 1;
                }
                m.entry(a.min(b)).or_default().insert(a.max(b));
            }
            m
        }
    };
    let mut best: Option<Frac> = None;
    for (a, targets) in pairs {
        let dl = li.bfs(a);
        let ds = shadow_dists(&si, li.id(a));
        for b in targets {
            let Some(sb) = si.index_of(li.id(b)) else { continue };
            let (num, den) = (dl[b], ds.get(sb).copied().unwrap_or(UNREACHABLE));
            if den == UNREACHABLE || den == 0 {
                continue;
            }
            let r = Frac::new(u64::from(num), u64::from(den));
            if best.is_none_or(|x| r > x) {
                best = Some(r);
            }
        }
    }
    (best.map_or(Stretch::NotComputed, Stretch::Finite), mode)
}

/// Diameter, exact up to `cap` nodes; beyond it the eccentricity maximum
/// over `samples` random sources (a lower bound).
pub fn diameter(g: &Graph, cap: usize, samples: usize, rng: &mut Rng) -> Hops {
    let ig = g.indexed();
    if ig.len() <= cap {
        ig.diameter_from(0..ig.len())
    } else {
        let sources: Vec<usize> = (0..samples.min(ig.len())).map(|_| rng.gen_range(0..ig.len())).collect();
        ig.diameter_from(sources)
    }
}

/// Hard bounds are asserted; target bounds are reported.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Thresholds {
    pub degree_hard: u64,
    pub degree_target: u64,
    /// Stretch hard bound is `stretch_hard_factor · ⌈log₂ n′⌉`.
    pub stretch_hard_factor: u64,
    pub stretch_target_factor: u64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            degree_hard: 4,
            degree_target: 3,
            stretch_hard_factor: 2,
            stretch_target_factor: 1,
        }
    }
}

impl Thresholds {
    pub fn stretch_hard(&self, shadow_nodes: usize) -> u64 {
        self.stretch_hard_factor * u64::from(ceil_log2(shadow_nodes))
    }

    pub fn stretch_target(&self, shadow_nodes: usize) -> u64 {
        self.stretch_target_factor * u64::from(ceil_log2(shadow_nodes))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RecordViolation {
    pub t: u64,
    pub metric: &'static str,
    pub hard: bool,
    pub detail: String,
}

impl fmt::Display for RecordViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let level = if self.hard { "hard" } else { "target" };
        write!(f, "t={} {} ({level}): {}", self.t, self.metric, self.detail)
    }
}

/// Threshold findings for one record.
pub fn check_record(r: &MetricsRecord, th: &Thresholds) -> Vec<RecordViolation> {
    let mut out = Vec::new();
    let mut push = |metric, hard, detail: String| {
        out.push(RecordViolation {
            t: r.t,
            metric,
            hard,
            detail,
        })
    };
    if !r.connected {
        push("connectivity", true, "live graph disconnected".into());
    }
    let ratio = format_frac(r.max_degree_ratio);
    if r.max_degree_ratio > Frac::from_integer(th.degree_hard) {
        push("degree", true, format!("ratio {ratio} > {}", th.degree_hard));
    } else if r.max_degree_ratio > Frac::from_integer(th.degree_target) {
        push("degree", false, format!("ratio {ratio} > {}", th.degree_target));
    }
    let hard = th.stretch_hard(r.shadow_nodes);
    let target = th.stretch_target(r.shadow_nodes);
    let over = |bound: u64| match r.max_stretch {
        Stretch::Finite(s) => s > Frac::from_integer(bound),
        Stretch::Infinite => true,
        Stretch::NotComputed => false,
    };
    if over(hard) {
        push("stretch", true, format!("stretch {} > {hard}", r.max_stretch));
    } else if over(target) {
        push("stretch", false, format!("stretch {} > {target}", r.max_stretch));
    }
    if let (Hops::Finite(dl), Hops::Finite(ds)) = (r.diameter_live, r.diameter_shadow) {
        if u64::from(dl) > hard.max(1) * u64::from(ds) && r.stretch_mode == StretchMode::Exact {
            push(
                "diameter",
                true,
                format!("diameter {dl} > {} * {ds}", hard.max(1)),
            );
        }
    }
    out
}

/// Per-run aggregates. Ratios are rendered as decimal strings.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Summary {
    pub timesteps: usize,
    pub deletions: usize,
    pub insertions: usize,
    pub disconnected_steps: usize,
    pub max_degree_ratio: String,
    pub median_degree_ratio: String,
    /// Fraction of timesteps whose degree ratio meets the target bound.
    pub degree_within_target: String,
    pub max_stretch: String,
    pub max_stretch_over_log: String,
    pub median_messages_per_deletion: String,
    pub max_messages: u64,
    pub median_rounds: String,
    pub max_rounds: u32,
    pub max_hops: u32,
    pub max_virtual_count: usize,
    pub hard_violations: usize,
    pub target_violations: usize,
    pub violations_by_metric: BTreeMap<String, usize>,
}

/// Median of `xs` as an exact fraction (mean of the middle pair when even).
pub fn median(xs: &mut [u64]) -> Option<Frac> {
    if xs.is_empty() {
        return None;
    }
    xs.sort_unstable();
    let m = xs.len() / 2;
    Some(if xs.len() % 2 == 1 {
        Frac::from_integer(xs[m])
    } else {
        Frac::new(xs[m - 1] + xs[m], 2)
    })
}

fn frac_median(xs: &mut [Frac]) -> Option<Frac> {
    if xs.is_empty() {
        return None;
    }
    xs.sort_unstable();
    let m = xs.len() / 2;
    Some(if xs.len() % 2 == 1 {
        xs[m]
    } else {
        (xs[m - 1] + xs[m]) / 2
    })
}

pub fn summarize(records: &[MetricsRecord], th: &Thresholds) -> Summary {
    let zero = || "0".to_string();
    if records.is_empty() {
        return Summary {
            max_degree_ratio: zero(),
            median_degree_ratio: zero(),
            degree_within_target: zero(),
            max_stretch: zero(),
            max_stretch_over_log: zero(),
            median_messages_per_deletion: zero(),
            median_rounds: zero(),
            ..Summary::default()
        };
    }
    let fmt_opt = |x: Option<Frac>| x.map_or_else(zero, format_frac);
    let mut ratios: Vec<Frac> = records.iter().map(|r| r.max_degree_ratio).collect();
    let within = records
        .iter()
        .filter(|r| r.max_degree_ratio <= Frac::from_integer(th.degree_target))
        .count();
    let max_stretch = records
        .iter()
        .map(|r| r.max_stretch)
        .filter(|s| *s != Stretch::NotComputed)
        .max();
    let over_log = records
        .iter()
        .filter_map(|r| match r.max_stretch {
            Stretch::Finite(s) => Some(s / Frac::from_integer(u64::from(ceil_log2(r.shadow_nodes)).max(1))),
            _ => None,
        })
        .max();
    let mut msgs: Vec<u64> = records.iter().filter(|r| r.op == Op::Delete).map(|r| r.messages).collect();
    let mut rounds: Vec<u64> = records.iter().map(|r| u64::from(r.rounds)).collect();
    let violations: Vec<RecordViolation> = records.iter().flat_map(|r| check_record(r, th)).collect();
    let mut by_metric: BTreeMap<String, usize> = BTreeMap::new();
    for v in &violations {
        let level = if v.hard { "hard" } else { "target" };
        *by_metric.entry(format!("{}_{level}", v.metric)).or_default() += 1;
    }
    Summary {
        timesteps: records.len(),
        deletions: msgs.len(),
        insertions: records.iter().filter(|r| r.op == Op::Insert).count(),
        disconnected_steps: records.iter().filter(|r| !r.connected).count(),
        max_degree_ratio: fmt_opt(ratios.iter().max().copied()),
        median_degree_ratio: fmt_opt(frac_median(&mut ratios)),
        degree_within_target: format_frac(Frac::new(within as u64, records.len() as u64)),
        max_stretch: max_stretch.map_or_else(|| "na".to_string(), |s| s.to_string()),
        max_stretch_over_log: fmt_opt(over_log),
        median_messages_per_deletion: fmt_opt(median(&mut msgs)),
        max_messages: records.iter().map(|r| r.messages).max().unwrap_or(0),
        median_rounds: fmt_opt(median(&mut rounds)),
        max_rounds: records.iter().map(|r| r.rounds).max().unwrap_or(0),
        max_hops: records.iter().map(|r| r.max_hops).max().unwrap_or(0),
        max_virtual_count: records.iter().map(|r| r.virtual_count).max().unwrap_or(0),
        hard_violations: violations.iter().filter(|v| v.hard).count(),
        target_violations: violations.iter().filter(|v| !v.hard).count(),
        violations_by_metric: by_metric,
    }
}

pub const CSV_HEADER: &str = "t,op,node,connected,max_degree_ratio,max_stretch,stretch_mode,diameter_live,diameter_shadow,messages,rounds,max_hops,edges_added,edges_dropped,virtual_count";

pub fn write_csv(records: &[MetricsRecord]) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(CSV_HEADER.split(',')).expect("in-memory write");
    for r in records {
        w.write_record([
            r.t.to_string(),
            r.op.name().to_string(),
            r.node.map(|n| n.to_string()).unwrap_or_default(),
            r.connected.to_string(),
            format_frac(r.max_degree_ratio),
            r.max_stretch.to_string(),
            r.stretch_mode.name().to_string(),
            r.diameter_live.to_string(),
            r.diameter_shadow.to_string(),
            r.messages.to_string(),
            r.rounds.to_string(),
            r.max_hops.to_string(),
            r.edges_added.to_string(),
            r.edges_dropped.to_string(),
            r.virtual_count.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii fields")
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("metrics csv line {line}: {reason}")]
pub struct CsvError {
    pub line: usize,
    pub reason: String,
}

/// Parses [`write_csv`] output. `initial_nodes` is `|V(G_0)|`, from which
/// the shadow and live sizes of each row are replayed.
pub fn read_csv(text: &str, initial_nodes: usize) -> Result<Vec<MetricsRecord>, CsvError> {
    let mut rd = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(text.as_bytes());
    let header_ok = rd
        .headers()
        .map(|h| h.iter().eq(CSV_HEADER.split(',')))
        .unwrap_or(false);
    if !header_ok {
        return Err(CsvError {
            line: 1,
            reason: "missing or unexpected header".into(),
        });
    }
    let (mut shadow, mut live) = (initial_nodes, initial_nodes);
    let mut out = Vec::new();
    for row in rd.records() {
        let row = row.map_err(|e| CsvError {
            line: e.position().map_or(0, |p| p.line() as usize),
            reason: e.to_string(),
        })?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let err = |reason: String| CsvError { line, reason };
        let f: Vec<&str> = row.iter().collect();
        if f.len() != 15 {
            return Err(err(format!("expected 15 fields, found {}", f.len())));
        }
        let num = |k: usize| f[k].parse::<u64>().map_err(|_| err(format!("field {k}: {:?}", f[k])));
        let op: Op = f[1].parse().map_err(|_| err(format!("op {:?}", f[1])))?;
        match op {
            Op::Insert => {
                shadow += 1;
                live += 1;
            }
            Op::Delete => live = live.saturating_sub(1),
            Op::Init => {}
        }
        let hops = |k: usize| f[k].parse::<Hops>().map_err(|_| err(format!("field {k}: {:?}", f[k])));
        out.push(MetricsRecord {
            t: num(0)?,
            op,
            node: if f[2].is_empty() { None } else { Some(NodeId(num(2)?)) },
            connected: match f[3] {
                "true" => true,
                "false" => false,
                other => return Err(err(format!("connected {other:?}"))),
            },
            max_degree_ratio: parse_frac(f[4]).map_err(|e| err(e.to_string()))?,
            max_stretch: f[5].parse().map_err(|e: NumberError| err(e.to_string()))?,
            stretch_mode: f[6].parse().map_err(|e: NumberError| err(e.to_string()))?,
            diameter_live: hops(7)?,
            diameter_shadow: hops(8)?,
            messages: num(9)?,
            rounds: num(10)? as u32,
            max_hops: num(11)? as u32,
            edges_added: num(12)? as usize,
            edges_dropped: num(13)? as usize,
            virtual_count: num(14)? as usize,
            shadow_nodes: shadow,
            live_nodes: live,
            touched: 0,
        });
    }
    Ok(out)
}
