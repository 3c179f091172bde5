//! Workload snapshots: a seeded drifting-hotspot generator and CSV trace
//! ingestion.
//!
//! The generator concentrates a configurable share of each function's
//! traffic on a few hotspot nodes that wander between neighbouring node
//! indices from one snapshot to the next.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{FunctionSpec, Topology, WorkloadMatrix};

pub const DEFAULT_CONCENTRATION: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorkloadGenConfig {
    pub seed: u64,
    pub n_snapshots: usize,
    pub hotspot_count: usize,
    /// Per-snapshot probability that a hotspot moves to a neighbouring index.
    pub hotspot_drift: f64,
    /// Range of the total request rate of one function, req/s.
    pub rate_range: (f64, f64),
    /// Multiplicative jitter: each entry is scaled by a factor in `1 ± noise`.
    pub noise: f64,
    /// Share of every function's traffic that lands on hotspot nodes.
    pub concentration: f64,
}

impl Default for WorkloadGenConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_snapshots: 50,
            hotspot_count: 2,
            hotspot_drift: 0.3,
            rate_range: (10.0, 30.0),
            noise: 0.1,
            concentration: DEFAULT_CONCENTRATION,
        }
    }
}

impl WorkloadGenConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.rate_range;
        if !(lo >= 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::Config(format!("rate_range ({lo}, {hi}) is not a valid range")));
        }
        for (name, p) in [
            ("hotspot_drift", self.hotspot_drift),
            ("concentration", self.concentration),
            ("noise", self.noise),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} = {p} is outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Snapshots plus the hotspot nodes each one was built around.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedWorkloads {
    pub snapshots: Vec<WorkloadMatrix>,
    pub hotspots: Vec<Vec<usize>>,
}

pub fn generate_workloads(
    cfg: &WorkloadGenConfig,
    topology: &Topology,
    functions: &[FunctionSpec],
) -> Result<Vec<WorkloadMatrix>> {
    Ok(generate_with_hotspots(cfg, topology, functions)?.snapshots)
}

pub fn generate_with_hotspots(
    cfg: &WorkloadGenConfig,
    topology: &Topology,
    functions: &[FunctionSpec],
) -> Result<GeneratedWorkloads> {
    cfg.validate()?;
    let n = topology.node_count();
    let f_count = functions.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = GeneratedWorkloads {
        snapshots: Vec::with_capacity(cfg.n_snapshots),
        hotspots: Vec::with_capacity(cfg.n_snapshots),
    };
    if n == 0 {
        out.snapshots = vec![WorkloadMatrix::zeros(f_count, 0); cfg.n_snapshots];
        out.hotspots = vec![Vec::new(); cfg.n_snapshots];
        return Ok(out);
    }

    let mut nodes: Vec<usize> = (0..n).collect();
    nodes.shuffle(&mut rng);
    let mut hotspots: Vec<usize> = nodes[..cfg.hotspot_count.min(n)].to_vec();
    hotspots.sort_unstable();

    for s in 0..cfg.n_snapshots {
        if s > 0 {
            for h in 0..hotspots.len() {
                if rng.gen::<f64>() < cfg.hotspot_drift {
                    let step = if rng.gen::<bool>() { 1 } else { n - 1 };
                    let moved = (hotspots[h] + step) % n;
                    if !hotspots.contains(&moved) {
                        hotspots[h] = moved;
                    }
                }
            }
        }
        let cold = n - hotspots.len();
        let (hot_share, cold_share) = if hotspots.is_empty() || cold == 0 {
            // no distinction between hot and cold nodes
            (1.0 / n as f64, 1.0 / n as f64)
        } else {
            (
                cfg.concentration / hotspots.len() as f64,
                (1.0 - cfg.concentration) / cold as f64,
            )
        };

        let mut w = WorkloadMatrix::zeros(f_count, n);
        for f in 0..f_count {
            let (lo, hi) = cfg.rate_range;
            let total = if hi > lo { rng.gen_range(lo..hi) } else { lo };
            for i in 0..n {
                let share = if hotspots.contains(&i) {
                    hot_share
                } else {
                    cold_share
                };
                let jitter = if cfg.noise > 0.0 {
                    1.0 + cfg.noise * rng.gen_range(-1.0..=1.0)
                } else {
                    1.0
                };
                w.set(f, i, total * share * jitter);
            }
        }
        out.snapshots.push(w);
        out.hotspots.push(hotspots.clone());
    }
    Ok(out)
}

/// Column names of a trace CSV.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceColumns {
    pub snapshot: String,
    pub function: String,
    pub node: String,
    pub rate: String,
}

impl Default for TraceColumns {
    fn default() -> Self {
        Self {
            snapshot: "snapshot".into(),
            function: "function_id".into(),
            node: "node_id".into(),
            rate: "rate".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TraceSource {
    pub path: PathBuf,
    pub columns: TraceColumns,
}

impl TraceSource {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self {
            path: path.into(),
            columns: TraceColumns::default(),
        }
    }
}

/// One matrix per distinct snapshot key, ascending, zero-filled.
pub fn ingest_trace(
    src: &TraceSource,
    topology: &Topology,
    functions: &[FunctionSpec],
) -> Result<Vec<WorkloadMatrix>> {
    let file = std::fs::File::open(&src.path).map_err(|e| Error::io(&src.path, e))?;
    read_trace(file, &src.columns, topology.node_count(), functions.len())
}

pub fn read_trace(
    reader: impl std::io::Read,
    columns: &TraceColumns,
    nodes: usize,
    functions: usize,
) -> Result<Vec<WorkloadMatrix>> {
    let parse_err = |message: String| Error::Parse {
        what: "trace",
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers().map_err(|e| parse_err(e.to_string()))?.clone();
    if headers.is_empty() {
        return Ok(Vec::new());
    }
    let find = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| parse_err(format!("missing column `{name}`")))
    };
    let c_snap = find(&columns.snapshot)?;
    let c_fn = find(&columns.function)?;
    let c_node = find(&columns.node)?;
    let c_rate = find(&columns.rate)?;

    let mut by_snapshot: BTreeMap<u64, WorkloadMatrix> = BTreeMap::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| parse_err(e.to_string()))?;
        let row = line + 2;
        let field = |c: usize| -> Result<&str> {
            record
                .get(c)
                .ok_or_else(|| parse_err(format!("row {row} is missing a field")))
        };
        let snap: u64 = field(c_snap)?
            .parse()
            .map_err(|_| parse_err(format!("row {row}: bad snapshot key")))?;
        let f: usize = field(c_fn)?
            .parse()
            .map_err(|_| parse_err(format!("row {row}: bad function id")))?;
        let i: usize = field(c_node)?
            .parse()
            .map_err(|_| parse_err(format!("row {row}: bad node id")))?;
        let rate: f64 = field(c_rate)?
            .parse()
            .map_err(|_| parse_err(format!("row {row}: bad rate")))?;
        if f >= functions {
            return Err(Error::UnknownId(format!("row {row}: function {f}")));
        }
        if i >= nodes {
            return Err(Error::UnknownId(format!("row {row}: node {i}")));
        }
        if !rate.is_finite() || rate < 0.0 {
            return Err(parse_err(format!("row {row}: negative or non-finite rate {rate}")));
        }
        let w = by_snapshot
            .entry(snap)
            .or_insert_with(|| WorkloadMatrix::zeros(functions, nodes));
        w.set(f, i, w.get(f, i) + rate);
    }
    Ok(by_snapshot.into_values().collect())
}

/// Write snapshots in the trace CSV layout, one row per matrix entry.
pub fn write_trace(path: impl AsRef<Path>, snapshots: &[WorkloadMatrix]) -> Result<()> {
    let path = path.as_ref();
    let mut wtr = csv::Writer::from_path(path).map_err(|e| Error::Parse {
        what: "trace",
        message: e.to_string(),
    })?;
    let io = |e: csv::Error| Error::Parse {
        what: "trace",
        message: e.to_string(),
    };
    wtr.write_record(["snapshot", "function_id", "node_id", "rate"])
        .map_err(io)?;
    for (s, w) in snapshots.iter().enumerate() {
        for f in 0..w.functions() {
            for i in 0..w.nodes() {
                wtr.write_record(&[
                    s.to_string(),
                    f.to_string(),
                    i.to_string(),
                    w.get(f, i).to_string(),
                ])
                .map_err(io)?;
            }
        }
    }
    wtr.flush().map_err(|e| Error::io(path, e))
}
