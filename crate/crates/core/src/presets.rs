//! Built-in scenarios on a five-node edge topology, plus seeded random ones.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{DelayMatrix, FunctionSpec, NodeSpec, Scenario, Topology, WorkloadMatrix};
use crate::workload::{generate_workloads, WorkloadGenConfig};

pub const NODE_CORES: [f64; 5] = [50.0, 50.0, 50.0, 25.0, 100.0];
pub const NODE_MEMORY_GB: [f64; 5] = [100.0, 100.0, 200.0, 50.0, 500.0];
pub const SMALL_PAYLOAD_MEMORY_GB: [f64; 4] = [50.0, 10.0, 10.0, 10.0];
pub const LARGE_PAYLOAD_FUNCTIONS: usize = 10;
pub const LARGE_PAYLOAD_MEMORY_GB: f64 = 10.0;

/// Five nodes along a metro line, ms.
pub const LINE_DELAYS_MS: [[f64; 5]; 5] = [
    [0.0, 10.0, 25.0, 40.0, 55.0],
    [10.0, 0.0, 15.0, 30.0, 45.0],
    [25.0, 15.0, 0.0, 15.0, 30.0],
    [40.0, 30.0, 15.0, 0.0, 15.0],
    [55.0, 45.0, 30.0, 15.0, 0.0],
];

/// Cores held by every running instance of a preset function.
pub const INSTANCE_CORES: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    SmallPayload,
    LargePayload,
}

impl Preset {
    pub const ALL: [Preset; 2] = [Preset::SmallPayload, Preset::LargePayload];

    pub fn name(self) -> &'static str {
        match self {
            Preset::SmallPayload => "small-payload",
            Preset::LargePayload => "large-payload",
        }
    }

    pub fn topology(self) -> Topology {
        Topology {
            nodes: (0..5)
                .map(|id| NodeSpec {
                    id,
                    cores: NODE_CORES[id],
                    memory: NODE_MEMORY_GB[id],
                })
                .collect(),
            delays: DelayMatrix::from_rows(&LINE_DELAYS_MS.map(|r| r.to_vec())).expect("square"),
        }
    }

    pub fn functions(self) -> Vec<FunctionSpec> {
        let mems: Vec<f64> = match self {
            Preset::SmallPayload => SMALL_PAYLOAD_MEMORY_GB.to_vec(),
            Preset::LargePayload => vec![LARGE_PAYLOAD_MEMORY_GB; LARGE_PAYLOAD_FUNCTIONS],
        };
        mems.into_iter()
            .enumerate()
            .map(|(id, m)| FunctionSpec::new(id, m, 1.0).with_instance_cores(INSTANCE_CORES))
            .collect()
    }

    /// Generator settings sized so total demand stays well inside the
    /// topology's 275 cores.
    pub fn workload_config(self) -> WorkloadGenConfig {
        let rate_range = match self {
            Preset::SmallPayload => (15.0, 35.0),
            Preset::LargePayload => (4.0, 12.0),
        };
        WorkloadGenConfig {
            rate_range,
            ..WorkloadGenConfig::default()
        }
    }

    /// The preset with the first generated snapshot as its workload.
    pub fn scenario(self) -> Scenario {
        let topology = self.topology();
        let functions = self.functions();
        let cfg = WorkloadGenConfig {
            n_snapshots: 1,
            ..self.workload_config()
        };
        let workload = generate_workloads(&cfg, &topology, &functions)
            .expect("preset generator config is valid")
            .remove(0);
        Scenario {
            topology,
            functions,
            workload,
            criticality: None,
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown preset '{s}' (expected small-payload or large-payload)")))
    }
}

/// A random valid scenario: nodes on a plane with delay proportional to
/// distance, capacities and memory demands drawn from preset-like ranges.
pub fn random_scenario(nodes: usize, functions: usize, seed: u64) -> Result<Scenario> {
    if nodes == 0 {
        return Err(Error::Config("a scenario needs at least one node".into()));
    }
    if functions == 0 {
        return Err(Error::Config("a scenario needs at least one function".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pos: Vec<(f64, f64)> = (0..nodes).map(|_| (rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0))).collect();
    let delays: Vec<Vec<f64>> = pos
        .iter()
        .map(|a| {
            pos.iter()
                .map(|b| {
                    let d = ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt();
                    (d * 50.0 * 1000.0).round() / 1000.0
                })
                .collect()
        })
        .collect();
    let topology = Topology {
        nodes: (0..nodes)
            .map(|id| NodeSpec {
                id,
                cores: rng.gen_range(5..=20) as f64 * 5.0,
                memory: rng.gen_range(1..=10) as f64 * 50.0,
            })
            .collect(),
        delays: DelayMatrix::from_rows(&delays)?,
    };
    let funcs: Vec<FunctionSpec> = (0..functions)
        .map(|id| FunctionSpec::new(id, rng.gen_range(1..=5) as f64 * 10.0, 1.0).with_instance_cores(INSTANCE_CORES))
        .collect();
    let per_function = topology.total_cores() / (2.0 * functions as f64);
    let cfg = WorkloadGenConfig {
        seed,
        n_snapshots: 1,
        rate_range: (0.25 * per_function, per_function),
        ..WorkloadGenConfig::default()
    };
    let workload: WorkloadMatrix = generate_workloads(&cfg, &topology, &funcs)?.remove(0);
    let s = Scenario {
        topology,
        functions: funcs,
        workload,
        criticality: None,
    };
    s.validate().map_err(Error::Validation)?;
    Ok(s)
}
