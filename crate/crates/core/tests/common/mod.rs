#![allow(dead_code, clippy::needless_range_loop)]

use edgeplace::model::{
    CoreDemand, DelayMatrix, FunctionSpec, NodeSpec, PlacementVector, RoutingMatrix, Scenario, Topology,
    WorkloadMatrix,
};
use edgeplace::routing::RoutingProblem;
use edgeplace::verify::{Decisions, FunctionDecision, DECISIONS_VERSION};
use rand::Rng;

/// Symmetric delays with a zero diagonal. Small integers make ties common.
pub fn random_delays(rng: &mut impl Rng, n: usize, max: u32) -> DelayMatrix {
    let mut rows = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let d = rng.gen_range(0..=max) as f64;
            rows[i][j] = d;
            rows[j][i] = d;
        }
    }
    DelayMatrix::from_rows(&rows).unwrap()
}

/// One function's routing problem with owned data.
#[derive(Debug, Clone)]
pub struct RoutingInstance {
    pub chosen: Vec<usize>,
    pub workload: Vec<f64>,
    pub delays: DelayMatrix,
    pub available: Vec<f64>,
    pub cores: Vec<f64>,
}

impl RoutingInstance {
    pub fn random(rng: &mut impl Rng, max_nodes: usize, max_chosen: usize) -> Self {
        let n = rng.gen_range(1..=max_nodes);
        let k = rng.gen_range(1..=max_chosen.min(n));
        let mut nodes: Vec<usize> = (0..n).collect();
        for i in 0..n {
            let j = rng.gen_range(i..n);
            nodes.swap(i, j);
        }
        let mut chosen = nodes[..k].to_vec();
        chosen.sort_unstable();
        let workload = (0..n)
            .map(|_| if rng.gen_bool(0.2) { 0.0 } else { rng.gen_range(0.0..10.0) })
            .collect();
        Self {
            chosen,
            workload,
            delays: random_delays(rng, n, 20),
            available: (0..n).map(|_| rng.gen_range(0.5..30.0)).collect(),
            cores: (0..n).map(|_| rng.gen_range(0.5..2.0)).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.workload.len()
    }

    pub fn problem(&self) -> RoutingProblem<'_> {
        RoutingProblem {
            chosen_nodes: self.chosen.clone(),
            workload_row: &self.workload,
            delays: &self.delays,
            available_cores: &self.available,
            cores_per_request: &self.cores,
        }
    }

    pub fn placement(&self) -> PlacementVector {
        let mut p = PlacementVector::empty(self.n());
        for &j in &self.chosen {
            p.0[j] = true;
        }
        p
    }

    /// A one-function scenario whose node cores equal the available cores.
    pub fn scenario(&self) -> Scenario {
        let n = self.n();
        Scenario {
            topology: Topology {
                nodes: (0..n)
                    .map(|id| NodeSpec {
                        id,
                        cores: self.available[id],
                        memory: 100.0,
                    })
                    .collect(),
                delays: self.delays.clone(),
            },
            functions: vec![FunctionSpec {
                id: 0,
                memory_req: 1.0,
                cores_per_request: CoreDemand::PerNode(self.cores.clone()),
                instance_cores: 0.0,
            }],
            workload: WorkloadMatrix::from_rows(std::slice::from_ref(&self.workload), n).unwrap(),
            criticality: None,
        }
    }

    pub fn decisions(&self, routing: &RoutingMatrix, total_delay: f64) -> Decisions {
        Decisions {
            version: DECISIONS_VERSION,
            candidate: None,
            alpha: None,
            workload: vec![self.workload.clone()],
            functions: vec![FunctionDecision {
                placement: self.placement(),
                routing: routing.clone(),
                residual: None,
            }],
            total_delay: Some(total_delay),
            total_cost: None,
        }
    }
}

/// Worst violation of row sums, exclusion and capacity.
pub fn routing_residual(inst: &RoutingInstance, x: &RoutingMatrix) -> f64 {
    let n = inst.n();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        if inst.workload[i] > 0.0 {
            let sum: f64 = (0..n).map(|j| x.get(i, j)).sum();
            worst = worst.max((sum - 1.0).abs());
        }
        for j in 0..n {
            worst = worst.max(-x.get(i, j));
            if !inst.chosen.contains(&j) {
                worst = worst.max(x.get(i, j).abs());
            }
        }
    }
    for &j in &inst.chosen {
        let used: f64 = (0..n).map(|i| inst.workload[i] * x.get(i, j) * inst.cores[j]).sum();
        worst = worst.max(used - inst.available[j]);
    }
    worst
}

/// A small joint instance with tight memory and cores so that capacity,
/// memory and instance reservations all bind some of the time.
pub fn random_joint_scenario(rng: &mut impl Rng, n: usize, f: usize) -> Scenario {
    let topology = Topology {
        nodes: (0..n)
            .map(|id| NodeSpec {
                id,
                cores: rng.gen_range(4..=30) as f64,
                memory: rng.gen_range(10..=40) as f64,
            })
            .collect(),
        delays: random_delays(rng, n, 12),
    };
    let functions = (0..f)
        .map(|id| {
            let cores = if rng.gen_bool(0.5) {
                CoreDemand::Uniform(rng.gen_range(1..=4) as f64 * 0.5)
            } else {
                CoreDemand::PerNode((0..n).map(|_| rng.gen_range(1..=4) as f64 * 0.5).collect())
            };
            FunctionSpec {
                id,
                memory_req: rng.gen_range(2..=20) as f64,
                cores_per_request: cores,
                instance_cores: rng.gen_range(0..=2) as f64,
            }
        })
        .collect();
    let rows: Vec<Vec<f64>> = (0..f)
        .map(|_| {
            (0..n)
                .map(|_| if rng.gen_bool(0.25) { 0.0 } else { rng.gen_range(0..=6) as f64 })
                .collect()
        })
        .collect();
    Scenario {
        topology,
        functions,
        workload: WorkloadMatrix::from_rows(&rows, n).unwrap(),
        criticality: None,
    }
}

/// `(nodes, functions)` with `nodes · functions ≤ limit`, drawn uniformly.
pub fn random_shape(rng: &mut impl Rng, limit: usize) -> (usize, usize) {
    let shapes: Vec<(usize, usize)> = (1..=limit)
        .flat_map(|n| (1..=limit / n).map(move |f| (n, f)))
        .collect();
    shapes[rng.gen_range(0..shapes.len())]
}
