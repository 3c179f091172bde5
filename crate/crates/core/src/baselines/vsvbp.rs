//! Variable-size bin packing: serve each function from as few nodes as
//! possible, preferring nodes that are already active and then the largest.

use web_time::Instant;

use super::{evaluate_routes, routing_from_flows, JointSolution, SIMPLIFIED_LABEL};
use crate::model::{PlacementVector, Scenario, WorkloadMatrix};

const TOL: f64 = 1e-12;

pub fn solve_vsvbp(scenario: &Scenario, workload: &WorkloadMatrix) -> JointSolution {
    let started = Instant::now();
    let n = scenario.node_count();
    let nodes = &scenario.topology.nodes;
    let delays = &scenario.topology.delays;
    let mut cores: Vec<f64> = nodes.iter().map(|x| x.cores).collect();
    let mut mem: Vec<f64> = nodes.iter().map(|x| x.memory).collect();
    let mut active = vec![false; n];

    let demand = |f: usize| {
        let func = &scenario.functions[f];
        let mean_k = (0..n).map(|j| func.cores_at(j)).sum::<f64>() / n as f64;
        workload.function_total(f) * mean_k + func.instance_cores
    };
    let mut order: Vec<usize> = (0..scenario.function_count()).collect();
    order.sort_by(|&a, &b| {
        demand(b)
            .total_cmp(&demand(a))
            .then(scenario.functions[b].memory_req.total_cmp(&scenario.functions[a].memory_req))
            .then(a.cmp(&b))
    });

    let f_count = scenario.function_count();
    let mut placements = vec![PlacementVector::empty(n); f_count];
    let mut routes = Vec::with_capacity(f_count);
    let mut residual = vec![vec![0.0; n]; f_count];
    let mut flows_all = vec![vec![vec![0.0; n]; n]; f_count];

    for &f in &order {
        let func = &scenario.functions[f];
        let row = workload.row(f);
        let total: f64 = row.iter().sum();

        let mut candidates: Vec<usize> = (0..n).collect();
        candidates.sort_by(|&a, &b| {
            active[b]
                .cmp(&active[a])
                .then(cores[b].total_cmp(&cores[a]))
                .then(mem[b].total_cmp(&mem[a]))
                .then(a.cmp(&b))
        });
        let mut open = Vec::new();
        let mut absorbed = 0.0;
        for j in candidates {
            if !open.is_empty() && absorbed >= total - TOL {
                break;
            }
            if mem[j] < func.memory_req || cores[j] < func.instance_cores {
                continue;
            }
            let cap = (cores[j] - func.instance_cores) / func.cores_at(j);
            if cap <= TOL && total > 0.0 {
                continue;
            }
            open.push(j);
            absorbed += cap;
        }
        for &j in &open {
            mem[j] -= func.memory_req;
            cores[j] -= func.instance_cores;
            active[j] = true;
            placements[f].0[j] = true;
        }

        let flows = &mut flows_all[f];
        for (i, &w) in row.iter().enumerate() {
            let mut rem = w;
            let mut nearest = open.clone();
            nearest.sort_by(|&a, &b| delays.get(i, a).total_cmp(&delays.get(i, b)).then(a.cmp(&b)));
            for j in nearest {
                if rem <= TOL {
                    break;
                }
                let take = rem.min(cores[j] / func.cores_at(j));
                if take <= 0.0 {
                    continue;
                }
                flows[i][j] += take;
                cores[j] = (cores[j] - take * func.cores_at(j)).max(0.0);
                rem -= take;
            }
            residual[f][i] = if rem > TOL { rem } else { 0.0 };
        }
    }
    for f in 0..f_count {
        routes.push(routing_from_flows(workload.row(f), &flows_all[f], &placements[f]));
    }
    let (t, c) = evaluate_routes(scenario, workload, &placements, &routes);
    JointSolution {
        placements,
        routes,
        residual,
        total_delay: t,
        total_cost: c,
        objective: None,
        solve_time_ms: started.elapsed().as_secs_f64() * 1e3,
        optimal: false,
        nodes_explored: 0,
        label: Some(SIMPLIFIED_LABEL.to_string()),
    }
}
