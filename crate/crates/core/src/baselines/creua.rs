//! Criticality-first allocation: higher levels claim the nearest capacity,
//! lower levels take what is left.

use web_time::Instant;

use serde::{Deserialize, Serialize};

use super::{evaluate_routes, routing_from_flows, JointSolution, SIMPLIFIED_LABEL};
use crate::error::{Error, Result};
use crate::model::{PlacementVector, Scenario, WorkloadMatrix};

const TOL: f64 = 1e-12;

/// Ordinal criticality per function; larger is more critical.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CriticalityTag(pub Vec<u32>);

impl CriticalityTag {
    pub fn uniform(functions: usize) -> Self {
        Self(vec![0; functions])
    }

    /// Tags from the scenario, or a single level when absent.
    pub fn from_scenario(s: &Scenario) -> Self {
        s.criticality
            .clone()
            .map(Self)
            .unwrap_or_else(|| Self::uniform(s.function_count()))
    }
}

pub fn solve_creua(scenario: &Scenario, workload: &WorkloadMatrix, tags: &CriticalityTag) -> Result<JointSolution> {
    let started = Instant::now();
    let f_count = scenario.function_count();
    if tags.0.len() != f_count {
        return Err(Error::Dimension(format!(
            "{} criticality tags for {f_count} functions",
            tags.0.len()
        )));
    }
    let n = scenario.node_count();
    let nodes = &scenario.topology.nodes;
    let delays = &scenario.topology.delays;
    let mut cores: Vec<f64> = nodes.iter().map(|x| x.cores).collect();
    let mut mem: Vec<f64> = nodes.iter().map(|x| x.memory).collect();

    let mut order: Vec<usize> = (0..f_count).collect();
    order.sort_by(|&a, &b| {
        tags.0[b]
            .cmp(&tags.0[a])
            .then(workload.function_total(b).total_cmp(&workload.function_total(a)))
            .then(a.cmp(&b))
    });

    let mut placements = vec![PlacementVector::empty(n); f_count];
    let mut residual = vec![vec![0.0; n]; f_count];
    let mut flows_all = vec![vec![vec![0.0; n]; n]; f_count];

    for &f in &order {
        let func = &scenario.functions[f];
        let row = workload.row(f);
        for (i, &w) in row.iter().enumerate() {
            if w <= 0.0 {
                continue;
            }
            let mut rem = w;
            let mut nearest: Vec<usize> = (0..n).collect();
            nearest.sort_by(|&a, &b| delays.get(i, a).total_cmp(&delays.get(i, b)).then(a.cmp(&b)));
            for j in nearest {
                if rem <= TOL {
                    break;
                }
                let placed = placements[f].0[j];
                if !placed {
                    if mem[j] < func.memory_req || cores[j] - func.instance_cores <= TOL {
                        continue;
                    }
                    placements[f].0[j] = true;
                    mem[j] -= func.memory_req;
                    cores[j] -= func.instance_cores;
                }
                let take = rem.min(cores[j] / func.cores_at(j));
                if take <= 0.0 {
                    continue;
                }
                flows_all[f][i][j] += take;
                cores[j] = (cores[j] - take * func.cores_at(j)).max(0.0);
                rem -= take;
            }
            residual[f][i] = if rem > TOL { rem } else { 0.0 };
        }
        if placements[f].count() == 0 && row.iter().all(|&w| w <= 0.0) {
            // an idle function still gets one instance where it fits
            if let Some(j) = (0..n).find(|&j| mem[j] >= func.memory_req && cores[j] >= func.instance_cores) {
                placements[f].0[j] = true;
                mem[j] -= func.memory_req;
                cores[j] -= func.instance_cores;
            }
        }
    }
    let routes: Vec<_> = (0..f_count)
        .map(|f| routing_from_flows(workload.row(f), &flows_all[f], &placements[f]))
        .collect();
    let (t, c) = evaluate_routes(scenario, workload, &placements, &routes);
    Ok(JointSolution {
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
    })
}
