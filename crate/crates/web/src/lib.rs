//! Browser bindings for three interactive views: a routing explorer, a
//! reward surface and a baseline comparison. Each view has a plain Rust
//! function returning JSON, wrapped for JavaScript by `wasm_bindgen`.

use edgeplace::bench::{evaluate_candidate, generate_snapshot_sets, Candidate, EvalOptions, HarnessConfig};
use edgeplace::env::{function_cost, normalize_and_reward, RewardBounds, Violations, R_PENALTY};
use edgeplace::model::{PlacementVector, Scenario, WorkloadMatrix};
use edgeplace::presets::Preset;
use edgeplace::routing::{solve_routing, RoutingProblem, RoutingStatus};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Largest snapshot count the comparison view accepts.
pub const MAX_SNAPSHOTS: usize = 50;
/// Largest grid side the reward surface accepts.
pub const MAX_GRID: usize = 201;

fn preset(name: &str) -> Result<Preset, String> {
    name.parse::<Preset>().map_err(|e| e.to_string())
}

/// The first `count` evaluation snapshots for `seed`.
fn eval_snapshots(scenario: &Scenario, seed: u64, count: usize) -> Result<Vec<WorkloadMatrix>, String> {
    let cfg = HarnessConfig {
        eval_snapshots: count.max(1),
        train_snapshots: 1,
        ..HarnessConfig::default()
    };
    generate_snapshot_sets(scenario, &cfg, seed)
        .map(|(_, eval)| eval)
        .map_err(|e| e.to_string())
}

/// Route one function of a preset snapshot over the nodes set in
/// `placement` (a string of `0`/`1`, one character per node).
pub fn routing_explorer_json(preset_name: &str, function: usize, placement: &str, seed: u64) -> Result<String, String> {
    let scenario = preset(preset_name)?.scenario();
    let n = scenario.node_count();
    if function >= scenario.function_count() {
        return Err(format!(
            "function {function} does not exist; the preset has {}",
            scenario.function_count()
        ));
    }
    let bits: Vec<bool> = placement
        .chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            other => Err(format!("placement may only contain 0 and 1, found '{other}'")),
        })
        .collect::<Result<_, _>>()?;
    if bits.len() != n {
        return Err(format!("placement has {} entries for {n} nodes", bits.len()));
    }
    let placement = PlacementVector(bits);
    let workload = eval_snapshots(&scenario, seed, 1)?.remove(0);
    let func = &scenario.functions[function];
    let available: Vec<f64> = scenario
        .topology
        .nodes
        .iter()
        .enumerate()
        .map(|(j, node)| {
            if placement.contains(j) {
                (node.cores - func.instance_cores).max(0.0)
            } else {
                node.cores
            }
        })
        .collect();
    let cores_per_request = func.cores_row(n);
    let row = workload.row(function);
    let sol = solve_routing(&RoutingProblem {
        chosen_nodes: edgeplace::routing::chosen_nodes(&placement),
        workload_row: row,
        delays: &scenario.topology.delays,
        available_cores: &available,
        cores_per_request: &cores_per_request,
    });
    let rate: f64 = row.iter().sum();
    let feasible = sol.status == RoutingStatus::Optimal;
    let out = json!({
        "preset": preset_name,
        "function": function,
        "memory_gb": func.memory_req,
        "workload": row,
        "available_cores": available,
        "feasible": feasible,
        "routing": sol.routing.rows(),
        "total_delay": if feasible { Value::from(sol.objective_delay) } else { Value::Null },
        "delay_ms_per_req": if feasible && rate > 0.0 { Value::from(sol.objective_delay / rate) } else { Value::Null },
        "cost": if feasible { Value::from(function_cost(func, &placement, &sol.routing, row)) } else { Value::Null },
    });
    Ok(out.to_string())
}

/// Reward over a `steps × steps` grid of delay and cost, both spanning
/// `[0, 1]` so normalized values run from −1 to 1.
pub fn reward_surface_json(alpha: f64, steps: usize) -> Result<String, String> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(format!("alpha {alpha} is outside [0, 1]"));
    }
    if !(2..=MAX_GRID).contains(&steps) {
        return Err(format!("grid size must be between 2 and {MAX_GRID}"));
    }
    let axis: Vec<f64> = (0..steps).map(|k| k as f64 / (steps - 1) as f64).collect();
    let clean = Violations::default();
    let rewards: Vec<Vec<f64>> = axis
        .iter()
        .map(|&c| {
            axis.iter()
                .map(|&t| {
                    let mut bounds = RewardBounds {
                        t_min: 0.0,
                        t_max: 1.0,
                        c_min: 0.0,
                        c_max: 1.0,
                    };
                    normalize_and_reward(t, c, &mut bounds, alpha, &clean).2
                })
                .collect()
        })
        .collect();
    Ok(json!({ "alpha": alpha, "delay": axis, "cost": axis, "reward": rewards, "penalty": R_PENALTY }).to_string())
}

/// Baseline averages on a preset's evaluation snapshots.
pub fn compare_baselines_json(preset_name: &str, alpha: f64, snapshots: usize, seed: u64, node_limit: u64) -> Result<String, String> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(format!("alpha {alpha} is outside [0, 1]"));
    }
    if !(1..=MAX_SNAPSHOTS).contains(&snapshots) {
        return Err(format!("snapshot count must be between 1 and {MAX_SNAPSHOTS}"));
    }
    let scenario = preset(preset_name)?.scenario();
    let workloads = eval_snapshots(&scenario, seed, snapshots)?;
    let cfg = HarnessConfig {
        milp_node_limit: node_limit.max(1),
        warmup_decisions: 0,
        ..HarnessConfig::default()
    };
    let opts = EvalOptions::from_config(&cfg, true);
    let mut rows = Vec::new();
    for c in [Candidate::Neptune, Candidate::Vsvbp, Candidate::Creua] {
        let (_, m) = evaluate_candidate(c, &scenario, &workloads, alpha, None, &opts).map_err(|e| e.to_string())?;
        rows.push(serde_json::to_value(&m).map_err(|e| e.to_string())?);
    }
    Ok(json!({ "preset": preset_name, "alpha": alpha, "rows": rows }).to_string())
}

#[wasm_bindgen]
pub fn routing_explorer(preset: &str, function: usize, placement: &str, seed: u32) -> Result<String, JsError> {
    routing_explorer_json(preset, function, placement, seed.into()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn reward_surface(alpha: f64, steps: usize) -> Result<String, JsError> {
    reward_surface_json(alpha, steps).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn compare_baselines(preset: &str, alpha: f64, snapshots: usize, seed: u32, node_limit: u32) -> Result<String, JsError> {
    compare_baselines_json(preset, alpha, snapshots, seed.into(), node_limit.into()).map_err(|e| JsError::new(&e))
}
