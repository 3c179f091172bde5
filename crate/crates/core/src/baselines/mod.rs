//! Reference placement strategies: an exact joint optimizer and two greedy
//! heuristics.

mod creua;
mod joint;
mod vsvbp;

pub use creua::{solve_creua, CriticalityTag};
pub use joint::{enumerate_joint, solve_joint_milp, JointBudget};
pub use vsvbp::solve_vsvbp;

use serde::{Deserialize, Serialize};

use crate::env::{function_cost, normalize};
use crate::model::{PlacementVector, RoutingMatrix, Scenario, WorkloadMatrix};
use crate::routing::total_delay;

/// Label attached to heuristics rebuilt from short prose descriptions.
pub const SIMPLIFIED_LABEL: &str = "simplified interpretation";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointSolution {
    pub placements: Vec<PlacementVector>,
    pub routes: Vec<RoutingMatrix>,
    /// Unallocated request rate per function and source node.
    pub residual: Vec<Vec<f64>>,
    pub total_delay: f64,
    pub total_cost: f64,
    /// Weighted normalized objective, for the exact solver.
    pub objective: Option<f64>,
    pub solve_time_ms: f64,
    /// True when the search finished within its budget.
    pub optimal: bool,
    pub nodes_explored: u64,
    pub label: Option<String>,
}

impl JointSolution {
    pub fn total_residual(&self) -> f64 {
        self.residual.iter().flatten().sum()
    }

    /// Every function has an instance and every request is served.
    pub fn fully_allocated(&self) -> bool {
        self.placements.iter().all(|p| p.count() > 0) && self.total_residual() <= 1e-9
    }
}

/// Recompute `(T, C)` from placements and routes.
pub fn evaluate_routes(
    scenario: &Scenario,
    workload: &WorkloadMatrix,
    placements: &[PlacementVector],
    routes: &[RoutingMatrix],
) -> (f64, f64) {
    let delays = &scenario.topology.delays;
    let mut t = 0.0;
    let mut c = 0.0;
    for (f, func) in scenario.functions.iter().enumerate() {
        let row = workload.row(f);
        t += total_delay(&routes[f], row, delays);
        c += function_cost(func, &placements[f], &routes[f], row);
    }
    (t, c)
}

/// `α·C' + (1−α)·T'` with both terms normalized onto `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objective {
    pub alpha: f64,
    pub t_max: f64,
    pub c_max: f64,
}

impl Objective {
    pub fn value(&self, t: f64, c: f64) -> f64 {
        self.alpha * normalize(c, 0.0, self.c_max) + (1.0 - self.alpha) * normalize(t, 0.0, self.t_max)
    }

    /// Slope of the objective in `T`.
    pub(crate) fn delay_weight(&self) -> f64 {
        if self.t_max > 0.0 {
            2.0 * (1.0 - self.alpha) / self.t_max
        } else {
            0.0
        }
    }

    /// Slope of the objective in `C`.
    pub(crate) fn cost_weight(&self) -> f64 {
        if self.c_max > 0.0 {
            2.0 * self.alpha / self.c_max
        } else {
            0.0
        }
    }
}

/// Build routing fractions from absolute flows `flows[i][j]` (req/s from
/// source `i` served at node `j`). Zero-workload rows go to the lowest-index
/// instance.
pub(crate) fn routing_from_flows(row: &[f64], flows: &[Vec<f64>], placement: &PlacementVector) -> RoutingMatrix {
    let n = row.len();
    let mut x = RoutingMatrix::zeros(n);
    let first = placement.0.iter().position(|&b| b);
    for i in 0..n {
        if row[i] > 0.0 {
            for j in 0..n {
                if flows[i][j] > 0.0 {
                    x.set(i, j, flows[i][j] / row[i]);
                }
            }
        } else if let Some(j) = first {
            x.set(i, j, 1.0);
        }
    }
    x
}
