//! Decisions files and an independent checker for them.
//!
//! A decisions file records, for one workload snapshot, where every function
//! runs and how its requests are routed. The checker recomputes everything
//! from the scenario and the recorded workload and trusts nothing else.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::JointSolution;
use crate::env::EpisodeRecord;
use crate::error::{Error, Result};
use crate::model::{PlacementVector, RoutingMatrix, Scenario, WorkloadMatrix};

pub const DECISIONS_VERSION: u32 = 1;

/// Slack on routing fractions.
pub const FRACTION_TOL: f64 = 1e-7;
/// Relative slack on capacities and recomputed totals.
pub const RELATIVE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionDecision {
    pub placement: PlacementVector,
    pub routing: RoutingMatrix,
    /// Unserved request rate per source node; absent means all served.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decisions {
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidate: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    pub workload: Vec<Vec<f64>>,
    pub functions: Vec<FunctionDecision>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_delay: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_cost: Option<f64>,
}

impl Decisions {
    pub fn from_joint(sol: &JointSolution, workload: &WorkloadMatrix) -> Self {
        Self {
            version: DECISIONS_VERSION,
            candidate: None,
            alpha: None,
            workload: workload.rows(),
            functions: sol
                .placements
                .iter()
                .zip(&sol.routes)
                .zip(&sol.residual)
                .map(|((p, x), r)| FunctionDecision {
                    placement: p.clone(),
                    routing: x.clone(),
                    residual: r.iter().any(|&v| v > 0.0).then(|| r.clone()),
                })
                .collect(),
            total_delay: Some(sol.total_delay),
            total_cost: Some(sol.total_cost),
        }
    }

    /// Functions whose step was penalized appear unplaced, with all of
    /// their workload as residual.
    pub fn from_episode(ep: &EpisodeRecord, workload: &WorkloadMatrix) -> Self {
        let n = workload.nodes();
        Self {
            version: DECISIONS_VERSION,
            candidate: None,
            alpha: None,
            workload: workload.rows(),
            functions: (0..workload.functions())
                .map(|f| match (&ep.placements[f], &ep.routes[f]) {
                    (Some(p), Some(x)) => FunctionDecision {
                        placement: p.clone(),
                        routing: x.clone(),
                        residual: None,
                    },
                    _ => FunctionDecision {
                        placement: PlacementVector::empty(n),
                        routing: RoutingMatrix::zeros(n),
                        residual: Some(workload.row(f).to_vec()),
                    },
                })
                .collect(),
            total_delay: Some(ep.total_delay),
            total_cost: Some(ep.total_cost),
        }
    }

    pub fn with_label(mut self, candidate: &str, alpha: f64) -> Self {
        self.candidate = Some(candidate.to_string());
        self.alpha = Some(alpha);
        self
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("decisions serialize")
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            what: "decisions file",
            message: e.to_string(),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json_string()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Issue {
    Version(u32),
    Shape(String),
    NonFinite { function: usize },
    /// Routing fractions out of `[0, 1]`.
    Range { function: usize, source: usize, node: usize, value: f64 },
    /// Traffic sent to a node without an instance.
    Exclusion { function: usize, source: usize, node: usize, value: f64 },
    /// Row sum differs from the served share.
    Conservation { function: usize, source: usize, sum: f64, expected: f64 },
    Residual { function: usize, source: usize, value: f64 },
    Capacity { node: usize, used: f64, available: f64 },
    Memory { node: usize, used: f64, available: f64 },
    DelayMismatch { claimed: f64, recomputed: f64 },
    CostMismatch { claimed: f64, recomputed: f64 },
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Issue::Version(v) => write!(f, "unsupported decisions version {v}"),
            Issue::Shape(m) => write!(f, "shape: {m}"),
            Issue::NonFinite { function } => write!(f, "non-finite value in function {function}"),
            Issue::Range { function, source, node, value } => {
                write!(f, "range: x[{function}][{source}][{node}] = {value} outside [0, 1]")
            }
            Issue::Exclusion { function, source, node, value } => write!(
                f,
                "exclusion: function {function} routes {value} of node {source}'s traffic to node {node}, which has no instance"
            ),
            Issue::Conservation { function, source, sum, expected } => write!(
                f,
                "conservation: function {function} source {source} fractions sum to {sum}, expected {expected}"
            ),
            Issue::Residual { function, source, value } => {
                write!(f, "residual: function {function} source {source} has residual {value} outside [0, w]")
            }
            Issue::Capacity { node, used, available } => {
                write!(f, "capacity: node {node} uses {used} cores of {available}")
            }
            Issue::Memory { node, used, available } => {
                write!(f, "memory: node {node} holds {used} GB of {available}")
            }
            Issue::DelayMismatch { claimed, recomputed } => {
                write!(f, "delay: claimed {claimed}, recomputed {recomputed}")
            }
            Issue::CostMismatch { claimed, recomputed } => {
                write!(f, "cost: claimed {claimed}, recomputed {recomputed}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub issues: Vec<Issue>,
    pub total_delay: f64,
    pub total_cost: f64,
    /// Request rate actually served.
    pub served: f64,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.issues.is_empty()
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= RELATIVE_TOL * a.abs().max(b.abs()).max(1.0)
}

/// Check a decisions file against a scenario.
pub fn verify_decisions(scenario: &Scenario, d: &Decisions) -> VerifyReport {
    let n = scenario.node_count();
    let f_count = scenario.function_count();
    let mut issues = Vec::new();
    let report = |issues: Vec<Issue>| VerifyReport {
        issues,
        total_delay: f64::NAN,
        total_cost: f64::NAN,
        served: f64::NAN,
    };
    if d.version != DECISIONS_VERSION {
        return report(vec![Issue::Version(d.version)]);
    }
    if d.functions.len() != f_count || d.workload.len() != f_count {
        return report(vec![Issue::Shape(format!(
            "{} decisions and {} workload rows for {f_count} functions",
            d.functions.len(),
            d.workload.len()
        ))]);
    }
    for (f, fd) in d.functions.iter().enumerate() {
        let bad = fd.placement.len() != n
            || fd.routing.len() != n
            || d.workload[f].len() != n
            || fd.residual.as_ref().is_some_and(|r| r.len() != n);
        if bad {
            return report(vec![Issue::Shape(format!("function {f} does not match {n} nodes"))]);
        }
        let finite = fd.routing.rows().iter().flatten().all(|v| v.is_finite())
            && d.workload[f].iter().all(|v| v.is_finite() && *v >= 0.0)
            && fd.residual.iter().flatten().all(|v| v.is_finite());
        if !finite {
            issues.push(Issue::NonFinite { function: f });
        }
    }
    if !issues.is_empty() {
        return report(issues);
    }

    let nodes = &scenario.topology.nodes;
    let delays = &scenario.topology.delays;
    let mut cores_used = vec![0.0; n];
    let mut mem_used = vec![0.0; n];
    let (mut delay, mut cost, mut served) = (0.0, 0.0, 0.0);
    for (f, fd) in d.functions.iter().enumerate() {
        let func = &scenario.functions[f];
        let w = &d.workload[f];
        for j in 0..n {
            if fd.placement.contains(j) {
                mem_used[j] += func.memory_req;
                cores_used[j] += func.instance_cores;
                cost += func.instance_cores;
            }
        }
        for i in 0..n {
            let res = fd.residual.as_ref().map_or(0.0, |r| r[i]);
            if res < -FRACTION_TOL || res > w[i] * (1.0 + RELATIVE_TOL) + FRACTION_TOL {
                issues.push(Issue::Residual {
                    function: f,
                    source: i,
                    value: res,
                });
            }
            let mut sum = 0.0;
            for j in 0..n {
                let x = fd.routing.get(i, j);
                if !(-FRACTION_TOL..=1.0 + FRACTION_TOL).contains(&x) {
                    issues.push(Issue::Range {
                        function: f,
                        source: i,
                        node: j,
                        value: x,
                    });
                }
                if !fd.placement.contains(j) && x.abs() > FRACTION_TOL {
                    issues.push(Issue::Exclusion {
                        function: f,
                        source: i,
                        node: j,
                        value: x,
                    });
                }
                sum += x;
                let flow = x * w[i];
                cores_used[j] += flow * func.cores_at(j);
                cost += flow * func.cores_at(j);
                delay += flow * delays.get(i, j);
                served += flow;
            }
            let expected = if w[i] > 0.0 {
                1.0 - res / w[i]
            } else if fd.placement.count() > 0 {
                1.0
            } else {
                0.0
            };
            if (sum - expected).abs() > FRACTION_TOL {
                issues.push(Issue::Conservation {
                    function: f,
                    source: i,
                    sum,
                    expected,
                });
            }
        }
    }
    for j in 0..n {
        let cap = nodes[j].cores;
        if cores_used[j] > cap + RELATIVE_TOL * cap.max(1.0) + FRACTION_TOL {
            issues.push(Issue::Capacity {
                node: j,
                used: cores_used[j],
                available: cap,
            });
        }
        let mem = nodes[j].memory;
        if mem_used[j] > mem + RELATIVE_TOL * mem.max(1.0) {
            issues.push(Issue::Memory {
                node: j,
                used: mem_used[j],
                available: mem,
            });
        }
    }
    if let Some(claimed) = d.total_delay {
        if !close(claimed, delay) {
            issues.push(Issue::DelayMismatch {
                claimed,
                recomputed: delay,
            });
        }
    }
    if let Some(claimed) = d.total_cost {
        if !close(claimed, cost) {
            issues.push(Issue::CostMismatch {
                claimed,
                recomputed: cost,
            });
        }
    }
    VerifyReport {
        issues,
        total_delay: delay,
        total_cost: cost,
        served,
    }
}
