//! Episodic placement environment.
//!
//! Functions are placed one at a time in priority order. Each step takes a
//! node subset for the head of the queue, routes its workload over that
//! subset, charges resources and returns a normalized reward.

use std::io::Write;
use web_time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{
    DeploymentState, FunctionSpec, PlacementVector, RoutingMatrix, Scenario, Topology, WorkloadMatrix,
};
use crate::rl::{ActMode, PolicyNetwork, Transition};
use crate::routing::{chosen_nodes, solve_routing, RoutingProblem, RoutingStatus};

/// Reward for any step that breaks a constraint.
pub const R_PENALTY: f64 = -2.0;

const COMMIT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PriorityMode {
    /// Descending total workload, then descending memory, then ascending id.
    #[default]
    Workload,
    /// Descending memory, then descending total workload, then ascending id.
    Memory,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionQueue {
    order: Vec<usize>,
    /// Priority key of every function, indexed by function id.
    keys: Vec<f64>,
    cursor: usize,
}

impl FunctionQueue {
    pub fn head(&self) -> Option<usize> {
        self.order.get(self.cursor).copied()
    }

    /// Functions not yet placed, head first.
    pub fn remaining(&self) -> &[usize] {
        &self.order[self.cursor..]
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn key(&self, f: usize) -> f64 {
        self.keys[f]
    }

    pub fn pop(&mut self) -> Option<usize> {
        let h = self.head()?;
        self.cursor += 1;
        Some(h)
    }

    pub fn is_empty(&self) -> bool {
        self.cursor >= self.order.len()
    }

    pub fn len(&self) -> usize {
        self.order.len() - self.cursor
    }
}

pub fn make_queue(functions: &[FunctionSpec], workload: &WorkloadMatrix, mode: PriorityMode) -> FunctionQueue {
    let totals: Vec<f64> = (0..functions.len()).map(|f| workload.function_total(f)).collect();
    let mut order: Vec<usize> = (0..functions.len()).collect();
    order.sort_by(|&a, &b| {
        let (wa, wb) = (totals[a], totals[b]);
        let (ma, mb) = (functions[a].memory_req, functions[b].memory_req);
        let primary = match mode {
            PriorityMode::Workload => wb.total_cmp(&wa).then(mb.total_cmp(&ma)),
            PriorityMode::Memory => mb.total_cmp(&ma).then(wb.total_cmp(&wa)),
        };
        primary.then(functions[a].id.cmp(&functions[b].id))
    });
    let keys = match mode {
        PriorityMode::Workload => totals,
        PriorityMode::Memory => functions.iter().map(|f| f.memory_req).collect(),
    };
    FunctionQueue {
        order,
        keys,
        cursor: 0,
    }
}

/// Observation `[D A W M T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    /// Delays, row-major N².
    pub d: Vec<f64>,
    /// Remaining `(cores, memory)` per node, interleaved.
    pub a: Vec<f64>,
    /// Workload row of the head function.
    pub w: Vec<f64>,
    /// Head memory, then mean and population std of the memory of the
    /// functions queued behind it.
    pub m: [f64; 3],
    /// Cumulative routed delay.
    pub t: f64,
}

pub fn state_len(n: usize) -> usize {
    n * n + 3 * n + 4
}

impl EnvState {
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.len());
        v.extend_from_slice(&self.d);
        v.extend_from_slice(&self.a);
        v.extend_from_slice(&self.w);
        v.extend_from_slice(&self.m);
        v.push(self.t);
        v
    }

    pub fn len(&self) -> usize {
        self.d.len() + self.a.len() + self.w.len() + 4
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Short hex digest of the feature bits.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for x in self.to_vec() {
            h.update(x.to_bits().to_le_bytes());
        }
        h.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Observation for the head of `queue`. With an exhausted queue the workload
/// and memory features are zero.
pub fn build_state(
    deployment: &DeploymentState,
    queue: &FunctionQueue,
    topology: &Topology,
    functions: &[FunctionSpec],
    workload: &WorkloadMatrix,
) -> EnvState {
    let n = topology.node_count();
    let a = deployment
        .available_cores
        .iter()
        .zip(&deployment.available_memory)
        .flat_map(|(&k, &m)| [k, m])
        .collect();
    let (w, m) = match queue.head() {
        Some(f) => {
            let rest: Vec<f64> = queue.remaining()[1..]
                .iter()
                .map(|&g| functions[g].memory_req)
                .collect();
            let (mean, std) = if rest.is_empty() {
                (0.0, 0.0)
            } else {
                let k = rest.len() as f64;
                let mean = rest.iter().sum::<f64>() / k;
                let var = rest.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / k;
                (mean, var.sqrt())
            };
            (workload.row(f).to_vec(), [functions[f].memory_req, mean, std])
        }
        None => (vec![0.0; n], [0.0; 3]),
    };
    EnvState {
        d: topology.delays.as_slice().to_vec(),
        a,
        w,
        m,
        t: deployment.cumulative_delay,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardBounds {
    pub t_min: f64,
    pub t_max: f64,
    pub c_min: f64,
    pub c_max: f64,
}

impl RewardBounds {
    /// Analytic bounds: `T ∈ [0, t_max_bound]`, `C ∈ [0, Σ k_i]`.
    pub fn analytic(topology: &Topology, workload: &WorkloadMatrix) -> Self {
        Self {
            t_min: 0.0,
            t_max: t_max_bound(topology, workload),
            c_min: 0.0,
            c_max: topology.total_cores(),
        }
    }

    /// Widen to include an observed `(T, C)`.
    pub fn observe(&mut self, t: f64, c: f64) {
        self.t_min = self.t_min.min(t);
        self.t_max = self.t_max.max(t);
        self.c_min = self.c_min.min(c);
        self.c_max = self.c_max.max(c);
    }
}

/// Cumulative delay if every request visited every node from its source.
pub fn t_max_bound(topology: &Topology, workload: &WorkloadMatrix) -> f64 {
    let n = topology.node_count();
    let row_sums: Vec<f64> = (0..n).map(|i| topology.delays.row(i).iter().sum()).collect();
    (0..workload.functions())
        .map(|f| {
            workload
                .row(f)
                .iter()
                .zip(&row_sums)
                .map(|(w, s)| w * s)
                .sum::<f64>()
        })
        .sum()
}

/// Map `v` from `[lo, hi]` onto `[-1, 1]`, clamped. A degenerate range maps to −1.
pub fn normalize(v: f64, lo: f64, hi: f64) -> f64 {
    if hi - lo <= 0.0 {
        return -1.0;
    }
    (2.0 * (v - lo) / (hi - lo) - 1.0).clamp(-1.0, 1.0)
}

/// Normalized delay, normalized cost and reward. `bounds` are widened with
/// the observation after the reward is computed, unless a violation fired.
pub fn normalize_and_reward(
    t: f64,
    c: f64,
    bounds: &mut RewardBounds,
    alpha: f64,
    violations: &Violations,
) -> (f64, f64, f64) {
    let tn = normalize(t, bounds.t_min, bounds.t_max);
    let cn = normalize(c, bounds.c_min, bounds.c_max);
    if violations.any() {
        return (tn, cn, R_PENALTY);
    }
    let r = -(alpha * cn + (1.0 - alpha) * tn);
    bounds.observe(t, c);
    (tn, cn, r)
}

/// Cores consumed on the chosen nodes by routed requests.
pub fn compute_cost_increment(
    routing: &RoutingMatrix,
    workload_row: &[f64],
    cores_per_request: &[f64],
    placement: &PlacementVector,
) -> f64 {
    let mut total = 0.0;
    for j in chosen_nodes(placement) {
        for (i, &w) in workload_row.iter().enumerate() {
            total += routing.get(i, j) * w * cores_per_request[j];
        }
    }
    total
}

/// Full cost of one function's deployment: reserved instance cores plus
/// routed request cores.
pub fn function_cost(
    function: &FunctionSpec,
    placement: &PlacementVector,
    routing: &RoutingMatrix,
    workload_row: &[f64],
) -> f64 {
    let n = workload_row.len();
    placement.count() as f64 * function.instance_cores
        + compute_cost_increment(routing, workload_row, &function.cores_row(n), placement)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violations {
    pub empty_placement: bool,
    pub memory: bool,
    pub cores: bool,
    pub routing_infeasible: bool,
}

impl Violations {
    pub fn any(&self) -> bool {
        self.empty_placement || self.memory || self.cores || self.routing_infeasible
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub function: usize,
    pub placement: PlacementVector,
    pub routing_status: Option<RoutingStatus>,
    pub violations: Violations,
    pub step_delay: f64,
    pub step_cost: f64,
    /// Wall-clock seconds spent in the routing solver.
    #[serde(skip)]
    pub routing_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub next_state: EnvState,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    pub alpha: f64,
    pub priority: PriorityMode,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            alpha: 0.0,
            priority: PriorityMode::Workload,
        }
    }
}

/// One episode over a fixed workload snapshot.
#[derive(Debug, Clone)]
pub struct PlacementEnv<'a> {
    scenario: &'a Scenario,
    workload: &'a WorkloadMatrix,
    config: EnvConfig,
    deployment: DeploymentState,
    queue: FunctionQueue,
    bounds: RewardBounds,
}

impl<'a> PlacementEnv<'a> {
    pub fn new(scenario: &'a Scenario, workload: &'a WorkloadMatrix, config: EnvConfig) -> Result<Self> {
        if workload.functions() != scenario.function_count() || workload.nodes() != scenario.node_count() {
            return Err(Error::Dimension(format!(
                "workload is {}x{}, scenario has {} functions on {} nodes",
                workload.functions(),
                workload.nodes(),
                scenario.function_count(),
                scenario.node_count()
            )));
        }
        if !(0.0..=1.0).contains(&config.alpha) {
            return Err(Error::Config(format!("alpha {} outside [0, 1]", config.alpha)));
        }
        Ok(Self {
            scenario,
            workload,
            config,
            deployment: DeploymentState::fresh(&scenario.topology, scenario.function_count()),
            queue: make_queue(&scenario.functions, workload, config.priority),
            bounds: RewardBounds::analytic(&scenario.topology, workload),
        })
    }

    pub fn reset(&mut self) -> EnvState {
        self.deployment = DeploymentState::fresh(&self.scenario.topology, self.scenario.function_count());
        self.queue = make_queue(&self.scenario.functions, self.workload, self.config.priority);
        self.bounds = RewardBounds::analytic(&self.scenario.topology, self.workload);
        self.state()
    }

    pub fn state(&self) -> EnvState {
        build_state(
            &self.deployment,
            &self.queue,
            &self.scenario.topology,
            &self.scenario.functions,
            self.workload,
        )
    }

    pub fn deployment(&self) -> &DeploymentState {
        &self.deployment
    }

    pub fn queue(&self) -> &FunctionQueue {
        &self.queue
    }

    pub fn bounds(&self) -> &RewardBounds {
        &self.bounds
    }

    pub fn is_done(&self) -> bool {
        self.queue.is_empty()
    }

    /// Place the head function on `action`. Panics if the queue is exhausted.
    pub fn step(&mut self, action: &PlacementVector) -> StepOutcome {
        let f = self.queue.head().expect("step called on a finished episode");
        let func = &self.scenario.functions[f];
        let topo = &self.scenario.topology;
        let n = topo.node_count();
        let row = self.workload.row(f);
        let chosen = chosen_nodes(action);
        let mut v = Violations {
            empty_placement: chosen.is_empty(),
            ..Default::default()
        };

        let mut caps = self.deployment.available_cores.clone();
        for &j in &chosen {
            if self.deployment.available_memory[j] - func.memory_req < -COMMIT_TOL {
                v.memory = true;
            }
            caps[j] -= func.instance_cores;
            if caps[j] < -COMMIT_TOL {
                v.cores = true;
            }
            caps[j] = caps[j].max(0.0);
        }

        let mut status = None;
        let mut step_delay = 0.0;
        let mut step_cost = 0.0;
        let mut routing_seconds = 0.0;
        if !v.empty_placement {
            let k = func.cores_row(n);
            let started = Instant::now();
            let sol = solve_routing(&RoutingProblem {
                chosen_nodes: chosen.clone(),
                workload_row: row,
                delays: &topo.delays,
                available_cores: &caps,
                cores_per_request: &k,
            });
            routing_seconds = started.elapsed().as_secs_f64();
            status = Some(sol.status);
            if sol.status == RoutingStatus::Infeasible {
                v.routing_infeasible = true;
            } else if !v.any() {
                step_delay = sol.objective_delay;
                step_cost = function_cost(func, action, &sol.routing, row);
                self.commit(f, action, &chosen, &caps, &k, sol.routing, step_delay, step_cost);
            }
        }

        let (_, _, reward) = normalize_and_reward(
            self.deployment.cumulative_delay,
            self.deployment.cumulative_cost,
            &mut self.bounds,
            self.config.alpha,
            &v,
        );
        if v.any() {
            step_delay = 0.0;
            step_cost = 0.0;
        }
        self.queue.pop();
        StepOutcome {
            next_state: self.state(),
            reward,
            done: self.queue.is_empty(),
            info: StepInfo {
                function: f,
                placement: action.clone(),
                routing_status: status,
                violations: v,
                step_delay,
                step_cost,
                routing_seconds,
            },
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn commit(
        &mut self,
        f: usize,
        action: &PlacementVector,
        chosen: &[usize],
        caps_after_instances: &[f64],
        k: &[f64],
        routing: RoutingMatrix,
        delay: f64,
        cost: f64,
    ) {
        let row = self.workload.row(f);
        let mem = self.scenario.functions[f].memory_req;
        for &j in chosen {
            let load: f64 = row.iter().enumerate().map(|(i, w)| w * routing.get(i, j)).sum();
            self.deployment.available_memory[j] = (self.deployment.available_memory[j] - mem).max(0.0);
            self.deployment.available_cores[j] = (caps_after_instances[j] - load * k[j]).max(0.0);
        }
        self.deployment.placed[f] = Some(action.clone());
        self.deployment.routes[f] = Some(routing);
        self.deployment.cumulative_delay += delay;
        self.deployment.cumulative_cost += cost;
    }
}

/// One logged step of an episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub state_hash: String,
    pub function: usize,
    pub action: PlacementVector,
    pub reward: f64,
    pub violations: Violations,
    pub step_delay: f64,
    pub step_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub steps: Vec<StepRecord>,
    pub total_delay: f64,
    pub total_cost: f64,
    pub invalid_count: usize,
    /// Final deployment per function, `None` where the step was penalized.
    pub placements: Vec<Option<PlacementVector>>,
    pub routes: Vec<Option<RoutingMatrix>>,
    pub bounds: RewardBounds,
    /// Wall-clock seconds per decision: policy inference plus the routing
    /// solve. Not serialized.
    #[serde(skip)]
    pub decision_times: Vec<f64>,
}

impl EpisodeRecord {
    pub fn is_valid(&self) -> bool {
        self.invalid_count == 0
    }

    /// Write one JSON object per step.
    pub fn write_jsonl(&self, out: &mut impl Write) -> std::io::Result<()> {
        for s in &self.steps {
            serde_json::to_writer(&mut *out, s)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Roll out one full episode. Transitions are appended to `collect` when given.
pub fn run_episode(
    policy: &PolicyNetwork,
    scenario: &Scenario,
    workload: &WorkloadMatrix,
    config: EnvConfig,
    mode: ActMode,
    rng: &mut impl Rng,
    mut collect: Option<&mut Vec<Transition>>,
) -> Result<EpisodeRecord> {
    let mut env = PlacementEnv::new(scenario, workload, config)?;
    let mut state = env.reset();
    let mut steps = Vec::with_capacity(scenario.function_count());
    let mut invalid = 0;
    let mut times = Vec::with_capacity(scenario.function_count());
    while !env.is_done() {
        let features = state.to_vec();
        let started = Instant::now();
        let sample = policy.act(&features, mode, rng)?;
        let inference = started.elapsed().as_secs_f64();
        let out = env.step(&sample.action);
        times.push(inference + out.info.routing_seconds);
        if out.info.violations.any() {
            invalid += 1;
        }
        steps.push(StepRecord {
            state_hash: state.hash(),
            function: out.info.function,
            action: sample.action.clone(),
            reward: out.reward,
            violations: out.info.violations,
            step_delay: out.info.step_delay,
            step_cost: out.info.step_cost,
        });
        if let Some(buf) = collect.as_deref_mut() {
            buf.push(Transition {
                state: features,
                action: sample.action,
                log_prob: sample.log_prob,
                value: sample.value,
                reward: out.reward,
                done: out.done,
            });
        }
        state = out.next_state;
    }
    let d = env.deployment();
    Ok(EpisodeRecord {
        steps,
        total_delay: d.cumulative_delay,
        total_cost: d.cumulative_cost,
        invalid_count: invalid,
        placements: d.placed.clone(),
        routes: d.routes.clone(),
        bounds: *env.bounds(),
        decision_times: times,
    })
}

/// Per-feature scaling that brings raw observations to order one.
pub fn default_input_scale(scenario: &Scenario, workloads: &[WorkloadMatrix]) -> Vec<f64> {
    let topo = &scenario.topology;
    let n = topo.node_count();
    let inv = |x: f64| if x > 0.0 { 1.0 / x } else { 1.0 };
    let max_rate = workloads
        .iter()
        .flat_map(|w| (0..w.functions()).flat_map(move |f| w.row(f).to_vec()))
        .fold(0.0_f64, f64::max);
    let max_mem = scenario.functions.iter().map(|f| f.memory_req).fold(0.0_f64, f64::max);
    let t_scale = workloads
        .iter()
        .map(|w| {
            // a quarter of the analytic bound keeps typical T near one
            0.25 * t_max_bound(topo, w)
        })
        .fold(0.0_f64, f64::max);

    let mut s = Vec::with_capacity(state_len(n));
    s.extend(std::iter::repeat_n(inv(topo.delays.max()), n * n));
    for node in &topo.nodes {
        s.push(inv(node.cores));
        s.push(inv(node.memory));
    }
    s.extend(std::iter::repeat_n(inv(max_rate), n));
    s.extend([inv(max_mem); 3]);
    s.push(inv(t_scale));
    s
}
