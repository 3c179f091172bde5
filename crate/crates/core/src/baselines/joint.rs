//! Exact joint placement and routing by branch-and-bound.
//!
//! Variables are the F×N placement bits, branched function-major with node
//! indices ascending and the 0-branch first, so leaves arrive in ascending
//! lexicographic order. Every leaf solves the routing of all functions at
//! once under shared node capacities. A greedy leaf seeds the incumbent.
//!
//! The bound relaxes the shared capacity: each function is priced at its
//! cheapest standalone deployment (its own instance reservation only, full
//! node cores) among the subsets still compatible with the fixed bits and the
//! remaining memory. Standalone optima for all `2^N − 1` subsets are tabulated
//! up front. A leaf whose standalone routes fit the shared capacities is
//! therefore optimal without a joint LP.

use std::time::Duration;

use web_time::Instant;

use super::{evaluate_routes, routing_from_flows, solve_creua, solve_vsvbp, CriticalityTag, JointSolution, Objective};
use crate::env::t_max_bound;
use crate::error::{Error, Result};
use crate::lp::{self, Constraint, LinearProgram, LpOutcome, Relation};
use crate::model::{PlacementVector, RoutingMatrix, Scenario, WorkloadMatrix};
use crate::routing::transport;

/// Search limits. With neither set the search runs to completion.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct JointBudget {
    pub node_limit: Option<u64>,
    pub time_limit: Option<Duration>,
}

impl JointBudget {
    pub fn nodes(limit: u64) -> Self {
        Self {
            node_limit: Some(limit),
            time_limit: None,
        }
    }
}

const CAP_TOL: f64 = 1e-9;
const MAX_NODES: usize = 16;
/// Sweeps of the single-flip improvement applied to the starting incumbent.
const MAX_FLIP_PASSES: usize = 8;

#[derive(Debug, Clone)]
struct Standalone {
    value: f64,
    /// `flows[i][j]`, req/s.
    flows: Vec<Vec<f64>>,
    /// Cores used on each node by routed requests.
    load: Vec<f64>,
}

struct Problem<'a> {
    scenario: &'a Scenario,
    workload: &'a WorkloadMatrix,
    objective: Objective,
    n: usize,
    /// `table[f][mask]`; `None` when the subset cannot host `f` on its own.
    table: Vec<Vec<Option<Standalone>>>,
    /// Feasible `(value, mask)` pairs per function, cheapest first.
    ranked: Vec<Vec<(f64, u32)>>,
}

#[derive(Debug, Clone)]
struct Leaf {
    masks: Vec<u32>,
    routes: Vec<RoutingMatrix>,
    t: f64,
    c: f64,
    value: f64,
}

fn mask_nodes(mask: u32, n: usize) -> Vec<usize> {
    (0..n).filter(|&j| mask >> j & 1 == 1).collect()
}

fn placement(mask: u32, n: usize) -> PlacementVector {
    PlacementVector::from_mask(mask, n)
}

/// Lexicographic order of the flattened bits, function-major, node ascending.
fn lex_less(a: &[u32], b: &[u32], n: usize) -> bool {
    for (x, y) in a.iter().zip(b) {
        for j in 0..n {
            let (bx, by) = (x >> j & 1, y >> j & 1);
            if bx != by {
                return bx < by;
            }
        }
    }
    false
}

impl<'a> Problem<'a> {
    fn new(scenario: &'a Scenario, workload: &'a WorkloadMatrix, alpha: f64) -> Result<Self> {
        let n = scenario.node_count();
        if n > MAX_NODES {
            return Err(Error::TooLarge(format!("{n} nodes; the joint solver tabulates node subsets")));
        }
        let objective = Objective {
            alpha,
            t_max: t_max_bound(&scenario.topology, workload),
            c_max: scenario.topology.total_cores(),
        };
        let mut p = Self {
            scenario,
            workload,
            objective,
            n,
            table: Vec::new(),
            ranked: Vec::new(),
        };
        p.table = (0..scenario.function_count())
            .map(|f| (0..1u32 << n).map(|m| p.standalone(f, m)).collect())
            .collect();
        p.ranked = p
            .table
            .iter()
            .map(|row| {
                let mut r: Vec<(f64, u32)> = row
                    .iter()
                    .enumerate()
                    .filter_map(|(m, st)| st.as_ref().map(|st| (st.value, m as u32)))
                    .collect();
                r.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                r
            })
            .collect();
        Ok(p)
    }

    fn edge_cost(&self, f: usize, i: usize, j: usize) -> f64 {
        let func = &self.scenario.functions[f];
        self.objective.delay_weight() * self.scenario.topology.delays.get(i, j)
            + self.objective.cost_weight() * func.cores_at(j)
    }

    fn standalone(&self, f: usize, mask: u32) -> Option<Standalone> {
        if mask == 0 {
            return None;
        }
        let func = &self.scenario.functions[f];
        let nodes = &self.scenario.topology.nodes;
        let sinks = mask_nodes(mask, self.n);
        let mut caps = Vec::with_capacity(sinks.len());
        for &j in &sinks {
            let free = nodes[j].cores - func.instance_cores;
            if func.memory_req > nodes[j].memory || free < -CAP_TOL {
                return None;
            }
            caps.push(free.max(0.0) / func.cores_at(j));
        }
        let row = self.workload.row(f);
        let sink_flows = transport(&sinks, row, &caps, |i, j| self.edge_cost(f, i, j))?;
        let mut flows = vec![vec![0.0; self.n]; self.n];
        let mut load = vec![0.0; self.n];
        let mut value = self.objective.cost_weight() * func.instance_cores * sinks.len() as f64;
        for i in 0..self.n {
            for (k, &j) in sinks.iter().enumerate() {
                let y = sink_flows[i][k];
                if y > 0.0 {
                    flows[i][j] = y;
                    load[j] += y * func.cores_at(j);
                    value += y * self.edge_cost(f, i, j);
                }
            }
        }
        Some(Standalone { value, flows, load })
    }

    /// Routes for a full placement under shared capacities, or `None`.
    fn evaluate(&self, masks: &[u32]) -> Option<Leaf> {
        let s = self.scenario;
        let nodes = &s.topology.nodes;
        let mut mem = vec![0.0; self.n];
        let mut reserved = vec![0.0; self.n];
        let mut load = vec![0.0; self.n];
        for (f, &m) in masks.iter().enumerate() {
            let st = self.table[f][m as usize].as_ref()?;
            for j in mask_nodes(m, self.n) {
                mem[j] += s.functions[f].memory_req;
                reserved[j] += s.functions[f].instance_cores;
            }
            for j in 0..self.n {
                load[j] += st.load[j];
            }
        }
        for j in 0..self.n {
            if mem[j] > nodes[j].memory + CAP_TOL || reserved[j] > nodes[j].cores + CAP_TOL {
                return None;
            }
        }
        let fits = (0..self.n).all(|j| reserved[j] + load[j] <= nodes[j].cores + CAP_TOL * nodes[j].cores.max(1.0));
        let flows: Vec<Vec<Vec<f64>>> = if fits {
            masks
                .iter()
                .enumerate()
                .map(|(f, &m)| self.table[f][m as usize].as_ref().unwrap().flows.clone())
                .collect()
        } else {
            self.shared_lp(masks, &reserved)?
        };
        let placements: Vec<PlacementVector> = masks.iter().map(|&m| placement(m, self.n)).collect();
        let routes: Vec<RoutingMatrix> = flows
            .iter()
            .enumerate()
            .map(|(f, fl)| routing_from_flows(self.workload.row(f), fl, &placements[f]))
            .collect();
        let (t, c) = evaluate_routes(s, self.workload, &placements, &routes);
        Some(Leaf {
            masks: masks.to_vec(),
            routes,
            t,
            c,
            value: self.objective.value(t, c),
        })
    }

    fn shared_lp(&self, masks: &[u32], reserved: &[f64]) -> Option<Vec<Vec<Vec<f64>>>> {
        let s = self.scenario;
        // columns: (f, i, j) with w_fi > 0 and j in P_f
        let mut cols = Vec::new();
        let mut objective = Vec::new();
        let mut constraints = Vec::new();
        let mut node_rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.n];
        for (f, &m) in masks.iter().enumerate() {
            let sinks = mask_nodes(m, self.n);
            let row = self.workload.row(f);
            for (i, &w) in row.iter().enumerate() {
                if w <= 0.0 {
                    continue;
                }
                let mut coeffs = Vec::with_capacity(sinks.len());
                for &j in &sinks {
                    let c = cols.len();
                    cols.push((f, i, j));
                    objective.push(self.edge_cost(f, i, j));
                    coeffs.push((c, 1.0));
                    node_rows[j].push((c, s.functions[f].cores_at(j)));
                }
                constraints.push(Constraint::new(coeffs, Relation::Eq, w));
            }
        }
        for (j, coeffs) in node_rows.into_iter().enumerate() {
            if !coeffs.is_empty() {
                let rhs = (s.topology.nodes[j].cores - reserved[j]).max(0.0);
                constraints.push(Constraint::new(coeffs, Relation::Le, rhs));
            }
        }
        let lp = LinearProgram { objective, constraints };
        match lp::solve(&lp) {
            LpOutcome::Optimal { x, .. } => {
                let mut flows = vec![vec![vec![0.0; self.n]; self.n]; masks.len()];
                for (c, &(f, i, j)) in cols.iter().enumerate() {
                    flows[f][i][j] = x[c];
                }
                Some(flows)
            }
            _ => None,
        }
    }

    /// Cheapest standalone value of `f` over subsets agreeing with `fixed`
    /// on the bits in `decided`, whose other nodes all have room for `f`.
    fn best_value(&self, f: usize, decided: u32, fixed: u32, mem_left: &[f64]) -> Option<f64> {
        let need = self.scenario.functions[f].memory_req;
        let fits = mem_left
            .iter()
            .enumerate()
            .filter(|(_, &m)| m + CAP_TOL >= need)
            .fold(0u32, |acc, (j, _)| acc | 1 << j);
        self.ranked[f]
            .iter()
            .find(|&&(_, m)| m & decided == fixed && m & !decided & !fits == 0)
            .map(|&(v, _)| v)
    }
}

/// Order of the decided bits (functions before `f`, nodes before `j` of
/// `f`) against the same bits of `other`.
fn prefix_cmp(masks: &[u32], f: usize, j: usize, other: &[u32], n: usize) -> std::cmp::Ordering {
    use std::cmp::Ordering;
    for g in 0..=f.min(masks.len() - 1) {
        let upto = if g < f { n } else { j };
        for k in 0..upto {
            let (a, b) = (masks[g] >> k & 1, other[g] >> k & 1);
            if a != b {
                return a.cmp(&b);
            }
        }
    }
    Ordering::Equal
}

fn better(leaf: &Leaf, incumbent: &Option<Leaf>, n: usize) -> bool {
    match incumbent {
        None => true,
        Some(inc) => {
            let tol = 1e-9 * inc.value.abs().max(1.0);
            leaf.value < inc.value - tol
                || (leaf.value <= inc.value + tol && lex_less(&leaf.masks, &inc.masks, n))
        }
    }
}

fn finish(p: &Problem<'_>, leaf: Leaf, started: Instant, optimal: bool, nodes: u64) -> JointSolution {
    JointSolution {
        placements: leaf.masks.iter().map(|&m| placement(m, p.n)).collect(),
        routes: leaf.routes,
        residual: vec![vec![0.0; p.n]; leaf.masks.len()],
        total_delay: leaf.t,
        total_cost: leaf.c,
        objective: Some(leaf.value),
        solve_time_ms: started.elapsed().as_secs_f64() * 1e3,
        optimal,
        nodes_explored: nodes,
        label: None,
    }
}

fn check_fits_somewhere(scenario: &Scenario) -> Result<()> {
    for f in &scenario.functions {
        if !scenario.topology.nodes.iter().any(|n| n.memory >= f.memory_req) {
            return Err(Error::Infeasible(format!(
                "function {} needs {} GB, more than any node offers",
                f.id, f.memory_req
            )));
        }
    }
    Ok(())
}

struct Search<'p, 'a> {
    p: &'p Problem<'a>,
    budget: JointBudget,
    started: Instant,
    nodes: u64,
    exhausted: bool,
    incumbent: Option<Leaf>,
    masks: Vec<u32>,
    mem_left: Vec<f64>,
    /// Standalone value of the fully decided functions.
    fixed_value: f64,
}

impl Search<'_, '_> {
    fn out_of_budget(&mut self) -> bool {
        if self.exhausted {
            return true;
        }
        let over_nodes = self.budget.node_limit.is_some_and(|l| self.nodes >= l);
        let over_time = self.budget.time_limit.is_some_and(|l| self.started.elapsed() >= l);
        self.exhausted = over_nodes || over_time;
        self.exhausted
    }

    fn bound(&self, f: usize, j: usize) -> Option<f64> {
        let decided = (1u32 << j) - 1;
        // both normalized terms start at −1
        let mut b = -1.0 + self.fixed_value + self.p.best_value(f, decided, self.masks[f] & decided, &self.mem_left)?;
        for g in f + 1..self.masks.len() {
            b += self.p.best_value(g, 0, 0, &self.mem_left)?;
        }
        Some(b)
    }

    fn visit(&mut self, f: usize, j: usize) {
        if self.out_of_budget() {
            return;
        }
        self.nodes += 1;
        let big_f = self.masks.len();
        let n = self.p.n;
        if f == big_f {
            if let Some(leaf) = self.p.evaluate(&self.masks) {
                if better(&leaf, &self.incumbent, n) {
                    self.incumbent = Some(leaf);
                }
            }
            return;
        }
        let Some(bound) = self.bound(f, j) else { return };
        if let Some(inc) = &self.incumbent {
            let tol = 1e-9 * inc.value.abs().max(1.0);
            if bound > inc.value + tol {
                return;
            }
            // nothing below can beat the incumbent outright, and ties lose
            // once the decided bits already exceed it
            if bound >= inc.value - tol && prefix_cmp(&self.masks, f, j, &inc.masks, n).is_gt() {
                return;
            }
        }
        if j == n {
            let m = self.masks[f];
            let Some(st) = self.p.table[f][m as usize].as_ref() else { return };
            let v = st.value;
            self.fixed_value += v;
            self.visit(f + 1, 0);
            self.fixed_value -= v;
            return;
        }
        self.visit(f, j + 1);
        let need = self.p.scenario.functions[f].memory_req;
        if self.mem_left[j] + CAP_TOL >= need {
            self.masks[f] |= 1 << j;
            self.mem_left[j] -= need;
            self.visit(f, j + 1);
            self.mem_left[j] += need;
            self.masks[f] &= !(1 << j);
        }
    }
}

/// Each function in turn takes its cheapest standalone subset whose memory,
/// reservation and routed load fit what the previous ones left.
fn greedy_leaf(p: &Problem<'_>) -> Option<Leaf> {
    let nodes = &p.scenario.topology.nodes;
    let mut mem_left: Vec<f64> = nodes.iter().map(|n| n.memory).collect();
    let mut cores_left: Vec<f64> = nodes.iter().map(|n| n.cores).collect();
    let mut masks = Vec::with_capacity(p.scenario.function_count());
    for (f, func) in p.scenario.functions.iter().enumerate() {
        let &(_, m) = p.ranked[f].iter().find(|&&(_, m)| {
            let st = p.table[f][m as usize].as_ref().expect("ranked entries exist");
            mask_nodes(m, p.n).into_iter().all(|j| {
                mem_left[j] + CAP_TOL >= func.memory_req
                    && cores_left[j] + CAP_TOL >= func.instance_cores + st.load[j]
            })
        })?;
        let st = p.table[f][m as usize].as_ref().expect("ranked entries exist");
        for j in mask_nodes(m, p.n) {
            mem_left[j] -= func.memory_req;
            cores_left[j] -= func.instance_cores + st.load[j];
        }
        masks.push(m);
    }
    p.evaluate(&masks)
}

/// Masks of a heuristic placement, if every function has an instance.
fn heuristic_masks(sol: &JointSolution) -> Option<Vec<u32>> {
    sol.placements
        .iter()
        .map(|pl| {
            let m = pl.0.iter().enumerate().fold(0u32, |m, (j, &b)| m | (b as u32) << j);
            (m != 0).then_some(m)
        })
        .collect()
}

/// Best of the greedy leaf and both heuristics' placements (re-routed
/// optimally), then improved by single-bit flips until none helps.
fn seed_incumbent(p: &Problem<'_>) -> Option<Leaf> {
    let s = p.scenario;
    let mut best = greedy_leaf(p);
    let mut candidates = vec![heuristic_masks(&solve_vsvbp(s, p.workload))];
    if let Ok(sol) = solve_creua(s, p.workload, &CriticalityTag::from_scenario(s)) {
        candidates.push(heuristic_masks(&sol));
    }
    for masks in candidates.into_iter().flatten() {
        if let Some(leaf) = p.evaluate(&masks) {
            if better(&leaf, &best, p.n) {
                best = Some(leaf);
            }
        }
    }
    let mut leaf = best?;
    for _ in 0..MAX_FLIP_PASSES {
        let mut improved = false;
        for f in 0..leaf.masks.len() {
            for j in 0..p.n {
                let mut masks = leaf.masks.clone();
                masks[f] ^= 1 << j;
                if masks[f] == 0 {
                    continue;
                }
                if let Some(next) = p.evaluate(&masks) {
                    if better(&next, &Some(leaf.clone()), p.n) {
                        leaf = next;
                        improved = true;
                    }
                }
            }
        }
        if !improved {
            break;
        }
    }
    Some(leaf)
}

/// Minimize `α·C' + (1−α)·T'` over placements and shared-capacity routing.
pub fn solve_joint_milp(
    scenario: &Scenario,
    workload: &WorkloadMatrix,
    alpha: f64,
    budget: JointBudget,
) -> Result<JointSolution> {
    let started = Instant::now();
    check_fits_somewhere(scenario)?;
    let p = Problem::new(scenario, workload, alpha)?;
    let mut s = Search {
        p: &p,
        budget,
        started,
        nodes: 0,
        exhausted: false,
        incumbent: seed_incumbent(&p),
        masks: vec![0; scenario.function_count()],
        mem_left: scenario.topology.nodes.iter().map(|n| n.memory).collect(),
        fixed_value: 0.0,
    };
    s.visit(0, 0);
    let (nodes, exhausted) = (s.nodes, s.exhausted);
    match s.incumbent {
        Some(leaf) => Ok(finish(&p, leaf, started, !exhausted, nodes)),
        None if exhausted => Err(Error::Infeasible(format!(
            "no feasible placement found within {nodes} search nodes"
        ))),
        None => Err(Error::Infeasible("no placement satisfies memory and capacity".into())),
    }
}

/// Exhaustive search over every combination of nonempty node subsets, with
/// the same leaf evaluation and tie rule as the branch-and-bound.
pub fn enumerate_joint(scenario: &Scenario, workload: &WorkloadMatrix, alpha: f64) -> Result<JointSolution> {
    let started = Instant::now();
    let (f_count, n) = (scenario.function_count(), scenario.node_count());
    if f_count * n > 16 {
        return Err(Error::TooLarge(format!("{f_count} functions on {n} nodes")));
    }
    check_fits_somewhere(scenario)?;
    let p = Problem::new(scenario, workload, alpha)?;
    let per = (1u64 << n) - 1;
    let total = per.pow(f_count as u32);
    let mut best: Option<Leaf> = None;
    let mut masks = vec![0u32; f_count];
    for code in 0..total {
        let mut c = code;
        for m in masks.iter_mut() {
            *m = (c % per) as u32 + 1;
            c /= per;
        }
        if let Some(leaf) = p.evaluate(&masks) {
            if better(&leaf, &best, n) {
                best = Some(leaf);
            }
        }
    }
    match best {
        Some(leaf) => Ok(finish(&p, leaf, started, true, total)),
        None => Err(Error::Infeasible("no placement satisfies memory and capacity".into())),
    }
}
