//! Exact request routing for a fixed placement.
//!
//! With the placement of one function fixed, the routing fractions are
//! continuous, so the problem is a capacitated transportation LP: every node
//! is a source with supply `w[i]` and every chosen node is a sink whose
//! capacity, in requests/s, is its available cores divided by the per-request
//! core demand there. It is solved with successive shortest paths on the
//! residual network; the dense simplex in [`crate::lp`] is the fallback.

use crate::lp::{self, Constraint, LinearProgram, LpOutcome, Relation};
use crate::model::{DelayMatrix, PlacementVector, RoutingMatrix};

/// Feasibility slack relative to the magnitude of the data.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// Indices `i` with `c[i] == 1`, ascending.
pub fn chosen_nodes(placement: &PlacementVector) -> Vec<usize> {
    placement
        .0
        .iter()
        .enumerate()
        .filter_map(|(i, &on)| on.then_some(i))
        .collect()
}

#[derive(Debug, Clone)]
pub struct RoutingProblem<'a> {
    pub chosen_nodes: Vec<usize>,
    pub workload_row: &'a [f64],
    pub delays: &'a DelayMatrix,
    /// Cores still free on every node.
    pub available_cores: &'a [f64],
    /// Core-units per unit request rate at each destination node.
    pub cores_per_request: &'a [f64],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RoutingStatus {
    Optimal,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoutingSolution {
    pub routing: RoutingMatrix,
    /// Routed delay, ms·req/s.
    pub objective_delay: f64,
    pub status: RoutingStatus,
}

impl RoutingSolution {
    pub fn infeasible(n: usize) -> Self {
        Self {
            routing: RoutingMatrix::zeros(n),
            objective_delay: 0.0,
            status: RoutingStatus::Infeasible,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == RoutingStatus::Optimal
    }
}

/// `Σ_i Σ_j x[i][j] · w[i] · δ[i][j]`.
pub fn total_delay(x: &RoutingMatrix, workload_row: &[f64], delays: &DelayMatrix) -> f64 {
    let n = x.len();
    let mut total = 0.0;
    for i in 0..n {
        let w = workload_row[i];
        if w == 0.0 {
            continue;
        }
        for j in 0..n {
            let frac = x.get(i, j);
            if frac != 0.0 {
                total += frac * w * delays.get(i, j);
            }
        }
    }
    total
}

/// Sink capacities in requests/s for the chosen nodes.
pub(crate) fn sink_capacities(p: &RoutingProblem<'_>) -> Vec<f64> {
    p.chosen_nodes
        .iter()
        .map(|&j| (p.available_cores[j] / p.cores_per_request[j]).max(0.0))
        .collect()
}

/// Minimum-delay routing for one function.
pub fn solve_routing(p: &RoutingProblem<'_>) -> RoutingSolution {
    let n = p.workload_row.len();
    let caps = sink_capacities(p);
    match transport(&p.chosen_nodes, p.workload_row, &caps, |i, j| p.delays.get(i, j)) {
        Some(flows) => {
            let routing = flows_to_routing(n, &p.chosen_nodes, p.workload_row, &flows);
            let objective_delay = total_delay(&routing, p.workload_row, p.delays);
            RoutingSolution {
                routing,
                objective_delay,
                status: RoutingStatus::Optimal,
            }
        }
        None => RoutingSolution::infeasible(n),
    }
}

/// Convert per-(source, sink) flows into routing fractions. Rows without
/// workload send everything to the lowest-index chosen node.
pub(crate) fn flows_to_routing(
    n: usize,
    sinks: &[usize],
    supply: &[f64],
    flows: &[Vec<f64>],
) -> RoutingMatrix {
    let mut x = RoutingMatrix::zeros(n);
    for i in 0..n {
        if supply[i] > 0.0 {
            let sent: f64 = flows[i].iter().sum();
            for (k, &j) in sinks.iter().enumerate() {
                if flows[i][k] > 0.0 {
                    x.set(i, j, flows[i][k] / sent);
                }
            }
        } else if let Some(&first) = sinks.first() {
            x.set(i, first, 1.0);
        }
    }
    x
}

/// Capacitated transportation problem over a complete bipartite graph.
///
/// `supply` is indexed by source node, `caps` and the returned flows by
/// position in `sinks`. Returns `None` when the sinks cannot absorb the
/// total supply (the graph is complete, so that is the only way to fail).
pub(crate) fn transport(
    sinks: &[usize],
    supply: &[f64],
    caps: &[f64],
    cost: impl Fn(usize, usize) -> f64,
) -> Option<Vec<Vec<f64>>> {
    let n = supply.len();
    let total: f64 = supply.iter().sum();
    if sinks.is_empty() {
        return None;
    }
    let cap_total: f64 = caps.iter().sum();
    let scale = total.max(cap_total).max(1.0);
    if total > cap_total + FEASIBILITY_TOL * scale {
        return None;
    }
    let mut flows = vec![vec![0.0; sinks.len()]; n];
    if total == 0.0 {
        return Some(flows);
    }
    let costs: Vec<Vec<f64>> = (0..n)
        .map(|i| sinks.iter().map(|&j| cost(i, j)).collect())
        .collect();
    if successive_shortest_paths(supply, caps, &costs, &mut flows, scale) {
        Some(flows)
    } else {
        // Iteration guard tripped; fall back to the simplex.
        transport_simplex(supply, caps, &costs)
    }
}

fn successive_shortest_paths(
    supply: &[f64],
    caps: &[f64],
    costs: &[Vec<f64>],
    flows: &mut [Vec<f64>],
    scale: f64,
) -> bool {
    let n = supply.len();
    let m = caps.len();
    let eps = 1e-13 * scale;
    let mut left: Vec<f64> = supply.to_vec();
    let mut room: Vec<f64> = caps.to_vec();
    let max_iter = 8 * (n + m) * (n + m) + 32;

    // Node layout for the label arrays: sources 0..n, sinks n..n+m.
    let mut dist = vec![f64::INFINITY; n + m];
    let mut pred: Vec<Option<usize>> = vec![None; n + m];

    for _ in 0..max_iter {
        if left.iter().all(|&s| s <= eps) {
            return true;
        }
        dist.iter_mut().for_each(|d| *d = f64::INFINITY);
        pred.iter_mut().for_each(|p| *p = None);
        for i in 0..n {
            if left[i] > eps {
                dist[i] = 0.0;
            }
        }
        // Bellman-Ford over the bipartite residual graph. Forward arcs
        // source→sink always exist; backward arcs sink→source exist where
        // flow is positive.
        for _ in 0..(n + m) {
            let mut changed = false;
            for i in 0..n {
                if dist[i].is_infinite() {
                    continue;
                }
                for k in 0..m {
                    let nd = dist[i] + costs[i][k];
                    if nd < dist[n + k] {
                        dist[n + k] = nd;
                        pred[n + k] = Some(i);
                        changed = true;
                    }
                }
            }
            for k in 0..m {
                if dist[n + k].is_infinite() {
                    continue;
                }
                for i in 0..n {
                    if flows[i][k] > eps {
                        let nd = dist[n + k] - costs[i][k];
                        if nd < dist[i] {
                            dist[i] = nd;
                            pred[i] = Some(n + k);
                            changed = true;
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let mut target = None;
        for k in 0..m {
            if room[k] > eps && dist[n + k] < target.map_or(f64::INFINITY, |t: usize| dist[n + t]) {
                target = Some(k);
            }
        }
        let Some(target) = target else {
            return false;
        };

        // Walk back to the originating source to find the bottleneck.
        let mut bottleneck = room[target];
        let mut node = n + target;
        let mut steps = 0;
        while let Some(prev) = pred[node] {
            if node < n {
                // backward arc prev(sink) -> node(source)
                bottleneck = bottleneck.min(flows[node][prev - n]);
            }
            node = prev;
            steps += 1;
            if steps > 2 * (n + m) {
                return false;
            }
        }
        bottleneck = bottleneck.min(left[node]);
        if bottleneck <= 0.0 {
            return false;
        }
        let origin = node;
        let mut node = n + target;
        while let Some(prev) = pred[node] {
            if node >= n {
                flows[prev][node - n] += bottleneck;
            } else {
                let f = &mut flows[node][prev - n];
                *f -= bottleneck;
                if *f < eps {
                    *f = 0.0;
                }
            }
            node = prev;
        }
        left[origin] -= bottleneck;
        if left[origin] < eps {
            left[origin] = 0.0;
        }
        room[target] -= bottleneck;
        if room[target] < eps {
            room[target] = 0.0;
        }
    }
    false
}

fn transport_simplex(supply: &[f64], caps: &[f64], costs: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = supply.len();
    let m = caps.len();
    let sources: Vec<usize> = (0..n).filter(|&i| supply[i] > 0.0).collect();
    let var = |s: usize, k: usize| s * m + k;
    let mut objective = vec![0.0; sources.len() * m];
    for (s, &i) in sources.iter().enumerate() {
        for k in 0..m {
            objective[var(s, k)] = costs[i][k];
        }
    }
    let mut constraints = Vec::new();
    for (s, &i) in sources.iter().enumerate() {
        let coeffs = (0..m).map(|k| (var(s, k), 1.0)).collect();
        constraints.push(Constraint::new(coeffs, Relation::Eq, supply[i]));
    }
    for (k, &cap) in caps.iter().enumerate() {
        let coeffs = (0..sources.len()).map(|s| (var(s, k), 1.0)).collect();
        constraints.push(Constraint::new(coeffs, Relation::Le, cap));
    }
    let lp = LinearProgram {
        objective,
        constraints,
    };
    match lp::solve(&lp) {
        LpOutcome::Optimal { x, .. } => {
            let mut flows = vec![vec![0.0; m]; n];
            for (s, &i) in sources.iter().enumerate() {
                for k in 0..m {
                    flows[i][k] = x[var(s, k)].max(0.0);
                }
            }
            Some(flows)
        }
        _ => None,
    }
}

/// Exhaustive reference solver for small instances.
///
/// Enumerates every basic solution of the transportation LP (choose a basis,
/// solve the square system, keep it if nonnegative) and, when `grid > 0`,
/// every routing whose fractions are multiples of `1/grid`. Shares no code
/// with [`solve_routing`].
pub mod oracle {
    use super::*;
    use crate::error::{Error, Result};

    pub const MAX_NODES: usize = 4;
    pub const MAX_CHOSEN: usize = 3;

    pub fn brute_force_routing(p: &RoutingProblem<'_>, grid: usize) -> Result<RoutingSolution> {
        let n = p.workload_row.len();
        if n > MAX_NODES || p.chosen_nodes.len() > MAX_CHOSEN {
            return Err(Error::TooLarge(format!(
                "{n} nodes, {} chosen (limits {MAX_NODES}, {MAX_CHOSEN})",
                p.chosen_nodes.len()
            )));
        }
        let sinks = &p.chosen_nodes;
        if sinks.is_empty() {
            return Ok(RoutingSolution::infeasible(n));
        }
        let caps: Vec<f64> = sinks
            .iter()
            .map(|&j| (p.available_cores[j] / p.cores_per_request[j]).max(0.0))
            .collect();
        let sources: Vec<usize> = (0..n).filter(|&i| p.workload_row[i] > 0.0).collect();

        let mut best: Option<(f64, Vec<Vec<f64>>)> = vertex_search(p, &sources, sinks, &caps);
        if grid > 0 {
            if let Some((obj, flows)) = grid_search(p, &sources, sinks, &caps, grid) {
                if best.as_ref().is_none_or(|(b, _)| obj < *b) {
                    best = Some((obj, flows));
                }
            }
        }
        let Some((_, flows)) = best else {
            return Ok(RoutingSolution::infeasible(n));
        };
        let mut x = RoutingMatrix::zeros(n);
        for i in 0..n {
            if p.workload_row[i] > 0.0 {
                let s = sources.iter().position(|&v| v == i).unwrap();
                for (k, &j) in sinks.iter().enumerate() {
                    x.set(i, j, flows[s][k] / p.workload_row[i]);
                }
            } else {
                x.set(i, sinks[0], 1.0);
            }
        }
        let mut objective = 0.0;
        for (s, &i) in sources.iter().enumerate() {
            for (k, &j) in sinks.iter().enumerate() {
                objective += flows[s][k] * p.delays.get(i, j);
            }
        }
        Ok(RoutingSolution {
            routing: x,
            objective_delay: objective,
            status: RoutingStatus::Optimal,
        })
    }

    fn vertex_search(
        p: &RoutingProblem<'_>,
        sources: &[usize],
        sinks: &[usize],
        caps: &[f64],
    ) -> Option<(f64, Vec<Vec<f64>>)> {
        let ns = sources.len();
        let np = sinks.len();
        if ns == 0 {
            return Some((0.0, Vec::new()));
        }
        // Columns: flows (s, k) then one slack per sink. Rows: supply then capacity.
        let nflow = ns * np;
        let ncol = nflow + np;
        let nrow = ns + np;
        let column = |c: usize| -> Vec<f64> {
            let mut col = vec![0.0; nrow];
            if c < nflow {
                let (s, k) = (c / np, c % np);
                col[s] = 1.0;
                col[ns + k] = 1.0;
            } else {
                col[ns + (c - nflow)] = 1.0;
            }
            col
        };
        let rhs: Vec<f64> = sources
            .iter()
            .map(|&i| p.workload_row[i])
            .chain(caps.iter().copied())
            .collect();
        let scale = rhs.iter().fold(1.0_f64, |a, &b| a.max(b));
        let cost = |c: usize| -> f64 {
            if c < nflow {
                p.delays.get(sources[c / np], sinks[c % np])
            } else {
                0.0
            }
        };

        let mut best: Option<(f64, Vec<f64>)> = None;
        for basis in combinations(ncol, nrow) {
            let mut a = vec![vec![0.0; nrow + 1]; nrow];
            for (b, &c) in basis.iter().enumerate() {
                let col = column(c);
                for r in 0..nrow {
                    a[r][b] = col[r];
                }
            }
            for r in 0..nrow {
                a[r][nrow] = rhs[r];
            }
            let Some(values) = gauss_solve(a) else {
                continue;
            };
            if values.iter().any(|&v| v < -1e-9 * scale) {
                continue;
            }
            let obj: f64 = basis
                .iter()
                .zip(&values)
                .map(|(&c, &v)| cost(c) * v.max(0.0))
                .sum();
            if best.as_ref().is_none_or(|(b, _)| obj < *b) {
                let mut full = vec![0.0; ncol];
                for (&c, &v) in basis.iter().zip(&values) {
                    full[c] = v.max(0.0);
                }
                best = Some((obj, full));
            }
        }
        best.map(|(obj, full)| {
            let flows = (0..ns)
                .map(|s| (0..np).map(|k| full[s * np + k]).collect())
                .collect();
            (obj, flows)
        })
    }

    fn grid_search(
        p: &RoutingProblem<'_>,
        sources: &[usize],
        sinks: &[usize],
        caps: &[f64],
        grid: usize,
    ) -> Option<(f64, Vec<Vec<f64>>)> {
        let np = sinks.len();
        let splits = compositions(grid, np);
        let ns = sources.len();
        if ns == 0 {
            return Some((0.0, Vec::new()));
        }
        let mut idx = vec![0usize; ns];
        let mut best: Option<(f64, Vec<Vec<f64>>)> = None;
        loop {
            let mut load = vec![0.0; np];
            let mut obj = 0.0;
            for (s, &i) in sources.iter().enumerate() {
                let w = p.workload_row[i];
                for k in 0..np {
                    let y = w * splits[idx[s]][k] as f64 / grid as f64;
                    load[k] += y;
                    obj += y * p.delays.get(i, sinks[k]);
                }
            }
            let fits = load
                .iter()
                .zip(caps)
                .all(|(l, c)| *l <= c + 1e-9 * c.max(1.0));
            if fits && best.as_ref().is_none_or(|(b, _)| obj < *b) {
                let flows = sources
                    .iter()
                    .enumerate()
                    .map(|(s, &i)| {
                        (0..np)
                            .map(|k| p.workload_row[i] * splits[idx[s]][k] as f64 / grid as f64)
                            .collect()
                    })
                    .collect();
                best = Some((obj, flows));
            }
            // odometer
            let mut pos = 0;
            loop {
                if pos == ns {
                    return best;
                }
                idx[pos] += 1;
                if idx[pos] < splits.len() {
                    break;
                }
                idx[pos] = 0;
                pos += 1;
            }
        }
    }

    /// All ways to write `total` as an ordered sum of `parts` nonnegative integers.
    fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
        if parts == 1 {
            return vec![vec![total]];
        }
        let mut out = Vec::new();
        for first in 0..=total {
            for mut rest in compositions(total - first, parts - 1) {
                rest.insert(0, first);
                out.push(rest);
            }
        }
        out
    }

    fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut cur = Vec::with_capacity(k);
        fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if cur.len() == k {
                out.push(cur.clone());
                return;
            }
            for c in start..n {
                if n - c < k - cur.len() {
                    break;
                }
                cur.push(c);
                rec(c + 1, n, k, cur, out);
                cur.pop();
            }
        }
        rec(0, n, k, &mut cur, &mut out);
        out
    }

    /// Gaussian elimination with partial pivoting on an augmented matrix.
    fn gauss_solve(mut a: Vec<Vec<f64>>) -> Option<Vec<f64>> {
        let n = a.len();
        for col in 0..n {
            let piv = (col..n).max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))?;
            if a[piv][col].abs() < 1e-10 {
                return None;
            }
            a.swap(col, piv);
            for r in 0..n {
                if r != col {
                    let factor = a[r][col] / a[col][col];
                    if factor != 0.0 {
                        for c in col..=n {
                            a[r][c] -= factor * a[col][c];
                        }
                    }
                }
            }
        }
        Some((0..n).map(|r| a[r][n] / a[r][r]).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn delays3() -> DelayMatrix {
        DelayMatrix::from_rows(&[
            vec![0.0, 2.0, 5.0],
            vec![2.0, 0.0, 4.0],
            vec![5.0, 4.0, 0.0],
        ])
        .unwrap()
    }

    #[test]
    fn chosen_nodes_are_the_set_bits() {
        assert_eq!(chosen_nodes(&PlacementVector::from_bits(&[0, 1, 0, 1, 0])), vec![1, 3]);
        assert!(chosen_nodes(&PlacementVector::empty(5)).is_empty());
        assert_eq!(
            chosen_nodes(&PlacementVector::from_bits(&[1, 1, 1, 1, 1])),
            vec![0, 1, 2, 3, 4]
        );
    }

    #[test]
    fn single_chosen_node_takes_everything() {
        let d = delays3();
        let w = [3.0, 1.0, 2.0];
        let sol = solve_routing(&RoutingProblem {
            chosen_nodes: vec![1],
            workload_row: &w,
            delays: &d,
            available_cores: &[100.0; 3],
            cores_per_request: &[1.0; 3],
        });
        assert!(sol.is_optimal());
        for i in 0..3 {
            assert_eq!(sol.routing.get(i, 1), 1.0);
        }
        assert_eq!(sol.objective_delay, 3.0 * 2.0 + 2.0 * 4.0);

        let local = [0.0, 7.0, 0.0];
        let sol = solve_routing(&RoutingProblem {
            chosen_nodes: vec![1],
            workload_row: &local,
            delays: &d,
            available_cores: &[100.0; 3],
            cores_per_request: &[1.0; 3],
        });
        assert_eq!(sol.objective_delay, 0.0);
    }

    #[test]
    fn empty_placement_is_infeasible() {
        let d = delays3();
        let sol = solve_routing(&RoutingProblem {
            chosen_nodes: vec![],
            workload_row: &[1.0, 0.0, 0.0],
            delays: &d,
            available_cores: &[10.0; 3],
            cores_per_request: &[1.0; 3],
        });
        assert_eq!(sol.status, RoutingStatus::Infeasible);
    }

    #[test]
    fn capacity_forces_a_split() {
        let d = delays3();
        let w = [10.0, 0.0, 0.0];
        let p = RoutingProblem {
            chosen_nodes: vec![1, 2],
            workload_row: &w,
            delays: &d,
            available_cores: &[0.0, 6.0, 20.0],
            cores_per_request: &[1.0; 3],
        };
        let sol = solve_routing(&p);
        assert!(sol.is_optimal());
        assert!((sol.routing.get(0, 1) - 0.6).abs() < 1e-12);
        assert!((sol.routing.get(0, 2) - 0.4).abs() < 1e-12);
        assert!((sol.objective_delay - 32.0).abs() < 1e-9);
        // zero-workload rows go to the lowest chosen index
        assert_eq!(sol.routing.get(1, 1), 1.0);
        assert_eq!(sol.routing.get(2, 1), 1.0);
    }

    #[test]
    fn total_delay_examples() {
        let d = DelayMatrix::from_rows(&[vec![0.0, 3.0], vec![3.0, 0.0]]).unwrap();
        assert_eq!(total_delay(&RoutingMatrix::identity(2), &[4.0, 9.0], &d), 0.0);
        let mut x = RoutingMatrix::zeros(2);
        x.set(0, 1, 1.0);
        x.set(1, 1, 1.0);
        assert_eq!(total_delay(&x, &[4.0, 0.0], &d), 12.0);
    }

    #[test]
    fn oracle_matches_hand_split() {
        let d = delays3();
        let w = [10.0, 0.0, 0.0];
        let p = RoutingProblem {
            chosen_nodes: vec![1, 2],
            workload_row: &w,
            delays: &d,
            available_cores: &[0.0, 6.0, 20.0],
            cores_per_request: &[1.0; 3],
        };
        let sol = oracle::brute_force_routing(&p, 10).unwrap();
        assert!((sol.objective_delay - 32.0).abs() < 1e-6);
    }

    #[test]
    fn oracle_and_solver_agree_on_infeasibility() {
        let d = delays3();
        let w = [10.0, 5.0, 0.0];
        let p = RoutingProblem {
            chosen_nodes: vec![1, 2],
            workload_row: &w,
            delays: &d,
            available_cores: &[0.0, 6.0, 4.0],
            cores_per_request: &[1.0; 3],
        };
        assert_eq!(solve_routing(&p).status, RoutingStatus::Infeasible);
        assert_eq!(
            oracle::brute_force_routing(&p, 4).unwrap().status,
            RoutingStatus::Infeasible
        );
    }

    #[test]
    fn oracle_refuses_large_instances() {
        let d = DelayMatrix::uniform(5, 1.0);
        let w = [1.0; 5];
        let p = RoutingProblem {
            chosen_nodes: vec![0],
            workload_row: &w,
            delays: &d,
            available_cores: &[10.0; 5],
            cores_per_request: &[1.0; 5],
        };
        assert!(oracle::brute_force_routing(&p, 2).is_err());
    }

    #[test]
    fn simplex_fallback_agrees_with_shortest_paths() {
        let d = delays3();
        let supply = [4.0, 3.0, 5.0];
        let caps = [5.0, 8.0];
        let sinks = [0, 2];
        let costs: Vec<Vec<f64>> = (0..3)
            .map(|i| sinks.iter().map(|&j| d.get(i, j)).collect())
            .collect();
        let a = transport(&sinks, &supply, &caps, |i, j| d.get(i, j)).unwrap();
        let b = transport_simplex(&supply, &caps, &costs).unwrap();
        let cost = |f: &Vec<Vec<f64>>| -> f64 {
            (0..3)
                .map(|i| (0..2).map(|k| f[i][k] * costs[i][k]).sum::<f64>())
                .sum()
        };
        assert!((cost(&a) - cost(&b)).abs() < 1e-9);
    }
}
