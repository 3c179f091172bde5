//! Dense two-phase simplex with Bland's rule.
//!
//! Minimizes `c·x` subject to linear rows and `x ≥ 0`. Sized for the
//! shared-capacity routing LPs solved at branch-and-bound leaves (a few
//! hundred columns at most).

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    /// Sparse `(column, coefficient)` pairs.
    pub coeffs: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

/// Sparse coefficients, relation and right-hand side of one working row.
type Row = (Vec<(usize, f64)>, Relation, f64);

impl Constraint {
    pub fn new(coeffs: Vec<(usize, f64)>, relation: Relation, rhs: f64) -> Self {
        Self {
            coeffs,
            relation,
            rhs,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, objective: f64 },
    Infeasible,
    Unbounded,
}

const EPS: f64 = 1e-10;

struct Tableau {
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    width: usize,
}

impl Tableau {
    fn rhs(&self, r: usize) -> f64 {
        self.rows[r][self.width]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.rows[r].clone();
        for (k, row) in self.rows.iter_mut().enumerate() {
            if k == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                row[c] = 0.0;
            }
        }
        self.basis[r] = c;
    }

    /// Minimize `cost` over the current basis. Columns with `allowed[c] == false`
    /// never enter. Returns false when unbounded.
    fn optimize(&mut self, cost: &[f64], allowed: &[bool], tol: f64) -> bool {
        let m = self.rows.len();
        let max_iter = 50_000;
        for _ in 0..max_iter {
            // reduced costs: c_j - c_B · column_j
            let mut entering = None;
            for c in 0..self.width {
                if !allowed[c] || self.basis.contains(&c) {
                    continue;
                }
                let mut rc = cost[c];
                for r in 0..m {
                    let a = self.rows[r][c];
                    if a != 0.0 {
                        rc -= cost[self.basis[r]] * a;
                    }
                }
                if rc < -tol {
                    entering = Some(c);
                    break;
                }
            }
            let Some(c) = entering else {
                return true;
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..m {
                let a = self.rows[r][c];
                if a > EPS {
                    let ratio = self.rhs(r) / a;
                    match leave {
                        None => leave = Some((r, ratio)),
                        Some((lr, lratio)) => {
                            if ratio < lratio - EPS
                                || (ratio <= lratio + EPS && self.basis[r] < self.basis[lr])
                            {
                                leave = Some((r, ratio));
                            }
                        }
                    }
                }
            }
            let Some((r, _)) = leave else {
                return false;
            };
            self.pivot(r, c);
        }
        true
    }
}

pub fn solve(lp: &LinearProgram) -> LpOutcome {
    let n = lp.objective.len();
    let m = lp.constraints.len();
    if m == 0 {
        return if lp.objective.iter().any(|&c| c < 0.0) {
            LpOutcome::Unbounded
        } else {
            LpOutcome::Optimal {
                x: vec![0.0; n],
                objective: 0.0,
            }
        };
    }

    // Normalize to nonnegative right-hand sides.
    let mut rows: Vec<Row> = lp
        .constraints
        .iter()
        .map(|c| {
            if c.rhs < 0.0 {
                let flipped = match c.relation {
                    Relation::Le => Relation::Ge,
                    Relation::Ge => Relation::Le,
                    Relation::Eq => Relation::Eq,
                };
                (
                    c.coeffs.iter().map(|&(j, a)| (j, -a)).collect(),
                    flipped,
                    -c.rhs,
                )
            } else {
                (c.coeffs.clone(), c.relation, c.rhs)
            }
        })
        .collect();

    let slack_count = rows.iter().filter(|r| r.1 != Relation::Eq).count();
    let art_count = rows.iter().filter(|r| r.1 != Relation::Le).count();
    let width = n + slack_count + art_count;
    let mut t = Tableau {
        rows: vec![vec![0.0; width + 1]; m],
        basis: vec![0; m],
        width,
    };
    let mut slack = n;
    let mut art = n + slack_count;
    let mut is_art = vec![false; width];
    let scale = rows
        .iter()
        .map(|r| r.2.abs())
        .chain(lp.objective.iter().map(|c| c.abs()))
        .fold(1.0_f64, f64::max);
    for (r, (coeffs, rel, rhs)) in rows.drain(..).enumerate() {
        for (j, a) in coeffs {
            t.rows[r][j] += a;
        }
        t.rows[r][width] = rhs;
        match rel {
            Relation::Le => {
                t.rows[r][slack] = 1.0;
                t.basis[r] = slack;
                slack += 1;
            }
            Relation::Ge => {
                t.rows[r][slack] = -1.0;
                slack += 1;
                t.rows[r][art] = 1.0;
                t.basis[r] = art;
                is_art[art] = true;
                art += 1;
            }
            Relation::Eq => {
                t.rows[r][art] = 1.0;
                t.basis[r] = art;
                is_art[art] = true;
                art += 1;
            }
        }
    }

    let tol = 1e-11 * scale;
    if art_count > 0 {
        let phase1: Vec<f64> = (0..width).map(|c| if is_art[c] { 1.0 } else { 0.0 }).collect();
        let allowed = vec![true; width];
        t.optimize(&phase1, &allowed, tol);
        let infeas: f64 = (0..m)
            .filter(|&r| is_art[t.basis[r]])
            .map(|r| t.rhs(r))
            .sum();
        if infeas > 1e-9 * scale {
            return LpOutcome::Infeasible;
        }
        // Drive remaining (zero-valued) artificials out of the basis.
        for r in 0..m {
            if is_art[t.basis[r]] {
                if let Some(c) = (0..width).find(|&c| !is_art[c] && t.rows[r][c].abs() > 1e-9) {
                    t.pivot(r, c);
                }
            }
        }
    }

    let mut cost = vec![0.0; width];
    cost[..n].copy_from_slice(&lp.objective);
    let allowed: Vec<bool> = (0..width).map(|c| !is_art[c]).collect();
    if !t.optimize(&cost, &allowed, tol) {
        return LpOutcome::Unbounded;
    }
    let mut x = vec![0.0; n];
    for r in 0..m {
        let b = t.basis[r];
        if b < n {
            x[b] = t.rhs(r).max(0.0);
        }
    }
    let objective = x.iter().zip(&lp.objective).map(|(a, b)| a * b).sum();
    LpOutcome::Optimal { x, objective }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_textbook_problem() {
        // max 3x + 5y s.t. x ≤ 4, 2y ≤ 12, 3x + 2y ≤ 18  →  (2, 6), 36
        let lp = LinearProgram {
            objective: vec![-3.0, -5.0],
            constraints: vec![
                Constraint::new(vec![(0, 1.0)], Relation::Le, 4.0),
                Constraint::new(vec![(1, 2.0)], Relation::Le, 12.0),
                Constraint::new(vec![(0, 3.0), (1, 2.0)], Relation::Le, 18.0),
            ],
        };
        match solve(&lp) {
            LpOutcome::Optimal { x, objective } => {
                assert!((x[0] - 2.0).abs() < 1e-9 && (x[1] - 6.0).abs() < 1e-9);
                assert!((objective + 36.0).abs() < 1e-9);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn equality_and_ge_rows() {
        // min x + 2y s.t. x + y = 5, x ≥ 1, y ≥ 2  →  (3, 2), 7
        let lp = LinearProgram {
            objective: vec![1.0, 2.0],
            constraints: vec![
                Constraint::new(vec![(0, 1.0), (1, 1.0)], Relation::Eq, 5.0),
                Constraint::new(vec![(0, 1.0)], Relation::Ge, 1.0),
                Constraint::new(vec![(1, 1.0)], Relation::Ge, 2.0),
            ],
        };
        match solve(&lp) {
            LpOutcome::Optimal { objective, .. } => assert!((objective - 7.0).abs() < 1e-9),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let infeasible = LinearProgram {
            objective: vec![1.0],
            constraints: vec![
                Constraint::new(vec![(0, 1.0)], Relation::Le, 1.0),
                Constraint::new(vec![(0, 1.0)], Relation::Ge, 2.0),
            ],
        };
        assert_eq!(solve(&infeasible), LpOutcome::Infeasible);
        let unbounded = LinearProgram {
            objective: vec![-1.0],
            constraints: vec![Constraint::new(vec![(0, 1.0)], Relation::Ge, 1.0)],
        };
        assert_eq!(solve(&unbounded), LpOutcome::Unbounded);
    }
}
