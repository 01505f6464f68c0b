//! Dense two-phase tableau simplex with Bland's anti-cycling rule.
//!
//! Sized for the small stationary-policy programs in this crate (a few
//! hundred columns at most). All variables are nonnegative.

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-10;
const FEASIBILITY_TOL: f64 = 1e-9;
const MAX_PIVOTS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

/// `minimize c·x` subject to the constraints and `x ≥ 0`.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    objective: Vec<f64>,
    constraints: Vec<Constraint>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, value: f64 },
    Infeasible,
    Unbounded,
}

impl LinearProgram {
    pub fn minimize(objective: Vec<f64>) -> Self {
        Self { objective, constraints: Vec::new() }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn constrain(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) -> &mut Self {
        assert_eq!(coeffs.len(), self.objective.len(), "constraint width must match objective");
        self.constraints.push(Constraint { coeffs, relation, rhs });
        self
    }

    pub fn solve(&self) -> Result<LpOutcome> {
        Tableau::build(self).run(&self.objective)
    }
}

struct Tableau {
    /// `m` constraint rows followed by the objective row; last column is the rhs.
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    n_orig: usize,
    /// Columns at or beyond this index are artificial.
    first_artificial: usize,
    width: usize,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Self {
        let n = lp.num_vars();
        let m = lp.constraints.len();

        // Normalize to nonnegative right-hand sides.
        let rows: Vec<(Vec<f64>, Relation, f64)> = lp
            .constraints
            .iter()
            .map(|c| {
                if c.rhs < 0.0 {
                    let rel = match c.relation {
                        Relation::Le => Relation::Ge,
                        Relation::Ge => Relation::Le,
                        Relation::Eq => Relation::Eq,
                    };
                    (c.coeffs.iter().map(|x| -x).collect(), rel, -c.rhs)
                } else {
                    (c.coeffs.clone(), c.relation, c.rhs)
                }
            })
            .collect();

        let n_slack = rows.iter().filter(|r| r.1 != Relation::Eq).count();
        let n_art = rows.iter().filter(|r| r.1 != Relation::Le).count();
        let first_artificial = n + n_slack;
        let width = first_artificial + n_art;

        let mut table = vec![vec![0.0; width + 1]; m + 1];
        let mut basis = vec![0; m];
        let (mut slack, mut art) = (n, first_artificial);
        for (i, (coeffs, rel, rhs)) in rows.into_iter().enumerate() {
            table[i][..n].copy_from_slice(&coeffs);
            table[i][width] = rhs;
            match rel {
                Relation::Le => {
                    table[i][slack] = 1.0;
                    basis[i] = slack;
                    slack += 1;
                }
                Relation::Ge => {
                    table[i][slack] = -1.0;
                    slack += 1;
                    table[i][art] = 1.0;
                    basis[i] = art;
                    art += 1;
                }
                Relation::Eq => {
                    table[i][art] = 1.0;
                    basis[i] = art;
                    art += 1;
                }
            }
        }
        Self { rows: table, basis, n_orig: n, first_artificial, width }
    }

    fn m(&self) -> usize {
        self.basis.len()
    }

    /// Loads `cost` (indexed by column) into the objective row as reduced costs.
    fn set_objective(&mut self, cost: &[f64]) {
        let m = self.m();
        let w = self.width;
        let mut obj = vec![0.0; w + 1];
        obj[..cost.len()].copy_from_slice(cost);
        for i in 0..m {
            let cb = cost.get(self.basis[i]).copied().unwrap_or(0.0);
            if cb != 0.0 {
                for (o, r) in obj.iter_mut().zip(&self.rows[i]) {
                    *o -= cb * r;
                }
            }
        }
        self.rows[m] = obj;
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.width;
        let p = self.rows[r][c];
        for x in self.rows[r].iter_mut() {
            *x /= p;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for j in 0..=w {
                    row[j] -= f * pivot_row[j];
                }
                row[c] = 0.0;
            }
        }
        self.basis[r] = c;
    }

    /// Bland's rule iterations over columns `< allowed`. Returns false if unbounded.
    fn iterate(&mut self, allowed: usize) -> Result<bool> {
        let m = self.m();
        let w = self.width;
        for _ in 0..MAX_PIVOTS {
            let Some(enter) = (0..allowed).find(|&j| self.rows[m][j] < -PIVOT_TOL) else {
                return Ok(true);
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..m {
                let a = self.rows[i][enter];
                if a > PIVOT_TOL {
                    let ratio = self.rows[i][w] / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((li, lr)) => {
                            if ratio < lr - 1e-12 || (ratio <= lr + 1e-12 && self.basis[i] < self.basis[li]) {
                                Some((i, ratio))
                            } else {
                                Some((li, lr))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = leave else {
                return Ok(false);
            };
            self.pivot(r, enter);
        }
        Err(Error::LinearProgram(format!("no convergence after {MAX_PIVOTS} pivots")))
    }

    fn run(mut self, objective: &[f64]) -> Result<LpOutcome> {
        let m = self.m();
        let w = self.width;

        if self.first_artificial < w {
            let mut phase1 = vec![0.0; w];
            for c in phase1.iter_mut().skip(self.first_artificial) {
                *c = 1.0;
            }
            self.set_objective(&phase1);
            self.iterate(w)?;
            if -self.rows[m][w] > FEASIBILITY_TOL {
                return Ok(LpOutcome::Infeasible);
            }
            // Drive zero-level artificials out of the basis; drop redundant rows.
            let mut i = 0;
            while i < self.m() {
                if self.basis[i] >= self.first_artificial {
                    match (0..self.first_artificial).find(|&j| self.rows[i][j].abs() > PIVOT_TOL) {
                        Some(j) => self.pivot(i, j),
                        None => {
                            self.rows.remove(i);
                            self.basis.remove(i);
                            continue;
                        }
                    }
                }
                i += 1;
            }
        }

        self.set_objective(objective);
        if !self.iterate(self.first_artificial)? {
            return Ok(LpOutcome::Unbounded);
        }

        let mut x = vec![0.0; self.n_orig];
        for (i, &b) in self.basis.iter().enumerate() {
            if b < self.n_orig {
                x[b] = self.rows[i][w];
            }
        }
        let value = objective.iter().zip(&x).map(|(c, v)| c * v).sum();
        Ok(LpOutcome::Optimal { x, value })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn optimal(outcome: LpOutcome) -> (Vec<f64>, f64) {
        match outcome {
            LpOutcome::Optimal { x, value } => (x, value),
            other => panic!("expected optimal, got {other:?}"),
        }
    }

    #[test]
    fn benchmark_program() {
        // min q1 + q2 + 2 q3, q on the simplex, service covers arrivals.
        let mut lp = LinearProgram::minimize(vec![1.0, 1.0, 2.0]);
        lp.constrain(vec![1.0, 1.0, 1.0], Relation::Eq, 1.0)
            .constrain(vec![1.0, 1.0, 0.0], Relation::Ge, 0.5)
            .constrain(vec![1.0, 0.0, 1.0], Relation::Ge, 0.7)
            .constrain(vec![0.0, 1.0, 1.0], Relation::Ge, 0.4);
        let (x, v) = optimal(lp.solve().unwrap());
        assert!((v - 1.1).abs() < 1e-12);
        for (got, want) in x.iter().zip([0.6, 0.3, 0.1]) {
            assert!((got - want).abs() < 1e-12, "{x:?}");
        }
    }

    #[test]
    fn textbook_maximization() {
        // max 3x + 5y, x ≤ 4, 2y ≤ 12, 3x + 2y ≤ 18 → (2, 6), 36
        let mut lp = LinearProgram::minimize(vec![-3.0, -5.0]);
        lp.constrain(vec![1.0, 0.0], Relation::Le, 4.0)
            .constrain(vec![0.0, 2.0], Relation::Le, 12.0)
            .constrain(vec![3.0, 2.0], Relation::Le, 18.0);
        let (x, v) = optimal(lp.solve().unwrap());
        assert!((v + 36.0).abs() < 1e-12);
        assert!((x[0] - 2.0).abs() < 1e-12 && (x[1] - 6.0).abs() < 1e-12);
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let mut lp = LinearProgram::minimize(vec![1.0]);
        lp.constrain(vec![1.0], Relation::Le, 1.0).constrain(vec![1.0], Relation::Ge, 2.0);
        assert_eq!(lp.solve().unwrap(), LpOutcome::Infeasible);

        let mut lp = LinearProgram::minimize(vec![-1.0, 0.0]);
        lp.constrain(vec![1.0, -1.0], Relation::Le, 1.0);
        assert_eq!(lp.solve().unwrap(), LpOutcome::Unbounded);
    }

    #[test]
    fn negative_rhs_and_redundant_rows() {
        // -x ≤ -1 means x ≥ 1; duplicated equality is redundant.
        let mut lp = LinearProgram::minimize(vec![1.0, 1.0]);
        lp.constrain(vec![-1.0, 0.0], Relation::Le, -1.0)
            .constrain(vec![1.0, 1.0], Relation::Eq, 3.0)
            .constrain(vec![2.0, 2.0], Relation::Eq, 6.0);
        let (x, v) = optimal(lp.solve().unwrap());
        assert!((v - 3.0).abs() < 1e-12);
        assert!(x[0] >= 1.0 - 1e-12);
    }

    #[test]
    fn degenerate_program_terminates() {
        // Beale's cycling example; Bland's rule must terminate at -1/20.
        let mut lp = LinearProgram::minimize(vec![-0.75, 150.0, -0.02, 6.0]);
        lp.constrain(vec![0.25, -60.0, -0.04, 9.0], Relation::Le, 0.0)
            .constrain(vec![0.5, -90.0, -0.02, 3.0], Relation::Le, 0.0)
            .constrain(vec![0.0, 0.0, 1.0, 0.0], Relation::Le, 1.0);
        let (_, v) = optimal(lp.solve().unwrap());
        assert!((v + 0.05).abs() < 1e-12);
    }
}
