//! Dense linear-program front end backed by `microlp`.
//!
//! Rows and columns are equilibrated before they reach the simplex solver,
//! whose tolerances are absolute.

use microlp::{ComparisonOp, OptimizationDirection, Problem};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cmp {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LpFailure {
    Infeasible,
    Unbounded,
    Numerical(String),
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
}

/// `maximize c·x` subject to dense rows and per-variable bounds.
#[derive(Clone, Debug)]
pub struct LinearProgram {
    objective: Vec<f64>,
    bounds: Vec<(f64, f64)>,
    rows: Vec<(Vec<f64>, Cmp, f64)>,
}

impl LinearProgram {
    /// All variables start free.
    pub fn maximize(objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self {
            objective,
            bounds: vec![(f64::NEG_INFINITY, f64::INFINITY); n],
            rows: Vec::new(),
        }
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn set_bounds(&mut self, var: usize, lo: f64, hi: f64) {
        self.bounds[var] = (lo, hi);
    }

    pub fn add_row(&mut self, coeffs: Vec<f64>, cmp: Cmp, rhs: f64) {
        assert_eq!(coeffs.len(), self.n_vars(), "row length");
        self.rows.push((coeffs, cmp, rhs));
    }

    pub fn solve(&self) -> Result<LpSolution, LpFailure> {
        let n = self.n_vars();
        // Row equilibration, then column equilibration: x_j = x̃_j / col[j].
        let mut rows = Vec::with_capacity(self.rows.len());
        for (coeffs, cmp, rhs) in &self.rows {
            let scale = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
            if scale == 0.0 {
                let ok = match cmp {
                    Cmp::Le => *rhs >= 0.0,
                    Cmp::Ge => *rhs <= 0.0,
                    Cmp::Eq => *rhs == 0.0,
                };
                if ok {
                    continue;
                }
                return Err(LpFailure::Infeasible);
            }
            let scaled: Vec<f64> = coeffs.iter().map(|c| c / scale).collect();
            rows.push((scaled, *cmp, rhs / scale));
        }
        let col: Vec<f64> = (0..n)
            .map(|j| {
                let m = rows.iter().fold(0.0f64, |m, (r, _, _)| m.max(r[j].abs()));
                if m > 0.0 {
                    m
                } else {
                    1.0
                }
            })
            .collect();

        let mut problem = Problem::new(OptimizationDirection::Maximize);
        let vars: Vec<_> = (0..n)
            .map(|j| {
                let (lo, hi) = self.bounds[j];
                problem.add_var(self.objective[j] / col[j], (lo * col[j], hi * col[j]))
            })
            .collect();
        for (coeffs, cmp, rhs) in &rows {
            let terms: Vec<_> = (0..n)
                .filter(|&j| coeffs[j] != 0.0)
                .map(|j| (vars[j], coeffs[j] / col[j]))
                .collect();
            let op = match cmp {
                Cmp::Le => ComparisonOp::Le,
                Cmp::Ge => ComparisonOp::Ge,
                Cmp::Eq => ComparisonOp::Eq,
            };
            problem.add_constraint(terms.as_slice(), op, *rhs);
        }
        let outcome = problem.solve().map_err(|e| match e {
            microlp::Error::Infeasible => LpFailure::Infeasible,
            microlp::Error::Unbounded => LpFailure::Unbounded,
            other => LpFailure::Numerical(other.to_string()),
        })?;
        let solution = outcome
            .into_solution()
            .map_err(|_| LpFailure::Numerical("solve interrupted".into()))?;
        let x: Vec<f64> = (0..n).map(|j| solution.var_value(vars[j]) / col[j]).collect();
        let objective = self.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
        Ok(LpSolution { x, objective })
    }
}
