//! Path-following barrier method for determinant maximization under linear
//! matrix inequalities:
//!
//! ```text
//! maximize   log det X(v)
//! subject to M_k(v) ⪰ 0,   k = 1..K
//! ```
//!
//! where `X` and every `M_k` are affine symmetric functions of `v ∈ R^m`. The
//! method minimizes `-t log det X - Σ log det M_k` by damped Newton steps for
//! an increasing sequence of `t`. Iterates stay strictly feasible, and on the
//! central path the duality gap equals `Σ size(M_k) / t`.
//!
//! Problems are small (tens of variables, blocks of size ≤ 2n), so gradients
//! and Hessians are formed densely.

use nalgebra::Cholesky;

use crate::linalg::{Matrix, Vector};

/// `M(v) = M₀ + Σᵢ vᵢ Mᵢ` with each `Mᵢ` stored as its non-zero entries.
#[derive(Clone, Debug)]
pub struct AffineSym {
    constant: Matrix,
    terms: Vec<(usize, Vec<(usize, usize, f64)>)>,
}

impl AffineSym {
    /// Samples an affine map on the unit vectors of `R^m`.
    pub fn from_fn(n_vars: usize, f: impl Fn(&Vector) -> Matrix) -> Self {
        let zero = Vector::zeros(n_vars);
        let constant = f(&zero);
        let mut terms = Vec::new();
        for i in 0..n_vars {
            let mut e = zero.clone();
            e[i] = 1.0;
            let m = f(&e) - &constant;
            let entries: Vec<_> = (0..m.ncols())
                .flat_map(|c| (0..m.nrows()).map(move |r| (r, c)))
                .filter(|&(r, c)| m[(r, c)] != 0.0)
                .map(|(r, c)| (r, c, m[(r, c)]))
                .collect();
            if !entries.is_empty() {
                terms.push((i, entries));
            }
        }
        Self { constant, terms }
    }

    pub fn size(&self) -> usize {
        self.constant.nrows()
    }

    pub fn eval(&self, v: &Vector) -> Matrix {
        let mut m = self.constant.clone();
        for (i, entries) in &self.terms {
            let vi = v[*i];
            for &(r, c, a) in entries {
                m[(r, c)] += vi * a;
            }
        }
        m
    }

    /// Coefficient matrix of variable `i` (zero if absent).
    pub fn coefficient(&self, i: usize) -> Matrix {
        let n = self.size();
        let mut m = Matrix::zeros(n, n);
        if let Some((_, entries)) = self.terms.iter().find(|(j, _)| *j == i) {
            for &(r, c, a) in entries {
                m[(r, c)] = a;
            }
        }
        m
    }

    pub fn constant(&self) -> &Matrix {
        &self.constant
    }

    fn is_trivial(&self) -> bool {
        self.terms.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct MaxDetProblem {
    pub n_vars: usize,
    pub objective: AffineSym,
    pub constraints: Vec<AffineSym>,
}

#[derive(Clone, Copy, Debug)]
pub struct MaxDetOptions {
    /// Target bound on the duality gap.
    pub gap_tol: f64,
    /// Gap at which a stalled Newton iteration is still accepted.
    pub accept_gap: f64,
    pub t0: f64,
    pub mu: f64,
    pub max_newton: usize,
}

impl Default for MaxDetOptions {
    fn default() -> Self {
        Self {
            gap_tol: 1e-8,
            accept_gap: 1e-6,
            t0: 1.0,
            mu: 50.0,
            max_newton: 2000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct MaxDetSolution {
    pub v: Vector,
    pub log_det: f64,
    /// Duality-gap bound at the returned point.
    pub gap: f64,
    pub newton_steps: usize,
    /// Smallest eigenvalue over all constraint blocks.
    pub min_constraint_eig: f64,
    pub converged: bool,
}

#[derive(Clone, Debug)]
pub enum MaxDetFailure {
    /// The starting point is not strictly feasible.
    InfeasibleStart,
    /// Newton stalled before the gap reached `accept_gap`.
    Stalled(MaxDetSolution),
}

fn log_det_chol(m: &Matrix) -> Option<(f64, Cholesky<f64, nalgebra::Dyn>)> {
    let chol = Cholesky::new(m.clone())?;
    let ld = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    ld.is_finite().then_some((ld, chol))
}

/// Newton centering stops once half the squared decrement is below this.
const CENTERING_TOL: f64 = 1e-8;

impl MaxDetProblem {
    fn active_constraints(&self) -> impl Iterator<Item = &AffineSym> {
        self.constraints.iter().filter(|c| !c.is_trivial())
    }

    fn barrier_degree(&self) -> f64 {
        self.active_constraints().map(|c| c.size() as f64).sum()
    }

    /// `-t log det X - Σ log det M_k`, or `None` outside the domain.
    fn value(&self, v: &Vector, t: f64) -> Option<f64> {
        let (ld, _) = log_det_chol(&self.objective.eval(v))?;
        let mut f = -t * ld;
        for c in self.active_constraints() {
            let (ldc, _) = log_det_chol(&c.eval(v))?;
            f -= ldc;
        }
        Some(f)
    }

    fn accumulate(
        block: &AffineSym,
        v: &Vector,
        weight: f64,
        grad: &mut Vector,
        hess: &mut Matrix,
    ) -> Option<()> {
        let inv = Cholesky::new(block.eval(v))?.inverse();
        // tr(M⁻¹Mᵢ) and tr(M⁻¹Mᵢ M⁻¹Mⱼ), expanded over the sparse entries.
        for (a, (i, ei)) in block.terms.iter().enumerate() {
            grad[*i] -= weight * ei.iter().map(|&(p, q, x)| x * inv[(q, p)]).sum::<f64>();
            for (j, ej) in block.terms.iter().take(a + 1) {
                let mut h = 0.0;
                for &(p, q, x) in ei {
                    for &(r, s, y) in ej {
                        h += x * y * inv[(q, r)] * inv[(s, p)];
                    }
                }
                h *= weight;
                hess[(*i, *j)] += h;
                if i != j {
                    hess[(*j, *i)] += h;
                }
            }
        }
        Some(())
    }

    fn min_constraint_eig(&self, v: &Vector) -> f64 {
        self.constraints
            .iter()
            .map(|c| crate::linalg::min_eigenvalue(&c.eval(v)))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn is_strictly_feasible(&self, v: &Vector) -> bool {
        self.value(v, 1.0).is_some()
            && self
                .constraints
                .iter()
                .filter(|c| c.is_trivial())
                .all(|c| Cholesky::new(c.constant.clone()).is_some())
    }

    pub fn solve(&self, start: &Vector, opts: &MaxDetOptions) -> Result<MaxDetSolution, MaxDetFailure> {
        if !self.is_strictly_feasible(start) {
            return Err(MaxDetFailure::InfeasibleStart);
        }
        let m = self.n_vars;
        let nu = self.barrier_degree().max(1.0);
        let mut v = start.clone();
        let mut t = opts.t0;
        // Gap bounds are only valid at centered points.
        let mut centered = 0.0;
        let mut steps = 0;
        let finish = |v: Vector, t: f64, steps: usize, converged: bool| {
            let log_det = log_det_chol(&self.objective.eval(&v)).map_or(f64::NAN, |(ld, _)| ld);
            MaxDetSolution {
                log_det,
                gap: nu / t,
                newton_steps: steps,
                min_constraint_eig: self.min_constraint_eig(&v),
                converged,
                v,
            }
        };
        loop {
            // Centering.
            loop {
                if steps >= opts.max_newton {
                    let sol = finish(v, centered, steps, false);
                    return if sol.gap <= opts.accept_gap {
                        Ok(sol)
                    } else {
                        Err(MaxDetFailure::Stalled(sol))
                    };
                }
                steps += 1;
                let mut grad = Vector::zeros(m);
                let mut hess = Matrix::zeros(m, m);
                Self::accumulate(&self.objective, &v, t, &mut grad, &mut hess)
                    .expect("iterate inside domain");
                for c in self.active_constraints() {
                    Self::accumulate(c, &v, 1.0, &mut grad, &mut hess)
                        .expect("iterate inside domain");
                }
                // Jacobi scaling, then the smallest shift that lets the
                // factorization through when some direction is numerically free.
                let d = hess.diagonal().map(|h| if h > 0.0 { 1.0 / h.sqrt() } else { 1.0 });
                for j in 0..m {
                    for i in 0..m {
                        hess[(i, j)] *= d[i] * d[j];
                    }
                }
                let mut shift = 1e-14;
                let hchol = loop {
                    let mut h = hess.clone();
                    for j in 0..m {
                        h[(j, j)] += shift;
                    }
                    if let Some(c) = Cholesky::new(h) {
                        break Some(c);
                    }
                    shift *= 100.0;
                    if shift > 1e-6 {
                        break None;
                    }
                };
                let Some(hchol) = hchol else {
                    let sol = finish(v, centered, steps, false);
                    return if sol.gap <= opts.accept_gap {
                        Ok(sol)
                    } else {
                        Err(MaxDetFailure::Stalled(sol))
                    };
                };
                let dv = -hchol.solve(&grad.component_mul(&d)).component_mul(&d);
                let decrement = -grad.dot(&dv);
                log::trace!("t={t:.3e} step={steps} decrement={decrement:.3e}");
                if decrement / 2.0 <= CENTERING_TOL {
                    break;
                }
                let f0 = self.value(&v, t).expect("iterate inside domain");
                let slope = grad.dot(&dv);
                let mut s = 1.0;
                let mut progress = false;
                while s > 1e-14 {
                    let cand = &v + &dv * s;
                    if let Some(f1) = self.value(&cand, t) {
                        if f1 <= f0 + 0.25 * s * slope {
                            progress = f0 - f1 > 8.0 * f64::EPSILON * f0.abs().max(1.0);
                            v = cand;
                            break;
                        }
                    }
                    s *= 0.5;
                }
                if !progress {
                    // Round-off floor: the decrement cannot be realized.
                    break;
                }
            }
            centered = t;
            if nu / t <= opts.gap_tol {
                return Ok(finish(v, t, steps, true));
            }
            t *= opts.mu;
        }
    }
}
