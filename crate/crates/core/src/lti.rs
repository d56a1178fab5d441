//! Discrete-time linear plant `x⁺ = A x + B u`, `y = C x`, together with the
//! matrix equations the controller design needs.

use nalgebra::{Cholesky, LU};

use crate::error::{dim_err, Error, Result};
use crate::linalg::{self, Matrix, Vector};

/// Margin on the spectral radius for a matrix to count as Schur.
pub const EPS_SCHUR: f64 = 1e-9;

const RANK_TOL: f64 = 1e-8;

/// Continuous-time origin of a discretized model.
#[derive(Clone, Debug, PartialEq)]
pub struct ContinuousModel {
    pub a: Matrix,
    pub b: Matrix,
    /// Sample period in seconds.
    pub period: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LtiSystem {
    a: Matrix,
    b: Matrix,
    c: Matrix,
    continuous: Option<ContinuousModel>,
}

impl LtiSystem {
    /// Validates dimensions, controllability of `(A, B)` and `rank C = n_y`.
    pub fn new(a: Matrix, b: Matrix, c: Matrix) -> Result<Self> {
        let n = a.nrows();
        if !a.is_square() || n == 0 {
            return Err(dim_err("A must be square and non-empty"));
        }
        if b.nrows() != n || b.ncols() == 0 {
            return Err(dim_err(format!(
                "B is {}x{}, expected {n} rows",
                b.nrows(),
                b.ncols()
            )));
        }
        if c.ncols() != n || c.nrows() == 0 {
            return Err(dim_err(format!(
                "C is {}x{}, expected {n} columns",
                c.nrows(),
                c.ncols()
            )));
        }
        let ctrb = linalg::controllability_matrix(&a, &b);
        if linalg::numeric_rank(&ctrb, RANK_TOL) != n {
            return Err(Error::InvalidArgument("(A, B) is not controllable".into()));
        }
        if linalg::numeric_rank(&c, RANK_TOL) != c.nrows() {
            return Err(Error::InvalidArgument("C does not have full row rank".into()));
        }
        Ok(Self {
            a,
            b,
            c,
            continuous: None,
        })
    }

    /// Zero-order-hold discretization of `ẋ = A_c x + B_c u`.
    pub fn from_continuous(a_c: Matrix, b_c: Matrix, c: Matrix, period: f64) -> Result<Self> {
        let (a, b) = zoh_discretize(&a_c, &b_c, period)?;
        let mut sys = Self::new(a, b, c)?;
        sys.continuous = Some(ContinuousModel {
            a: a_c,
            b: b_c,
            period,
        });
        Ok(sys)
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &Matrix {
        &self.b
    }

    pub fn c(&self) -> &Matrix {
        &self.c
    }

    pub fn continuous(&self) -> Option<&ContinuousModel> {
        self.continuous.as_ref()
    }

    pub fn n_x(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_u(&self) -> usize {
        self.b.ncols()
    }

    pub fn n_y(&self) -> usize {
        self.c.nrows()
    }

    pub fn step(&self, x: &Vector, u: &Vector) -> Vector {
        &self.a * x + &self.b * u
    }

    pub fn output(&self, x: &Vector) -> Vector {
        &self.c * x
    }

    pub fn closed_loop(&self, gain: &Matrix) -> Matrix {
        &self.a + &self.b * gain
    }
}

/// Quadratic stage cost `xᵀQx + uᵀRu`.
#[derive(Clone, Debug, PartialEq)]
pub struct CostModel {
    q: Matrix,
    r: Matrix,
}

impl CostModel {
    /// `Q` must be symmetric PSD and `R` symmetric PD.
    pub fn new(q: Matrix, r: Matrix) -> Result<Self> {
        if !q.is_square() || !r.is_square() {
            return Err(dim_err("cost matrices must be square"));
        }
        if !linalg::is_symmetric(&q, 1e-10) || linalg::min_eigenvalue(&q) < -1e-12 * q.amax() {
            return Err(Error::InvalidArgument("Q must be symmetric PSD".into()));
        }
        linalg::check_positive_definite(&r, "R")?;
        Ok(Self { q, r })
    }

    pub fn q(&self) -> &Matrix {
        &self.q
    }

    pub fn r(&self) -> &Matrix {
        &self.r
    }

    pub fn stage(&self, x: &Vector, u: &Vector) -> f64 {
        x.dot(&(&self.q * x)) + u.dot(&(&self.r * u))
    }

    fn check_dims(&self, sys: &LtiSystem) -> Result<()> {
        if self.q.nrows() != sys.n_x() || self.r.nrows() != sys.n_u() {
            return Err(dim_err(format!(
                "cost is {}x{} / {}x{} for a system with n_x={} n_u={}",
                self.q.nrows(),
                self.q.ncols(),
                self.r.nrows(),
                self.r.ncols(),
                sys.n_x(),
                sys.n_u()
            )));
        }
        Ok(())
    }
}

/// `A = exp(A_c T)`, `B = ∫₀ᵀ exp(A_c s) ds B_c`, via the exponential of the
/// augmented matrix `[[A_c, B_c], [0, 0]] T`.
pub fn zoh_discretize(a_c: &Matrix, b_c: &Matrix, period: f64) -> Result<(Matrix, Matrix)> {
    let n = a_c.nrows();
    if !a_c.is_square() || b_c.nrows() != n {
        return Err(dim_err("continuous-time A/B"));
    }
    if !(period > 0.0) || !period.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "sample period {period} must be positive"
        )));
    }
    let m = b_c.ncols();
    let mut aug = Matrix::zeros(n + m, n + m);
    aug.view_mut((0, 0), (n, n)).copy_from(&(a_c * period));
    aug.view_mut((0, n), (n, m)).copy_from(&(b_c * period));
    let e = aug.exp();
    Ok((
        e.view((0, 0), (n, n)).into_owned(),
        e.view((0, n), (n, m)).into_owned(),
    ))
}

/// A state/input pair satisfying `(A - I) x̄ + B ū = 0`, `C x̄ = ȳ`.
#[derive(Clone, Debug, PartialEq)]
pub struct Equilibrium {
    pub x: Vector,
    pub u: Vector,
    pub y: Vector,
    pub unique: bool,
}

impl Equilibrium {
    /// Residuals of the equilibrium equations, `(dynamics, output)`.
    pub fn residuals(&self, sys: &LtiSystem) -> (f64, f64) {
        let dyn_res = (sys.a() * &self.x + sys.b() * &self.u - &self.x).norm();
        let out_res = (sys.c() * &self.x - &self.y).norm();
        (dyn_res, out_res)
    }
}

/// Non-unique equilibria: `(x̄, ū) = particular + basis · θ` for any `θ`.
#[derive(Clone, Debug, PartialEq)]
pub struct EquilibriumFamily {
    pub particular: Equilibrium,
    /// `(n_x + n_u) × d`, orthonormal columns.
    pub basis: Matrix,
}

#[derive(Clone, Debug, PartialEq)]
pub enum EquilibriumSolution {
    Unique(Equilibrium),
    Family(EquilibriumFamily),
}

impl EquilibriumSolution {
    pub fn particular(&self) -> &Equilibrium {
        match self {
            Self::Unique(e) => e,
            Self::Family(f) => &f.particular,
        }
    }
}

fn equilibrium_matrix(sys: &LtiSystem) -> Matrix {
    let (nx, nu, ny) = (sys.n_x(), sys.n_u(), sys.n_y());
    let mut m = Matrix::zeros(nx + ny, nx + nu);
    m.view_mut((0, 0), (nx, nx))
        .copy_from(&(sys.a() - Matrix::identity(nx, nx)));
    m.view_mut((0, nx), (nx, nu)).copy_from(sys.b());
    m.view_mut((nx, 0), (ny, nx)).copy_from(sys.c());
    m
}

/// Solves the equilibrium equations for a target output.
pub fn equilibrium_for_output(sys: &LtiSystem, y: &Vector) -> Result<EquilibriumSolution> {
    let (nx, ny) = (sys.n_x(), sys.n_y());
    if y.len() != ny {
        return Err(dim_err(format!("output has {} entries, expected {ny}", y.len())));
    }
    let m = equilibrium_matrix(sys);
    let mut rhs = Vector::zeros(nx + ny);
    rhs.rows_mut(nx, ny).copy_from(y);

    let svd = m.clone().svd(true, true);
    let tol = 1e-12 * svd.singular_values.max();
    let mut z = svd
        .solve(&rhs, tol)
        .map_err(|e| Error::SolverFailure {
            message: e.to_string(),
            residual: f64::NAN,
        })?;
    // One step of iterative refinement.
    let r = &rhs - &m * &z;
    if let Ok(dz) = svd.solve(&r, tol) {
        z += dz;
    }

    let eq = Equilibrium {
        x: z.rows(0, nx).into_owned(),
        u: z.rows(nx, sys.n_u()).into_owned(),
        y: y.clone(),
        unique: true,
    };
    let (dyn_res, out_res) = eq.residuals(sys);
    if dyn_res > 1e-9 * (1.0 + eq.x.norm()) || out_res > 1e-9 * (1.0 + y.norm()) {
        return Err(Error::NoEquilibrium);
    }
    let basis = linalg::null_space(&m, 1e-10);
    if basis.ncols() == 0 {
        Ok(EquilibriumSolution::Unique(eq))
    } else {
        Ok(EquilibriumSolution::Family(EquilibriumFamily {
            particular: Equilibrium { unique: false, ..eq },
            basis,
        }))
    }
}

/// LQR design: Riccati solution `P` and gain `F` with `u = F x`.
#[derive(Clone, Debug)]
pub struct LqrDesign {
    pub p: Matrix,
    pub f: Matrix,
    /// Relative Riccati residual of `p`.
    pub residual: f64,
}

fn lqr_gain(a: &Matrix, b: &Matrix, r: &Matrix, p: &Matrix) -> Result<Matrix> {
    let btp = b.transpose() * p;
    let lhs = r + &btp * b;
    let chol = Cholesky::new(linalg::symmetrize(&lhs)).ok_or_else(|| Error::SolverFailure {
        message: "R + BᵀPB is not positive definite".into(),
        residual: f64::NAN,
    })?;
    Ok(-chol.solve(&(&btp * a)))
}

/// Relative residual of `AᵀPA - P - AᵀPB(R + BᵀPB)⁻¹BᵀPA + Q`.
pub fn dare_residual(a: &Matrix, b: &Matrix, q: &Matrix, r: &Matrix, p: &Matrix) -> f64 {
    let atpa = a.transpose() * p * a;
    let atpb = a.transpose() * p * b;
    let lhs = r + b.transpose() * p * b;
    let Some(chol) = Cholesky::new(linalg::symmetrize(&lhs)) else {
        return f64::INFINITY;
    };
    let corr = &atpb * chol.solve(&atpb.transpose());
    let res = &atpa - p - &corr + q;
    let scale = atpa.norm().max(p.norm()).max(q.norm()).max(corr.norm());
    linalg::relative(res.norm(), scale)
}

/// Solves the discrete-time algebraic Riccati equation with the structured
/// doubling algorithm followed by Newton (Hewer) refinement.
pub fn solve_dare(sys: &LtiSystem, cost: &CostModel) -> Result<LqrDesign> {
    cost.check_dims(sys)?;
    solve_dare_matrices(sys.a(), sys.b(), cost.q(), cost.r())
}

pub fn solve_dare_matrices(a: &Matrix, b: &Matrix, q: &Matrix, r: &Matrix) -> Result<LqrDesign> {
    let n = a.nrows();
    let r_chol = Cholesky::new(linalg::symmetrize(r))
        .ok_or_else(|| Error::NotPositiveDefinite("R".into()))?;
    let mut ak = a.clone();
    let mut gk = b * r_chol.solve(&b.transpose());
    let mut hk = linalg::symmetrize(q);
    let eye = Matrix::identity(n, n);
    for _ in 0..100 {
        let w = &eye + &gk * &hk;
        let lu = LU::new(w);
        let w_inv_a = lu.solve(&ak).ok_or_else(|| Error::SolverFailure {
            message: "singular doubling step".into(),
            residual: f64::NAN,
        })?;
        let w_inv_g = lu.solve(&gk).expect("same factorization");
        let h_next = linalg::symmetrize(&(&hk + ak.transpose() * &hk * &w_inv_a));
        let g_next = linalg::symmetrize(&(&gk + &ak * &w_inv_g * ak.transpose()));
        ak = &ak * &w_inv_a;
        let delta = (&h_next - &hk).norm();
        hk = h_next;
        gk = g_next;
        if !hk.iter().all(|v| v.is_finite()) {
            break;
        }
        if delta <= 1e-15 * hk.norm() || ak.norm() < 1e-300 {
            break;
        }
    }
    let mut p = hk;
    let mut residual = dare_residual(a, b, q, r, &p);
    if !residual.is_finite() {
        return Err(Error::SolverFailure {
            message: "doubling iteration diverged".into(),
            residual,
        });
    }
    // Hewer iterations polish the doubling result.
    for _ in 0..5 {
        let f = lqr_gain(a, b, r, &p)?;
        let acl = a + b * &f;
        if !is_schur(&acl) {
            break;
        }
        let w = q + f.transpose() * r * &f;
        let Ok(candidate) = solve_discrete_lyapunov(&acl, &w) else {
            break;
        };
        let cand_res = dare_residual(a, b, q, r, &candidate);
        if cand_res < residual {
            p = candidate;
            residual = cand_res;
        } else {
            break;
        }
        if residual < 1e-14 {
            break;
        }
    }
    if residual > 1e-8 {
        return Err(Error::SolverFailure {
            message: "Riccati residual above tolerance".into(),
            residual,
        });
    }
    let f = lqr_gain(a, b, r, &p)?;
    let acl = a + b * &f;
    let rho = linalg::spectral_radius(&acl);
    if rho >= 1.0 - EPS_SCHUR {
        return Err(Error::NotStable(rho));
    }
    Ok(LqrDesign { p, f, residual })
}

/// Spectral radius strictly below `1 - EPS_SCHUR`.
pub fn is_schur(a: &Matrix) -> bool {
    a.is_square() && linalg::spectral_radius(a) < 1.0 - EPS_SCHUR
}

/// Relative residual of `AᵀSA - S + W`.
pub fn lyapunov_residual(acl: &Matrix, w: &Matrix, s: &Matrix) -> f64 {
    let atsa = acl.transpose() * s * acl;
    let res = &atsa - s + w;
    linalg::relative(res.norm(), s.norm().max(w.norm()).max(atsa.norm()))
}

/// Solves `AᵀSA - S = -W` for Schur `A` through the Kronecker form.
pub fn solve_discrete_lyapunov(acl: &Matrix, w: &Matrix) -> Result<Matrix> {
    let n = acl.nrows();
    if !acl.is_square() || w.nrows() != n || w.ncols() != n {
        return Err(dim_err("Lyapunov equation dimensions"));
    }
    let rho = linalg::spectral_radius(acl);
    if rho >= 1.0 - EPS_SCHUR {
        return Err(Error::NotStable(rho));
    }
    let at = acl.transpose();
    let lhs = Matrix::identity(n * n, n * n) - at.kronecker(&at);
    let rhs = Vector::from_column_slice(w.as_slice());
    let lu = LU::new(lhs.clone());
    let mut vec_s = lu.solve(&rhs).ok_or_else(|| Error::SolverFailure {
        message: "singular Lyapunov operator".into(),
        residual: f64::NAN,
    })?;
    let refine = &rhs - &lhs * &vec_s;
    if let Some(d) = lu.solve(&refine) {
        vec_s += d;
    }
    let s = linalg::symmetrize(&Matrix::from_column_slice(n, n, vec_s.as_slice()));
    let residual = lyapunov_residual(acl, w, &s);
    if residual > 1e-9 {
        return Err(Error::SolverFailure {
            message: "Lyapunov residual above tolerance".into(),
            residual,
        });
    }
    Ok(s)
}

/// Recorded closed-loop run. [`simulate`] leaves `inputs` one entry short;
/// planner runs also record the input applied at the final step.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub states: Vec<Vector>,
    pub inputs: Vec<Vector>,
    pub outputs: Vec<Vector>,
}

/// Runs `x(t+1) = A x(t) + B policy(x(t))` for `horizon` steps.
pub fn simulate(
    sys: &LtiSystem,
    x0: &Vector,
    mut policy: impl FnMut(&Vector) -> Vector,
    horizon: usize,
) -> Trajectory {
    let mut states = Vec::with_capacity(horizon + 1);
    let mut inputs = Vec::with_capacity(horizon);
    let mut outputs = Vec::with_capacity(horizon + 1);
    let mut x = x0.clone();
    for _ in 0..horizon {
        let u = policy(&x);
        let next = sys.step(&x, &u);
        outputs.push(sys.output(&x));
        states.push(std::mem::replace(&mut x, next));
        inputs.push(u);
    }
    outputs.push(sys.output(&x));
    states.push(x);
    Trajectory {
        states,
        inputs,
        outputs,
    }
}

/// Hill-Clohessy-Wiltshire in-plane relative dynamics with state
/// `[radial, along-track, radial rate, along-track rate]` and specific-force
/// inputs, for mean motion `n` (rad/s).
pub fn hcw_continuous(mean_motion: f64) -> (Matrix, Matrix) {
    let n = mean_motion;
    let a = Matrix::from_row_slice(
        4,
        4,
        &[
            0.0, 0.0, 1.0, 0.0, //
            0.0, 0.0, 0.0, 1.0, //
            3.0 * n * n, 0.0, 0.0, 2.0 * n, //
            0.0, 0.0, -2.0 * n, 0.0,
        ],
    );
    let b = Matrix::from_row_slice(4, 2, &[0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0]);
    (a, b)
}
