//! Volume-maximizing invariant ellipsoids by semidefinite programming.
//!
//! With `X = P⁻¹` and `W = F X`, invariance of `{(x - x̄)ᵀP(x - x̄) <= 1}`
//! under `u = F(x - x̄) + ū` and containment in `U` and `Y_k` become linear
//! matrix inequalities:
//!
//! ```text
//! [ X          (AX + BW)ᵀ ]          [ X         (h W)ᵀ ]          [ X          (h C X)ᵀ ]
//! [ AX + BW    X          ] ≻ 0,     [ h W       s²     ] ⪰ 0,     [ h C X      s²       ] ⪰ 0
//! ```
//!
//! one block per row `h` of `U` (slack `s = K - h ū`) and of `Y_k`
//! (`s = K - h ȳ`). The volume objective `log det X` is handled by the barrier
//! solver in [`crate::maxdet`]. A fixed-gain variant keeps `F` given and
//! optimizes over `X` alone.
//!
//! Before solving, the state is rescaled so that the warm start becomes
//! `X = I`, and every row is divided by its slack.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{dim_err, Error, Result};
use crate::geometry::Polytope;
use crate::linalg::{self, Matrix, Vector};
use crate::lti::{self, Equilibrium, LtiSystem};
use crate::maxdet::{AffineSym, MaxDetFailure, MaxDetOptions, MaxDetProblem, MaxDetSolution};
use crate::scaling::max_scale_closed_form;

/// Samples whose constraint slack at the equilibrium falls below this value
/// are rejected.
pub const MIN_ROW_SLACK: f64 = 1e-6;

/// Margin on the invariance block, in the rescaled coordinates.
pub const INVARIANCE_MARGIN: f64 = 1e-9;

/// Shrink factor applied to the scaled warm start so it is strictly feasible.
const WARM_SHRINK: f64 = 0.9;

#[derive(Clone, Debug, PartialEq)]
pub struct SolverStatus {
    pub newton_steps: usize,
    /// Bound on the log-det suboptimality.
    pub gap: f64,
    pub converged: bool,
    /// Smallest eigenvalue across all constraint blocks (rescaled
    /// coordinates); non-negative for an accepted result.
    pub min_block_eig: f64,
}

#[derive(Clone, Debug)]
pub struct SynthesisResult {
    pub gain: Matrix,
    pub p: Matrix,
    /// `log det P⁻¹`, proportional to log volume of the unit level set.
    pub log_det_x: f64,
    pub status: SolverStatus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SynthesisKind {
    /// Gain and ellipsoid are both decision variables.
    JointGain,
    /// Gain is fixed; only the ellipsoid is optimized.
    FixedGain,
}

#[derive(Clone, Debug, Default)]
pub struct SynthesisOptions {
    /// Starting gain for the joint problem. When absent, an LQR gain with
    /// identity weights is used.
    pub warm_gain: Option<Matrix>,
    pub solver: MaxDetOptions,
}

/// An assembled instance, kept in rescaled coordinates.
#[derive(Clone, Debug)]
pub struct SynthesisProblem {
    kind: SynthesisKind,
    n: usize,
    m: usize,
    /// `X = T X̃ Tᵀ`, lower triangular.
    t: Matrix,
    /// Gain in rescaled coordinates for the fixed-gain problem.
    fixed_gain: Option<Matrix>,
    problem: MaxDetProblem,
    start: Vector,
}

fn sym_index(n: usize, a: usize, b: usize) -> usize {
    let (i, j) = if a <= b { (a, b) } else { (b, a) };
    // Row-major packing of the upper triangle.
    i * n - i * (i + 1) / 2 + j
}

fn n_sym(n: usize) -> usize {
    n * (n + 1) / 2
}

fn unpack_sym(n: usize, v: &Vector) -> Matrix {
    Matrix::from_fn(n, n, |a, b| v[sym_index(n, a, b)])
}

fn pack_sym(m: &Matrix) -> Vec<f64> {
    let n = m.nrows();
    let mut out = vec![0.0; n_sym(n)];
    for a in 0..n {
        for b in a..n {
            out[sym_index(n, a, b)] = m[(a, b)];
        }
    }
    out
}

fn unpack_w(n: usize, m: usize, v: &Vector) -> Matrix {
    let off = n_sym(n);
    Matrix::from_fn(m, n, |r, c| v[off + r * n + c])
}

/// `[[X, Gᵀ], [G, D]]`.
fn block2(x: &Matrix, g: &Matrix, d: &Matrix) -> Matrix {
    let n = x.nrows();
    let k = g.nrows();
    let mut out = Matrix::zeros(n + k, n + k);
    out.view_mut((0, 0), (n, n)).copy_from(x);
    out.view_mut((n, 0), (k, n)).copy_from(g);
    out.view_mut((0, n), (n, k)).copy_from(&g.transpose());
    out.view_mut((n, n), (k, k)).copy_from(d);
    out
}

/// Slack-normalized rows `h / (K - h c)`; fails when a slack is too small.
fn scaled_rows(poly: &Polytope, center: &Vector, what: &str) -> Result<Matrix> {
    let slack = poly.slack(center);
    let mut h = poly.h().clone();
    for j in 0..poly.n_rows() {
        if !(slack[j] >= MIN_ROW_SLACK) {
            return Err(Error::InfeasibleSample(format!(
                "{what} row {j} has slack {:.3e}",
                slack[j]
            )));
        }
        h.row_mut(j).scale_mut(1.0 / slack[j]);
    }
    Ok(h)
}

fn check_inputs(sys: &LtiSystem, eq: &Equilibrium, y_k: &Polytope, u_set: &Polytope) -> Result<()> {
    if eq.x.len() != sys.n_x() || eq.u.len() != sys.n_u() || eq.y.len() != sys.n_y() {
        return Err(dim_err("equilibrium dimensions"));
    }
    if y_k.dim() != sys.n_y() || u_set.dim() != sys.n_u() {
        return Err(dim_err("constraint set dimensions"));
    }
    Ok(())
}

impl SynthesisProblem {
    /// Assembles the joint gain/ellipsoid problem.
    pub fn joint(
        sys: &LtiSystem,
        eq: &Equilibrium,
        y_k: &Polytope,
        u_set: &Polytope,
        warm_gain: Option<&Matrix>,
    ) -> Result<Self> {
        check_inputs(sys, eq, y_k, u_set)?;
        let hu = scaled_rows(u_set, &eq.u, "input")?;
        let hy = scaled_rows(y_k, &eq.y, "output")?;
        let gain0 = match warm_gain {
            Some(f) => f.clone(),
            None => {
                let nx = sys.n_x();
                let nu = sys.n_u();
                lti::solve_dare_matrices(
                    sys.a(),
                    sys.b(),
                    &Matrix::identity(nx, nx),
                    &Matrix::identity(nu, nu),
                )?
                .f
            }
        };
        let t = warm_factor(sys, &gain0, eq, y_k, u_set)?;
        Self::assemble(SynthesisKind::JointGain, sys, &t, &gain0, &hu, &hy)
    }

    /// Assembles the fixed-gain problem.
    pub fn fixed_gain(
        sys: &LtiSystem,
        gain: &Matrix,
        eq: &Equilibrium,
        y_k: &Polytope,
        u_set: &Polytope,
    ) -> Result<Self> {
        check_inputs(sys, eq, y_k, u_set)?;
        if gain.nrows() != sys.n_u() || gain.ncols() != sys.n_x() {
            return Err(dim_err("gain dimensions"));
        }
        let acl = sys.closed_loop(gain);
        if !lti::is_schur(&acl) {
            return Err(Error::NotStable(linalg::spectral_radius(&acl)));
        }
        let hu = scaled_rows(u_set, &eq.u, "input")?;
        let hy = scaled_rows(y_k, &eq.y, "output")?;
        let t = warm_factor(sys, gain, eq, y_k, u_set)?;
        Self::assemble(SynthesisKind::FixedGain, sys, &t, gain, &hu, &hy)
    }

    fn assemble(
        kind: SynthesisKind,
        sys: &LtiSystem,
        t: &Matrix,
        gain: &Matrix,
        hu: &Matrix,
        hy: &Matrix,
    ) -> Result<Self> {
        let n = sys.n_x();
        let m = sys.n_u();
        let t_inv = t
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::NotPositiveDefinite("warm-start factor".into()))?;
        let a = &t_inv * sys.a() * t;
        let b = &t_inv * sys.b();
        let c = sys.c() * t;
        let f = gain * t;
        let hc = hy * &c;
        let eye2 = Matrix::identity(2 * n, 2 * n) * INVARIANCE_MARGIN;
        let one = Matrix::identity(1, 1);

        let (n_vars, fixed_gain) = match kind {
            SynthesisKind::JointGain => (n_sym(n) + m * n, None),
            SynthesisKind::FixedGain => (n_sym(n), Some(f.clone())),
        };
        let objective = AffineSym::from_fn(n_vars, |v| unpack_sym(n, v));
        let mut constraints = Vec::new();
        match kind {
            SynthesisKind::JointGain => {
                constraints.push(AffineSym::from_fn(n_vars, |v| {
                    let x = unpack_sym(n, v);
                    let w = unpack_w(n, m, v);
                    block2(&x, &(&a * &x + &b * w), &x) - &eye2
                }));
                for j in 0..hu.nrows() {
                    let h = hu.rows(j, 1).into_owned();
                    constraints.push(AffineSym::from_fn(n_vars, |v| {
                        let x = unpack_sym(n, v);
                        let w = unpack_w(n, m, v);
                        block2(&x, &(&h * w), &one)
                    }));
                }
                for j in 0..hc.nrows() {
                    let h = hc.rows(j, 1).into_owned();
                    constraints.push(AffineSym::from_fn(n_vars, |v| {
                        let x = unpack_sym(n, v);
                        block2(&x, &(&h * &x), &one)
                    }));
                }
            }
            SynthesisKind::FixedGain => {
                let acl = &a + &b * &f;
                constraints.push(AffineSym::from_fn(n_vars, |v| {
                    let x = unpack_sym(n, v);
                    block2(&x, &(&acl * &x), &x) - &eye2
                }));
                // With the gain fixed, each row is the scalar condition
                // g X gᵀ <= 1, which is linear in X.
                let mut rows = (hu * &f).insert_rows(hu.nrows(), hc.nrows(), 0.0);
                rows.rows_mut(hu.nrows(), hc.nrows()).copy_from(&hc);
                for j in 0..rows.nrows() {
                    let g = rows.rows(j, 1).into_owned();
                    constraints.push(AffineSym::from_fn(n_vars, |v| {
                        let x = unpack_sym(n, v);
                        &one - &g * x * g.transpose()
                    }));
                }
            }
        }
        let mut start = pack_sym(&Matrix::identity(n, n));
        if kind == SynthesisKind::JointGain {
            start.extend(f.transpose().iter());
        }
        Ok(Self {
            kind,
            n,
            m,
            t: t.clone(),
            fixed_gain,
            problem: MaxDetProblem {
                n_vars,
                objective,
                constraints,
            },
            start: Vector::from_vec(start),
        })
    }

    pub fn kind(&self) -> SynthesisKind {
        self.kind
    }

    pub fn n_vars(&self) -> usize {
        self.problem.n_vars
    }

    pub fn solve(&self, opts: &MaxDetOptions) -> Result<SynthesisResult> {
        let sol = match self.problem.solve(&self.start, opts) {
            Ok(sol) => sol,
            Err(MaxDetFailure::InfeasibleStart) => {
                return Err(Error::SolverFailure {
                    message: "warm start is not strictly feasible".into(),
                    residual: f64::NAN,
                })
            }
            Err(MaxDetFailure::Stalled(sol)) => {
                return Err(Error::SolverFailure {
                    message: format!(
                        "barrier iteration stalled after {} Newton steps (min block eigenvalue {:.3e})",
                        sol.newton_steps, sol.min_constraint_eig
                    ),
                    residual: sol.gap,
                })
            }
        };
        self.recover(&sol)
    }

    fn recover(&self, sol: &MaxDetSolution) -> Result<SynthesisResult> {
        let n = self.n;
        let xs = unpack_sym(n, &sol.v);
        let xs_inv = linalg::sym_inverse(&xs)?;
        let t_inv = self.t.clone().try_inverse().expect("checked at assembly");
        let gain_scaled = match &self.fixed_gain {
            Some(f) => f.clone(),
            None => unpack_w(n, self.m, &sol.v) * &xs_inv,
        };
        let gain = gain_scaled * &t_inv;
        let p = linalg::symmetrize(&(t_inv.transpose() * &xs_inv * &t_inv));
        let log_t: f64 = self.t.diagonal().iter().map(|d| d.ln()).sum();
        Ok(SynthesisResult {
            gain,
            p,
            log_det_x: sol.log_det + 2.0 * log_t,
            status: SolverStatus {
                newton_steps: sol.newton_steps,
                gap: sol.gap,
                converged: sol.converged,
                min_block_eig: sol.min_constraint_eig,
            },
        })
    }

    /// Writes the instance as plain text: one header line per matrix block
    /// followed by its rows. Every block is `M₀ + Σ vᵢ Mᵢ`; `const` introduces
    /// `M₀` and `coef i` introduces `Mᵢ`. The objective is `maximize log det`
    /// of the first block, and every `lmi` block must be positive
    /// semidefinite. `start` lists a strictly feasible point, and `transform`
    /// holds `T` with `X = T X̃ Tᵀ`.
    pub fn dump(&self, w: &mut impl Write) -> io::Result<()> {
        let kind = match self.kind {
            SynthesisKind::JointGain => "joint",
            SynthesisKind::FixedGain => "fixed-gain",
        };
        writeln!(w, "maxdet {kind} vars {} states {} inputs {}", self.problem.n_vars, self.n, self.m)?;
        write_matrix(w, "transform", &self.t)?;
        writeln!(w, "start")?;
        writeln!(w, "{}", join(self.start.iter()))?;
        write_block(w, "objective", &self.problem.objective, &self.problem)?;
        for c in &self.problem.constraints {
            write_block(w, "lmi", c, &self.problem)?;
        }
        Ok(())
    }
}

fn join<'a>(values: impl Iterator<Item = &'a f64>) -> String {
    values.map(|v| format!("{v:.17e}")).collect::<Vec<_>>().join(" ")
}

fn write_matrix(w: &mut impl Write, header: &str, m: &Matrix) -> io::Result<()> {
    writeln!(w, "{header} {} {}", m.nrows(), m.ncols())?;
    for r in m.row_iter() {
        writeln!(w, "{}", join(r.iter()))?;
    }
    Ok(())
}

fn write_block(w: &mut impl Write, kind: &str, block: &AffineSym, p: &MaxDetProblem) -> io::Result<()> {
    writeln!(w, "{kind} {}", block.size())?;
    write_matrix(w, "const", block.constant())?;
    for i in 0..p.n_vars {
        let mi = block.coefficient(i);
        if mi.amax() != 0.0 {
            write_matrix(w, &format!("coef {i}"), &mi)?;
        }
    }
    Ok(())
}

/// Cholesky factor of the shrunken, scaled Lyapunov ellipsoid of `gain`.
fn warm_factor(
    sys: &LtiSystem,
    gain: &Matrix,
    eq: &Equilibrium,
    y_k: &Polytope,
    u_set: &Polytope,
) -> Result<Matrix> {
    let acl = sys.closed_loop(gain);
    let n = sys.n_x();
    let p0 = lti::solve_discrete_lyapunov(&acl, &Matrix::identity(n, n))?;
    let rho = max_scale_closed_form(gain, &p0, sys.c(), &eq.u, &eq.y, y_k, u_set)?;
    if !(rho > 0.0) {
        return Err(Error::InfeasibleSample("warm start has zero scale".into()));
    }
    let x0 = linalg::sym_inverse(&p0)? * (WARM_SHRINK * rho).powi(2);
    let chol = nalgebra::Cholesky::new(linalg::symmetrize(&x0))
        .ok_or_else(|| Error::NotPositiveDefinite("warm start".into()))?;
    Ok(chol.l())
}

/// Largest invariant ellipsoid centred at `eq` with a jointly designed gain.
pub fn synthesize_controller(
    sys: &LtiSystem,
    eq: &Equilibrium,
    y_k: &Polytope,
    u_set: &Polytope,
) -> Result<SynthesisResult> {
    synthesize_controller_with(sys, eq, y_k, u_set, &SynthesisOptions::default())
}

pub fn synthesize_controller_with(
    sys: &LtiSystem,
    eq: &Equilibrium,
    y_k: &Polytope,
    u_set: &Polytope,
    opts: &SynthesisOptions,
) -> Result<SynthesisResult> {
    let problem = SynthesisProblem::joint(sys, eq, y_k, u_set, opts.warm_gain.as_ref())?;
    let result = problem.solve(&opts.solver)?;
    let acl = sys.closed_loop(&result.gain);
    if !lti::is_schur(&acl) {
        return Err(Error::NotStable(linalg::spectral_radius(&acl)));
    }
    Ok(result)
}

/// Largest invariant ellipsoid for a given stabilizing gain.
pub fn synthesize_pi_set_fixed_gain(
    sys: &LtiSystem,
    gain: &Matrix,
    eq: &Equilibrium,
    y_k: &Polytope,
    u_set: &Polytope,
) -> Result<SynthesisResult> {
    SynthesisProblem::fixed_gain(sys, gain, eq, y_k, u_set)?.solve(&MaxDetOptions::default())
}

/// Solver-independent evidence that `{(x - x̄)ᵀP(x - x̄) <= ρ²}` is invariant
/// and constraint-admissible under `u = F(x - x̄) + ū`.
#[derive(Clone, Debug, PartialEq)]
pub struct VerificationReport {
    pub spectral_radius: f64,
    /// `1 - ‖P^{1/2} A_cl P^{-1/2}‖²`; non-negative iff `A_clᵀ P A_cl ⪯ P`.
    pub invariance_margin: f64,
    /// Per input row, `(s - ρ‖h F P^{-1/2}‖) / max(|s|, ρ‖h F P^{-1/2}‖)`
    /// where `s` is the row slack at `ū`.
    pub input_margins: Vec<f64>,
    /// Same for the output rows at `ȳ`.
    pub output_margins: Vec<f64>,
    pub simulations: usize,
    /// Simulations in which some step left the set, broke a constraint or
    /// increased the Lyapunov function.
    pub falsifications: usize,
}

impl VerificationReport {
    pub fn worst_input_margin(&self) -> f64 {
        self.input_margins.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn worst_output_margin(&self) -> f64 {
        self.output_margins.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn worst_margin(&self) -> f64 {
        self.invariance_margin
            .min(self.worst_input_margin())
            .min(self.worst_output_margin())
    }

    pub fn passed(&self, tol: f64) -> bool {
        self.spectral_radius < 1.0 && self.worst_margin() >= -tol && self.falsifications == 0
    }
}

#[derive(Clone, Copy, Debug)]
pub struct VerifyOptions {
    pub samples: usize,
    pub steps: usize,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            samples: 100,
            steps: 200,
            seed: 0,
        }
    }
}

fn row_margins(h: &Matrix, slack: &Vector, spread_map: &Matrix, rho: f64) -> Vec<f64> {
    let spread = h * spread_map;
    (0..h.nrows())
        .filter_map(|j| {
            let d = rho * spread.row(j).norm();
            let s = slack[j];
            let scale = s.abs().max(d);
            // Rows untouched by the ellipsoid only need a non-negative slack.
            if d == 0.0 {
                return Some(if s >= 0.0 { 1.0 } else { -1.0 });
            }
            (scale > 0.0).then(|| (s - d) / scale)
        })
        .collect()
}

/// Checks an invariant ellipsoid with eigenvalue, support-function and
/// simulation tests.
#[allow(clippy::too_many_arguments)]
pub fn verify_synthesis(
    sys: &LtiSystem,
    gain: &Matrix,
    p: &Matrix,
    rho: f64,
    eq: &Equilibrium,
    y_k: &Polytope,
    u_set: &Polytope,
    opts: &VerifyOptions,
) -> Result<VerificationReport> {
    let acl = sys.closed_loop(gain);
    let p_sqrt = linalg::sym_sqrt(p);
    let p_is = linalg::sym_inv_sqrt(p)?;
    let contraction = (&p_sqrt * &acl * &p_is).norm_squared_spectral();
    let input_margins = row_margins(u_set.h(), &u_set.slack(&eq.u), &(gain * &p_is), rho);
    let output_margins = row_margins(y_k.h(), &y_k.slack(&eq.y), &(sys.c() * &p_is), rho);

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut falsifications = 0;
    let n = sys.n_x();
    let tol_v = 1e-9 * rho * rho;
    let u_tol = 1e-9 * u_set.k().amax().max(1.0);
    let y_tol = 1e-9 * y_k.k().amax().max(1.0);
    let value = |x: &Vector| {
        let d = x - &eq.x;
        d.dot(&(p * &d))
    };
    for _ in 0..opts.samples {
        let dir = random_unit(&mut rng, n);
        let mut x = &eq.x + &p_is * dir * rho;
        let mut v = value(&x);
        let mut bad = false;
        for _ in 0..opts.steps {
            let u = gain * (&x - &eq.x) + &eq.u;
            if !u_set.contains_with_slack(&u, u_tol) || !y_k.contains_with_slack(&sys.output(&x), y_tol) {
                bad = true;
                break;
            }
            x = sys.step(&x, &u);
            let v_next = value(&x);
            if v_next > v + tol_v || v_next > rho * rho + tol_v {
                bad = true;
                break;
            }
            v = v_next;
        }
        if bad {
            falsifications += 1;
        }
    }
    Ok(VerificationReport {
        spectral_radius: linalg::spectral_radius(&acl),
        invariance_margin: 1.0 - contraction,
        input_margins,
        output_margins,
        simulations: opts.samples,
        falsifications,
    })
}

trait SpectralNorm {
    fn norm_squared_spectral(&self) -> f64;
}

impl SpectralNorm for Matrix {
    fn norm_squared_spectral(&self) -> f64 {
        linalg::max_eigenvalue(&(self.transpose() * self))
    }
}

pub(crate) fn random_unit(rng: &mut ChaCha8Rng, n: usize) -> Vector {
    loop {
        let v = Vector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = v.norm();
        if norm > 1e-12 {
            return v / norm;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_system(a: f64) -> LtiSystem {
        LtiSystem::new(
            Matrix::from_element(1, 1, a),
            Matrix::from_element(1, 1, 1.0),
            Matrix::from_element(1, 1, 1.0),
        )
        .unwrap()
    }

    fn origin(n: usize) -> Equilibrium {
        Equilibrium {
            x: Vector::zeros(n),
            u: Vector::zeros(n),
            y: Vector::zeros(n),
            unique: true,
        }
    }

    fn interval(r: f64) -> Polytope {
        Polytope::from_box(&[-r], &[r]).unwrap()
    }

    #[test]
    fn scalar_joint_synthesis() {
        let sys = scalar_system(0.9);
        let res = synthesize_controller(&sys, &origin(1), &interval(1.0), &interval(0.05)).unwrap();
        let x = 1.0 / res.p[(0, 0)];
        assert!((x - 1.0).abs() < 1e-6, "X = {x}");
        let f = res.gain[(0, 0)];
        assert!(f.abs() <= 0.05 * (1.0 + 1e-6), "F = {f}");
        assert!((0.9 + f).abs() < 1.0);
        assert!(res.log_det_x.abs() < 1e-6);
    }

    #[test]
    fn scalar_fixed_gain_synthesis() {
        let sys = scalar_system(0.5);
        let res = synthesize_pi_set_fixed_gain(
            &sys,
            &Matrix::zeros(1, 1),
            &origin(1),
            &interval(1.0),
            &interval(1.0),
        )
        .unwrap();
        assert!((res.p[(0, 0)] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn unstable_fixed_gain_rejected() {
        let sys = scalar_system(1.5);
        let err = synthesize_pi_set_fixed_gain(
            &sys,
            &Matrix::zeros(1, 1),
            &origin(1),
            &interval(1.0),
            &interval(1.0),
        )
        .unwrap_err();
        assert!(matches!(err, Error::NotStable(_)));
    }

    #[test]
    fn boundary_sample_rejected() {
        let sys = scalar_system(0.5);
        let eq = Equilibrium {
            x: Vector::from_element(1, 1.0),
            u: Vector::from_element(1, 0.5),
            y: Vector::from_element(1, 1.0),
            unique: true,
        };
        let err = synthesize_controller(&sys, &eq, &interval(1.0), &interval(1.0)).unwrap_err();
        assert!(matches!(err, Error::InfeasibleSample(_)));
    }

    #[test]
    fn verification_flags_inflated_set() {
        let sys = scalar_system(0.5);
        let eq = origin(1);
        let f = Matrix::zeros(1, 1);
        let good = verify_synthesis(
            &sys,
            &f,
            &Matrix::identity(1, 1),
            1.0,
            &eq,
            &interval(1.0),
            &interval(1.0),
            &VerifyOptions::default(),
        )
        .unwrap();
        assert!(good.passed(1e-9), "{good:?}");
        let inflated = verify_synthesis(
            &sys,
            &f,
            &(Matrix::identity(1, 1) / 1.05),
            1.0,
            &eq,
            &interval(1.0),
            &interval(1.0),
            &VerifyOptions::default(),
        )
        .unwrap();
        assert!(inflated.worst_output_margin() < 0.0);
        assert!(!inflated.passed(1e-9));
    }

    #[test]
    fn packing_round_trip() {
        let m = Matrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 5.0, 3.0, 5.0, 6.0]);
        let v = Vector::from_vec(pack_sym(&m));
        assert_eq!(v.len(), 6);
        assert_eq!(unpack_sym(3, &v), m);
    }

    #[test]
    fn dump_lists_every_block() {
        let sys = scalar_system(0.9);
        let problem =
            SynthesisProblem::joint(&sys, &origin(1), &interval(1.0), &interval(0.05), None).unwrap();
        let mut out = Vec::new();
        problem.dump(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("maxdet joint vars 2 states 1 inputs 1"));
        assert_eq!(text.matches("\nlmi ").count(), 5);
    }
}
