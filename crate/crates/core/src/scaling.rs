//! Fixed-gain local controllers: scale the level set of a shared Lyapunov
//! function to the largest value that keeps inputs in `U` and outputs in one
//! convex component `Y_k`.
//!
//! The level `ρ` enters every row of both constraint sets linearly through the
//! support function of the ball `‖e‖ ≤ ρ`, with `e = P^{1/2}(x - x̄)`. With a
//! unique equilibrium the maximal `ρ` is a ratio test over rows; otherwise the
//! equilibrium is a decision variable and the problem is an LP.

use crate::error::{dim_err, Error, Result};
use crate::geometry::{normalize, NormalizedPolytope, Polytope, UnionOfPolytopes, EPS_INTERIOR};
use crate::linalg::{self, Matrix, Vector};
use crate::lp::{Cmp, LinearProgram, LpFailure};
use crate::lti::{equilibrium_for_output, EquilibriumSolution, LtiSystem};

/// A scaled level set `{ (x - x̄)ᵀ P (x - x̄) <= ρ² }` for one component.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaledPiSet {
    pub rho: f64,
    pub x_bar: Vector,
    pub u_bar: Vector,
    pub y_bar: Vector,
    /// Index of the component `Y_k` the set was fitted into.
    pub component: usize,
}

/// Row norms `‖H_j M P^{-1/2}‖`.
fn spread(h: &Matrix, map: &Matrix, p_inv_sqrt: &Matrix) -> Vec<f64> {
    let t = h * map * p_inv_sqrt;
    (0..t.nrows()).map(|j| t.row(j).norm()).collect()
}

/// Largest `ρ` by LP over `(ρ, x̄, ū)`; equilibrium equations are equality
/// rows. Returns `(ρ*, x̄*, ū*)`.
pub fn max_scale_lp(
    sys: &LtiSystem,
    gain: &Matrix,
    p: &Matrix,
    y_bar: &Vector,
    y_k: &Polytope,
    u_set: &Polytope,
) -> Result<(f64, Vector, Vector)> {
    let (nx, nu, ny) = (sys.n_x(), sys.n_u(), sys.n_y());
    check_dims(sys, gain, p, y_bar, y_k, u_set)?;
    if !y_k.contains(y_bar) {
        return Err(Error::InfeasibleSample("sample output outside Y_k".into()));
    }
    let p_is = linalg::sym_inv_sqrt(p)?;
    let a_u = spread(u_set.h(), gain, &p_is);
    let a_y = spread(y_k.h(), sys.c(), &p_is);

    // Variables: [ρ, x̄ (nx), ū (nu)].
    let nv = 1 + nx + nu;
    let mut objective = vec![0.0; nv];
    objective[0] = 1.0;
    let mut lp = LinearProgram::maximize(objective);
    lp.set_bounds(0, 0.0, f64::INFINITY);
    for j in 0..u_set.n_rows() {
        let mut row = vec![0.0; nv];
        row[0] = a_u[j];
        for i in 0..nu {
            row[1 + nx + i] = u_set.h()[(j, i)];
        }
        lp.add_row(row, Cmp::Le, u_set.k()[j]);
    }
    let hy_ybar = y_k.h() * y_bar;
    for j in 0..y_k.n_rows() {
        let mut row = vec![0.0; nv];
        row[0] = a_y[j];
        lp.add_row(row, Cmp::Le, y_k.k()[j] - hy_ybar[j]);
    }
    // (A - I) x̄ + B ū = 0
    for r in 0..nx {
        let mut row = vec![0.0; nv];
        for i in 0..nx {
            row[1 + i] = sys.a()[(r, i)] - if r == i { 1.0 } else { 0.0 };
        }
        for i in 0..nu {
            row[1 + nx + i] = sys.b()[(r, i)];
        }
        lp.add_row(row, Cmp::Eq, 0.0);
    }
    // C x̄ = ȳ
    for r in 0..ny {
        let mut row = vec![0.0; nv];
        for i in 0..nx {
            row[1 + i] = sys.c()[(r, i)];
        }
        lp.add_row(row, Cmp::Eq, y_bar[r]);
    }
    match lp.solve() {
        Ok(sol) => Ok((
            sol.x[0],
            Vector::from_column_slice(&sol.x[1..1 + nx]),
            Vector::from_column_slice(&sol.x[1 + nx..]),
        )),
        Err(LpFailure::Infeasible) => Err(Error::InfeasibleSample(
            "no equilibrium input inside U".into(),
        )),
        Err(LpFailure::Unbounded) => Err(Error::Unbounded),
        Err(LpFailure::Numerical(message)) => Err(Error::SolverFailure {
            message,
            residual: f64::NAN,
        }),
    }
}

fn check_dims(
    sys: &LtiSystem,
    gain: &Matrix,
    p: &Matrix,
    y_bar: &Vector,
    y_k: &Polytope,
    u_set: &Polytope,
) -> Result<()> {
    if gain.nrows() != sys.n_u() || gain.ncols() != sys.n_x() {
        return Err(dim_err("gain must be n_u x n_x"));
    }
    if p.nrows() != sys.n_x() || !p.is_square() {
        return Err(dim_err("P must be n_x x n_x"));
    }
    if y_bar.len() != sys.n_y() || y_k.dim() != sys.n_y() {
        return Err(dim_err("output dimension"));
    }
    if u_set.dim() != sys.n_u() {
        return Err(dim_err("input set dimension"));
    }
    Ok(())
}

/// Ratio test over rows of already-normalized sets; inactive rows only
/// require a non-negative numerator.
fn ratio_test(norm: &NormalizedPolytope, point: &Vector, rho: &mut f64) -> Result<()> {
    let slack = norm.polytope.slack(point);
    for (j, &s) in slack.iter().enumerate() {
        if s < 0.0 {
            return Err(Error::InfeasibleSample(format!(
                "row {j} violated by the equilibrium"
            )));
        }
        if !norm.inactive[j] {
            *rho = rho.min(s);
        }
    }
    Ok(())
}

/// Closed-form maximal level for a unique equilibrium:
/// `min_j (K_j - H_j c) / ‖H_j M P^{-1/2}‖` over input and output rows, with
/// zero-denominator rows treated as non-binding.
pub fn max_scale_closed_form(
    gain: &Matrix,
    p: &Matrix,
    c: &Matrix,
    u_bar: &Vector,
    y_bar: &Vector,
    y_k: &Polytope,
    u_set: &Polytope,
) -> Result<f64> {
    let p_is = linalg::sym_inv_sqrt(p)?;
    let nu = normalize(u_set, &(gain * &p_is))?;
    let ny = normalize(y_k, &(c * &p_is))?;
    let mut rho = f64::INFINITY;
    ratio_test(&nu, u_bar, &mut rho)?;
    ratio_test(&ny, y_bar, &mut rho)?;
    if !rho.is_finite() {
        return Err(Error::Unbounded);
    }
    Ok(rho)
}

/// Precomputed normalized constraint rows for one shared `(F, P)` pair so that
/// each sample costs one pass over the rows.
#[derive(Clone, Debug)]
pub struct FixedGainScaler {
    input: NormalizedPolytope,
    outputs: Vec<NormalizedPolytope>,
}

impl FixedGainScaler {
    pub fn new(
        sys: &LtiSystem,
        gain: &Matrix,
        p: &Matrix,
        y: &UnionOfPolytopes,
        u_set: &Polytope,
    ) -> Result<Self> {
        if gain.nrows() != sys.n_u() || gain.ncols() != sys.n_x() || u_set.dim() != sys.n_u() {
            return Err(dim_err("gain / input set"));
        }
        if y.dim() != sys.n_y() {
            return Err(dim_err("output union dimension"));
        }
        let p_is = linalg::sym_inv_sqrt(p)?;
        let input = normalize(u_set, &(gain * &p_is))?;
        let cmap = sys.c() * &p_is;
        let outputs = y
            .components()
            .iter()
            .map(|c| normalize(c, &cmap))
            .collect::<Result<_>>()?;
        Ok(Self { input, outputs })
    }

    pub fn scale(&self, u_bar: &Vector, y_bar: &Vector, component: usize) -> Result<f64> {
        let mut rho = f64::INFINITY;
        ratio_test(&self.input, u_bar, &mut rho)?;
        ratio_test(&self.outputs[component], y_bar, &mut rho)?;
        if !rho.is_finite() {
            return Err(Error::Unbounded);
        }
        Ok(rho)
    }
}

/// One scaled set per component that strictly contains `ȳ`.
///
/// Unique equilibria use the closed form; equilibrium families fall back to
/// the LP.
pub fn best_component_scale(
    sys: &LtiSystem,
    gain: &Matrix,
    p: &Matrix,
    y_bar: &Vector,
    y: &UnionOfPolytopes,
    u_set: &Polytope,
) -> Result<Vec<ScaledPiSet>> {
    let comps = y.containing_components(y_bar, EPS_INTERIOR);
    if comps.is_empty() {
        return Err(Error::OutsideFreeSpace);
    }
    let eq = equilibrium_for_output(sys, y_bar)?;
    comps
        .into_iter()
        .map(|k| {
            let y_k = &y.components()[k];
            let (rho, x_bar, u_bar) = match &eq {
                EquilibriumSolution::Unique(e) => {
                    let rho =
                        max_scale_closed_form(gain, p, sys.c(), &e.u, y_bar, y_k, u_set)?;
                    (rho, e.x.clone(), e.u.clone())
                }
                EquilibriumSolution::Family(_) => max_scale_lp(sys, gain, p, y_bar, y_k, u_set)?,
            };
            if !(rho > 0.0) {
                return Err(Error::InfeasibleSample(format!(
                    "zero scale in component {k}"
                )));
            }
            Ok(ScaledPiSet {
                rho,
                x_bar,
                u_bar,
                y_bar: y_bar.clone(),
                component: k,
            })
        })
        .collect()
}
