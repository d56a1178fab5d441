//! Half-space polytopes, ellipsoids and the containment predicates built on
//! them.

use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::linalg::{self, Matrix, Vector};
use crate::lp::{Cmp, LinearProgram, LpFailure};

/// Radius below which a Chebyshev ball counts as "no interior".
pub const EPS_INTERIOR: f64 = 1e-9;

/// `{ y : H y <= K }`.
#[derive(Clone, Debug, PartialEq)]
pub struct Polytope {
    h: Matrix,
    k: Vector,
}

/// Row-major serialized form of a [`Polytope`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolytopeSpec {
    pub h: Vec<Vec<f64>>,
    pub k: Vec<f64>,
}

impl Polytope {
    pub fn new(h: Matrix, k: Vector) -> Result<Self> {
        if h.nrows() != k.len() {
            return Err(dim_err(format!(
                "polytope has {} rows but {} offsets",
                h.nrows(),
                k.len()
            )));
        }
        if h.ncols() == 0 {
            return Err(dim_err("polytope in zero dimensions"));
        }
        if let Some(j) = (0..h.nrows()).find(|&j| h.row(j).norm() == 0.0) {
            return Err(Error::InvalidArgument(format!("row {j} of H is zero")));
        }
        if k.iter().any(|v| !v.is_finite()) || h.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite polytope data".into()));
        }
        Ok(Self { h, k })
    }

    /// Axis-aligned box `lo <= y <= hi`.
    pub fn from_box(lo: &[f64], hi: &[f64]) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(dim_err("box bounds differ in length"));
        }
        let n = lo.len();
        let mut h = Matrix::zeros(2 * n, n);
        let mut k = Vector::zeros(2 * n);
        for d in 0..n {
            h[(2 * d, d)] = 1.0;
            k[2 * d] = hi[d];
            h[(2 * d + 1, d)] = -1.0;
            k[2 * d + 1] = -lo[d];
        }
        Self::new(h, k)
    }

    pub fn from_spec(spec: &PolytopeSpec) -> Result<Self> {
        let h = linalg::from_rows(&spec.h)?;
        Self::new(h, Vector::from_vec(spec.k.clone()))
    }

    pub fn to_spec(&self) -> PolytopeSpec {
        PolytopeSpec {
            h: linalg::to_rows(&self.h),
            k: self.k.iter().copied().collect(),
        }
    }

    pub fn h(&self) -> &Matrix {
        &self.h
    }

    pub fn k(&self) -> &Vector {
        &self.k
    }

    pub fn dim(&self) -> usize {
        self.h.ncols()
    }

    pub fn n_rows(&self) -> usize {
        self.h.nrows()
    }

    /// `K - H y`.
    pub fn slack(&self, y: &Vector) -> Vector {
        &self.k - &self.h * y
    }

    /// Smallest distance from `y` to a bounding hyperplane, negative outside.
    pub fn interior_margin(&self, y: &Vector) -> f64 {
        let s = self.slack(y);
        (0..self.n_rows())
            .map(|j| s[j] / self.h.row(j).norm())
            .fold(f64::INFINITY, f64::min)
    }

    /// Membership with an absolute slack allowance per row.
    pub fn contains_with_slack(&self, y: &Vector, slack: f64) -> bool {
        self.slack(y).iter().all(|&s| s >= -slack)
    }

    pub fn contains(&self, y: &Vector) -> bool {
        self.contains_with_slack(y, 0.0)
    }

    /// Strict interior membership: every hyperplane is more than `eps` away.
    pub fn strictly_contains(&self, y: &Vector, eps: f64) -> bool {
        self.interior_margin(y) > eps
    }

    pub fn intersect(&self, other: &Polytope) -> Result<Polytope> {
        if self.dim() != other.dim() {
            return Err(dim_err(format!(
                "intersecting polytopes of dimension {} and {}",
                self.dim(),
                other.dim()
            )));
        }
        let m = self.n_rows() + other.n_rows();
        let mut h = Matrix::zeros(m, self.dim());
        h.view_mut((0, 0), (self.n_rows(), self.dim()))
            .copy_from(&self.h);
        h.view_mut((self.n_rows(), 0), (other.n_rows(), self.dim()))
            .copy_from(&other.h);
        let k = Vector::from_iterator(m, self.k.iter().chain(other.k.iter()).copied());
        Polytope::new(h, k)
    }

    /// Largest inscribed ball ignoring boundedness of the polytope itself.
    fn chebyshev_ball(&self) -> Result<(Vector, f64)> {
        let n = self.dim();
        let mut objective = vec![0.0; n + 1];
        objective[n] = 1.0;
        let mut lp = LinearProgram::maximize(objective);
        lp.set_bounds(n, 0.0, f64::INFINITY);
        for j in 0..self.n_rows() {
            let mut row: Vec<f64> = self.h.row(j).iter().copied().collect();
            row.push(self.h.row(j).norm());
            lp.add_row(row, Cmp::Le, self.k[j]);
        }
        match lp.solve() {
            Ok(sol) => Ok((Vector::from_column_slice(&sol.x[..n]), sol.x[n])),
            Err(LpFailure::Infeasible) => Err(Error::EmptySet),
            Err(LpFailure::Unbounded) => Err(Error::Unbounded),
            Err(LpFailure::Numerical(msg)) => Err(Error::SolverFailure {
                message: format!("chebyshev LP: {msg}"),
                residual: f64::NAN,
            }),
        }
    }

    /// Chebyshev center and radius. Fails with [`Error::Unbounded`] for sets
    /// that are not compact, even when the inscribed radius is finite.
    ///
    /// When the optimal center is not unique (e.g. elongated boxes) the
    /// midpoint of the optimal face is returned if it attains the radius.
    pub fn chebyshev(&self) -> Result<(Vector, f64)> {
        let (vertex, radius) = self.chebyshev_ball()?;
        self.bounding_box()?;
        let relax = 1.0 - 1e-9;
        let shrunk = Vector::from_fn(self.n_rows(), |j, _| {
            self.k[j] - radius * relax * self.h.row(j).norm()
        });
        let face = Polytope::new(self.h.clone(), shrunk)?;
        if let Ok((lo, hi)) = face.bounding_box() {
            let mid = (lo + hi) * 0.5;
            let r = self.interior_margin(&mid);
            if r >= radius * (1.0 - 1e-12) {
                return Ok((mid, r));
            }
        }
        Ok((vertex, radius))
    }

    /// `max d·y` over the polytope.
    pub fn support(&self, direction: &Vector) -> Result<f64> {
        if direction.len() != self.dim() {
            return Err(dim_err("support direction"));
        }
        let mut lp = LinearProgram::maximize(direction.iter().copied().collect());
        for j in 0..self.n_rows() {
            lp.add_row(self.h.row(j).iter().copied().collect(), Cmp::Le, self.k[j]);
        }
        match lp.solve() {
            Ok(sol) => Ok(sol.objective),
            Err(LpFailure::Infeasible) => Err(Error::EmptySet),
            Err(LpFailure::Unbounded) => Err(Error::Unbounded),
            Err(LpFailure::Numerical(msg)) => Err(Error::SolverFailure {
                message: format!("support LP: {msg}"),
                residual: f64::NAN,
            }),
        }
    }

    /// Per-coordinate bounds `(lo, hi)` from support LPs.
    pub fn bounding_box(&self) -> Result<(Vector, Vector)> {
        let n = self.dim();
        let mut lo = Vector::zeros(n);
        let mut hi = Vector::zeros(n);
        for d in 0..n {
            let mut e = Vector::zeros(n);
            e[d] = 1.0;
            hi[d] = self.support(&e)?;
            lo[d] = -self.support(&(-e))?;
        }
        Ok((lo, hi))
    }
}

/// True iff `a ∩ b` contains a ball of radius greater than [`EPS_INTERIOR`].
pub fn intersection_interior_nonempty(a: &Polytope, b: &Polytope) -> Result<bool> {
    let both = a.intersect(b)?;
    match both.chebyshev_ball() {
        Ok((_, r)) => Ok(r > EPS_INTERIOR),
        Err(Error::EmptySet) => Ok(false),
        Err(Error::Unbounded) => Ok(true),
        Err(e) => Err(e),
    }
}

/// A polytope whose rows were rescaled against a linear map.
#[derive(Clone, Debug)]
pub struct NormalizedPolytope {
    pub polytope: Polytope,
    /// Rows whose mapped norm vanished; they carry no support-function term.
    pub inactive: Vec<bool>,
}

/// Rescales each row so that `‖H_j M‖ = 1`. Rows with `‖H_j M‖ = 0` are kept
/// as they are and flagged inactive.
pub fn normalize(poly: &Polytope, map: &Matrix) -> Result<NormalizedPolytope> {
    if map.nrows() != poly.dim() {
        return Err(dim_err("normalize: map rows must equal polytope dimension"));
    }
    let hm = poly.h() * map;
    let map_scale = map.norm();
    let mut h = poly.h().clone();
    let mut k = poly.k().clone();
    let mut inactive = vec![false; poly.n_rows()];
    for j in 0..poly.n_rows() {
        let norm = hm.row(j).norm();
        if norm <= 1e-14 * poly.h().row(j).norm() * map_scale || norm == 0.0 {
            inactive[j] = true;
            continue;
        }
        h.row_mut(j).scale_mut(1.0 / norm);
        k[j] /= norm;
    }
    Ok(NormalizedPolytope {
        polytope: Polytope::new(h, k)?,
        inactive,
    })
}

/// Finite union of full-dimensional compact polytopes in output space.
#[derive(Clone, Debug, PartialEq)]
pub struct UnionOfPolytopes {
    components: Vec<Polytope>,
}

impl UnionOfPolytopes {
    pub fn new(components: Vec<Polytope>) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::InvalidArgument("union needs at least one component".into()))?;
        let n = first.dim();
        for (i, c) in components.iter().enumerate() {
            if c.dim() != n {
                return Err(dim_err(format!("component {i} has dimension {}", c.dim())));
            }
            let (_, r) = c.chebyshev()?;
            if r <= EPS_INTERIOR {
                return Err(Error::InvalidArgument(format!(
                    "component {i} is not full-dimensional"
                )));
            }
        }
        Ok(Self { components })
    }

    /// Components of `outer \ obstacle` for two axis-aligned boxes: each face
    /// of the obstacle is flipped and intersected with the outer box. Faces
    /// are visited per coordinate, lower face first.
    pub fn box_minus_box(
        outer_lo: &[f64],
        outer_hi: &[f64],
        obstacle_lo: &[f64],
        obstacle_hi: &[f64],
    ) -> Result<Self> {
        let n = outer_lo.len();
        if outer_hi.len() != n || obstacle_lo.len() != n || obstacle_hi.len() != n {
            return Err(dim_err("box_minus_box bounds"));
        }
        let mut components = Vec::with_capacity(2 * n);
        for d in 0..n {
            let mut hi = outer_hi.to_vec();
            hi[d] = hi[d].min(obstacle_lo[d]);
            components.push(Polytope::from_box(outer_lo, &hi)?);
            let mut lo = outer_lo.to_vec();
            lo[d] = lo[d].max(obstacle_hi[d]);
            components.push(Polytope::from_box(&lo, outer_hi)?);
        }
        Self::new(components)
    }

    pub fn components(&self) -> &[Polytope] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    pub fn contains_with_slack(&self, y: &Vector, slack: f64) -> bool {
        self.components
            .iter()
            .any(|c| c.contains_with_slack(y, slack))
    }

    /// Indices of components that contain `y` strictly (margin above `eps`).
    pub fn containing_components(&self, y: &Vector, eps: f64) -> Vec<usize> {
        self.components
            .iter()
            .enumerate()
            .filter(|(_, c)| c.strictly_contains(y, eps))
            .map(|(i, _)| i)
            .collect()
    }

    /// Bounding box of the convex hull.
    pub fn bounding_box(&self) -> Result<(Vector, Vector)> {
        let mut iter = self.components.iter();
        let (mut lo, mut hi) = iter.next().expect("non-empty").bounding_box()?;
        for c in iter {
            let (l, h) = c.bounding_box()?;
            lo = lo.inf(&l);
            hi = hi.sup(&h);
        }
        Ok((lo, hi))
    }
}

/// `{ x : (x - c)ᵀ P (x - c) <= level² }`.
#[derive(Clone, Debug, PartialEq)]
pub struct Ellipsoid {
    center: Vector,
    shape: Matrix,
    level_sq: f64,
}

impl Ellipsoid {
    pub fn new(center: Vector, shape: Matrix, level_sq: f64) -> Result<Self> {
        if !shape.is_square() || shape.nrows() != center.len() {
            return Err(dim_err("ellipsoid center/shape"));
        }
        linalg::check_positive_definite(&shape, "ellipsoid shape")?;
        if !(level_sq > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "ellipsoid level {level_sq} must be positive"
            )));
        }
        Ok(Self {
            center,
            shape,
            level_sq,
        })
    }

    pub fn center(&self) -> &Vector {
        &self.center
    }

    pub fn shape(&self) -> &Matrix {
        &self.shape
    }

    pub fn level_sq(&self) -> f64 {
        self.level_sq
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// `(x - c)ᵀ P (x - c)`.
    pub fn value(&self, x: &Vector) -> f64 {
        let d = x - &self.center;
        d.dot(&(&self.shape * &d))
    }

    pub fn contains(&self, x: &Vector) -> bool {
        self.value(x) <= self.level_sq
    }

    /// Strict interior with a relative margin: `value < level² (1 - eps)`.
    pub fn strictly_contains(&self, x: &Vector, eps: f64) -> bool {
        self.value(x) < self.level_sq * (1.0 - eps)
    }

    /// Maps a point of the unit sphere onto the boundary.
    pub fn boundary_point(&self, unit: &Vector) -> Result<Vector> {
        let s = linalg::sym_inv_sqrt(&self.shape)?;
        Ok(&self.center + s * unit * self.level_sq.sqrt())
    }
}

/// Per-row margins `K - H(M c + b) - ρ ‖H M P^{-1/2}‖` of the affine image
/// `M x + b` of an ellipsoid against a polytope.
pub fn containment_margins(
    ell: &Ellipsoid,
    poly: &Polytope,
    map: &Matrix,
    offset: Option<&Vector>,
) -> Result<Vector> {
    if map.ncols() != ell.dim() || map.nrows() != poly.dim() {
        return Err(dim_err("containment map dimensions"));
    }
    let inv_sqrt = linalg::sym_inv_sqrt(ell.shape())?;
    let mut image_center = map * ell.center();
    if let Some(b) = offset {
        if b.len() != poly.dim() {
            return Err(dim_err("containment offset"));
        }
        image_center += b;
    }
    let spread = poly.h() * map * inv_sqrt;
    let rho = ell.level_sq().sqrt();
    let slack = poly.slack(&image_center);
    Ok(Vector::from_fn(poly.n_rows(), |j, _| {
        slack[j] - rho * spread.row(j).norm()
    }))
}

/// Support-function containment test of `M · ell` in `poly`.
pub fn ellipsoid_in_polytope(ell: &Ellipsoid, poly: &Polytope, map: &Matrix) -> Result<bool> {
    ellipsoid_in_polytope_affine(ell, poly, map, None)
}

/// As [`ellipsoid_in_polytope`] for the affine image `M x + b`.
pub fn ellipsoid_in_polytope_affine(
    ell: &Ellipsoid,
    poly: &Polytope,
    map: &Matrix,
    offset: Option<&Vector>,
) -> Result<bool> {
    let margins = containment_margins(ell, poly, map, offset)?;
    Ok(margins
        .iter()
        .zip(poly.k().iter())
        .all(|(&m, &k)| m >= -1e-12 * k.abs().max(1.0)))
}
