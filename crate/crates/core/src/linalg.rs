//! Small dense linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Builds a matrix from row-major nested rows. Rows must share a length.
pub fn from_rows(rows: &[Vec<f64>]) -> Result<Matrix> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Dimension("ragged matrix rows".into()));
    }
    Ok(Matrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

pub fn to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

pub fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

/// Symmetric within `tol` relative to the largest entry.
pub fn is_symmetric(m: &Matrix, tol: f64) -> bool {
    if !m.is_square() {
        return false;
    }
    let scale = m.amax().max(1.0);
    (m - m.transpose()).amax() <= tol * scale
}

pub fn sym_eigenvalues(m: &Matrix) -> Vector {
    SymmetricEigen::new(symmetrize(m)).eigenvalues
}

pub fn min_eigenvalue(m: &Matrix) -> f64 {
    sym_eigenvalues(m).min()
}

pub fn max_eigenvalue(m: &Matrix) -> f64 {
    sym_eigenvalues(m).max()
}

/// Checks symmetry (tolerance 1e-10) and strict positivity of the spectrum.
pub fn check_positive_definite(m: &Matrix, what: &str) -> Result<()> {
    if !is_symmetric(m, 1e-10) {
        return Err(Error::NotPositiveDefinite(format!("{what} is not symmetric")));
    }
    let lmin = min_eigenvalue(m);
    if !(lmin > 0.0) {
        return Err(Error::NotPositiveDefinite(format!(
            "{what} has eigenvalue {lmin:.3e}"
        )));
    }
    Ok(())
}

/// Applies `f` to the eigenvalues of a symmetric matrix.
fn sym_fn(m: &Matrix, f: impl Fn(f64) -> f64) -> Matrix {
    let eig = SymmetricEigen::new(symmetrize(m));
    let d = Matrix::from_diagonal(&eig.eigenvalues.map(f));
    &eig.eigenvectors * d * eig.eigenvectors.transpose()
}

pub fn sym_sqrt(m: &Matrix) -> Matrix {
    sym_fn(m, f64::sqrt)
}

/// `P^{-1/2}` of a symmetric positive-definite matrix.
pub fn sym_inv_sqrt(m: &Matrix) -> Result<Matrix> {
    check_positive_definite(m, "shape matrix")?;
    Ok(sym_fn(m, |l| 1.0 / l.sqrt()))
}

pub fn sym_inverse(m: &Matrix) -> Result<Matrix> {
    let chol = nalgebra::Cholesky::new(symmetrize(m))
        .ok_or_else(|| Error::NotPositiveDefinite("cholesky failed".into()))?;
    Ok(symmetrize(&chol.inverse()))
}

pub fn spectral_radius(a: &Matrix) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    a.clone()
        .complex_eigenvalues()
        .iter()
        .map(|l| l.norm())
        .fold(0.0, f64::max)
}

/// Numeric rank with a tolerance relative to the largest singular value.
pub fn numeric_rank(m: &Matrix, rel_tol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().singular_values();
    let smax = sv.max();
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * smax).count()
}

/// `[B, AB, ..., A^{n-1}B]`.
pub fn controllability_matrix(a: &Matrix, b: &Matrix) -> Matrix {
    let n = a.nrows();
    let m = b.ncols();
    let mut out = Matrix::zeros(n, n * m);
    let mut block = b.clone();
    for k in 0..n {
        out.view_mut((0, k * m), (n, m)).copy_from(&block);
        block = a * block;
    }
    out
}

/// Orthonormal basis of the null space, from the SVD.
pub fn null_space(m: &Matrix, rel_tol: f64) -> Matrix {
    let ncols = m.ncols();
    if m.nrows() == 0 {
        return Matrix::identity(ncols, ncols);
    }
    // Pad to at least square so that the SVD returns a full V.
    let padded = if m.nrows() < ncols {
        let mut p = Matrix::zeros(ncols, ncols);
        p.view_mut((0, 0), (m.nrows(), ncols)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let smax = svd.singular_values.max();
    let cols: Vec<Vector> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| smax == 0.0 || s <= rel_tol * smax)
        .map(|(i, _)| v_t.row(i).transpose())
        .collect();
    if cols.is_empty() {
        Matrix::zeros(ncols, 0)
    } else {
        Matrix::from_columns(&cols)
    }
}

/// Relative Frobenius-norm residual helper: `|r| / max(scale, tiny)`.
pub fn relative(residual: f64, scale: f64) -> f64 {
    residual / scale.max(f64::MIN_POSITIVE)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_square_root_round_trips() {
        let p = Matrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let s = sym_inv_sqrt(&p).unwrap();
        let back = &s * &p * &s;
        assert!((back - Matrix::identity(2, 2)).amax() < 1e-12);
    }

    #[test]
    fn rank_and_null_space() {
        let m = Matrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0]);
        assert_eq!(numeric_rank(&m, 1e-10), 1);
        let ns = null_space(&m, 1e-10);
        assert_eq!(ns.ncols(), 2);
        assert!((&m * &ns).amax() < 1e-12);
    }

    #[test]
    fn non_symmetric_is_rejected() {
        let m = Matrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(check_positive_definite(&m, "m").is_err());
    }

    #[test]
    fn spectral_radius_of_rotation() {
        let (c, s) = (0.3f64.cos(), 0.3f64.sin());
        let r = Matrix::from_row_slice(2, 2, &[c, -s, s, c]) * 0.99;
        assert!((spectral_radius(&r) - 0.99).abs() < 1e-12);
    }
}
