use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{eigh_ascending, fix_signs, max_abs, select_columns, symmetrize};

/// Relative threshold separating "nonzero" eigenvalues from the null space.
pub const NULL_TOL: f64 = 1e-9;

/// Ridge factor applied to a singular constraint matrix, relative to `trace(Q) / m`.
pub const RIDGE_EPS: f64 = 1e-10;

/// Which end of the spectrum to return.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Smallest,
    Largest,
}

/// The `d` smallest eigenpairs of a symmetric matrix whose eigenvalue
/// exceeds `null_tol × max|λ|`.
///
/// Eigenvalues come back ascending, eigenvectors as orthonormal columns with
/// their largest-magnitude entry positive.
pub fn eig_smallest_sym(a: &DMatrix<f64>, d: usize, null_tol: f64) -> Result<(DVector<f64>, DMatrix<f64>)> {
    check_symmetric(a, "operator")?;
    if d == 0 {
        return Err(Error::Domain("requested 0 eigenpairs".into()));
    }
    let (values, vectors) = eigh_ascending(&symmetrize(a));
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let keep: Vec<usize> = (0..values.len())
        .filter(|&i| values[i] > null_tol * scale)
        .collect();
    if keep.len() < d {
        return Err(Error::InsufficientRank {
            requested: d,
            available: keep.len(),
        });
    }
    let keep = &keep[..d];
    let mut w = select_columns(&vectors, keep);
    fix_signs(&mut w);
    Ok((DVector::from_iterator(d, keep.iter().map(|&i| values[i])), w))
}

/// Solves `P w = λ Q w` for `d` eigenpairs from the requested end.
///
/// `Q` is reduced by Cholesky. When `Q` is numerically singular (factorization
/// fails, or a pivot falls below the ridge level) the factorization is
/// retried on `Q + ε·trace(Q)/m·I`. Vectors are scaled so `wᵀQw = 1` against
/// the unridged `Q` whenever that form is positive.
///
/// Eigenvalues are ascending for [`Side::Smallest`] and descending for
/// [`Side::Largest`], so column 0 is always the extreme pair.
pub fn eig_generalized(
    p: &DMatrix<f64>,
    q: &DMatrix<f64>,
    d: usize,
    side: Side,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let m = p.nrows();
    if q.shape() != (m, m) || !p.is_square() {
        return Err(Error::shape(format!(
            "generalized problem needs square matrices of equal size, got {:?} and {:?}",
            p.shape(),
            q.shape()
        )));
    }
    check_symmetric(p, "P")?;
    check_symmetric(q, "Q")?;
    if d == 0 {
        return Err(Error::Domain("requested 0 eigenpairs".into()));
    }
    if d > m {
        return Err(Error::InsufficientRank {
            requested: d,
            available: m,
        });
    }
    if max_abs(q) == 0.0 {
        return Err(Error::DegenerateConstraint("constraint matrix is identically zero".into()));
    }
    let q = symmetrize(q);
    let p = symmetrize(p);
    let ridge = RIDGE_EPS * q.trace().abs() / m as f64;

    let chol = Cholesky::new(q.clone())
        .filter(|c| c.l_dirty().diagonal().iter().all(|&x| x * x > ridge))
        .or_else(|| {
            log::debug!("constraint matrix singular; adding ridge {ridge:e}");
            Cholesky::new(&q + DMatrix::<f64>::identity(m, m) * ridge)
        })
        .ok_or_else(|| Error::DegenerateConstraint("constraint matrix is not positive semi-definite".into()))?;
    let l = chol.l();

    // C = L⁻¹ P L⁻ᵀ
    let linv_p = l
        .solve_lower_triangular(&p)
        .ok_or_else(|| Error::DegenerateConstraint("singular Cholesky factor".into()))?;
    let c = l
        .solve_lower_triangular(&linv_p.transpose())
        .ok_or_else(|| Error::DegenerateConstraint("singular Cholesky factor".into()))?;
    let (values, vectors) = eigh_ascending(&symmetrize(&c));

    let idx: Vec<usize> = match side {
        Side::Smallest => (0..d).collect(),
        Side::Largest => (0..d).map(|k| m - 1 - k).collect(),
    };
    let v = select_columns(&vectors, &idx);
    let mut w = l
        .transpose()
        .solve_upper_triangular(&v)
        .ok_or_else(|| Error::DegenerateConstraint("singular Cholesky factor".into()))?;
    for mut col in w.column_iter_mut() {
        let norm = col.dot(&(&q * &col));
        if norm > 0.0 {
            col /= norm.sqrt();
        }
    }
    fix_signs(&mut w);
    Ok((DVector::from_iterator(d, idx.iter().map(|&i| values[i])), w))
}

fn check_symmetric(a: &DMatrix<f64>, what: &str) -> Result<()> {
    if !a.is_square() {
        return Err(Error::shape(format!("{what} is not square: {:?}", a.shape())));
    }
    let asym = max_abs(&(a - a.transpose()));
    if asym > 1e-10 * max_abs(a).max(1.0) {
        return Err(Error::Domain(format!("{what} is not symmetric (max asymmetry {asym:e})")));
    }
    Ok(())
}
