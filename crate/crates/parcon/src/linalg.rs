//! Thin helpers over nalgebra: SVD-based numeric rank, null spaces, least
//! squares, condition numbers and log-log line fits.

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LinalgError {
    #[error("matrix is empty ({rows}x{cols})")]
    EmptyMatrix { rows: usize, cols: usize },
    #[error("SVD did not converge")]
    SvdFailed,
    #[error("numeric null space has dimension {found}, expected 1")]
    DegenerateNullSpace { found: usize },
}

/// Singular values in nonincreasing order.
pub fn singular_values(m: &DMatrix<f64>) -> Result<Vec<f64>, LinalgError> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(LinalgError::EmptyMatrix {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    let svd = m
        .clone()
        .try_svd(false, false, f64::EPSILON, 0)
        .ok_or(LinalgError::SvdFailed)?;
    let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok(sv)
}

/// Rank as the number of singular values above `tol_rel * sigma_max`.
///
/// The zero matrix has rank 0 (strict inequality against a zero threshold).
pub fn numeric_rank(m: &DMatrix<f64>, tol_rel: f64) -> Result<(usize, Vec<f64>), LinalgError> {
    let sv = singular_values(m)?;
    let thresh = tol_rel * sv[0];
    let rank = sv.iter().filter(|&&s| s > thresh).count();
    Ok((rank, sv))
}

/// Orthonormal basis of the numeric range (left singular vectors with
/// singular value above `tol_rel * sigma_max`).
pub fn range_basis(m: &DMatrix<f64>, tol_rel: f64) -> Result<DMatrix<f64>, LinalgError> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(LinalgError::EmptyMatrix {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    let svd = m
        .clone()
        .try_svd(true, false, f64::EPSILON, 0)
        .ok_or(LinalgError::SvdFailed)?;
    let u = svd.u.as_ref().expect("requested U");
    let smax = svd.singular_values.max();
    let cols: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > tol_rel * smax)
        .collect();
    let mut basis = DMatrix::zeros(m.nrows(), cols.len());
    for (j, &i) in cols.iter().enumerate() {
        basis.set_column(j, &u.column(i));
    }
    Ok(basis)
}

/// One-dimensional numeric null space direction: the right singular vector of
/// the smallest singular value. Errors when more than one singular value sits
/// below `tol_rel * sigma_max` (degenerate null space) or when none does and
/// the matrix has full column rank less margin — callers pass matrices with
/// more columns than rows, which always carry a null direction.
pub fn null_direction(m: &DMatrix<f64>, tol_rel: f64) -> Result<DVector<f64>, LinalgError> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(LinalgError::EmptyMatrix {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    let svd = m
        .clone()
        .try_svd(false, true, f64::EPSILON, 0)
        .ok_or(LinalgError::SvdFailed)?;
    let vt = svd.v_t.as_ref().expect("requested V^T");
    let sv = &svd.singular_values;
    let smax = sv.max();
    // near-zero singular values among the min(rows, cols) computed ones,
    // plus the structural deficit of a wide matrix
    let near_zero = sv.iter().filter(|&&s| s <= tol_rel * smax).count();
    let null_dim = near_zero + m.ncols().saturating_sub(m.nrows());
    if null_dim != 1 {
        return Err(LinalgError::DegenerateNullSpace { found: null_dim });
    }
    // With cols = rows + 1 and all computed singular values positive, the
    // null direction is the last row of the full V^T; nalgebra's thin SVD
    // returns V^T with ncols rows only when cols <= rows, so rebuild it from
    // the fact that the null vector is orthogonal to all rows of M.
    if vt.nrows() == m.ncols() {
        let idx = sv.imin();
        return Ok(vt.row(idx).transpose());
    }
    // thin SVD: complete the basis by solving M x = 0 via QR of M^T
    let qr = m.transpose().qr();
    let q = qr.q();
    // q has ncols(m) rows and nrows(m) columns; the orthogonal complement is
    // 1-dimensional: find it by Gram-Schmidt against q's columns.
    let n = m.ncols();
    for seed in 0..n {
        let mut v = DVector::zeros(n);
        v[seed] = 1.0;
        for j in 0..q.ncols() {
            let qj = q.column(j);
            let proj = qj.dot(&v);
            v -= proj * DVector::from_column_slice(qj.as_slice());
        }
        let norm = v.norm();
        if norm > 1e-8 {
            return Ok(v / norm);
        }
    }
    Err(LinalgError::DegenerateNullSpace { found: 0 })
}

/// Minimum-norm least-squares solution of `A x = b` via SVD.
pub fn lstsq(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    tol_rel: f64,
) -> Result<DVector<f64>, LinalgError> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(LinalgError::EmptyMatrix {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    let svd = a
        .clone()
        .try_svd(true, true, f64::EPSILON, 0)
        .ok_or(LinalgError::SvdFailed)?;
    svd.solve(b, tol_rel * svd.singular_values.max())
        .map_err(|_| LinalgError::SvdFailed)
}

/// 2-norm condition number; infinite for singular matrices.
pub fn cond_2(m: &DMatrix<f64>) -> Result<f64, LinalgError> {
    let sv = singular_values(m)?;
    let smin = sv[sv.len() - 1];
    Ok(if smin == 0.0 {
        f64::INFINITY
    } else {
        sv[0] / smin
    })
}

/// Least-squares slope and intercept of `y` against `x`.
pub fn fit_line(x: &[f64], y: &[f64]) -> (f64, f64) {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let sx: f64 = x.iter().sum();
    let sy: f64 = y.iter().sum();
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let denom = n * sxx - sx * sx;
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    (slope, intercept)
}

/// Slope of `log y` against `log x` plus the fit residual (RMS in log space).
pub fn fit_loglog(x: &[f64], y: &[f64]) -> (f64, f64) {
    let lx: Vec<f64> = x.iter().map(|v| crate::scalar::ln(*v)).collect();
    let ly: Vec<f64> = y.iter().map(|v| crate::scalar::ln(*v)).collect();
    let (slope, intercept) = fit_line(&lx, &ly);
    let mut rss = 0.0;
    for (a, b) in lx.iter().zip(&ly) {
        let e = b - (slope * a + intercept);
        rss += e * e;
    }
    (slope, crate::scalar::sqrt(rss / lx.len() as f64))
}
