//! Algebraic partial-controllability decisions.
//!
//! For constant matrices the Kalman matrix is `[A|B] = (B|AB|...|A^{n-1}B)`;
//! controllability of the first `p` solution components is equivalent to
//! `rank Π_p [A|B] = p`, where `Π_p` keeps the first `p` rows. For matrices
//! with polynomial time dependence the blocks follow the recursion
//! `B_0 = B`, `B_i = A B_{i-1} - ∂_t B_{i-1}`, evaluated at a chosen time;
//! the rank condition at the final time is sufficient only.
//!
//! The module also constructs the change of variable `P(t)` that maps a
//! controllable pair onto a cascade system with companion-form blocks, and
//! provides an independent finite-dimensional oracle based on the
//! controllability Gramian `W = ∫_0^T e^{As} B Bᵀ e^{Aᵀs} ds`.

use crate::expm::expm;
use crate::linalg::{self, LinalgError};
use crate::poly::MatrixPoly;
use crate::quad;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default relative SVD threshold for rank decisions.
pub const DEFAULT_TOL_REL: f64 = 1e-10;
/// Default condition-number cap defining numeric invertibility of `P(t)`.
pub const DEFAULT_COND_CAP: f64 = 1e12;

#[derive(Debug, Error, PartialEq)]
pub enum KalmanError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("p = {p} out of range 1..={n}")]
    POutOfRange { p: usize, n: usize },
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error(
        "P(T) is numerically singular (condition {cond:.3e}); the rank assumption is violated"
    )]
    SingularAtFinalTime { cond: f64 },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// The Kalman matrix `(B_0|B_1|...|B_{n-1})` with `m`-column blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanMatrix {
    pub value: DMatrix<f64>,
    /// Number of columns per block (`m`).
    pub block_cols: usize,
    /// Evaluation time for time-dependent inputs, `None` for constant ones.
    pub eval_time: Option<f64>,
}

impl KalmanMatrix {
    /// The `i`-th block (`A^i B` in the constant case).
    pub fn block(&self, i: usize) -> DMatrix<f64> {
        self.value
            .columns(i * self.block_cols, self.block_cols)
            .into_owned()
    }

    pub fn n_blocks(&self) -> usize {
        self.value.ncols() / self.block_cols
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllabilityVerdict {
    pub rank: usize,
    pub required: usize,
    pub controllable: bool,
    pub singular_values: Vec<f64>,
    pub tolerance_used: f64,
}

/// `[A|B] = (B|AB|...|A^{n-1}B)`, blocks built left to right.
pub fn build_kalman_constant(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
) -> Result<KalmanMatrix, KalmanError> {
    if a.nrows() != a.ncols() {
        return Err(KalmanError::DimensionMismatch(format!(
            "A must be square, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if b.nrows() != a.nrows() {
        return Err(KalmanError::DimensionMismatch(format!(
            "B must have {} rows to match A, got {}",
            a.nrows(),
            b.nrows()
        )));
    }
    let n = a.nrows();
    let m = b.ncols();
    let mut value = DMatrix::zeros(n, n * m);
    let mut block = b.clone();
    for i in 0..n {
        value.columns_mut(i * m, m).copy_from(&block);
        if i + 1 < n {
            block = a * &block;
        }
    }
    Ok(KalmanMatrix {
        value,
        block_cols: m,
        eval_time: None,
    })
}

/// Time-dependent Kalman matrix evaluated at `t0`, using the exact symbolic
/// recursion `B_i = A B_{i-1} - ∂_t B_{i-1}` on polynomial entries.
pub fn build_kalman_time(
    a: &MatrixPoly,
    b: &MatrixPoly,
    t0: f64,
) -> Result<KalmanMatrix, KalmanError> {
    if a.rows != a.cols {
        return Err(KalmanError::DimensionMismatch(format!(
            "A(t) must be square, got {}x{}",
            a.rows, a.cols
        )));
    }
    if b.rows != a.rows {
        return Err(KalmanError::DimensionMismatch(format!(
            "B(t) must have {} rows to match A(t), got {}",
            a.rows, b.rows
        )));
    }
    let n = a.rows;
    let m = b.cols;
    let mut value = DMatrix::zeros(n, n * m);
    let mut block = b.clone();
    for i in 0..n {
        value.columns_mut(i * m, m).copy_from(&block.eval(t0));
        if i + 1 < n {
            block = a.matmul(&block).sub(&block.derivative());
        }
    }
    Ok(KalmanMatrix {
        value,
        block_cols: m,
        eval_time: Some(t0),
    })
}

/// Rank as the count of singular values above `tol_rel * sigma_max`.
pub fn numeric_rank(m: &DMatrix<f64>, tol_rel: f64) -> Result<(usize, Vec<f64>), KalmanError> {
    if tol_rel <= 0.0 {
        return Err(KalmanError::BadTolerance(tol_rel));
    }
    Ok(linalg::numeric_rank(m, tol_rel)?)
}

fn verdict_for(
    kalman: &KalmanMatrix,
    p: usize,
    n: usize,
    tol_rel: f64,
) -> Result<ControllabilityVerdict, KalmanError> {
    if p == 0 || p > n {
        return Err(KalmanError::POutOfRange { p, n });
    }
    let projected = kalman.value.rows(0, p).into_owned();
    let (rank, singular_values) = numeric_rank(&projected, tol_rel)?;
    Ok(ControllabilityVerdict {
        rank,
        required: p,
        controllable: rank >= p,
        singular_values,
        tolerance_used: tol_rel,
    })
}

/// Necessary and sufficient test for constant matrices:
/// `rank Π_p [A|B] = p`.
pub fn check_partial_constant(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    p: usize,
    tol_rel: f64,
) -> Result<ControllabilityVerdict, KalmanError> {
    let k = build_kalman_constant(a, b)?;
    verdict_for(&k, p, a.nrows(), tol_rel)
}

/// Sufficient test for time-polynomial matrices, evaluated at the final time:
/// `rank Π_p [A|B](T) = p`. A positive verdict proves controllability; a
/// negative one proves nothing.
pub fn check_partial_time(
    a: &MatrixPoly,
    b: &MatrixPoly,
    p: usize,
    t_final: f64,
    tol_rel: f64,
) -> Result<ControllabilityVerdict, KalmanError> {
    let k = build_kalman_time(a, b, t_final)?;
    verdict_for(&k, p, a.rows, tol_rel)
}

/// Per-time verdicts of a grid scan of the time-dependent rank condition.
///
/// For analytic coefficients, controllability requires the condition at
/// *some* time; the scan reports where on the grid it holds but makes no
/// necessity claim (no grid is dense).
#[derive(Debug, Clone, PartialEq)]
pub struct TimeScan {
    pub grid: Vec<f64>,
    pub verdicts: Vec<ControllabilityVerdict>,
    /// Some grid time satisfies the rank condition.
    pub any_controllable: bool,
}

/// Evaluates `rank Π_p [A|B](t) = p` at every grid time.
pub fn check_partial_time_scan(
    a: &MatrixPoly,
    b: &MatrixPoly,
    p: usize,
    grid: &[f64],
    tol_rel: f64,
) -> Result<TimeScan, KalmanError> {
    let mut verdicts = Vec::with_capacity(grid.len());
    for &t in grid {
        verdicts.push(check_partial_time(a, b, p, t, tol_rel)?);
    }
    let any_controllable = verdicts.iter().any(|v| v.controllable);
    Ok(TimeScan {
        grid: grid.to_vec(),
        verdicts,
        any_controllable,
    })
}

/// Chains extracted from the columns of `B`: a basis of the controllable
/// subspace `X = range [A|B]` of the form
/// `{b^{l_1}, Ab^{l_1}, ..., A^{s_1-1}b^{l_1}, ..., A^{s_r-1}b^{l_r}}`.
#[derive(Debug, Clone)]
pub struct BasisExtraction {
    /// Number of chains.
    pub r: usize,
    /// Control-column index of each chain (0-based).
    pub l_j: Vec<usize>,
    /// Chain lengths; their sum is `rank [A|B]`.
    pub s_j: Vec<usize>,
    /// The basis matrix `M`, `n x s`, chains concatenated in order.
    pub columns: DMatrix<f64>,
    /// Coefficients expressing each chain closure `A^{s_j} b^{l_j}` in the
    /// accepted vectors of chains `1..=j`.
    pub closures: Vec<DVector<f64>>,
    /// Least-squares residual of each closure representation.
    pub closure_residuals: Vec<f64>,
}

impl BasisExtraction {
    /// 0-based start index of each chain inside the basis matrix.
    pub fn block_starts(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.r);
        let mut acc = 0;
        for &s in &self.s_j {
            out.push(acc);
            acc += s;
        }
        out
    }

    pub fn total_len(&self) -> usize {
        self.s_j.iter().sum()
    }
}

/// Greedy chain extraction scanning control columns in ascending index:
/// a candidate `A^i b^l` is accepted iff it increases the numeric rank of
/// the accepted set; a chain stops at its first rejected vector.
pub fn extract_basis(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    tol_rel: f64,
) -> Result<BasisExtraction, KalmanError> {
    if a.nrows() != a.ncols() {
        return Err(KalmanError::DimensionMismatch(format!(
            "A must be square, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if b.nrows() != a.nrows() {
        return Err(KalmanError::DimensionMismatch(format!(
            "B must have {} rows to match A, got {}",
            a.nrows(),
            b.nrows()
        )));
    }
    let n = a.nrows();
    let mut accepted: Vec<DVector<f64>> = Vec::new();
    let mut l_j = Vec::new();
    let mut s_j = Vec::new();
    let mut closures = Vec::new();
    let mut closure_residuals = Vec::new();
    let mut rank = 0usize;

    let as_matrix = |cols: &[DVector<f64>]| {
        let mut m = DMatrix::zeros(n, cols.len());
        for (j, c) in cols.iter().enumerate() {
            m.set_column(j, c);
        }
        m
    };

    for l in 0..b.ncols() {
        let mut v: DVector<f64> = b.column(l).into_owned();
        let mut chain = 0usize;
        loop {
            let mut trial = accepted.clone();
            trial.push(v.clone());
            let cand = as_matrix(&trial);
            let (new_rank, _) = numeric_rank(&cand, tol_rel)?;
            if new_rank > rank {
                accepted = trial;
                rank = new_rank;
                chain += 1;
                v = a * &v;
                if rank == n {
                    break;
                }
            } else {
                break;
            }
        }
        if chain > 0 {
            l_j.push(l);
            s_j.push(chain);
            // closure: v now equals A^{s_j} b^{l_j}; express it in the
            // accepted chains so far
            let prefix = as_matrix(&accepted);
            let coeffs = linalg::lstsq(&prefix, &v, tol_rel)?;
            let residual = (&prefix * &coeffs - &v).norm();
            closures.push(coeffs);
            closure_residuals.push(residual);
        }
        if rank == n {
            // remaining control columns cannot add anything
            // (the test above would reject them anyway; skip the work)
            if l + 1 == b.ncols() {
                break;
            }
        }
    }

    Ok(BasisExtraction {
        r: l_j.len(),
        l_j,
        s_j,
        columns: as_matrix(&accepted),
        closures,
        closure_residuals,
    })
}

/// Row-permutation for the `p < s` reduction: keeps rows `0..p`, then
/// greedily appends rows (lowest index first) while they increase the rank
/// of the selected-row submatrix of `m`, until `rank m` rows are selected.
/// Returns the permutation matrix `Q` and the new row order.
pub fn permute_rows(
    m: &DMatrix<f64>,
    p: usize,
    tol_rel: f64,
) -> Result<(DMatrix<f64>, Vec<usize>), KalmanError> {
    let n = m.nrows();
    if p > n {
        return Err(KalmanError::POutOfRange { p, n });
    }
    let (s, _) = numeric_rank(m, tol_rel)?;
    let mut selected: Vec<usize> = (0..p).collect();
    let sub = |rows: &[usize]| {
        let mut out = DMatrix::zeros(rows.len(), m.ncols());
        for (i, &r) in rows.iter().enumerate() {
            out.row_mut(i).copy_from(&m.row(r));
        }
        out
    };
    let mut rank = if p == 0 {
        0
    } else {
        numeric_rank(&sub(&selected), tol_rel)?.0
    };
    for row in p..n {
        if selected.len() == s {
            break;
        }
        let mut trial = selected.clone();
        trial.push(row);
        let new_rank = numeric_rank(&sub(&trial), tol_rel)?.0;
        if new_rank > rank {
            selected = trial;
            rank = new_rank;
        }
    }
    let mut order = selected.clone();
    for row in 0..n {
        if !order.contains(&row) {
            order.push(row);
        }
    }
    let mut q = DMatrix::zeros(n, n);
    for (new_row, &old_row) in order.iter().enumerate() {
        q[(new_row, old_row)] = 1.0;
    }
    Ok((q, order))
}

/// The change of variable `P(t)` onto cascade form, sampled on a time grid.
#[derive(Debug, Clone)]
pub struct CascadeTransform {
    pub grid: Vec<f64>,
    /// `P(t)` at each grid time; the first `s` columns are the constant
    /// chain basis, the remaining ones solve `∂_t P_l = A P_l`, `P_l(T)=e_l`.
    pub p_samples: Vec<DMatrix<f64>>,
    /// Companion-block matrix `C̃` (`s x s`), block upper triangular.
    pub c_tilde: DMatrix<f64>,
    /// Canonical control columns `D = (e_{S_1}|...|e_{S_r})`, `n x r`.
    pub d: DMatrix<f64>,
    pub r: usize,
    pub s_j: Vec<usize>,
    pub l_j: Vec<usize>,
    /// 0-based block start indices.
    pub block_starts: Vec<usize>,
    /// Smallest grid time from which `P(t)` stays numerically invertible
    /// (condition number below `cond_cap`) up to the final time.
    pub t_star: f64,
    pub cond_cap: f64,
}

impl CascadeTransform {
    /// `blockdiag(C̃, 0)` of size `n`.
    pub fn c_full(&self, n: usize) -> DMatrix<f64> {
        let s = self.c_tilde.nrows();
        let mut c = DMatrix::zeros(n, n);
        c.view_mut((0, 0), (s, s)).copy_from(&self.c_tilde);
        c
    }
}

/// Builds the cascade transform for the `p = s` case from an extracted basis.
pub fn build_transform(
    a: &DMatrix<f64>,
    basis: &BasisExtraction,
    t_final: f64,
    grid: &[f64],
    cond_cap: f64,
) -> Result<CascadeTransform, KalmanError> {
    let n = a.nrows();
    let s = basis.total_len();
    let starts = basis.block_starts();

    // C̃: ones on the first subdiagonal inside each diagonal block, the
    // closure coefficients in the last column of each block column range.
    let mut c_tilde = DMatrix::zeros(s, s);
    for (j, &sj) in basis.s_j.iter().enumerate() {
        let start = starts[j];
        for i in 1..sj {
            c_tilde[(start + i, start + i - 1)] = 1.0;
        }
        let closure = &basis.closures[j];
        let last_col = start + sj - 1;
        for (row, &coeff) in closure.iter().enumerate() {
            c_tilde[(row, last_col)] += coeff;
        }
    }

    let mut d = DMatrix::zeros(n, basis.r);
    for (j, &sj_start) in starts.iter().enumerate() {
        d[(sj_start, j)] = 1.0;
    }

    // P(t) = (M | e^{A(t-T)} e_l for l = s..n-1)
    let mut p_samples = Vec::with_capacity(grid.len());
    for &t in grid {
        let mut p = DMatrix::zeros(n, n);
        p.view_mut((0, 0), (n, s)).copy_from(&basis.columns);
        if s < n {
            let e = expm(&(a * (t - t_final)));
            for l in s..n {
                p.set_column(l, &e.column(l));
            }
        }
        p_samples.push(p);
    }

    // invertibility at the final time
    let mut p_final = DMatrix::zeros(n, n);
    p_final.view_mut((0, 0), (n, s)).copy_from(&basis.columns);
    for l in s..n {
        p_final[(l, l)] = 1.0;
    }
    let cond_final = linalg::cond_2(&p_final)?;
    if !cond_final.is_finite() || cond_final > cond_cap {
        return Err(KalmanError::SingularAtFinalTime { cond: cond_final });
    }

    // T*: smallest grid time from which every later sample stays invertible
    let mut t_star = *grid.last().unwrap_or(&t_final);
    for (i, sample) in p_samples.iter().enumerate().rev() {
        let cond = linalg::cond_2(sample)?;
        if cond.is_finite() && cond <= cond_cap {
            t_star = grid[i];
        } else {
            break;
        }
    }

    Ok(CascadeTransform {
        grid: grid.to_vec(),
        p_samples,
        c_tilde,
        d,
        r: basis.r,
        s_j: basis.s_j.clone(),
        l_j: basis.l_j.clone(),
        block_starts: starts,
        t_star,
        cond_cap,
    })
}

/// Independent oracle: builds `W = ∫_0^T e^{As} B Bᵀ e^{Aᵀs} ds` by composite
/// Gauss quadrature, takes an orthonormal basis `V` of `range W` (which is
/// the controllable subspace) and decides `rank Π_p V = p`.
pub fn gramian_oracle(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    p: usize,
    t_final: f64,
    tol_rel: f64,
) -> Result<ControllabilityVerdict, KalmanError> {
    if a.nrows() != a.ncols() || b.nrows() != a.nrows() {
        return Err(KalmanError::DimensionMismatch(format!(
            "A {}x{}, B {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    let n = a.nrows();
    if p == 0 || p > n {
        return Err(KalmanError::POutOfRange { p, n });
    }
    if tol_rel <= 0.0 {
        return Err(KalmanError::BadTolerance(tol_rel));
    }

    let (nodes, weights) = quad::gauss_legendre(8);
    let panels = 32usize;
    let h = t_final / panels as f64;
    let mut w = DMatrix::<f64>::zeros(n, n);
    for panel in 0..panels {
        let mid = (panel as f64 + 0.5) * h;
        for (x, wt) in nodes.iter().zip(&weights) {
            let s = mid + 0.5 * h * x;
            let e = expm(&(a * s));
            let eb = &e * b;
            w += 0.5 * h * wt * (&eb * eb.transpose());
        }
    }

    let v = linalg::range_basis(&w, tol_rel)?;
    let projected = v.rows(0, p).into_owned();
    let (rank, singular_values) = if v.ncols() == 0 {
        (0, Vec::new())
    } else {
        linalg::numeric_rank(&projected, tol_rel)?
    };
    Ok(ControllabilityVerdict {
        rank,
        required: p,
        controllable: rank >= p,
        singular_values,
        tolerance_used: tol_rel,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::Poly;
    use alloc::vec;
    use approx::assert_relative_eq;

    fn e(n: usize, i: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(n, 1);
        m[(i, 0)] = 1.0;
        m
    }

    #[test]
    fn nilpotent_zero_a_gives_rank_one() {
        let a = DMatrix::zeros(2, 2);
        let b = e(2, 0);
        let k = build_kalman_constant(&a, &b).unwrap();
        assert_eq!(k.block(0), e(2, 0));
        assert_eq!(k.block(1), DMatrix::zeros(2, 1));
        assert_eq!(numeric_rank(&k.value, 1e-10).unwrap().0, 1);
    }

    #[test]
    fn cascade_pair_has_full_rank() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let b = e(2, 1);
        let k = build_kalman_constant(&a, &b).unwrap();
        assert_eq!(k.block(0), e(2, 1));
        assert_eq!(k.block(1), e(2, 0));
        assert_eq!(numeric_rank(&k.value, 1e-10).unwrap().0, 2);
    }

    #[test]
    fn blocks_match_independent_power_computation() {
        let a = DMatrix::from_row_slice(3, 3, &[1.0, -2.0, 0.5, 0.0, 2.0, 1.0, -1.0, 0.25, -0.5]);
        let b = DMatrix::from_column_slice(3, 1, &[1.0, 0.5, -1.0]);
        let k = build_kalman_constant(&a, &b).unwrap();
        // oracle: full matrix powers, then multiply
        let mut a_pow = DMatrix::<f64>::identity(3, 3);
        for i in 0..3 {
            let expect = &a_pow * &b;
            assert_relative_eq!((k.block(i) - expect).norm(), 0.0, epsilon = 1e-12);
            a_pow = &a * &a_pow;
        }
    }

    #[test]
    fn dimension_mismatch_is_named() {
        let a = DMatrix::zeros(2, 3);
        let b = e(2, 0);
        let err = build_kalman_constant(&a, &b).unwrap_err();
        assert!(matches!(err, KalmanError::DimensionMismatch(_)));
        let a = DMatrix::zeros(2, 2);
        let b = DMatrix::zeros(3, 1);
        let err = build_kalman_constant(&a, &b).unwrap_err();
        let msg = format!("{err}");
        assert!(
            msg.contains("2 rows"),
            "message should name the dimension: {msg}"
        );
    }

    #[test]
    fn time_recursion_reduces_to_constant_for_degree_zero() {
        let a = DMatrix::from_row_slice(2, 2, &[0.5, 1.0, -1.0, 0.25]);
        let b = DMatrix::from_column_slice(2, 1, &[1.0, 2.0]);
        let ap = MatrixPoly::from_constant(&a);
        let bp = MatrixPoly::from_constant(&b);
        let constant = build_kalman_constant(&a, &b).unwrap();
        for t0 in [0.0, 0.7, -3.0, 11.0] {
            let timed = build_kalman_time(&ap, &bp, t0).unwrap();
            assert_eq!(timed.value, constant.value, "exact equality at t0={t0}");
        }
    }

    #[test]
    fn scalar_time_dependent_control() {
        // n = 1, A = 0, B(t) = t: only block is B_0(t0) = t0
        let a = MatrixPoly::new(1, 1, vec![Poly::constant(0.0)]);
        let b = MatrixPoly::new(1, 1, vec![Poly(vec![0.0, 1.0])]);
        let k = build_kalman_time(&a, &b, 0.37).unwrap();
        assert_eq!(k.value.ncols(), 1);
        assert_relative_eq!(k.value[(0, 0)], 0.37);
    }

    #[test]
    fn derivative_term_enters_with_minus_sign() {
        // n = 2, A = 0, B(t) = (t, 1)^T: B_1 = -∂_t B = (-1, 0)^T
        let a = MatrixPoly::zeros(2, 2);
        let b = MatrixPoly::new(2, 1, vec![Poly(vec![0.0, 1.0]), Poly::constant(1.0)]);
        let t0 = 0.8;
        let k = build_kalman_time(&a, &b, t0).unwrap();
        assert_relative_eq!(k.block(1)[(0, 0)], -1.0);
        assert_relative_eq!(k.block(1)[(1, 0)], 0.0);
        // cross-check ∂_t B by central differences
        let h = 1e-6;
        let fd = (b.eval(t0 + h) - b.eval(t0 - h)) / (2.0 * h);
        let expect = a.eval(t0) * b.eval(t0) - fd;
        assert_relative_eq!((k.block(1) - expect).norm(), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn partial_verdicts_on_two_by_two() {
        // coupling drives row 1 from row 2: controllable for p = 1
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let v = check_partial_constant(&a, &e(2, 1), 1, 1e-10).unwrap();
        assert!(v.controllable);
        assert_eq!(v.rank, 1);

        // coupling only drives row 2: Π_1 [A|B] = (0 0)
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0]);
        let v = check_partial_constant(&a, &e(2, 1), 1, 1e-10).unwrap();
        assert!(!v.controllable);
        assert_eq!(v.rank, 0);
    }

    #[test]
    fn cascade_three_by_three_controls_two_components() {
        // subdiagonal couplings, one force on the first equation
        let a = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let v = check_partial_constant(&a, &e(3, 0), 2, 1e-10).unwrap();
        assert!(v.controllable);
        assert_eq!(v.rank, 2);
        // hand Kalman: (e1 | e2 | e3) so even p = 3 works
        let v = check_partial_constant(&a, &e(3, 0), 3, 1e-10).unwrap();
        assert!(v.controllable);
    }

    #[test]
    fn zero_control_matrix_is_not_controllable_without_error() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let b = DMatrix::zeros(2, 1);
        let v = check_partial_constant(&a, &b, 1, 1e-10).unwrap();
        assert_eq!(v.rank, 0);
        assert!(!v.controllable);
    }

    #[test]
    fn p_out_of_range_is_rejected() {
        let a = DMatrix::zeros(2, 2);
        let b = e(2, 0);
        assert!(matches!(
            check_partial_constant(&a, &b, 3, 1e-10),
            Err(KalmanError::POutOfRange { p: 3, n: 2 })
        ));
        assert!(matches!(
            check_partial_constant(&a, &b, 0, 1e-10),
            Err(KalmanError::POutOfRange { p: 0, n: 2 })
        ));
    }

    #[test]
    fn time_check_at_final_time() {
        // B(t) = (T-t, 1)^T, A = 0: B_0(T) = (0,1), B_1(T) = (1,0)
        let t_final = 2.0;
        let a = MatrixPoly::zeros(2, 2);
        let b = MatrixPoly::new(2, 1, vec![Poly(vec![t_final, -1.0]), Poly::constant(1.0)]);
        let v = check_partial_time(&a, &b, 1, t_final, 1e-10).unwrap();
        assert!(v.controllable);
        assert_eq!(v.rank, 1);

        // constant B = (1,0)^T cannot control both components
        let b = MatrixPoly::new(2, 1, vec![Poly::constant(1.0), Poly::constant(0.0)]);
        let v = check_partial_time(&a, &b, 2, t_final, 1e-10).unwrap();
        assert!(!v.controllable);
        assert_eq!(v.rank, 1);
    }

    #[test]
    fn time_scan_reports_where_the_condition_holds() {
        // B(t) = (t², 0)^T, A = 0: both blocks vanish at t = 0 (the
        // derivative term -∂_t B = (-2t, 0) vanishes there too), so the
        // condition fails at 0 and holds elsewhere
        let a = MatrixPoly::zeros(2, 2);
        let b = MatrixPoly::new(2, 1, vec![Poly(vec![0.0, 0.0, 1.0]), Poly::constant(0.0)]);
        let scan = check_partial_time_scan(&a, &b, 1, &[0.0, 0.5, 1.0], 1e-10).unwrap();
        assert!(scan.any_controllable);
        assert!(!scan.verdicts[0].controllable);
        assert!(scan.verdicts[1].controllable);
        assert!(scan.verdicts[2].controllable);
    }

    #[test]
    fn basis_from_single_jordan_chain() {
        // ones on the subdiagonal: chain e1 -> e2 -> e3 spans R^3
        let a = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let basis = extract_basis(&a, &e(3, 0), 1e-10).unwrap();
        assert_eq!(basis.r, 1);
        assert_eq!(basis.s_j, vec![3]);
        assert_eq!(basis.l_j, vec![0]);
        assert_eq!(basis.total_len(), 3);
    }

    #[test]
    fn basis_with_two_trivial_chains() {
        let a = DMatrix::zeros(2, 2);
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let basis = extract_basis(&a, &b, 1e-10).unwrap();
        assert_eq!(basis.r, 2);
        assert_eq!(basis.s_j, vec![1, 1]);
        assert_eq!(basis.l_j, vec![0, 1]);
    }

    #[test]
    fn closure_residuals_are_small_on_random_instance() {
        let a = DMatrix::from_row_slice(
            4,
            4,
            &[
                0.2, -1.0, 0.5, 0.0, 1.0, 0.1, -0.3, 0.7, 0.0, 0.6, -0.2, 1.0, -0.5, 0.0, 0.8, 0.3,
            ],
        );
        let b = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 1.0, 0.5, -0.5, 0.25, 0.1]);
        let basis = extract_basis(&a, &b, 1e-10).unwrap();
        let (s, _) = numeric_rank(&build_kalman_constant(&a, &b).unwrap().value, 1e-10).unwrap();
        assert_eq!(basis.total_len(), s);
        for res in &basis.closure_residuals {
            assert!(*res < 1e-8, "closure residual {res}");
        }
    }

    #[test]
    fn transform_for_zero_a_is_constant_identity_extension() {
        let a = DMatrix::zeros(3, 3);
        let b = e(3, 0);
        let basis = extract_basis(&a, &b, 1e-10).unwrap();
        let grid: Vec<f64> = (0..11).map(|i| i as f64 / 10.0).collect();
        let tf = build_transform(&a, &basis, 1.0, &grid, DEFAULT_COND_CAP).unwrap();
        assert_eq!(tf.c_tilde, DMatrix::zeros(1, 1));
        for p in &tf.p_samples {
            assert_relative_eq!((p - DMatrix::identity(3, 3)).norm(), 0.0, epsilon = 1e-14);
        }
        assert_relative_eq!(tf.t_star, 0.0);
    }

    #[test]
    fn transform_matches_hand_cascade() {
        // A = [[0,0],[1,0]], B = e1: (B|AB) = (e1|e2), C̃ = [[0,0],[1,0]], D = e1
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0]);
        let b = e(2, 0);
        let basis = extract_basis(&a, &b, 1e-10).unwrap();
        let grid = [0.0, 0.5, 1.0];
        let tf = build_transform(&a, &basis, 1.0, &grid, DEFAULT_COND_CAP).unwrap();
        let expect_c = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0]);
        assert_relative_eq!((tf.c_tilde.clone() - expect_c).norm(), 0.0, epsilon = 1e-12);
        assert_eq!(tf.d, e(2, 0));
        assert_eq!(tf.block_starts, vec![0]);
    }

    #[test]
    fn transform_residual_against_finite_differences() {
        // stable A with rank [A|B] = 2 < n = 3 so exponential columns appear
        let a = DMatrix::from_row_slice(3, 3, &[-1.0, 0.5, 0.0, 0.25, -2.0, 0.0, 0.0, 0.0, -0.5]);
        let b = e(3, 0);
        let basis = extract_basis(&a, &b, 1e-10).unwrap();
        assert_eq!(basis.total_len(), 2);
        let n_grid = 101;
        let t_final = 1.0;
        let grid: Vec<f64> = (0..n_grid)
            .map(|i| t_final * i as f64 / (n_grid - 1) as f64)
            .collect();
        let tf = build_transform(&a, &basis, t_final, &grid, DEFAULT_COND_CAP).unwrap();
        let c_full = tf.c_full(3);
        let h = grid[1] - grid[0];
        let mut worst: f64 = 0.0;
        for i in 2..n_grid - 2 {
            let dp = (-&tf.p_samples[i + 2] + 8.0 * &tf.p_samples[i + 1]
                - 8.0 * &tf.p_samples[i - 1]
                + &tf.p_samples[i - 2])
                / (12.0 * h);
            let defect = -&dp + &a * &tf.p_samples[i] - &tf.p_samples[i] * &c_full;
            worst = worst.max(defect.norm());
        }
        assert!(worst < 1e-8, "cascade residual {worst}");
    }

    #[test]
    fn invertibility_window_shrinks_for_fast_exponential_columns() {
        // s = 1 chain on e1; the exponential column e^{35(t-T)} e2 decays to
        // ~6e-16 at t = 0, so P(t) is numerically singular early in the
        // window and the reported T* moves inside the grid
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 35.0]);
        let b = e(2, 0);
        let basis = extract_basis(&a, &b, 1e-10).unwrap();
        assert_eq!(basis.total_len(), 1);
        let grid: Vec<f64> = (0..101).map(|i| i as f64 / 100.0).collect();
        let tf = build_transform(&a, &basis, 1.0, &grid, DEFAULT_COND_CAP).unwrap();
        assert!(
            tf.t_star > 0.0,
            "expected a shrunken invertibility window, got T* = {}",
            tf.t_star
        );
        // from T* onwards every sample is within the condition cap
        for (t, p) in tf.grid.iter().zip(&tf.p_samples) {
            if *t >= tf.t_star {
                assert!(crate::linalg::cond_2(p).unwrap() <= DEFAULT_COND_CAP);
            }
        }
    }

    #[test]
    fn permute_rows_selects_lowest_indices_first() {
        // rank 2; row 1 is a copy of row 0, so the greedy pass skips it
        let m = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 0.0, 0.0, 1.0]);
        let (q, order) = permute_rows(&m, 1, 1e-10).unwrap();
        assert_eq!(order, vec![0, 2, 1]);
        let permuted = &q * &m;
        assert_eq!(
            numeric_rank(&permuted.rows(0, 2).into_owned(), 1e-10)
                .unwrap()
                .0,
            2
        );
    }

    #[test]
    fn gramian_oracle_trivial_cases() {
        let a = DMatrix::zeros(2, 2);
        let b = e(2, 0);
        let v = gramian_oracle(&a, &b, 1, 1.0, 1e-10).unwrap();
        assert!(v.controllable);
        let v = gramian_oracle(&a, &b, 2, 1.0, 1e-10).unwrap();
        assert!(!v.controllable);
    }

    #[test]
    fn gramian_oracle_on_cascade() {
        let a = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let v = gramian_oracle(&a, &e(3, 0), 3, 1.0, 1e-10).unwrap();
        assert!(v.controllable);
    }

    #[test]
    fn oracle_agrees_with_kalman_on_seeded_instances() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let n = rng.random_range(1..=4usize);
            let m = rng.random_range(1..=n);
            let p = rng.random_range(1..=n);
            let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-2..=2i64) as f64);
            let b = DMatrix::from_fn(n, m, |_, _| rng.random_range(-2..=2i64) as f64);
            let direct = check_partial_constant(&a, &b, p, 1e-10).unwrap();
            let oracle = gramian_oracle(&a, &b, p, 1.0, 1e-10).unwrap();
            assert_eq!(
                direct.controllable, oracle.controllable,
                "disagreement for A={a} B={b} p={p}"
            );
        }
    }
}
