//! Matrices with real polynomial entries in the time variable. The exact
//! polynomial derivative keeps the time-dependent Kalman recursion free of
//! numerical differentiation error.

use alloc::vec;
use alloc::vec::Vec;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// One real polynomial, coefficients in ascending degree. Invariant: never
/// empty (the zero polynomial is `[0.0]`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Poly(pub Vec<f64>);

impl Poly {
    pub fn constant(c: f64) -> Self {
        Poly(vec![c])
    }

    pub fn eval(&self, t: f64) -> f64 {
        let mut acc = 0.0;
        for &c in self.0.iter().rev() {
            acc = acc * t + c;
        }
        acc
    }

    pub fn derivative(&self) -> Poly {
        if self.0.len() <= 1 {
            return Poly::constant(0.0);
        }
        Poly(
            self.0[1..]
                .iter()
                .enumerate()
                .map(|(i, c)| (i as f64 + 1.0) * c)
                .collect(),
        )
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = vec![0.0; self.0.len() + other.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in other.0.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly(out)
    }

    pub fn add_assign(&mut self, other: &Poly) {
        if other.0.len() > self.0.len() {
            self.0.resize(other.0.len(), 0.0);
        }
        for (i, b) in other.0.iter().enumerate() {
            self.0[i] += b;
        }
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        let mut neg = other.clone();
        for c in &mut neg.0 {
            *c = -*c;
        }
        out.add_assign(&neg);
        out
    }

    pub fn degree(&self) -> usize {
        self.0.len() - 1
    }
}

/// A matrix whose entries are polynomials in `t`, row-major storage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixPoly {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<Poly>,
}

impl MatrixPoly {
    pub fn new(rows: usize, cols: usize, entries: Vec<Poly>) -> Self {
        assert_eq!(entries.len(), rows * cols, "entry count must be rows*cols");
        MatrixPoly {
            rows,
            cols,
            entries,
        }
    }

    /// Degree-0 matrix from a constant matrix.
    pub fn from_constant(m: &DMatrix<f64>) -> Self {
        MatrixPoly {
            rows: m.nrows(),
            cols: m.ncols(),
            entries: (0..m.nrows())
                .flat_map(|i| (0..m.ncols()).map(move |j| (i, j)))
                .map(|(i, j)| Poly::constant(m[(i, j)]))
                .collect(),
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        MatrixPoly {
            rows,
            cols,
            entries: vec![Poly::constant(0.0); rows * cols],
        }
    }

    pub fn entry(&self, i: usize, j: usize) -> &Poly {
        &self.entries[i * self.cols + j]
    }

    pub fn eval(&self, t: f64) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self.entry(i, j).eval(t))
    }

    /// Entry-wise exact time derivative.
    pub fn derivative(&self) -> MatrixPoly {
        MatrixPoly {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|p| p.derivative()).collect(),
        }
    }

    /// Polynomial matrix product `self * other`.
    pub fn matmul(&self, other: &MatrixPoly) -> MatrixPoly {
        assert_eq!(self.cols, other.rows, "inner dimensions must agree");
        let mut out = MatrixPoly::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for j in 0..other.cols {
                let mut acc = Poly::constant(0.0);
                for k in 0..self.cols {
                    acc.add_assign(&self.entry(i, k).mul(other.entry(k, j)));
                }
                out.entries[i * out.cols + j] = acc;
            }
        }
        out
    }

    /// Entry-wise difference.
    pub fn sub(&self, other: &MatrixPoly) -> MatrixPoly {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        MatrixPoly {
            rows: self.rows,
            cols: self.cols,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a.sub(b))
                .collect(),
        }
    }

    pub fn max_degree(&self) -> usize {
        self.entries.iter().map(|p| p.degree()).max().unwrap_or(0)
    }

    pub fn is_constant(&self) -> bool {
        self.entries
            .iter()
            .all(|p| p.0.iter().skip(1).all(|&c| c == 0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn eval_and_derivative() {
        // p(t) = 1 + 2t + 3t^2, p'(t) = 2 + 6t
        let p = Poly(vec![1.0, 2.0, 3.0]);
        assert_relative_eq!(p.eval(2.0), 17.0);
        let d = p.derivative();
        assert_eq!(d.0, vec![2.0, 6.0]);
        assert_relative_eq!(d.eval(0.5), 5.0);
    }

    #[test]
    fn derivative_of_constant_is_zero() {
        assert_eq!(Poly::constant(4.0).derivative(), Poly::constant(0.0));
    }

    #[test]
    fn poly_product() {
        // (1 + t)(1 - t) = 1 - t^2
        let a = Poly(vec![1.0, 1.0]);
        let b = Poly(vec![1.0, -1.0]);
        assert_eq!(a.mul(&b).0, vec![1.0, 0.0, -1.0]);
    }

    #[test]
    fn matrix_eval_matches_constant() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, -2.0, 0.5, 3.0]);
        let mp = MatrixPoly::from_constant(&m);
        assert!(mp.is_constant());
        for t in [-1.0, 0.0, 7.3] {
            assert_relative_eq!((mp.eval(t) - &m).norm(), 0.0);
        }
    }

    #[test]
    fn matmul_matches_pointwise_product() {
        // A(t) = [[t, 1], [0, t^2]], B(t) = [[1, t], [2, 0]]
        let a = MatrixPoly::new(
            2,
            2,
            vec![
                Poly(vec![0.0, 1.0]),
                Poly::constant(1.0),
                Poly::constant(0.0),
                Poly(vec![0.0, 0.0, 1.0]),
            ],
        );
        let b = MatrixPoly::new(
            2,
            2,
            vec![
                Poly::constant(1.0),
                Poly(vec![0.0, 1.0]),
                Poly::constant(2.0),
                Poly::constant(0.0),
            ],
        );
        let prod = a.matmul(&b);
        for t in [0.0, 0.3, -2.0] {
            let expect = a.eval(t) * b.eval(t);
            assert_relative_eq!((prod.eval(t) - expect).norm(), 0.0, epsilon = 1e-12);
        }
    }
}
