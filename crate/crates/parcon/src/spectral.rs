//! Exact eigenbasis solvers for the coupled system
//!
//! ```text
//!   ∂_t y = Δy + α z + 1_ω u,    ∂_t z = Δz
//! ```
//!
//! on an interval with Dirichlet conditions, and its adjoint
//!
//! ```text
//!   -∂_t φ = Δφ,    -∂_t ψ = Δψ + α φ,    φ(T) = φ_0, ψ(T) = 0.
//! ```
//!
//! Everything is expanded in the L²-normalized sine eigenfunctions
//! `w_k(x) = sqrt(2/L) sin(kπ(x-a)/L)` with eigenvalues `μ_k = (kπ/L)²`.
//! The adjoint is closed form; the forward `y` component uses a per-mode
//! exponential integrator so that it stays an independent route from the
//! closed forms it is tested against.
//!
//! For a coupling given as a cosine series `α(x) = Σ_p α_p cos(pπ(x-a)/L)`
//! the matrix elements `α_{kl} = ∫ α w_k w_l` have the closed form
//!
//! ```text
//!   α_{kl} = (α_{|k-l|} - α_{k+l}) / 2   (k ≠ l)
//!   α_{kk} = α_0 - α_{2k} / 2
//! ```
//!
//! independent of the interval, by the product-to-sum identity; the
//! quadrature path cross-checks it.

use crate::dd::Dd;
use crate::quad;
use crate::scalar;
use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SpectralError {
    #[error("domain must satisfy b > a, got ({a}, {b})")]
    BadDomain { a: f64, b: f64 },
    #[error("K must be at least 1")]
    BadTruncation,
    #[error("quadrature did not reach tolerance {requested:e}, achieved {achieved:e}")]
    QuadratureNonConvergent { requested: f64, achieved: f64 },
    #[error("inconsistent truncations: {0}")]
    InconsistentTruncation(alloc::string::String),
}

/// Interval `(a, b)` with Dirichlet eigenpairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalDomain {
    pub a: f64,
    pub b: f64,
}

impl IntervalDomain {
    pub fn new(a: f64, b: f64) -> Result<Self, SpectralError> {
        // rejects NaN endpoints as well
        if b.partial_cmp(&a) != Some(core::cmp::Ordering::Greater) {
            return Err(SpectralError::BadDomain { a, b });
        }
        Ok(IntervalDomain { a, b })
    }

    /// The unit-eigenvalue interval `(0, π)` where `μ_k = k²`.
    pub fn zero_pi() -> Self {
        IntervalDomain {
            a: 0.0,
            b: core::f64::consts::PI,
        }
    }

    pub fn length(&self) -> f64 {
        self.b - self.a
    }

    /// `μ_k = (kπ/L)²` for `k >= 1`.
    pub fn eigenvalue(&self, k: usize) -> f64 {
        let w = k as f64 * core::f64::consts::PI / self.length();
        w * w
    }

    /// `w_k(x) = sqrt(2/L) sin(kπ(x-a)/L)`.
    pub fn eigenfunction(&self, k: usize, x: f64) -> f64 {
        let l = self.length();
        scalar::sqrt(2.0 / l) * scalar::sin(k as f64 * core::f64::consts::PI * (x - self.a) / l)
    }
}

/// Truncated sine-series coefficients of a function on the interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralField {
    pub coeffs: Vec<f64>,
    pub domain: IntervalDomain,
}

impl SpectralField {
    pub fn new(coeffs: Vec<f64>, domain: IntervalDomain) -> Self {
        SpectralField { coeffs, domain }
    }

    pub fn zeros(k: usize, domain: IntervalDomain) -> Self {
        SpectralField {
            coeffs: vec![0.0; k],
            domain,
        }
    }

    /// Single eigenmode `w_k`, `k >= 1`.
    pub fn mode(k: usize, len: usize, domain: IntervalDomain) -> Self {
        let mut coeffs = vec![0.0; len];
        coeffs[k - 1] = 1.0;
        SpectralField { coeffs, domain }
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// L² norm; the basis is orthonormal so it is the Euclidean norm.
    pub fn l2_norm(&self) -> f64 {
        scalar::sqrt(self.coeffs.iter().map(|c| c * c).sum())
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c * self.domain.eigenfunction(i + 1, x))
            .sum()
    }
}

/// Coupling coefficient `α`, either a cosine series in the mapped variable
/// or an arbitrary function integrated by adaptive quadrature.
pub enum CouplingSpec {
    /// `α(x) = Σ_p coeffs[p] cos(pπ(x-a)/L)`.
    Cosine(Vec<f64>),
    /// Pointwise values; matrix elements by quadrature.
    Function(Box<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for CouplingSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CouplingSpec::Cosine(c) => f.debug_tuple("Cosine").field(c).finish(),
            CouplingSpec::Function(_) => f.write_str("Function(..)"),
        }
    }
}

/// Symmetric matrix of `α_{kl} = ∫_Ω α w_k w_l dx`, `1 <= k, l <= K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CouplingMatrixRepr", into = "CouplingMatrixRepr")]
pub struct CouplingMatrix {
    pub k: usize,
    pub values: DMatrix<f64>,
}

/// Row-major wire format of [`CouplingMatrix`].
#[derive(Serialize, Deserialize)]
struct CouplingMatrixRepr {
    k: usize,
    values: Vec<f64>,
}

impl From<CouplingMatrix> for CouplingMatrixRepr {
    fn from(m: CouplingMatrix) -> Self {
        let values = (0..m.k)
            .flat_map(|i| (0..m.k).map(move |j| (i, j)))
            .map(|(i, j)| m.values[(i, j)])
            .collect();
        CouplingMatrixRepr { k: m.k, values }
    }
}

impl TryFrom<CouplingMatrixRepr> for CouplingMatrix {
    type Error = alloc::string::String;

    fn try_from(r: CouplingMatrixRepr) -> Result<Self, Self::Error> {
        if r.values.len() != r.k * r.k {
            return Err(alloc::format!(
                "coupling matrix needs {} entries, got {}",
                r.k * r.k,
                r.values.len()
            ));
        }
        Ok(CouplingMatrix {
            k: r.k,
            values: DMatrix::from_row_slice(r.k, r.k, &r.values),
        })
    }
}

impl CouplingMatrix {
    pub fn zero(k: usize) -> Self {
        CouplingMatrix {
            k,
            values: DMatrix::zeros(k, k),
        }
    }

    pub fn identity(k: usize) -> Self {
        CouplingMatrix {
            k,
            values: DMatrix::identity(k, k),
        }
    }

    pub fn entry(&self, k: usize, l: usize) -> f64 {
        self.values[(k - 1, l - 1)]
    }
}

/// Closed-form cosine-series element, valid on any interval for the mapped
/// cosine basis.
pub fn cosine_coupling_entry(coeffs: &[f64], k: usize, l: usize) -> f64 {
    let c = |p: usize| coeffs.get(p).copied().unwrap_or(0.0);
    if k == l {
        c(0) - 0.5 * c(2 * k)
    } else {
        0.5 * (c(k.abs_diff(l)) - c(k + l))
    }
}

/// Builds the coupling matrix: closed form for cosine series, adaptive
/// Gauss quadrature (absolute tolerance 1e-12) otherwise.
pub fn coupling_matrix(
    alpha: &CouplingSpec,
    domain: IntervalDomain,
    k_max: usize,
) -> Result<CouplingMatrix, SpectralError> {
    if k_max == 0 {
        return Err(SpectralError::BadTruncation);
    }
    let mut values = DMatrix::zeros(k_max, k_max);
    match alpha {
        CouplingSpec::Cosine(coeffs) => {
            for k in 1..=k_max {
                for l in k..=k_max {
                    let v = cosine_coupling_entry(coeffs, k, l);
                    values[(k - 1, l - 1)] = v;
                    values[(l - 1, k - 1)] = v;
                }
            }
        }
        CouplingSpec::Function(f) => {
            let tol = 1e-12;
            for k in 1..=k_max {
                for l in k..=k_max {
                    let start = ((k + l) / 2).max(8);
                    let integrand =
                        |x: f64| f(x) * domain.eigenfunction(k, x) * domain.eigenfunction(l, x);
                    let v = match quad::adaptive(integrand, domain.a, domain.b, tol, start, 1 << 14)
                    {
                        Ok((v, _)) => v,
                        Err((_, achieved)) => {
                            return Err(SpectralError::QuadratureNonConvergent {
                                requested: tol,
                                achieved,
                            })
                        }
                    };
                    values[(k - 1, l - 1)] = v;
                    values[(l - 1, k - 1)] = v;
                }
            }
        }
    }
    Ok(CouplingMatrix { k: k_max, values })
}

/// Near-diagonal threshold of the `ψ` kernel.
const PSI_DIAGONAL_TOL: f64 = 1e-8;

/// Closed-form kernel `(e^{-μ_k(T-t)} - e^{-μ_l(T-t)}) / (μ_l - μ_k) · α`,
/// switching to the limit `(T-t) e^{-μ_k(T-t)} · α` near the diagonal.
pub fn psi_kernel(mu_k: f64, mu_l: f64, alpha_kl: f64, t_final: f64, t: f64) -> f64 {
    let tau = t_final - t;
    if (mu_k - mu_l).abs() < PSI_DIAGONAL_TOL * mu_k.abs().max(1.0) {
        tau * scalar::exp(-mu_k * tau) * alpha_kl
    } else {
        (scalar::exp(-mu_k * tau) - scalar::exp(-mu_l * tau)) / (mu_l - mu_k) * alpha_kl
    }
}

/// Closed-form adjoint solution for terminal data `φ(T) = φ_0`, `ψ(T) = 0`.
#[derive(Debug, Clone)]
pub struct AdjointSolution {
    pub phi0: SpectralField,
    pub alpha: CouplingMatrix,
    pub t_final: f64,
}

impl AdjointSolution {
    /// `φ_k(t) = e^{-μ_k(T-t)} φ_k^0`.
    pub fn phi_coeff(&self, k: usize, t: f64) -> f64 {
        let mu = self.phi0.domain.eigenvalue(k);
        scalar::exp(-mu * (self.t_final - t)) * self.phi0.coeffs[k - 1]
    }

    /// `ψ_l(t) = Σ_k φ_k^0 · kernel(μ_k, μ_l)`.
    pub fn psi_coeff(&self, l: usize, t: f64) -> f64 {
        let domain = self.phi0.domain;
        let mu_l = domain.eigenvalue(l);
        let mut acc = 0.0;
        for (idx, &phi) in self.phi0.coeffs.iter().enumerate() {
            if phi == 0.0 {
                continue;
            }
            let k = idx + 1;
            let mu_k = domain.eigenvalue(k);
            acc += phi * psi_kernel(mu_k, mu_l, self.alpha.entry(k, l), self.t_final, t);
        }
        acc
    }

    pub fn phi_field(&self, t: f64) -> SpectralField {
        let coeffs = (1..=self.phi0.len())
            .map(|k| self.phi_coeff(k, t))
            .collect();
        SpectralField::new(coeffs, self.phi0.domain)
    }

    pub fn psi_field(&self, t: f64) -> SpectralField {
        let coeffs = (1..=self.phi0.len())
            .map(|l| self.psi_coeff(l, t))
            .collect();
        SpectralField::new(coeffs, self.phi0.domain)
    }
}

/// Closed-form adjoint solve; `ψ(T) = 0` holds by construction.
pub fn solve_adjoint(
    phi0: &SpectralField,
    alpha: &CouplingMatrix,
    t_final: f64,
) -> Result<AdjointSolution, SpectralError> {
    if phi0.len() != alpha.k {
        return Err(SpectralError::InconsistentTruncation(alloc::format!(
            "phi0 has {} modes, coupling matrix {}",
            phi0.len(),
            alpha.k
        )));
    }
    Ok(AdjointSolution {
        phi0: phi0.clone(),
        alpha: alpha.clone(),
        t_final,
    })
}

/// Time factor of a separated control `u(x,t) = f(x) γ(t)`.
pub enum TimeSignal {
    /// `γ(t) = Σ_j coeffs[j] e^{-rates[j] (T - t)}`; the representation the
    /// moment method produces. Coefficients are kept in double-double and
    /// the sum is accumulated in double-double: the individual terms of an
    /// ill-conditioned biorthogonal solve dwarf the value of the sum.
    ReflectedExp {
        rates: Vec<f64>,
        coeffs: Vec<Dd>,
        t_final: f64,
    },
    Callable(Box<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl TimeSignal {
    pub fn reflected_exp(rates: Vec<f64>, coeffs: Vec<f64>, t_final: f64) -> Self {
        TimeSignal::ReflectedExp {
            rates,
            coeffs: coeffs.into_iter().map(Dd::from_f64).collect(),
            t_final,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            TimeSignal::ReflectedExp {
                rates,
                coeffs,
                t_final,
            } => {
                let tau = t_final - t;
                let mut acc = Dd::ZERO;
                for (r, c) in rates.iter().zip(coeffs) {
                    acc = acc + *c * Dd::prod(-r, tau).exp();
                }
                acc.to_f64()
            }
            TimeSignal::Callable(f) => f(t),
        }
    }

    /// `∫_0^T γ(t)² dt` by composite Gauss quadrature.
    pub fn l2_norm(&self, t_final: f64, panels: usize) -> f64 {
        let sq = quad::composite(|t| self.eval(t) * self.eval(t), 0.0, t_final, panels, 8);
        scalar::sqrt(sq.max(0.0))
    }
}

impl fmt::Debug for TimeSignal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimeSignal::ReflectedExp { rates, .. } => {
                write!(f, "ReflectedExp({} terms)", rates.len())
            }
            TimeSignal::Callable(_) => f.write_str("Callable(..)"),
        }
    }
}

/// Control input for the forward solver.
#[derive(Debug)]
pub enum Control {
    None,
    /// `u(x,t) = f(x) γ(t)` with `supp f` declared inside the control set.
    Separated {
        f: SpectralField,
        gamma: TimeSignal,
    },
}

/// Coefficient paths of `(y, z)` sampled at the panel boundaries.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub y: Vec<DVector<f64>>,
    pub z: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn y_final(&self) -> &DVector<f64> {
        self.y.last().expect("trajectory is never empty")
    }

    pub fn z_final(&self) -> &DVector<f64> {
        self.z.last().expect("trajectory is never empty")
    }
}

const GAUSS_ORDER: usize = 4;

/// Forward solve: `z` exactly per mode, `y` by a per-mode exponential
/// integrator with the coupling source `Σ_l α_{kl} z_l(t)` plus the control
/// source; panel integrals by composite Gauss rule with `n_steps` panels.
pub fn solve_forward(
    y0: &SpectralField,
    z0: &SpectralField,
    alpha: &CouplingMatrix,
    control: &Control,
    t_final: f64,
    n_steps: usize,
) -> Result<Trajectory, SpectralError> {
    let k_max = y0.len();
    if z0.len() != k_max || alpha.k != k_max {
        return Err(SpectralError::InconsistentTruncation(alloc::format!(
            "y0 {} modes, z0 {} modes, coupling {}",
            y0.len(),
            z0.len(),
            alpha.k
        )));
    }
    if let Control::Separated { f, .. } = control {
        if f.len() != k_max {
            return Err(SpectralError::InconsistentTruncation(alloc::format!(
                "control profile has {} modes, state {}",
                f.len(),
                k_max
            )));
        }
    }
    let domain = y0.domain;
    let mu: Vec<f64> = (1..=k_max).map(|k| domain.eigenvalue(k)).collect();
    let z_at = |t: f64| -> DVector<f64> {
        DVector::from_iterator(
            k_max,
            z0.coeffs
                .iter()
                .zip(&mu)
                .map(|(c, m)| c * scalar::exp(-m * t)),
        )
    };

    let (nodes, weights) = quad::gauss_legendre(GAUSS_ORDER);
    let dt = t_final / n_steps as f64;
    let mut times = Vec::with_capacity(n_steps + 1);
    let mut ys = Vec::with_capacity(n_steps + 1);
    let mut zs = Vec::with_capacity(n_steps + 1);
    let mut y = DVector::from_column_slice(&y0.coeffs);
    times.push(0.0);
    ys.push(y.clone());
    zs.push(z_at(0.0));

    for step in 0..n_steps {
        let t0 = step as f64 * dt;
        let t1 = t0 + dt;
        let mut next = DVector::from_iterator(
            k_max,
            y.iter().zip(&mu).map(|(v, m)| v * scalar::exp(-m * dt)),
        );
        for (x, w) in nodes.iter().zip(&weights) {
            let s = 0.5 * (t0 + t1) + 0.5 * dt * x;
            let mut source = &alpha.values * z_at(s);
            if let Control::Separated { f, gamma } = control {
                let g = gamma.eval(s);
                for (src, fk) in source.iter_mut().zip(&f.coeffs) {
                    *src += fk * g;
                }
            }
            let wq = 0.5 * dt * w;
            for ((nx, src), m) in next.iter_mut().zip(source.iter()).zip(&mu) {
                *nx += wq * scalar::exp(-m * (t1 - s)) * src;
            }
        }
        y = next;
        times.push(t1);
        ys.push(y.clone());
        zs.push(z_at(t1));
    }

    Ok(Trajectory {
        times,
        y: ys,
        z: zs,
    })
}

/// Residual of the duality identity
/// `∫ φ_0 y(T) - ∫ φ(0) y_0 - ∫ ψ(0) z_0 = ∬ φ u`.
pub fn duality_residual(
    y0: &SpectralField,
    z0: &SpectralField,
    control: &Control,
    phi0: &SpectralField,
    alpha: &CouplingMatrix,
    t_final: f64,
    n_steps: usize,
) -> Result<f64, SpectralError> {
    if phi0.len() != y0.len() {
        return Err(SpectralError::InconsistentTruncation(alloc::format!(
            "phi0 has {} modes, state {}",
            phi0.len(),
            y0.len()
        )));
    }
    let adjoint = solve_adjoint(phi0, alpha, t_final)?;
    let trajectory = solve_forward(y0, z0, alpha, control, t_final, n_steps)?;
    let y_t = trajectory.y_final();

    let dot = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(x, y)| x * y).sum() };
    let lhs = dot(&phi0.coeffs, y_t.as_slice())
        - dot(&adjoint.phi_field(0.0).coeffs, &y0.coeffs)
        - dot(&adjoint.psi_field(0.0).coeffs, &z0.coeffs);

    let rhs = match control {
        Control::None => 0.0,
        Control::Separated { f, gamma } => {
            // supp f lies inside the control set, so the localized integral
            // equals the full-domain one: ∫_0^T γ(t) Σ_k φ_k(t) f_k dt
            quad::composite(
                |t| {
                    let g = gamma.eval(t);
                    let mut acc = 0.0;
                    for k in 1..=phi0.len() {
                        acc += adjoint.phi_coeff(k, t) * f.coeffs[k - 1];
                    }
                    acc * g
                },
                0.0,
                t_final,
                n_steps,
                GAUSS_ORDER,
            )
        }
    };
    Ok((lhs - rhs).abs())
}
