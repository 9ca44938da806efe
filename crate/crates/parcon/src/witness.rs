//! Explicit non-controllability certificates.
//!
//! For the coupling `α(x) = Σ_j j^{-2} cos(G j x)` on `(0, π)` and adjoint
//! data concentrated on the modes `GM+1, ..., GM+m`, one can choose the
//! coefficients so that the boundary observation
//!
//! ```text
//!   A_M = ∫_0^T | Σ_k k e^{-k²(T-t)} φ_k |² dt
//! ```
//!
//! decays like `M^{-(2m-5)}` while the duality pairing `|⟨z_0, ψ_M(0)⟩|`
//! with `z_0 = w_{k_1}` stays of order `M^{-4}`. Any admissible control
//! would need norm at least `pairing / sqrt(A_M)`, which diverges along the
//! sweep — the numerical incarnation of the contradiction with
//! controllability.
//!
//! The coefficient vector is the null direction of the constraint system
//! `Σ_j (GM+j)(2GM j + j²)^l φ_j = 0`, `l = 0..m-2`, which flattens the
//! observation kernel at the final time to order `m-1`. Entries span many
//! orders of magnitude, so rows are scaled to unit max before the SVD and
//! the observation integral is evaluated in double-double arithmetic (the
//! closed form cancels ten-plus digits at large `M`).

use crate::dd::Dd;
use crate::linalg::{self, LinalgError};
use crate::quad;
use crate::scalar;
use crate::spectral::{
    cosine_coupling_entry, coupling_matrix, solve_adjoint, CouplingSpec, IntervalDomain,
    SpectralField,
};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum WitnessError {
    #[error("{0}")]
    BadInput(String),
    #[error("closed form and quadrature disagree by {rel:e} relative (gate 1e-8)")]
    QuadratureMismatch { rel: f64 },
    #[error("adjoint recomputation disagrees by {rel:e} relative; truncation insufficient")]
    TruncationInsufficient { rel: f64 },
    #[error("need at least 4 sweep points for the slope fits, got {0}")]
    FitDegeneracy(usize),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Adjoint terminal data concentrated on the mode window `GM+1..GM+m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessData {
    pub m: usize,
    pub g: usize,
    pub big_m: usize,
    /// Coefficients on `w_{GM+1}, ..., w_{GM+m}`; sup-norm 1, sign fixed so
    /// the largest entry is `+1`.
    pub phi_coeffs: Vec<f64>,
    /// 1-based index (within `1..=m`) of the unit entry.
    pub k1: usize,
    pub t_final: f64,
    /// Largest constraint residual relative to the row magnitude.
    pub constraint_residual: f64,
}

impl WitnessData {
    /// Lowest concentrated mode index `GM+1`.
    pub fn base_mode(&self) -> usize {
        self.g * self.big_m + 1
    }

    /// The data as a spectral field truncated at `GM+m` modes.
    pub fn field(&self) -> SpectralField {
        let k_max = self.g * self.big_m + self.m;
        let mut coeffs = vec![0.0; k_max];
        for (i, phi) in self.phi_coeffs.iter().enumerate() {
            coeffs[self.g * self.big_m + i] = *phi;
        }
        SpectralField::new(coeffs, IntervalDomain::zero_pi())
    }
}

/// Sup-norm normalization with the sign convention `φ_{k1} = +1`;
/// returns the 1-based index of the unit entry (lowest index on ties).
pub fn normalize_sup(phi: &mut [f64]) -> usize {
    let mut best = 0usize;
    for (i, v) in phi.iter().enumerate() {
        if v.abs() > phi[best].abs() {
            best = i;
        }
    }
    let pivot = phi[best];
    for v in phi.iter_mut() {
        *v /= pivot;
    }
    best + 1
}

/// Solves the homogeneous constraint system and normalizes the result.
pub fn witness_coefficients(
    m: usize,
    g: usize,
    big_m: usize,
    t_final: f64,
) -> Result<WitnessData, WitnessError> {
    if m < 2 {
        return Err(WitnessError::BadInput(format!("need m >= 2, got {m}")));
    }
    if g < 2 * m + 1 {
        return Err(WitnessError::BadInput(format!(
            "need G >= 2m+1 = {}, got {g}",
            2 * m + 1
        )));
    }
    if big_m < 2 {
        return Err(WitnessError::BadInput(format!("need M >= 2, got {big_m}")));
    }
    let gm = (g * big_m) as f64;
    let node = |j: usize| 2.0 * gm * j as f64 + (j * j) as f64;
    let raw_row = |l: usize| -> Vec<f64> {
        (1..=m)
            .map(|j| (gm + j as f64) * scalar::powi(node(j), l as i32))
            .collect()
    };

    // rows scaled to unit max to keep the null space resolvable
    let mut scaled = DMatrix::zeros(m - 1, m);
    for l in 0..m - 1 {
        let row = raw_row(l);
        let max = row.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        for (j, v) in row.iter().enumerate() {
            scaled[(l, j)] = v / max;
        }
    }
    let direction = linalg::null_direction(&scaled, 1e-10)?;
    let mut phi_coeffs: Vec<f64> = direction.iter().copied().collect();
    let k1 = normalize_sup(&mut phi_coeffs);

    let mut constraint_residual: f64 = 0.0;
    for l in 0..m - 1 {
        let row = raw_row(l);
        let max = row.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        let resid: f64 = row.iter().zip(&phi_coeffs).map(|(a, p)| a * p).sum();
        constraint_residual = constraint_residual.max(resid.abs() / max);
    }

    Ok(WitnessData {
        m,
        g,
        big_m,
        phi_coeffs,
        k1,
        t_final,
        constraint_residual,
    })
}

/// Boundary observation energy, evaluated two independent ways.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryObservation {
    /// Closed-form value from the pairwise integrals.
    pub a_m: f64,
    /// Gauss-quadrature recomputation on the time grid.
    pub quadrature: f64,
    /// `|closed - quadrature| / closed`.
    pub rel_discrepancy: f64,
}

/// `A_M = ∫_0^T |Σ k e^{-k²(T-t)} φ_k|² dt`, closed form
/// `Σ_{k,l} k l φ_k φ_l (1 - e^{-(k²+l²)T}) / (k²+l²)` against a quadrature
/// of the square; both in double-double (the closed form cancels to
/// `~M^{-(2m-5)}` from order-one terms).
pub fn boundary_observation(
    w: &WitnessData,
    n_quad: usize,
) -> Result<BoundaryObservation, WitnessError> {
    if n_quad < 64 {
        return Err(WitnessError::BadInput(format!(
            "need at least 64 quadrature panels, got {n_quad}"
        )));
    }
    let modes: Vec<usize> = (1..=w.m).map(|j| w.g * w.big_m + j).collect();
    let t = w.t_final;

    // closed form; the k·φ products must be error-free or their rounding
    // survives the twenty-digit cancellation
    let mut closed = Dd::ZERO;
    for (i, &k) in modes.iter().enumerate() {
        for (j, &l) in modes.iter().enumerate() {
            let lam = (k * k + l * l) as f64;
            let kernel = (Dd::ONE - Dd::prod(-lam, t).exp()) / Dd::from_f64(lam);
            closed = closed
                + Dd::prod(k as f64, w.phi_coeffs[i])
                    * Dd::prod(l as f64, w.phi_coeffs[j])
                    * kernel;
        }
    }

    // quadrature of |f(τ)|² over the boundary layer τ in [0, τ_max]
    let lam_min = 2.0 * scalar::powi(modes[0] as f64, 2);
    let tau_max = t.min(60.0 / lam_min);
    let (nodes, weights) = quad::gauss_legendre(8);
    let h = tau_max / n_quad as f64;
    let mut quadr = Dd::ZERO;
    for panel in 0..n_quad {
        let mid = (panel as f64 + 0.5) * h;
        for (x, wt) in nodes.iter().zip(&weights) {
            let tau = mid + 0.5 * h * x;
            let mut f = Dd::ZERO;
            for (i, &k) in modes.iter().enumerate() {
                let lam = (k * k) as f64;
                f = f + Dd::prod(k as f64, w.phi_coeffs[i]) * Dd::prod(-lam, tau).exp();
            }
            quadr = quadr + Dd::from_f64(0.5 * h * wt) * f * f;
        }
    }

    let a_m = closed.to_f64();
    let q = quadr.to_f64();
    let rel = (a_m - q).abs() / a_m.abs().max(f64::MIN_POSITIVE);
    if rel > 1e-8 {
        return Err(WitnessError::QuadratureMismatch { rel });
    }
    Ok(BoundaryObservation {
        a_m,
        quadrature: q,
        rel_discrepancy: rel,
    })
}

/// The coupling series `α(x) = Σ_j j^{-2} cos(G j x)` as cosine coefficients
/// up to index `p_max`.
pub fn witness_coupling_series(g: usize, p_max: usize) -> Vec<f64> {
    let mut coeffs = vec![0.0; p_max + 1];
    let mut j = 1;
    while g * j <= p_max {
        coeffs[g * j] = 1.0 / (j * j) as f64;
        j += 1;
    }
    coeffs
}

/// Duality pairing `|⟨z_0, ψ_M(0)⟩|` for `z_0 = w_{k_1}`, two ways.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairingBound {
    /// Closed form
    /// `|(e^{-k1²T} - e^{-(GM+k1)²T}) / ((GM+k1)² - k1²) · α_{k1,GM+k1}|`.
    pub value: f64,
    /// Recomputation through the adjoint solver at truncation `GM+m`.
    pub adjoint_value: f64,
    pub rel_agreement: f64,
}

/// Evaluates the closed form and cross-checks it against the adjoint solver
/// with the coupling matrix of the witness series.
pub fn pairing_lower_bound(w: &WitnessData) -> Result<PairingBound, WitnessError> {
    let k1 = w.k1;
    let high = w.g * w.big_m + k1;
    let t = w.t_final;
    let series = witness_coupling_series(w.g, w.g * w.big_m + w.m + high);
    let alpha_entry = cosine_coupling_entry(&series, k1, high);
    let denom = (high * high - k1 * k1) as f64;
    let value = ((scalar::exp(-((k1 * k1) as f64) * t) - scalar::exp(-((high * high) as f64) * t))
        / denom
        * alpha_entry)
        .abs();

    // independent route: coupling matrix + adjoint solve at truncation GM+m
    let k_max = w.g * w.big_m + w.m;
    let alpha = coupling_matrix(
        &CouplingSpec::Cosine(witness_coupling_series(w.g, 2 * k_max)),
        IntervalDomain::zero_pi(),
        k_max,
    )
    .map_err(|e| WitnessError::BadInput(format!("coupling matrix failed: {e}")))?;
    let adjoint = solve_adjoint(&w.field(), &alpha, t)
        .map_err(|e| WitnessError::BadInput(format!("adjoint solve failed: {e}")))?;
    let adjoint_value = adjoint.psi_coeff(k1, 0.0).abs();

    let rel = (value - adjoint_value).abs() / value.abs().max(f64::MIN_POSITIVE);
    if rel > 1e-10 {
        return Err(WitnessError::TruncationInsufficient { rel });
    }
    Ok(PairingBound {
        value,
        adjoint_value,
        rel_agreement: rel,
    })
}

/// One row of the certificate sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub big_m: usize,
    pub k1: usize,
    pub a_m: f64,
    pub pairing: f64,
    /// `pairing / sqrt(A_M)`: lower bound on the norm of any control
    /// matching the duality identity at this `M`.
    pub required_control_norm: f64,
}

/// Certificate over a sweep of `M` values with fitted slopes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessReport {
    pub m: usize,
    pub g: usize,
    pub t_final: f64,
    pub points: Vec<SweepPoint>,
    /// Fitted slope of `log A_M` against `log M`.
    pub slope_a: f64,
    /// Fitted slope of `log pairing` against `log M`.
    pub slope_pairing: f64,
    /// Growth factor of the required control norm across the sweep.
    pub divergence_factor: f64,
    /// Most frequent `k1` across the sweep.
    pub k1_modal: usize,
    pub valid: bool,
}

/// Runs the sweep and declares the certificate VALID when the observation
/// decays at least like `M^{-(2m-5)+1}`, the pairing decays like `M^{-4±0.3}`
/// and the required control norm grows by more than 10x.
pub fn certificate_sweep(
    m: usize,
    g: usize,
    t_final: f64,
    m_list: &[usize],
    n_quad: usize,
) -> Result<WitnessReport, WitnessError> {
    if m < 3 {
        return Err(WitnessError::BadInput(format!(
            "sweep needs m >= 3, got {m}"
        )));
    }
    if m_list.len() < 4 {
        return Err(WitnessError::FitDegeneracy(m_list.len()));
    }
    let mut points = Vec::with_capacity(m_list.len());
    for &big_m in m_list {
        let w = witness_coefficients(m, g, big_m, t_final)?;
        let obs = boundary_observation(&w, n_quad)?;
        let pairing = pairing_lower_bound(&w)?;
        points.push(SweepPoint {
            big_m,
            k1: w.k1,
            a_m: obs.a_m,
            pairing: pairing.value,
            required_control_norm: pairing.value / scalar::sqrt(obs.a_m.max(f64::MIN_POSITIVE)),
        });
    }

    let ms: Vec<f64> = points.iter().map(|p| p.big_m as f64).collect();
    let a_vals: Vec<f64> = points.iter().map(|p| p.a_m).collect();
    let pair_vals: Vec<f64> = points.iter().map(|p| p.pairing).collect();
    let (slope_a, _) = linalg::fit_loglog(&ms, &a_vals);
    let (slope_pairing, _) = linalg::fit_loglog(&ms, &pair_vals);
    let divergence_factor =
        points.last().unwrap().required_control_norm / points[0].required_control_norm;

    // modal k1
    let mut k1_modal = points[0].k1;
    let mut best_count = 0;
    for p in &points {
        let count = points.iter().filter(|q| q.k1 == p.k1).count();
        if count > best_count || (count == best_count && p.k1 < k1_modal) {
            best_count = count;
            k1_modal = p.k1;
        }
    }

    let bound_exponent = (2 * m) as f64 - 5.0;
    let valid = slope_a <= -(bound_exponent - 1.0)
        && (slope_pairing + 4.0).abs() <= 0.3
        && divergence_factor > 10.0;

    Ok(WitnessReport {
        m,
        g,
        t_final,
        points,
        slope_a,
        slope_pairing,
        divergence_factor,
        k1_modal,
        valid,
    })
}
