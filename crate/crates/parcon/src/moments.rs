//! Moment-method control synthesis.
//!
//! Controlling the first component of the coupled system reduces to the
//! problem of moments
//!
//! ```text
//!   ∫_0^T γ(T-t) e^{-μ_k t} dt = M_k,
//!   M_k = f_k^{-1} ( -e^{-μ_k T} y_k^0 - Σ_l ψ_kl(0) z_l^0 ),
//! ```
//!
//! solved by `γ(t) = Σ_k M_k q_k(T-t)` where `(q_k)` is biorthogonal to the
//! exponentials `e^{-μ_l t}` on `(0, T)`. At finite truncation the `q_k` come
//! from solving `G c_k = e_k` against the Gram matrix
//! `G_{jl} = (1 - e^{-(μ_j+μ_l)T}) / (μ_j + μ_l)`, whose condition number
//! grows exponentially in `K`; construction modes trade precision against
//! feasible truncation.

use crate::dd::Dd;
use crate::linalg;
use crate::quad;
use crate::scalar;
use crate::spectral::{
    psi_kernel, Control, CouplingMatrix, IntervalDomain, SpectralField, TimeSignal,
};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Hard gate on the recorded biorthogonality residual.
pub const RESIDUAL_GATE: f64 = 1e-6;
/// Truncation cap of plain double-precision construction.
pub const DOUBLE_MODE_CAP: usize = 8;
/// Truncation cap of the extended-precision and regularized constructions.
pub const EXTENDED_MODE_CAP: usize = 20;

#[derive(Debug, Error, PartialEq)]
pub enum MomentsError {
    #[error("{0}")]
    BadInput(String),
    #[error(
        "biorthogonality residual {residual:e} above {gate:e}; reduce K or use extended precision"
    )]
    ResidualTooLarge { residual: f64, gate: f64 },
    #[error("profile is inadmissible: f_k k^3 <= 0 for modes {offending:?}")]
    ProfileInadmissible { offending: Vec<usize> },
    #[error("profile coefficient f_{k} is zero; moment targets undefined")]
    ZeroProfileCoefficient { k: usize },
    #[error(transparent)]
    Linalg(#[from] linalg::LinalgError),
}

/// `G_{jl} = ∫_0^T e^{-(μ_j+μ_l)t} dt` in closed form.
pub fn gram_matrix(domain: IntervalDomain, k_max: usize, t_final: f64) -> DMatrix<f64> {
    DMatrix::from_fn(k_max, k_max, |j, l| {
        let s = domain.eigenvalue(j + 1) + domain.eigenvalue(l + 1);
        (1.0 - scalar::exp(-s * t_final)) / s
    })
}

fn gram_matrix_dd(domain: IntervalDomain, k_max: usize, t_final: f64) -> Vec<Vec<Dd>> {
    (0..k_max)
        .map(|j| {
            (0..k_max)
                .map(|l| {
                    let s = domain.eigenvalue(j + 1) + domain.eigenvalue(l + 1);
                    let st = Dd::prod(s, t_final);
                    (Dd::ONE - (-st).exp()) / Dd::from_f64(s)
                })
                .collect()
        })
        .collect()
}

/// Double-double Cholesky factorization; `g` must be symmetric positive
/// definite.
#[allow(clippy::needless_range_loop)]
fn cholesky_dd(g: &[Vec<Dd>]) -> Result<Vec<Vec<Dd>>, MomentsError> {
    let n = g.len();
    let mut l = vec![vec![Dd::ZERO; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = g[i][j];
            for k in 0..j {
                sum = sum - l[i][k] * l[j][k];
            }
            if i == j {
                if sum.hi <= 0.0 {
                    return Err(MomentsError::BadInput(format!(
                        "Gram matrix lost positive definiteness at pivot {i}"
                    )));
                }
                l[i][j] = sum.sqrt();
            } else {
                l[i][j] = sum / l[j][j];
            }
        }
    }
    Ok(l)
}

fn solve_cholesky_dd(l: &[Vec<Dd>], e_idx: usize) -> Vec<Dd> {
    let n = l.len();
    let mut y = vec![Dd::ZERO; n];
    for i in 0..n {
        let mut sum = if i == e_idx { Dd::ONE } else { Dd::ZERO };
        for k in 0..i {
            sum = sum - l[i][k] * y[k];
        }
        y[i] = sum / l[i][i];
    }
    let mut x = vec![Dd::ZERO; n];
    for i in (0..n).rev() {
        let mut sum = y[i];
        for k in i + 1..n {
            sum = sum - l[k][i] * x[k];
        }
        x[i] = sum / l[i][i];
    }
    x
}

/// Construction strategy for the biorthogonal family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiorthMode {
    /// Plain `f64` Cholesky; feasible up to `K = 8`.
    Double,
    /// Double-double Gram matrix, factorization and solve; up to `K = 20`.
    ExtendedPrecision,
    /// Tikhonov-regularized solve with `λ = 1e-14 · trace G`.
    Regularized,
}

/// Family `q_k(t) = Σ_j coeffs[k][j] e^{-μ_j t}` with
/// `⟨q_k, e^{-μ_l t}⟩ = δ_{kl}` up to the recorded residual.
#[derive(Debug, Clone)]
pub struct BiorthFamily {
    pub k: usize,
    pub t_final: f64,
    pub domain: IntervalDomain,
    /// Row `k` holds the exponential-basis coefficients of `q_k`
    /// (rounded view of the double-double representation).
    pub coeffs: DMatrix<f64>,
    /// Working representation of the coefficients. Rounding them to `f64`
    /// would reinstate the very cancellation the extended mode removes.
    pub coeffs_dd: Vec<Vec<Dd>>,
    pub gram: DMatrix<f64>,
    /// Max biorthogonality residual, measured in double-double arithmetic.
    pub residual: f64,
    pub condition_estimate: f64,
    /// `‖q_k‖_{L²(0,T)}`.
    pub q_norms: Vec<f64>,
    pub mode: BiorthMode,
}

/// Solves `G c_k = e_k` for every `k <= K` in the requested mode and gates
/// on the measured biorthogonality residual.
pub fn biorthogonal_family(
    domain: IntervalDomain,
    k_max: usize,
    t_final: f64,
    mode: BiorthMode,
) -> Result<BiorthFamily, MomentsError> {
    if k_max == 0 || t_final <= 0.0 {
        return Err(MomentsError::BadInput(format!(
            "need K >= 1 and T > 0, got K={k_max}, T={t_final}"
        )));
    }
    let cap = match mode {
        BiorthMode::Double => DOUBLE_MODE_CAP,
        BiorthMode::ExtendedPrecision | BiorthMode::Regularized => EXTENDED_MODE_CAP,
    };
    if k_max > cap {
        return Err(MomentsError::BadInput(format!(
            "K={k_max} exceeds the feasibility cap {cap} for {mode:?}"
        )));
    }

    let gram = gram_matrix(domain, k_max, t_final);
    let gram_dd = gram_matrix_dd(domain, k_max, t_final);
    let mut coeffs_dd: Vec<Vec<Dd>> = vec![vec![Dd::ZERO; k_max]; k_max];

    match mode {
        BiorthMode::Double | BiorthMode::Regularized => {
            let mut system = gram.clone();
            if mode == BiorthMode::Regularized {
                let lambda = 1e-14 * gram.trace();
                for i in 0..k_max {
                    system[(i, i)] += lambda;
                }
            }
            let chol = nalgebra::linalg::Cholesky::new(system).ok_or_else(|| {
                MomentsError::BadInput(
                    "Gram matrix is numerically indefinite at this truncation".into(),
                )
            })?;
            for k in 0..k_max {
                let mut e = DVector::zeros(k_max);
                e[k] = 1.0;
                let c = chol.solve(&e);
                for j in 0..k_max {
                    coeffs_dd[k][j] = Dd::from_f64(c[j]);
                }
            }
        }
        BiorthMode::ExtendedPrecision => {
            let l = cholesky_dd(&gram_dd)?;
            for (k, row) in coeffs_dd.iter_mut().enumerate() {
                let c = solve_cholesky_dd(&l, k);
                row.copy_from_slice(&c);
            }
        }
    }
    let coeffs = DMatrix::from_fn(k_max, k_max, |k, j| coeffs_dd[k][j].to_f64());

    // residual ⟨q_k, e^{-μ_l t}⟩ - δ_kl = (c_k · G_:l) - δ_kl, accumulated in
    // double-double because the coefficients can dwarf the result
    let mut residual: f64 = 0.0;
    #[allow(clippy::needless_range_loop)]
    for (k, row) in coeffs_dd.iter().enumerate() {
        for l in 0..k_max {
            let mut acc = Dd::ZERO;
            for (j, c) in row.iter().enumerate() {
                acc = acc + *c * gram_dd[j][l];
            }
            if k == l {
                acc = acc - Dd::ONE;
            }
            residual = residual.max(acc.to_f64().abs());
        }
    }
    if residual > RESIDUAL_GATE {
        return Err(MomentsError::ResidualTooLarge {
            residual,
            gate: RESIDUAL_GATE,
        });
    }

    // ‖q_k‖² = c_k^T G c_k = (G^{-1})_{kk} up to the solve residual
    let q_norms: Vec<f64> = coeffs_dd
        .iter()
        .map(|row| {
            let mut acc = Dd::ZERO;
            for (j, cj) in row.iter().enumerate() {
                for (l, cl) in row.iter().enumerate() {
                    acc = acc + *cj * gram_dd[j][l] * *cl;
                }
            }
            scalar::sqrt(acc.to_f64().max(0.0))
        })
        .collect();

    let condition_estimate = linalg::cond_2(&gram).unwrap_or(f64::INFINITY);
    Ok(BiorthFamily {
        k: k_max,
        t_final,
        domain,
        coeffs,
        coeffs_dd,
        gram,
        residual,
        condition_estimate,
        q_norms,
        mode,
    })
}

/// Admissible spatial control profile: sine coefficients `f_k` with
/// `β = min_{k<=K} f_k k³ > 0` and support inside the control interval.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpatialProfile {
    pub f: SpectralField,
    /// The control interval `ω = (support.0, support.1)`.
    pub support: (f64, f64),
    /// `min_{k<=K} f_k k³`, over the truncation range only.
    pub beta: f64,
    /// L² mass of the truncated series outside `ω`.
    pub leakage: f64,
}

const BUMP_RETRIES: usize = 6;

fn bump(x: f64, center: f64, width: f64) -> f64 {
    let u = (x - center) / width;
    if u.abs() >= 1.0 {
        0.0
    } else {
        scalar::exp(-1.0 / (1.0 - u * u))
    }
}

fn bump_coefficient(
    domain: IntervalDomain,
    center: f64,
    width: f64,
    k: usize,
) -> Result<f64, MomentsError> {
    quad::adaptive(
        |x| bump(x, center, width) * domain.eigenfunction(k, x),
        center - width,
        center + width,
        1e-13,
        (k / 2).max(8),
        1 << 14,
    )
    .map(|(v, _)| v)
    .map_err(|(_, achieved)| {
        MomentsError::BadInput(format!("profile quadrature stalled at error {achieved:e}"))
    })
}

/// Builds an admissible profile supported in `ω`. Single smooth bumps are
/// tried first (shifted and rescaled); if every attempt leaves some
/// `f_k k³ <= 0`, a superposition of `K` bumps is solved so that
/// `f_k = 1/k³` exactly on the truncation range.
pub fn spatial_profile(
    domain: IntervalDomain,
    omega: (f64, f64),
    k_max: usize,
) -> Result<SpatialProfile, MomentsError> {
    let (c, d) = omega;
    if !(domain.a < c && c < d && d < domain.b) {
        return Err(MomentsError::BadInput(format!(
            "omega ({c}, {d}) must be nonempty and strictly inside ({}, {})",
            domain.a, domain.b
        )));
    }
    if k_max == 0 {
        return Err(MomentsError::BadInput("need K >= 1".into()));
    }
    let mid = 0.5 * (c + d);
    let half = 0.5 * (d - c);

    let admissibility = |coeffs: &[f64]| -> (f64, Vec<usize>) {
        let mut beta = f64::INFINITY;
        let mut offending = Vec::new();
        for (i, f_k) in coeffs.iter().enumerate() {
            let k = i + 1;
            let v = f_k * (k * k * k) as f64;
            if v <= 0.0 {
                offending.push(k);
            }
            beta = beta.min(v);
        }
        (beta, offending)
    };

    // single-bump attempts: center shifts and width rescales
    let mut last_offending = Vec::new();
    for attempt in 0..BUMP_RETRIES {
        let shift = (attempt as f64 - (BUMP_RETRIES as f64 - 1.0) / 2.0) / BUMP_RETRIES as f64;
        let center = mid + shift * half;
        let width = half * (0.9 - 0.1 * attempt as f64).max(0.3);
        let width = width.min((center - c).min(d - center)) * 0.999;
        if width <= 0.0 {
            continue;
        }
        let mut coeffs = Vec::with_capacity(k_max);
        for k in 1..=k_max {
            coeffs.push(bump_coefficient(domain, center, width, k)?);
        }
        let (beta, offending) = admissibility(&coeffs);
        if beta > 0.0 {
            let field = SpectralField::new(coeffs, domain);
            let leakage = series_leakage(&field, omega);
            return Ok(SpatialProfile {
                f: field,
                support: omega,
                beta,
                leakage,
            });
        }
        last_offending = offending;
    }

    // superposition of K bumps hitting f_k = 1/k³ exactly
    let spacing = (d - c) / (k_max + 1) as f64;
    let centers: Vec<f64> = (1..=k_max).map(|j| c + j as f64 * spacing).collect();
    let width = spacing * 0.999;
    let mut a = DMatrix::zeros(k_max, k_max);
    for (j, center) in centers.iter().enumerate() {
        for k in 1..=k_max {
            a[(k - 1, j)] = bump_coefficient(domain, *center, width, k)?;
        }
    }
    let targets = DVector::from_iterator(k_max, (1..=k_max).map(|k| 1.0 / (k * k * k) as f64));
    let weights =
        a.clone()
            .lu()
            .solve(&targets)
            .ok_or_else(|| MomentsError::ProfileInadmissible {
                offending: last_offending.clone(),
            })?;
    let coeffs: Vec<f64> = {
        let achieved = &a * &weights;
        achieved.iter().copied().collect()
    };
    let (beta, offending) = admissibility(&coeffs);
    if beta <= 0.0 {
        return Err(MomentsError::ProfileInadmissible { offending });
    }
    let field = SpectralField::new(coeffs, domain);
    let leakage = series_leakage(&field, omega);
    Ok(SpatialProfile {
        f: field,
        support: omega,
        beta,
        leakage,
    })
}

/// L² mass of the truncated sine series outside the declared support — the
/// price of dropping modes beyond the truncation.
fn series_leakage(f: &SpectralField, omega: (f64, f64)) -> f64 {
    let d = f.domain;
    let sq = |x: f64| {
        let v = f.eval(x);
        v * v
    };
    let left = quad::composite(sq, d.a, omega.0, 32.max(4 * f.len()), 8);
    let right = quad::composite(sq, omega.1, d.b, 32.max(4 * f.len()), 8);
    scalar::sqrt((left + right).max(0.0))
}

/// The finite problem of moments.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MomentProblem {
    pub targets: Vec<f64>,
    pub t_final: f64,
    /// Magnitude of the last retained coupling term of the `l`-sum, as a
    /// proxy for the first dropped one.
    pub tail_estimate: f64,
}

/// Moment targets
/// `M_k = f_k^{-1} ( -e^{-μ_k T} y_k^0 - Σ_{l<=K} ψ_kl(0) z_l^0 )`.
pub fn moment_targets(
    y0: &SpectralField,
    z0: &SpectralField,
    alpha: &CouplingMatrix,
    profile: &SpatialProfile,
    t_final: f64,
    k_max: usize,
) -> Result<MomentProblem, MomentsError> {
    if y0.len() < k_max || z0.len() < k_max || alpha.k < k_max || profile.f.len() < k_max {
        return Err(MomentsError::BadInput(format!(
            "truncations too small for K={k_max}: y0 {}, z0 {}, alpha {}, profile {}",
            y0.len(),
            z0.len(),
            alpha.k,
            profile.f.len()
        )));
    }
    let domain = y0.domain;
    let mut targets = Vec::with_capacity(k_max);
    let mut tail_estimate: f64 = 0.0;
    for k in 1..=k_max {
        let f_k = profile.f.coeffs[k - 1];
        if f_k == 0.0 {
            return Err(MomentsError::ZeroProfileCoefficient { k });
        }
        let mu_k = domain.eigenvalue(k);
        let mut coupled = 0.0;
        for l in 1..=k_max {
            let term = psi_kernel(mu_k, domain.eigenvalue(l), alpha.entry(k, l), t_final, 0.0)
                * z0.coeffs[l - 1];
            coupled += term;
            if l == k_max {
                tail_estimate = tail_estimate.max(term.abs());
            }
        }
        let m_k = (-scalar::exp(-mu_k * t_final) * y0.coeffs[k - 1] - coupled) / f_k;
        if !m_k.is_finite() {
            return Err(MomentsError::BadInput(format!(
                "moment target M_{k} is not finite"
            )));
        }
        targets.push(m_k);
    }
    Ok(MomentProblem {
        targets,
        t_final,
        tail_estimate,
    })
}

/// Separated control `u(x,t) = f(x) γ(t)` with
/// `γ(t) = Σ_k M_k q_k(T-t)` stored as exponential-series coefficients.
#[derive(Debug, Clone)]
pub struct SynthesizedControl {
    pub f: SpectralField,
    /// Decay rates `μ_j` of the series in `T - t`.
    pub gamma_rates: Vec<f64>,
    /// Coefficients `g_j = Σ_k M_k c_kj` (rounded view).
    pub gamma_coeffs: Vec<f64>,
    /// Working double-double representation of the coefficients.
    pub gamma_coeffs_dd: Vec<Dd>,
    pub t_final: f64,
    /// `‖γ‖_{L²(0,T)}` from the Gram closed form.
    pub gamma_l2: f64,
    /// Set when `‖γ‖` exceeds the configured cap — a practical
    /// non-controllability signal at this truncation.
    pub norm_flag: bool,
}

impl SynthesizedControl {
    pub fn gamma_signal(&self) -> TimeSignal {
        TimeSignal::ReflectedExp {
            rates: self.gamma_rates.clone(),
            coeffs: self.gamma_coeffs_dd.clone(),
            t_final: self.t_final,
        }
    }

    pub fn control(&self) -> Control {
        Control::Separated {
            f: self.f.clone(),
            gamma: self.gamma_signal(),
        }
    }

    pub fn gamma_eval(&self, t: f64) -> f64 {
        self.gamma_signal().eval(t)
    }
}

/// Assembles the control from moment targets, a biorthogonal family and an
/// admissible profile.
pub fn synthesize_control(
    problem: &MomentProblem,
    family: &BiorthFamily,
    profile: &SpatialProfile,
    gamma_cap: f64,
) -> Result<SynthesizedControl, MomentsError> {
    let k = family.k;
    if problem.targets.len() != k {
        return Err(MomentsError::BadInput(format!(
            "problem has {} targets, family truncation is {}",
            problem.targets.len(),
            k
        )));
    }
    if (problem.t_final - family.t_final).abs() > 1e-14 * family.t_final.max(1.0) {
        return Err(MomentsError::BadInput(format!(
            "problem horizon {} differs from family horizon {}",
            problem.t_final, family.t_final
        )));
    }
    // γ(t) = Σ_k M_k q_k(T-t) = Σ_j (Σ_k M_k c_kj) e^{-μ_j (T-t)}
    let mut gamma_coeffs_dd = vec![Dd::ZERO; k];
    for (j, g) in gamma_coeffs_dd.iter_mut().enumerate() {
        let mut acc = Dd::ZERO;
        for (kk, m) in problem.targets.iter().enumerate() {
            acc = acc + Dd::from_f64(*m) * family.coeffs_dd[kk][j];
        }
        *g = acc;
    }
    let gamma_coeffs: Vec<f64> = gamma_coeffs_dd.iter().map(|g| g.to_f64()).collect();
    let gamma_rates: Vec<f64> = (1..=k).map(|j| family.domain.eigenvalue(j)).collect();

    // ‖γ‖² = Σ_{j,l} g_j g_l G_{jl}, double-double against cancellation
    let gram_dd = gram_matrix_dd(family.domain, k, family.t_final);
    let mut norm_sq = Dd::ZERO;
    for (j, gj) in gamma_coeffs_dd.iter().enumerate() {
        for (l, gl) in gamma_coeffs_dd.iter().enumerate() {
            norm_sq = norm_sq + *gj * gram_dd[j][l] * *gl;
        }
    }
    let gamma_l2 = scalar::sqrt(norm_sq.to_f64().max(0.0));

    Ok(SynthesizedControl {
        f: profile.f.clone(),
        gamma_rates,
        gamma_coeffs,
        gamma_coeffs_dd,
        t_final: problem.t_final,
        gamma_l2,
        norm_flag: gamma_l2 > gamma_cap,
    })
}

/// Exponential-decay fit of the coupling matrix entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    /// Prefactor of the fitted bound `C1 e^{-C2 |k-l|}`.
    pub c1: f64,
    /// Fitted decay rate.
    pub c2: f64,
    /// RMS residual of the log-linear fit.
    pub fit_residual: f64,
    /// `C2` must exceed the interval length for the synthesis to converge.
    pub satisfied: bool,
    /// All off-diagonal entries vanish: nothing to fit.
    pub trivially_satisfied: bool,
}

/// Least-squares fit of `log |α_{kl}|` against `|k-l|` over the nonzero
/// off-diagonal entries; satisfied iff the fitted rate exceeds the domain
/// length.
pub fn verify_decay_condition(
    alpha: &CouplingMatrix,
    domain: IntervalDomain,
    k_max: usize,
) -> Result<DecayFit, MomentsError> {
    if k_max < 4 || alpha.k < k_max {
        return Err(MomentsError::BadInput(format!(
            "need 4 <= K <= alpha truncation, got K={k_max}, alpha {}",
            alpha.k
        )));
    }
    let mut lags = Vec::new();
    let mut logs = Vec::new();
    for k in 1..=k_max {
        for l in 1..=k_max {
            if k == l {
                continue;
            }
            let v = alpha.entry(k, l).abs();
            if v > 1e-300 {
                lags.push(k.abs_diff(l) as f64);
                logs.push(scalar::ln(v));
            }
        }
    }
    if lags.is_empty() {
        return Ok(DecayFit {
            c1: 0.0,
            c2: f64::INFINITY,
            fit_residual: 0.0,
            satisfied: true,
            trivially_satisfied: true,
        });
    }
    let (slope, intercept) = linalg::fit_line(&lags, &logs);
    let mut rss = 0.0;
    for (x, y) in lags.iter().zip(&logs) {
        let e = y - (slope * x + intercept);
        rss += e * e;
    }
    let fit_residual = scalar::sqrt(rss / lags.len() as f64);
    let c2 = -slope;
    Ok(DecayFit {
        c1: scalar::exp(intercept),
        c2,
        fit_residual,
        satisfied: c2 > domain.length(),
        trivially_satisfied: false,
    })
}
