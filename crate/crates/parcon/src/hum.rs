//! Fully discrete penalized HUM.
//!
//! The coupled system is discretized with P1 Lagrange finite elements on a
//! uniform mesh (Dirichlet rows eliminated) and backward Euler in time. For
//! a penalty `ε > 0` the control minimizing
//!
//! ```text
//!   F_ε(u) = ½ ‖u‖²_{L²(ω×(0,T))} + 1/(2ε) ‖y(T; y_0, u)‖²
//! ```
//!
//! is recovered from the minimizer of the dual functional through the
//! Gramian `Λ φ_0 = w(T)`: a scalar backward heat solve for `φ` followed by
//! a forward solve for `w` driven by `1_ω φ`. The same time-stepping
//! matrices are used transposed, which makes `Λ` exactly symmetric positive
//! semidefinite in the mass inner product; conjugate gradients then solve
//! `(Λ + ε) φ_{0,ε} = -y(T; y_0, 0)` and the control is `u_ε = 1_ω φ_ε`.
//!
//! At the optimum, `min F_ε = -min J_ε` (Fenchel duality); the recorded gap
//! `|F_ε + J_ε| / (1 + |J_ε|)` is an end-to-end consistency check of the
//! adjoint pairing and the linear solve.

use crate::linalg;
use crate::scalar;
use crate::spectral::IntervalDomain;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum HumError {
    #[error("{0}")]
    BadInput(String),
    #[error("omega ({0}, {1}) is not inside the domain")]
    OmegaOutsideDomain(f64, f64),
    #[error(
        "conjugate gradients did not reach {tol:e} within {iterations} iterations (residual {residual:e})"
    )]
    CgNoConvergence {
        iterations: usize,
        tol: f64,
        residual: f64,
        history: Vec<f64>,
    },
}

/// Uniform mesh with eliminated Dirichlet boundary rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mesh1D {
    pub domain: IntervalDomain,
    pub n_cells: usize,
    pub h: f64,
    /// Interior node coordinates.
    pub nodes: Vec<f64>,
}

impl Mesh1D {
    pub fn new(domain: IntervalDomain, n_cells: usize) -> Result<Self, HumError> {
        if n_cells < 4 {
            return Err(HumError::BadInput(format!(
                "need at least 4 cells, got {n_cells}"
            )));
        }
        let h = domain.length() / n_cells as f64;
        let nodes = (1..n_cells).map(|i| domain.a + i as f64 * h).collect();
        Ok(Mesh1D {
            domain,
            n_cells,
            h,
            nodes,
        })
    }

    pub fn n_interior(&self) -> usize {
        self.n_cells - 1
    }
}

/// Backward Euler grid with `dt · n_steps = T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeScheme {
    pub t_final: f64,
    pub n_steps: usize,
    pub dt: f64,
}

impl TimeScheme {
    pub fn new(t_final: f64, n_steps: usize) -> Result<Self, HumError> {
        if t_final.partial_cmp(&0.0) != Some(core::cmp::Ordering::Greater) || n_steps == 0 {
            return Err(HumError::BadInput(format!(
                "need T > 0 and n_steps >= 1, got T={t_final}, n_steps={n_steps}"
            )));
        }
        Ok(TimeScheme {
            t_final,
            n_steps,
            dt: t_final / n_steps as f64,
        })
    }
}

/// Symmetric positive definite tridiagonal matrix in LDLᵀ-factored form.
#[derive(Debug, Clone)]
struct TridiagFactor {
    d: Vec<f64>,
    l: Vec<f64>,
}

impl TridiagFactor {
    fn new(diag: &[f64], off: &[f64]) -> Self {
        let n = diag.len();
        let mut d = vec![0.0; n];
        let mut l = vec![0.0; n.saturating_sub(1)];
        d[0] = diag[0];
        for i in 1..n {
            l[i - 1] = off[i - 1] / d[i - 1];
            d[i] = diag[i] - off[i - 1] * l[i - 1];
        }
        TridiagFactor { d, l }
    }

    #[allow(clippy::needless_range_loop)]
    fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.d.len();
        for i in 1..n {
            b[i] -= self.l[i - 1] * b[i - 1];
        }
        for i in 0..n {
            b[i] /= self.d[i];
        }
        for i in (0..n - 1).rev() {
            b[i] -= self.l[i] * b[i + 1];
        }
    }
}

/// Assembled P1 operators on the interior nodes.
#[derive(Debug, Clone)]
pub struct DiscreteOperators {
    pub mesh: Mesh1D,
    /// Consistent mass matrix, tridiagonal `(h/6)(1, 4, 1)`.
    pub mass_diag: Vec<f64>,
    pub mass_off: Vec<f64>,
    /// Stiffness matrix, tridiagonal `(1/h)(-1, 2, -1)`.
    pub stiff_diag: Vec<f64>,
    pub stiff_off: Vec<f64>,
    /// Coupling coefficient sampled at the interior nodes; the coupling
    /// operator is the mass-weighted nodal multiplication `M diag(α)`.
    pub alpha_nodes: Vec<f64>,
    /// 0/1 indicator of the control nodes (`ω` boundary included when it
    /// lands exactly on a node).
    pub omega_indicator: Vec<f64>,
}

/// Assembles mass, stiffness, coupling and control-restriction operators.
pub fn assemble(
    mesh: &Mesh1D,
    alpha_nodes: Vec<f64>,
    omega: (f64, f64),
) -> Result<DiscreteOperators, HumError> {
    let n = mesh.n_interior();
    if alpha_nodes.len() != n {
        return Err(HumError::BadInput(format!(
            "alpha has {} nodal values, mesh has {} interior nodes",
            alpha_nodes.len(),
            n
        )));
    }
    let (a, b) = (mesh.domain.a, mesh.domain.b);
    if !(omega.0 >= a - 1e-12 && omega.1 <= b + 1e-12 && omega.0 < omega.1) {
        return Err(HumError::OmegaOutsideDomain(omega.0, omega.1));
    }
    let h = mesh.h;
    let tol = 1e-9 * h;
    let omega_indicator = mesh
        .nodes
        .iter()
        .map(|&x| {
            if x >= omega.0 - tol && x <= omega.1 + tol {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    Ok(DiscreteOperators {
        mesh: mesh.clone(),
        mass_diag: vec![4.0 * h / 6.0; n],
        mass_off: vec![h / 6.0; n - 1],
        stiff_diag: vec![2.0 / h; n],
        stiff_off: vec![-1.0 / h; n - 1],
        alpha_nodes,
        omega_indicator,
    })
}

impl DiscreteOperators {
    pub fn n(&self) -> usize {
        self.mass_diag.len()
    }

    /// `M v`.
    pub fn mass_apply(&self, v: &[f64]) -> Vec<f64> {
        let n = v.len();
        let mut out = vec![0.0; n];
        for i in 0..n {
            out[i] = self.mass_diag[i] * v[i];
            if i > 0 {
                out[i] += self.mass_off[i - 1] * v[i - 1];
            }
            if i + 1 < n {
                out[i] += self.mass_off[i] * v[i + 1];
            }
        }
        out
    }

    /// Mass inner product `⟨a, b⟩_M`.
    pub fn m_dot(&self, a: &[f64], b: &[f64]) -> f64 {
        let mb = self.mass_apply(b);
        a.iter().zip(&mb).map(|(x, y)| x * y).sum()
    }

    pub fn m_norm(&self, v: &[f64]) -> f64 {
        scalar::sqrt(self.m_dot(v, v).max(0.0))
    }

    /// `M_ω v = 1_ω M (1_ω v)`, the control-space pairing operator.
    pub fn m_omega_apply(&self, v: &[f64]) -> Vec<f64> {
        let masked: Vec<f64> = v
            .iter()
            .zip(&self.omega_indicator)
            .map(|(x, ind)| x * ind)
            .collect();
        let mut out = self.mass_apply(&masked);
        for (o, ind) in out.iter_mut().zip(&self.omega_indicator) {
            *o *= ind;
        }
        out
    }

    fn step_factor(&self, dt: f64) -> TridiagFactor {
        let diag: Vec<f64> = self
            .mass_diag
            .iter()
            .zip(&self.stiff_diag)
            .map(|(m, k)| m + dt * k)
            .collect();
        let off: Vec<f64> = self
            .mass_off
            .iter()
            .zip(&self.stiff_off)
            .map(|(m, k)| m + dt * k)
            .collect();
        TridiagFactor::new(&diag, &off)
    }
}

/// Nodal trajectory of the coupled forward solve.
#[derive(Debug, Clone)]
pub struct HumTrajectory {
    pub times: Vec<f64>,
    pub y: Vec<Vec<f64>>,
    pub z: Vec<Vec<f64>>,
}

impl HumTrajectory {
    pub fn y_final(&self) -> &Vec<f64> {
        self.y.last().expect("at least the initial state exists")
    }
}

/// Backward Euler for the block-triangular coupled system: `z` advances
/// independently, then `y` with the sources `α z` (mass-weighted) and the
/// control (paired through `M_ω`).
pub fn forward_solve(
    ops: &DiscreteOperators,
    scheme: &TimeScheme,
    y0: &[f64],
    z0: &[f64],
    control: Option<&[Vec<f64>]>,
) -> Result<HumTrajectory, HumError> {
    let n = ops.n();
    if y0.len() != n || z0.len() != n {
        return Err(HumError::BadInput(format!(
            "state has {} / {} values, mesh has {} interior nodes",
            y0.len(),
            z0.len(),
            n
        )));
    }
    if let Some(u) = control {
        if u.len() != scheme.n_steps {
            return Err(HumError::BadInput(format!(
                "control has {} steps, scheme has {}",
                u.len(),
                scheme.n_steps
            )));
        }
    }
    let factor = ops.step_factor(scheme.dt);
    let mut y = y0.to_vec();
    let mut z = z0.to_vec();
    let mut times = Vec::with_capacity(scheme.n_steps + 1);
    let mut ys = Vec::with_capacity(scheme.n_steps + 1);
    let mut zs = Vec::with_capacity(scheme.n_steps + 1);
    times.push(0.0);
    ys.push(y.clone());
    zs.push(z.clone());
    for step in 0..scheme.n_steps {
        let mut rhs = ops.mass_apply(&z);
        factor.solve_in_place(&mut rhs);
        z = rhs;

        let coupled: Vec<f64> = ops.alpha_nodes.iter().zip(&z).map(|(a, v)| a * v).collect();
        let m_coupled = ops.mass_apply(&coupled);
        let mut rhs = ops.mass_apply(&y);
        for i in 0..n {
            rhs[i] += scheme.dt * m_coupled[i];
        }
        if let Some(u) = control {
            let mu = ops.m_omega_apply(&u[step]);
            for i in 0..n {
                rhs[i] += scheme.dt * mu[i];
            }
        }
        factor.solve_in_place(&mut rhs);
        y = rhs;

        times.push((step + 1) as f64 * scheme.dt);
        ys.push(y.clone());
        zs.push(z.clone());
    }
    Ok(HumTrajectory {
        times,
        y: ys,
        z: zs,
    })
}

/// `Λ φ_0 = w(T)`: scalar backward heat solve, then a forward solve with
/// source `1_ω φ`. Returns `w(T)` and the adjoint path used (one entry per
/// forward step).
pub fn apply_gramian(
    ops: &DiscreteOperators,
    scheme: &TimeScheme,
    phi0: &[f64],
) -> (Vec<f64>, Vec<Vec<f64>>) {
    let factor = ops.step_factor(scheme.dt);
    let n_steps = scheme.n_steps;
    // φ at forward step j is the (N+1-j)-th smoothing of φ_0 — the exact
    // discrete adjoint of the forward stepping in the mass inner product
    let mut path = Vec::with_capacity(n_steps);
    let mut p = phi0.to_vec();
    for _ in 0..n_steps {
        let mut rhs = ops.mass_apply(&p);
        factor.solve_in_place(&mut rhs);
        p = rhs;
        path.push(p.clone());
    }
    path.reverse();

    let n = ops.n();
    let mut w = vec![0.0; n];
    for phi in &path {
        let mut rhs = ops.mass_apply(&w);
        let mu = ops.m_omega_apply(phi);
        for i in 0..n {
            rhs[i] += scheme.dt * mu[i];
        }
        factor.solve_in_place(&mut rhs);
        w = rhs;
    }
    (w, path)
}

/// Full configuration of one penalized solve.
#[derive(Debug, Clone)]
pub struct HumConfig {
    pub mesh: Mesh1D,
    pub scheme: TimeScheme,
    pub epsilon: f64,
    pub omega: (f64, f64),
    /// Coupling coefficient at the interior nodes.
    pub alpha_nodes: Vec<f64>,
    pub y0: Vec<f64>,
    pub z0: Vec<f64>,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
}

/// Outcome of one penalized solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumRun {
    pub h: f64,
    pub epsilon: f64,
    pub min_f: f64,
    pub control_norm: f64,
    pub y_t_norm: f64,
    pub cg_iters: usize,
    /// `|F_ε + J_ε| / (1 + |J_ε|)` at the computed minimizers.
    pub fenchel_gap: f64,
    /// Relative CG residual after each iteration.
    pub cg_residual_history: Vec<f64>,
}

/// Conjugate-direction solve of `(Λ + ε) x = b` in the mass inner product,
/// in the conjugate-residual (minimal-residual) variant: each step minimizes
/// the M-norm of the residual over the Krylov space, so the recorded
/// residual history is nonincreasing by construction. One operator apply
/// per iteration, like the classical update.
fn cg_gramian(
    ops: &DiscreteOperators,
    scheme: &TimeScheme,
    epsilon: f64,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, usize, Vec<f64>), HumError> {
    let n = ops.n();
    let apply = |v: &[f64]| -> Vec<f64> {
        let (mut out, _) = apply_gramian(ops, scheme, v);
        for i in 0..n {
            out[i] += epsilon * v[i];
        }
        out
    };
    let b_norm_sq = ops.m_dot(b, b);
    if b_norm_sq == 0.0 {
        return Ok((vec![0.0; n], 0, Vec::new()));
    }
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut ar = apply(&r);
    let mut ap = ar.clone();
    let mut r_ar = ops.m_dot(&r, &ar);
    let mut history = Vec::new();
    for iter in 1..=max_iter {
        let denom = ops.m_dot(&ap, &ap);
        if denom <= 0.0 || r_ar <= 0.0 {
            // A is SPD, so this only happens at exact convergence
            let rel = scalar::sqrt(ops.m_dot(&r, &r) / b_norm_sq);
            history.push(rel);
            return Ok((x, iter, history));
        }
        let alpha = r_ar / denom;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rel = scalar::sqrt(ops.m_dot(&r, &r) / b_norm_sq);
        history.push(rel);
        if rel < tol {
            return Ok((x, iter, history));
        }
        let ar_new = apply(&r);
        let r_ar_new = ops.m_dot(&r, &ar_new);
        let beta = r_ar_new / r_ar;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
            ap[i] = ar_new[i] + beta * ap[i];
        }
        ar = ar_new;
        r_ar = r_ar_new;
    }
    let _ = ar;
    let residual = *history.last().unwrap_or(&f64::INFINITY);
    Err(HumError::CgNoConvergence {
        iterations: max_iter,
        tol,
        residual,
        history,
    })
}

/// Solves `(Λ + ε) φ_{0,ε} = -y(T; y_0, 0)`, recovers `u_ε = 1_ω φ_ε` and
/// evaluates both functionals and their gap.
pub fn solve_penalized(config: &HumConfig) -> Result<HumRun, HumError> {
    if config.epsilon.partial_cmp(&0.0) != Some(core::cmp::Ordering::Greater) {
        return Err(HumError::BadInput(format!(
            "epsilon must be positive, got {}",
            config.epsilon
        )));
    }
    let ops = assemble(&config.mesh, config.alpha_nodes.clone(), config.omega)?;
    let scheme = &config.scheme;

    let free = forward_solve(&ops, scheme, &config.y0, &config.z0, None)?;
    let y_t_free = free.y_final().clone();
    let b: Vec<f64> = y_t_free.iter().map(|v| -v).collect();

    let (phi0, cg_iters, history) = cg_gramian(
        &ops,
        scheme,
        config.epsilon,
        &b,
        config.cg_tol,
        config.cg_max_iter,
    )?;

    let (_, phi_path) = apply_gramian(&ops, scheme, &phi0);
    // u^j = 1_ω φ^j; ‖u‖² accumulates the M_ω pairing per step
    let mut control_norm_sq = 0.0;
    let mut controls = Vec::with_capacity(scheme.n_steps);
    for phi in &phi_path {
        let u: Vec<f64> = phi
            .iter()
            .zip(&ops.omega_indicator)
            .map(|(v, ind)| v * ind)
            .collect();
        let mu = ops.m_omega_apply(&u);
        control_norm_sq += scheme.dt * u.iter().zip(&mu).map(|(a, b)| a * b).sum::<f64>();
        controls.push(u);
    }

    let controlled = forward_solve(&ops, scheme, &config.y0, &config.z0, Some(&controls))?;
    let y_t = controlled.y_final();
    let y_t_norm_sq = ops.m_dot(y_t, y_t);

    let min_f = 0.5 * control_norm_sq + 0.5 / config.epsilon * y_t_norm_sq;
    let j_dual = 0.5 * control_norm_sq
        + 0.5 * config.epsilon * ops.m_dot(&phi0, &phi0)
        + ops.m_dot(&y_t_free, &phi0);
    let fenchel_gap = (min_f + j_dual).abs() / (1.0 + j_dual.abs());

    Ok(HumRun {
        h: config.mesh.h,
        epsilon: config.epsilon,
        min_f,
        control_norm: scalar::sqrt(control_norm_sq.max(0.0)),
        y_t_norm: scalar::sqrt(y_t_norm_sq.max(0.0)),
        cg_iters,
        fenchel_gap,
        cg_residual_history: history,
    })
}

/// Mesh-independent description of a nodal coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaSpec {
    Constant(f64),
    /// `α(x) = Σ_{j>=1} j^{-power} cos(stride · j · x)`. For `power = 2`
    /// the nodal values come from the exact closed form
    /// `π²/6 - πθ/2 + θ²/4`, `θ = stride·x mod 2π` (the Bernoulli
    /// polynomial summing the whole series including every aliased term);
    /// higher powers are summed directly with tail below 1e-6.
    BandSeries {
        stride: usize,
        power: u32,
    },
}

impl AlphaSpec {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            AlphaSpec::Constant(c) => *c,
            AlphaSpec::BandSeries { stride, power } => {
                let arg = *stride as f64 * x;
                if *power == 2 {
                    let two_pi = 2.0 * core::f64::consts::PI;
                    let theta = arg - two_pi * scalar::floor(arg / two_pi);
                    let pi = core::f64::consts::PI;
                    pi * pi / 6.0 - pi * theta / 2.0 + theta * theta / 4.0
                } else {
                    // Σ_{j>J} j^-p < J^{1-p}/(p-1): pick J for tail < 1e-6
                    let p = *power as f64;
                    let j_max = scalar::floor(scalar::exp(scalar::ln(1e6 / (p - 1.0)) / (p - 1.0)))
                        as usize
                        + 1;
                    let mut acc = 0.0;
                    for j in (1..=j_max.max(2)).rev() {
                        acc += scalar::cos(j as f64 * arg) / scalar::powi(j as f64, *power as i32);
                    }
                    acc
                }
            }
        }
    }

    pub fn nodal(&self, mesh: &Mesh1D) -> Vec<f64> {
        mesh.nodes.iter().map(|&x| self.eval(x)).collect()
    }
}

/// Mesh-independent description of an initial state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitSpec {
    Zero,
    /// `amplitude · sin(frequency (x - a))`.
    Sine {
        frequency: f64,
        amplitude: f64,
    },
}

impl InitSpec {
    pub fn nodal(&self, mesh: &Mesh1D) -> Vec<f64> {
        match self {
            InitSpec::Zero => vec![0.0; mesh.n_interior()],
            InitSpec::Sine {
                frequency,
                amplitude,
            } => mesh
                .nodes
                .iter()
                .map(|&x| amplitude * scalar::sin(frequency * (x - mesh.domain.a)))
                .collect(),
        }
    }
}

/// Base configuration of an `h`-sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub domain: IntervalDomain,
    pub omega: (f64, f64),
    pub t_final: f64,
    pub n_steps: usize,
    pub alpha: AlphaSpec,
    pub y0: InitSpec,
    pub z0: InitSpec,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    /// `ε = (epsilon_scale · h)^epsilon_exponent`.
    pub epsilon_exponent: f64,
    pub epsilon_scale: f64,
}

impl SweepConfig {
    pub fn epsilon_for(&self, h: f64) -> f64 {
        let base = self.epsilon_scale * h;
        scalar::exp(self.epsilon_exponent * scalar::ln(base))
    }

    pub fn build(&self, n_cells: usize) -> Result<HumConfig, HumError> {
        let mesh = Mesh1D::new(self.domain, n_cells)?;
        let scheme = TimeScheme::new(self.t_final, self.n_steps)?;
        let epsilon = self.epsilon_for(mesh.h);
        Ok(HumConfig {
            epsilon,
            omega: self.omega,
            alpha_nodes: self.alpha.nodal(&mesh),
            y0: self.y0.nodal(&mesh),
            z0: self.z0.nodal(&mesh),
            cg_tol: self.cg_tol,
            cg_max_iter: self.cg_max_iter,
            mesh,
            scheme,
        })
    }
}

/// Sweep outcome with log-log slopes against `h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub runs: Vec<HumRun>,
    pub slope_min_f: f64,
    pub slope_control: f64,
    pub slope_y_t: f64,
}

/// Runs `solve_penalized` for each mesh and fits the three slopes.
pub fn sweep(base: &SweepConfig, n_cells_list: &[usize]) -> Result<SweepResult, HumError> {
    if n_cells_list.is_empty() {
        return Err(HumError::BadInput("empty mesh list".into()));
    }
    let mut runs = Vec::with_capacity(n_cells_list.len());
    for &n_cells in n_cells_list {
        let config = base.build(n_cells)?;
        runs.push(solve_penalized(&config)?);
    }
    let hs: Vec<f64> = runs.iter().map(|r| r.h).collect();
    let fit = |sel: fn(&HumRun) -> f64| -> f64 {
        let vals: Vec<f64> = runs.iter().map(sel).collect();
        linalg::fit_loglog(&hs, &vals).0
    };
    Ok(SweepResult {
        slope_min_f: fit(|r| r.min_f),
        slope_control: fit(|r| r.control_norm),
        slope_y_t: fit(|r| r.y_t_norm),
        runs,
    })
}
