//! Gauss–Legendre quadrature: node computation by Newton iteration on the
//! Legendre polynomial, composite rules over panels, and a panel-doubling
//! adaptive driver.

use crate::scalar;
use alloc::vec::Vec;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, then Newton on P_n
        let mut x = scalar::cos(core::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5));
        let mut dp = 0.0;
        for _ in 0..60 {
            let (p, d) = legendre_and_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                let (p2, d2) = legendre_and_derivative(n, x);
                dp = d2;
                x -= p2 / d2;
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes.push(-x);
        weights.push(w);
    }
    for i in (0..n - m).rev() {
        nodes.push(-nodes[i]);
        weights.push(weights[i]);
    }
    if n % 2 == 1 {
        nodes[m - 1] = 0.0;
    }
    (nodes, weights)
}

fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Composite `order`-point Gauss rule with `panels` equal panels on `[a, b]`.
pub fn composite<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    panels: usize,
    order: usize,
) -> f64 {
    let (nodes, weights) = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let left = a + p as f64 * h;
        let mid = left + 0.5 * h;
        let mut panel = 0.0;
        for (x, w) in nodes.iter().zip(&weights) {
            panel += w * f(mid + 0.5 * h * x);
        }
        total += 0.5 * h * panel;
    }
    total
}

/// Panel-doubling adaptive composite Gauss quadrature to absolute tolerance.
///
/// Returns `(value, achieved_estimate)`; `Err` carries the last estimate when
/// the doubling loop fails to converge.
pub fn adaptive<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    start_panels: usize,
    max_panels: usize,
) -> Result<(f64, f64), (f64, f64)> {
    let order = 10;
    let mut panels = start_panels.max(1);
    let mut prev = composite(&mut f, a, b, panels, order);
    loop {
        panels *= 2;
        let cur = composite(&mut f, a, b, panels, order);
        let err = (cur - prev).abs();
        if err <= abs_tol {
            return Ok((cur, err));
        }
        if panels >= max_panels {
            return Err((cur, err));
        }
        prev = cur;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn nodes_match_tabulated_low_orders() {
        let (n2, w2) = gauss_legendre(2);
        let r = 1.0 / 3.0f64.sqrt();
        assert_relative_eq!(n2[0], -r, max_relative = 1e-15);
        assert_relative_eq!(n2[1], r, max_relative = 1e-15);
        assert_relative_eq!(w2[0], 1.0, max_relative = 1e-15);

        let (n3, w3) = gauss_legendre(3);
        assert_relative_eq!(n3[1], 0.0, epsilon = 1e-16);
        assert_relative_eq!(n3[2], (0.6f64).sqrt(), max_relative = 1e-14);
        assert_relative_eq!(w3[1], 8.0 / 9.0, max_relative = 1e-14);
    }

    #[test]
    fn rule_is_exact_for_low_degree_polynomials() {
        // n-point rule integrates degree 2n-1 exactly
        for order in [2usize, 4, 8, 16] {
            let deg = 2 * order - 1;
            let val = composite(|x| x.powi(deg as i32) + x.powi(2), -1.0, 1.0, 1, order);
            assert_relative_eq!(val, 2.0 / 3.0, max_relative = 1e-13);
        }
    }

    #[test]
    fn weights_sum_to_interval_length() {
        for order in [5usize, 9, 12, 20, 33] {
            let (_, w) = gauss_legendre(order);
            let s: f64 = w.iter().sum();
            assert_relative_eq!(s, 2.0, max_relative = 1e-13);
        }
    }

    #[test]
    fn adaptive_reaches_tolerance_on_oscillatory_integrand() {
        // \int_0^pi sin(7x)^2 dx = pi/2
        let (v, err) = adaptive(
            |x| (7.0 * x).sin().powi(2),
            0.0,
            core::f64::consts::PI,
            1e-12,
            4,
            1 << 12,
        )
        .expect("must converge");
        assert!(err <= 1e-12);
        assert_relative_eq!(v, core::f64::consts::FRAC_PI_2, max_relative = 1e-12);
    }

    #[test]
    fn adaptive_reports_failure() {
        // tolerance unreachable with the panel cap held tiny
        let r = adaptive(|x| (200.0 * x).sin().abs(), 0.0, 1.0, 1e-14, 1, 4);
        assert!(r.is_err());
    }
}
