//! Double-double arithmetic (~31 significant decimal digits).
//!
//! An unevaluated sum `hi + lo` of two `f64` with `|lo| <= ulp(hi)/2`.
//! The error-free transformations (`two_sum`, `two_prod` via FMA) follow
//! Dekker and the Bailey qd library. Used where plain `f64` cancels
//! catastrophically: the witness boundary-observation integral, the
//! residual measurement of ill-conditioned Gram solves, and the
//! extended-precision biorthogonal construction.

use crate::scalar;
use core::cmp::Ordering;
use core::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let v = s - a;
    (s, (a - (s - v)) + (b - v))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, scalar::fma(a, b, -p))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };
    /// ln 2 to double-double precision: the hi part is the f64 rounding of
    /// ln 2, the lo part carries the remainder.
    #[allow(clippy::approx_constant, clippy::excessive_precision)]
    pub const LN_2: Dd = Dd {
        hi: 6.931471805599452862e-01,
        lo: 2.319046813846299558e-17,
    };

    #[inline]
    pub fn new(hi: f64, lo: f64) -> Self {
        let (s, e) = quick_two_sum(hi, lo);
        Dd { hi: s, lo: e }
    }

    #[inline]
    pub fn from_f64(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    /// Error-free product of two `f64`.
    #[inline]
    pub fn prod(a: f64, b: f64) -> Self {
        let (p, e) = two_prod(a, b);
        Dd { hi: p, lo: e }
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    #[inline]
    pub fn abs(self) -> Self {
        if self.hi < 0.0 || (self.hi == 0.0 && self.lo < 0.0) {
            -self
        } else {
            self
        }
    }

    pub fn recip(self) -> Self {
        Dd::ONE / self
    }

    pub fn sqrt(self) -> Self {
        if self.hi == 0.0 {
            return Dd::ZERO;
        }
        debug_assert!(self.hi > 0.0, "sqrt of negative double-double");
        // Karp's method: one Newton step on a f64 seed.
        let x = 1.0 / scalar::sqrt(self.hi);
        let y = self.hi * x;
        let y_dd = Dd::from_f64(y);
        let r = (self - y_dd * y_dd).hi * (x * 0.5);
        y_dd + Dd::from_f64(r)
    }

    pub fn powi(self, n: i32) -> Self {
        let mut r = Dd::ONE;
        let mut base = if n < 0 { self.recip() } else { self };
        let mut k = n.unsigned_abs();
        while k > 0 {
            if k & 1 == 1 {
                r = r * base;
            }
            base = base * base;
            k >>= 1;
        }
        r
    }

    /// `e^self`, argument reduced by powers of two and `ln 2`.
    pub fn exp(self) -> Self {
        // Below this the result underflows to zero in the hi part anyway.
        if self.hi < -709.0 {
            return Dd::from_f64(scalar::exp(self.hi));
        }
        if self.hi > 709.0 {
            return Dd::from_f64(f64::INFINITY);
        }
        if self.hi == 0.0 && self.lo == 0.0 {
            return Dd::ONE;
        }
        let m = scalar::round(self.hi / core::f64::consts::LN_2);
        let r = self - Dd::LN_2 * Dd::from_f64(m);
        // e^r = (1 + p)^(2^9) with p = e^(r/512) - 1 from a short Taylor sum.
        let s = r * Dd::from_f64(1.0 / 512.0);
        let mut term = s;
        let mut sum = s;
        for k in 2..20 {
            term = term * s / Dd::from_f64(k as f64);
            sum = sum + term;
            if term.hi.abs() < 1e-40 {
                break;
            }
        }
        let mut p = sum; // e^s - 1
        for _ in 0..9 {
            p = p * Dd::from_f64(2.0) + p * p;
        }
        let e_r = p + Dd::ONE;
        // scale by 2^m exactly (split to stay in range for extreme m)
        let half = scalar::powi(2.0, (m as i32) / 2);
        let rest = scalar::powi(2.0, m as i32 - (m as i32) / 2);
        Dd {
            hi: e_r.hi * half,
            lo: e_r.lo * half,
        } * Dd::from_f64(rest)
    }

    /// `(1 - e^{-self}) / self` with the limit value at zero.
    pub fn one_minus_exp_neg_over(self) -> Self {
        if self.hi.abs() < 1e-30 {
            return Dd::ONE - self * Dd::from_f64(0.5);
        }
        ((-self).exp() - Dd::ONE) / (-self)
    }
}

impl Add for Dd {
    type Output = Dd;
    #[inline]
    fn add(self, rhs: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, rhs.hi);
        let (t, f) = two_sum(self.lo, rhs.lo);
        let (s2, e2) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s2, e2 + f);
        Dd { hi, lo }
    }
}

impl Sub for Dd {
    type Output = Dd;
    #[inline]
    fn sub(self, rhs: Dd) -> Dd {
        self + (-rhs)
    }
}

impl Neg for Dd {
    type Output = Dd;
    #[inline]
    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Mul for Dd {
    type Output = Dd;
    #[inline]
    fn mul(self, rhs: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, rhs.hi);
        let e = e + (self.hi * rhs.lo + self.lo * rhs.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }
}

impl Div for Dd {
    type Output = Dd;
    fn div(self, rhs: Dd) -> Dd {
        let q1 = self.hi / rhs.hi;
        let r = self - rhs * Dd::from_f64(q1);
        let q2 = r.hi / rhs.hi;
        let r = r - rhs * Dd::from_f64(q2);
        let q3 = r.hi / rhs.hi;
        let (s, e) = quick_two_sum(q1, q2);
        Dd { hi: s, lo: e } + Dd::from_f64(q3)
    }
}

impl PartialOrd for Dd {
    fn partial_cmp(&self, other: &Dd) -> Option<Ordering> {
        match self.hi.partial_cmp(&other.hi) {
            Some(Ordering::Equal) => self.lo.partial_cmp(&other.lo),
            ord => ord,
        }
    }
}

impl From<f64> for Dd {
    fn from(x: f64) -> Self {
        Dd::from_f64(x)
    }
}
