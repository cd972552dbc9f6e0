//! Double-double arithmetic: an unevaluated sum `hi + lo` of two `f64` with about 106
//! bits of significand. Only what the reference forward pass needs is provided.

use std::cmp::Ordering;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoubleDouble {
    pub hi: f64,
    pub lo: f64,
}

const LN2: DoubleDouble = DoubleDouble { hi: std::f64::consts::LN_2, lo: 2.319_046_813_846_299_6e-17 };
/// `exp` argument reduction divides by `2^EXP_HALVINGS` before the Taylor series.
const EXP_HALVINGS: i32 = 9;

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl DoubleDouble {
    pub const ZERO: Self = Self { hi: 0.0, lo: 0.0 };
    pub const ONE: Self = Self { hi: 1.0, lo: 0.0 };

    pub const fn new(x: f64) -> Self {
        Self { hi: x, lo: 0.0 }
    }

    fn renorm(hi: f64, lo: f64) -> Self {
        let (hi, lo) = quick_two_sum(hi, lo);
        Self { hi, lo }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    #[cfg(test)]
    pub fn abs(self) -> Self {
        if self.hi < 0.0 {
            -self
        } else {
            self
        }
    }

    fn scale_pow2(self, k: i32) -> Self {
        let f = 2f64.powi(k);
        Self { hi: self.hi * f, lo: self.lo * f }
    }

    pub fn sqrt(self) -> Self {
        if self.hi <= 0.0 {
            return Self::ZERO;
        }
        let x = 1.0 / self.hi.sqrt();
        let ax = self.hi * x;
        let (sq, sq_err) = two_prod(ax, ax);
        let resid = self - Self { hi: sq, lo: sq_err };
        let (hi, lo) = two_sum(ax, resid.hi * (x * 0.5));
        Self::renorm(hi, lo)
    }

    pub fn exp(self) -> Self {
        if self.hi > 709.0 {
            return Self::new(f64::INFINITY);
        }
        if self.hi < -745.0 {
            return Self::ZERO;
        }
        let k = (self.hi / LN2.hi).round();
        let r = (self - LN2 * Self::new(k)).scale_pow2(-EXP_HALVINGS);
        // expm1(r) by Taylor series; |r| < 2^-9 so 12 terms reach 1e-40.
        let mut term = r;
        let mut sum = r;
        for n in 2..=14 {
            term = term * r / Self::new(f64::from(n));
            sum += term;
            if term.hi.abs() < 1e-36 {
                break;
            }
        }
        for _ in 0..EXP_HALVINGS {
            sum = sum * (sum + Self::new(2.0));
        }
        (sum + Self::ONE).scale_pow2(k as i32)
    }

    /// Natural logarithm by Newton iteration on `exp`.
    pub fn ln(self) -> Self {
        if self.hi <= 0.0 {
            return Self::new(f64::NAN);
        }
        let mut y = Self::new(self.hi.ln());
        for _ in 0..2 {
            y = y + self * (-y).exp() - Self::ONE;
        }
        y
    }

    pub fn tanh(self) -> Self {
        if self.hi > 40.0 {
            return Self::ONE;
        }
        if self.hi < -40.0 {
            return -Self::ONE;
        }
        let e = (self + self).exp();
        (e - Self::ONE) / (e + Self::ONE)
    }
}

impl From<f64> for DoubleDouble {
    fn from(x: f64) -> Self {
        Self::new(x)
    }
}

impl Neg for DoubleDouble {
    type Output = Self;
    fn neg(self) -> Self {
        Self { hi: -self.hi, lo: -self.lo }
    }
}

impl Add for DoubleDouble {
    type Output = Self;
    fn add(self, b: Self) -> Self {
        let (s, e) = two_sum(self.hi, b.hi);
        let (t, f) = two_sum(self.lo, b.lo);
        let (s, e) = quick_two_sum(s, e + t);
        Self::renorm(s, e + f)
    }
}

impl AddAssign for DoubleDouble {
    fn add_assign(&mut self, b: Self) {
        *self = *self + b;
    }
}

impl Sub for DoubleDouble {
    type Output = Self;
    fn sub(self, b: Self) -> Self {
        self + (-b)
    }
}

impl Mul for DoubleDouble {
    type Output = Self;
    fn mul(self, b: Self) -> Self {
        let (p, e) = two_prod(self.hi, b.hi);
        Self::renorm(p, e + (self.hi * b.lo + self.lo * b.hi))
    }
}

impl Div for DoubleDouble {
    type Output = Self;
    fn div(self, b: Self) -> Self {
        let q1 = self.hi / b.hi;
        let r = self - b * Self::new(q1);
        let q2 = r.hi / b.hi;
        let r = r - b * Self::new(q2);
        let q3 = r.hi / b.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Self { hi, lo } + Self::new(q3)
    }
}

impl PartialOrd for DoubleDouble {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match self.hi.partial_cmp(&other.hi)? {
            Ordering::Equal => self.lo.partial_cmp(&other.lo),
            ord => Some(ord),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: DoubleDouble, b: DoubleDouble, tol: f64) -> bool {
        (a - b).abs().to_f64() <= tol * b.abs().to_f64().max(1.0)
    }

    #[test]
    fn captures_bits_beyond_f64() {
        let x = DoubleDouble::new(1.0) + DoubleDouble::new(1e-20);
        assert_eq!(x.hi, 1.0);
        assert_eq!(x.lo, 1e-20);
        assert_eq!((x - DoubleDouble::ONE).to_f64(), 1e-20);
    }

    #[test]
    fn division_and_sqrt_invert_multiplication() {
        let a = DoubleDouble::new(3.0);
        let third = DoubleDouble::ONE / a;
        assert!(close(third * a, DoubleDouble::ONE, 1e-31));
        let r = DoubleDouble::new(2.0).sqrt();
        assert!(close(r * r, DoubleDouble::new(2.0), 1e-31));
    }

    #[test]
    fn exp_and_ln_are_inverse_and_agree_with_f64() {
        for x in [-30.0, -2.5, -1e-3, 0.0, 1e-9, 0.7, 3.0, 40.0] {
            let d = DoubleDouble::new(x);
            let e = d.exp();
            assert!((e.to_f64() - x.exp()).abs() <= 4.0 * f64::EPSILON * x.exp(), "exp({x})");
            assert!(close(e.ln(), d, 1e-30), "ln(exp({x}))");
        }
        let e1 = DoubleDouble::ONE.exp();
        // e = 2.718281828459045 + 1.4456468917292502e-16
        assert_eq!(e1.hi, std::f64::consts::E);
        assert!((e1.lo - 1.445_646_891_729_250_2e-16).abs() < 1e-31);
    }

    #[test]
    fn tanh_matches_f64_and_is_odd() {
        for x in [-50.0, -3.0, -0.2, 1e-12, 0.5, 2.0, 50.0] {
            let t = DoubleDouble::new(x).tanh();
            assert!((t.to_f64() - f64::tanh(x)).abs() <= 2.0 * f64::EPSILON, "tanh({x})");
            assert!(close(t, -DoubleDouble::new(-x).tanh(), 1e-31));
        }
    }
}
