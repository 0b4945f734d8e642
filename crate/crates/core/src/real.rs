//! Scalar abstraction shared by the jet engine and operator evaluation.
//!
//! Two implementations: plain `f64` and [`Dd`], a double-double type with
//! roughly 32 significant digits. Operators of degree up to eight lose about
//! `d^-8` digits next to reflection walls, so integrated checks run in `Dd`.

use core::fmt;
use core::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

/// Field operations plus the handful of elementary functions the crate needs.
pub trait Real:
    Copy
    + PartialOrd
    + fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + Send
    + Sync
    + 'static
{
    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;
    fn exp(self) -> Self;
    /// `exp(x) - 1` without cancellation for small `x`.
    fn expm1(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;

    /// Round a double-double into this type.
    #[inline]
    fn from_dd(d: Dd) -> Self {
        Self::from_f64(d.hi) + Self::from_f64(d.lo)
    }
    #[inline]
    fn zero() -> Self {
        Self::from_f64(0.0)
    }
    #[inline]
    fn one() -> Self {
        Self::from_f64(1.0)
    }
    #[inline]
    fn abs(self) -> Self {
        if self < Self::zero() {
            -self
        } else {
            self
        }
    }
    fn powi(self, n: i32) -> Self {
        let mut base = if n < 0 { Self::one() / self } else { self };
        let mut e = n.unsigned_abs();
        let mut acc = Self::one();
        while e > 0 {
            if e & 1 == 1 {
                acc *= base;
            }
            base *= base;
            e >>= 1;
        }
        acc
    }
    /// `x^p` for `x > 0`.
    fn powf(self, p: Self) -> Self {
        (p * self.ln()).exp()
    }
    fn sinh(self) -> Self {
        let h = Self::from_f64(0.5);
        if self.abs().to_f64() < 0.5 {
            (self.expm1() - (-self).expm1()) * h
        } else {
            let e = self.exp();
            (e - Self::one() / e) * h
        }
    }
    fn cosh(self) -> Self {
        let e = self.exp();
        (e + Self::one() / e) * Self::from_f64(0.5)
    }
    /// `1 / (1 - exp(-x))`, the building block of the reflection denominators.
    fn recip_one_minus_exp_neg(self) -> Self {
        Self::one() / -(-self).expm1()
    }
}

impl Real for f64 {
    #[inline]
    fn from_f64(x: f64) -> Self {
        x
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self
    }
    #[inline]
    fn exp(self) -> Self {
        libm::exp(self)
    }
    #[inline]
    fn expm1(self) -> Self {
        libm::expm1(self)
    }
    #[inline]
    fn ln(self) -> Self {
        libm::log(self)
    }
    #[inline]
    fn sqrt(self) -> Self {
        libm::sqrt(self)
    }
    #[inline]
    fn sinh(self) -> Self {
        libm::sinh(self)
    }
    #[inline]
    fn cosh(self) -> Self {
        libm::cosh(self)
    }
    #[inline]
    fn powf(self, p: Self) -> Self {
        libm::pow(self, p)
    }
}

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi)/2`.
#[derive(Clone, Copy, Default, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

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
fn split(a: f64) -> (f64, f64) {
    const SPLITTER: f64 = 134_217_729.0; // 2^27 + 1
    let t = SPLITTER * a;
    let hi = t - (t - a);
    (hi, a - hi)
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let (ah, al) = split(a);
    let (bh, bl) = split(b);
    let err = ((ah * bh - p) + ah * bl + al * bh) + al * bl;
    (p, err)
}

const LN2: Dd = Dd { hi: 6.931_471_805_599_453e-1, lo: 2.319_046_813_846_299_6e-17 };

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    #[inline]
    pub const fn new(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    /// Exact product of two doubles.
    #[inline]
    pub fn mul_f64(a: f64, b: f64) -> Self {
        let (hi, lo) = two_prod(a, b);
        Dd { hi, lo }
    }

    fn scale_pow2(self, k: i32) -> Self {
        let f = libm::scalbn(1.0, k);
        Dd { hi: self.hi * f, lo: self.lo * f }
    }

    /// Taylor sum of `exp(x) - 1` for `|x| <= 0.35`.
    fn expm1_small(x: Dd) -> Dd {
        let mut term = x;
        let mut sum = x;
        let mut k = 2.0;
        while term.hi.abs() > 1e-34 * sum.hi.abs().max(1e-300) && k < 60.0 {
            term = term * x / Dd::new(k);
            sum += term;
            k += 1.0;
        }
        sum
    }
}

impl fmt::Debug for Dd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Dd({:e} + {:e})", self.hi, self.lo)
    }
}

impl fmt::Display for Dd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.hi, f)
    }
}

impl PartialOrd for Dd {
    fn partial_cmp(&self, other: &Self) -> Option<core::cmp::Ordering> {
        match self.hi.partial_cmp(&other.hi) {
            Some(core::cmp::Ordering::Equal) => self.lo.partial_cmp(&other.lo),
            o => o,
        }
    }
}

impl From<f64> for Dd {
    fn from(x: f64) -> Self {
        Dd::new(x)
    }
}

impl Add for Dd {
    type Output = Dd;
    #[inline]
    fn add(self, b: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, b.hi);
        let (t, f) = two_sum(self.lo, b.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Dd { hi, lo }
    }
}

impl Neg for Dd {
    type Output = Dd;
    #[inline]
    fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }
}

impl Sub for Dd {
    type Output = Dd;
    #[inline]
    fn sub(self, b: Dd) -> Dd {
        self + (-b)
    }
}

impl Mul for Dd {
    type Output = Dd;
    #[inline]
    fn mul(self, b: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, b.hi);
        let e = e + (self.hi * b.lo + self.lo * b.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }
}

impl Div for Dd {
    type Output = Dd;
    fn div(self, b: Dd) -> Dd {
        let q1 = self.hi / b.hi;
        let r = self - b * Dd::new(q1);
        let q2 = r.hi / b.hi;
        let r = r - b * Dd::new(q2);
        let q3 = r.hi / b.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo } + Dd::new(q3)
    }
}

impl AddAssign for Dd {
    #[inline]
    fn add_assign(&mut self, b: Dd) {
        *self = *self + b;
    }
}
impl SubAssign for Dd {
    #[inline]
    fn sub_assign(&mut self, b: Dd) {
        *self = *self - b;
    }
}
impl MulAssign for Dd {
    #[inline]
    fn mul_assign(&mut self, b: Dd) {
        *self = *self * b;
    }
}

impl Real for Dd {
    #[inline]
    fn from_f64(x: f64) -> Self {
        Dd::new(x)
    }
    #[inline]
    fn from_dd(d: Dd) -> Self {
        d
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    fn exp(self) -> Self {
        if self.hi > 709.0 {
            return Dd::new(f64::INFINITY);
        }
        if self.hi < -745.0 {
            return Dd::ZERO;
        }
        let k = libm::round(self.hi / LN2.hi);
        let r = self - LN2 * Dd::new(k);
        // exp(r) = (1 + expm1(r / 2^8))^(2^8)
        let mut s = Dd::expm1_small(r.scale_pow2(-8));
        for _ in 0..8 {
            s = s * (s + Dd::new(2.0));
        }
        (s + Dd::ONE).scale_pow2(k as i32)
    }

    fn expm1(self) -> Self {
        if self.hi.abs() < 0.35 {
            Dd::expm1_small(self)
        } else {
            self.exp() - Dd::ONE
        }
    }

    fn ln(self) -> Self {
        if self.hi <= 0.0 {
            return Dd::new(f64::NAN);
        }
        if self.hi < 1e-280 || self.hi > 1e280 {
            // keep the Newton step's exp away from under/overflow
            let shift = if self.hi < 1.0 { 600 } else { -600 };
            let scaled = self * Dd::new(libm::ldexp(1.0, shift));
            return scaled.ln() - LN2 * Dd::new(shift as f64);
        }
        let mut y = Dd::new(libm::log(self.hi));
        for _ in 0..2 {
            y = y + self * (-y).exp() - Dd::ONE;
        }
        y
    }

    fn sqrt(self) -> Self {
        if self.hi <= 0.0 {
            return Dd::ZERO;
        }
        let x = libm::sqrt(self.hi);
        let xx = Dd::mul_f64(x, x);
        Dd::new(x) + (self - xx) / Dd::new(2.0 * x)
    }
}
