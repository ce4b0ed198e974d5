//! Scalar arithmetic backends.
//!
//! Every quantity in the engine is generic over [`Scalar`]. Three backends are
//! provided:
//!
//! * [`Rat`] - arbitrary-precision rationals; field axioms hold exactly, no log.
//! * [`C64`] - machine-precision complex doubles.
//! * [`CBig`] - complex arbitrary-precision floats with configurable mantissa
//!   width (see [`set_big_precision`]).
//!
//! Equality policy: the exact backend compares exactly; approximate backends
//! compare to a relative tolerance `tol * max(1, |a|, |b|)` with a default of
//! `1e-12`, overridable per check.

use std::cell::{Cell, RefCell};
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use astro_float::{BigFloat, Consts, Radix, RoundingMode};
use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Field element the whole engine is generic over.
pub trait Scalar:
    Clone
    + PartialEq
    + fmt::Debug
    + fmt::Display
    + Zero
    + One
    + Neg<Output = Self>
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Send
    + Sync
    + 'static
{
    /// True when arithmetic is exact (no rounding).
    const EXACT: bool;

    fn from_int(n: i64) -> Self;
    fn from_ratio(num: i64, den: i64) -> Self;
    fn from_rational(r: &BigRational) -> Self;

    /// Multiplicative inverse; errors on zero.
    fn invert(&self) -> Result<Self>;

    /// Natural log (principal branch). Unavailable on the exact backend.
    fn ln(&self) -> Result<Self>;

    /// Complex conjugate (identity on real backends).
    fn conj(&self) -> Self;

    /// Square root (principal branch). On the exact backend only perfect
    /// squares succeed.
    fn sqrt(&self) -> Result<Self>;

    /// Approximate absolute value, for pivoting, tolerance checks and reports.
    fn magnitude(&self) -> f64;

    /// Approximate (re, im) pair for reporting.
    fn approx_parts(&self) -> (f64, f64);

    /// Backend default relative tolerance (0 for the exact backend).
    fn default_tol() -> f64;

    /// Equality to relative tolerance `tol * max(1, |a|, |b|)`; exact backends
    /// ignore `tol` and compare exactly.
    fn eq_tol(&self, other: &Self, tol: f64) -> bool {
        if Self::EXACT {
            self == other
        } else {
            let scale = 1.0_f64.max(self.magnitude()).max(other.magnitude());
            (self.clone() - other.clone()).magnitude() <= tol * scale
        }
    }

    fn eq_default(&self, other: &Self) -> bool {
        self.eq_tol(other, Self::default_tol())
    }

    /// Relative residual `|a - b| / max(1, |a|, |b|)` as f64, for reports.
    fn rel_residual(&self, other: &Self) -> f64 {
        let scale = 1.0_f64.max(self.magnitude()).max(other.magnitude());
        (self.clone() - other.clone()).magnitude() / scale
    }

    /// Candidate exact values near this one (continued-fraction convergents on
    /// the rational backend), cheapest first. Empty on approximate backends.
    fn snap_candidates(&self, max_den_bits: u64) -> Vec<Self> {
        let _ = max_den_bits;
        Vec::new()
    }

    /// Round to a bounded-denominator representative to keep exact iterates
    /// small; identity on approximate backends.
    fn limit_denominator(&self, max_den_bits: u64) -> Self {
        let _ = max_den_bits;
        self.clone()
    }

    /// Integer power, negative exponents via `invert`.
    fn powi(&self, n: i32) -> Result<Self> {
        if n < 0 {
            return self.invert()?.powi(-n);
        }
        let mut acc = Self::one();
        let mut base = self.clone();
        let mut e = n as u32;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base.clone();
            }
            base = base.clone() * base;
            e >>= 1;
        }
        Ok(acc)
    }
}

// ---------------------------------------------------------------------------
// Exact rationals

/// Exact arbitrary-precision rational scalar.
pub type Rat = BigRational;

pub fn rat(num: i64, den: i64) -> Rat {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

impl Scalar for Rat {
    const EXACT: bool = true;

    fn from_int(n: i64) -> Self {
        BigRational::from_integer(BigInt::from(n))
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        assert!(den != 0, "zero denominator");
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }

    fn from_rational(r: &BigRational) -> Self {
        r.clone()
    }

    fn invert(&self) -> Result<Self> {
        if self.is_zero() {
            return Err(Error::DivisionByZero);
        }
        Ok(self.recip())
    }

    fn ln(&self) -> Result<Self> {
        Err(Error::LogUnavailable)
    }

    fn conj(&self) -> Self {
        self.clone()
    }

    fn sqrt(&self) -> Result<Self> {
        if self.is_negative() {
            return Err(Error::InvalidInput(
                "negative rational has no exact sqrt".into(),
            ));
        }
        let n = self.numer().sqrt();
        let d = self.denom().sqrt();
        if &(&n * &n) == self.numer() && &(&d * &d) == self.denom() {
            Ok(BigRational::new(n, d))
        } else {
            Err(Error::InvalidInput("not a perfect square".into()))
        }
    }

    fn magnitude(&self) -> f64 {
        rational_to_f64(self).abs()
    }

    fn approx_parts(&self) -> (f64, f64) {
        (rational_to_f64(self), 0.0)
    }

    fn default_tol() -> f64 {
        0.0
    }

    fn snap_candidates(&self, max_den_bits: u64) -> Vec<Self> {
        convergents(self, max_den_bits)
    }

    fn limit_denominator(&self, max_den_bits: u64) -> Self {
        if self.denom().bits() <= max_den_bits {
            return self.clone();
        }
        convergents(self, max_den_bits)
            .into_iter()
            .last()
            .unwrap_or_else(|| self.clone())
    }
}

/// Continued-fraction convergents of `r` with denominators up to
/// `max_den_bits` bits, in order of increasing denominator.
fn convergents(r: &BigRational, max_den_bits: u64) -> Vec<BigRational> {
    use num_integer::Integer;
    let mut out = Vec::new();
    let (mut num, mut den) = (r.numer().clone(), r.denom().clone());
    // h_{-2} = 0, h_{-1} = 1; k_{-2} = 1, k_{-1} = 0
    let (mut h0, mut h1) = (BigInt::from(0), BigInt::from(1));
    let (mut k0, mut k1) = (BigInt::from(1), BigInt::from(0));
    while !den.is_zero() {
        let (a, rem) = num.div_mod_floor(&den);
        let h2 = &a * &h1 + &h0;
        let k2 = &a * &k1 + &k0;
        if k2.bits() > max_den_bits && !out.is_empty() {
            break;
        }
        out.push(BigRational::new(h2.clone(), k2.clone()));
        h0 = std::mem::replace(&mut h1, h2);
        k0 = std::mem::replace(&mut k1, k2);
        num = std::mem::replace(&mut den, rem);
        if out.len() > 128 {
            break;
        }
    }
    out
}

/// f64 approximation of a big rational, falling back to a bit-length estimate
/// when numerator or denominator overflow f64 range.
pub fn rational_to_f64(r: &BigRational) -> f64 {
    if let Some(v) = r.to_f64() {
        if v.is_finite() {
            return v;
        }
    }
    let nbits = r.numer().bits() as i64;
    let dbits = r.denom().bits() as i64;
    let sign = if r.is_negative() { -1.0 } else { 1.0 };
    sign * ((nbits - dbits) as f64 * std::f64::consts::LN_2).exp()
}

// ---------------------------------------------------------------------------
// Machine complex doubles

/// Machine-precision complex scalar.
pub type C64 = Complex64;

impl Scalar for C64 {
    const EXACT: bool = false;

    fn from_int(n: i64) -> Self {
        Complex64::new(n as f64, 0.0)
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        Complex64::new(num as f64 / den as f64, 0.0)
    }

    fn from_rational(r: &BigRational) -> Self {
        Complex64::new(rational_to_f64(r), 0.0)
    }

    fn invert(&self) -> Result<Self> {
        if self.norm() == 0.0 {
            return Err(Error::DivisionByZero);
        }
        Ok(Complex64::new(1.0, 0.0) / self)
    }

    fn ln(&self) -> Result<Self> {
        if self.norm() == 0.0 {
            return Err(Error::DivisionByZero);
        }
        Ok(Complex64::ln(*self))
    }

    fn conj(&self) -> Self {
        Complex64::conj(self)
    }

    fn sqrt(&self) -> Result<Self> {
        Ok(Complex64::sqrt(*self))
    }

    fn magnitude(&self) -> f64 {
        self.norm()
    }

    fn approx_parts(&self) -> (f64, f64) {
        (self.re, self.im)
    }

    fn default_tol() -> f64 {
        1e-12
    }
}

// ---------------------------------------------------------------------------
// Complex big floats

thread_local! {
    static BIG_PREC: Cell<usize> = const { Cell::new(128) };
    static CONSTS: RefCell<Consts> = RefCell::new(Consts::new().expect("constants cache"));
}

/// Set the mantissa precision (in bits) used by subsequently created [`CBig`]
/// values on this thread.
pub fn set_big_precision(bits: usize) {
    BIG_PREC.with(|p| p.set(bits.max(64)));
}

pub fn big_precision() -> usize {
    BIG_PREC.with(|p| p.get())
}

const RM: RoundingMode = RoundingMode::ToEven;

/// Complex arbitrary-precision float scalar.
#[derive(Clone, Debug)]
pub struct CBig {
    re: BigFloat,
    im: BigFloat,
    prec: usize,
}

impl CBig {
    fn new(re: BigFloat, im: BigFloat, prec: usize) -> Self {
        CBig { re, im, prec }
    }

    pub fn from_f64_parts(re: f64, im: f64) -> Self {
        let p = big_precision();
        CBig::new(BigFloat::from_f64(re, p), BigFloat::from_f64(im, p), p)
    }

    pub fn re(&self) -> &BigFloat {
        &self.re
    }

    pub fn im(&self) -> &BigFloat {
        &self.im
    }

    fn norm_sqr(&self, p: usize) -> BigFloat {
        let rr = self.re.mul(&self.re, p, RM);
        let ii = self.im.mul(&self.im, p, RM);
        rr.add(&ii, p, RM)
    }

    fn atan2(y: &BigFloat, x: &BigFloat, p: usize) -> BigFloat {
        CONSTS.with(|cc| {
            let cc = &mut *cc.borrow_mut();
            let pi = cc.pi(p, RM);
            if x.is_zero() {
                let half_pi = pi.div(&BigFloat::from_i8(2, p), p, RM);
                return if y.is_negative() {
                    half_pi.neg()
                } else {
                    half_pi
                };
            }
            let base = y.div(x, p, RM).atan(p, RM, cc);
            if x.is_negative() {
                if y.is_negative() {
                    base.sub(&pi, p, RM)
                } else {
                    base.add(&pi, p, RM)
                }
            } else {
                base
            }
        })
    }
}

fn bf_to_f64(x: &BigFloat) -> f64 {
    if x.is_zero() {
        return 0.0;
    }
    if x.is_inf_pos() {
        return f64::INFINITY;
    }
    if x.is_inf_neg() {
        return f64::NEG_INFINITY;
    }
    format!("{x}").parse::<f64>().unwrap_or(f64::NAN)
}

impl PartialEq for CBig {
    fn eq(&self, other: &Self) -> bool {
        self.re.cmp(&other.re) == Some(0) && self.im.cmp(&other.im) == Some(0)
    }
}

impl fmt::Display for CBig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.im.is_zero() {
            write!(f, "{}", self.re)
        } else {
            write!(f, "{}+{}i", self.re, self.im)
        }
    }
}

impl Add for CBig {
    type Output = CBig;
    fn add(self, rhs: CBig) -> CBig {
        let p = self.prec.max(rhs.prec);
        CBig::new(self.re.add(&rhs.re, p, RM), self.im.add(&rhs.im, p, RM), p)
    }
}

impl Sub for CBig {
    type Output = CBig;
    fn sub(self, rhs: CBig) -> CBig {
        let p = self.prec.max(rhs.prec);
        CBig::new(self.re.sub(&rhs.re, p, RM), self.im.sub(&rhs.im, p, RM), p)
    }
}

impl Mul for CBig {
    type Output = CBig;
    fn mul(self, rhs: CBig) -> CBig {
        let p = self.prec.max(rhs.prec);
        let re = self
            .re
            .mul(&rhs.re, p, RM)
            .sub(&self.im.mul(&rhs.im, p, RM), p, RM);
        let im = self
            .re
            .mul(&rhs.im, p, RM)
            .add(&self.im.mul(&rhs.re, p, RM), p, RM);
        CBig::new(re, im, p)
    }
}

impl Div for CBig {
    type Output = CBig;
    fn div(self, rhs: CBig) -> CBig {
        let p = self.prec.max(rhs.prec);
        let d = rhs.norm_sqr(p);
        let re = self
            .re
            .mul(&rhs.re, p, RM)
            .add(&self.im.mul(&rhs.im, p, RM), p, RM);
        let im = self
            .im
            .mul(&rhs.re, p, RM)
            .sub(&self.re.mul(&rhs.im, p, RM), p, RM);
        CBig::new(re.div(&d, p, RM), im.div(&d, p, RM), p)
    }
}

impl Neg for CBig {
    type Output = CBig;
    fn neg(self) -> CBig {
        CBig::new(self.re.neg(), self.im.neg(), self.prec)
    }
}

impl Zero for CBig {
    fn zero() -> Self {
        let p = big_precision();
        CBig::new(BigFloat::from_i8(0, p), BigFloat::from_i8(0, p), p)
    }
    fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }
}

impl One for CBig {
    fn one() -> Self {
        let p = big_precision();
        CBig::new(BigFloat::from_i8(1, p), BigFloat::from_i8(0, p), p)
    }
}

impl Scalar for CBig {
    const EXACT: bool = false;

    fn from_int(n: i64) -> Self {
        let p = big_precision();
        CBig::new(BigFloat::from_i64(n, p), BigFloat::from_i8(0, p), p)
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        assert!(den != 0, "zero denominator");
        let p = big_precision();
        let n = BigFloat::from_i64(num, p);
        let d = BigFloat::from_i64(den, p);
        CBig::new(n.div(&d, p, RM), BigFloat::from_i8(0, p), p)
    }

    fn from_rational(r: &BigRational) -> Self {
        let p = big_precision();
        let parse =
            |s: &str| CONSTS.with(|cc| BigFloat::parse(s, Radix::Dec, p, RM, &mut cc.borrow_mut()));
        let n = parse(&r.numer().to_string());
        let d = parse(&r.denom().to_string());
        CBig::new(n.div(&d, p, RM), BigFloat::from_i8(0, p), p)
    }

    fn invert(&self) -> Result<Self> {
        if Zero::is_zero(self) {
            return Err(Error::DivisionByZero);
        }
        Ok(CBig::one() / self.clone())
    }

    fn ln(&self) -> Result<Self> {
        if Zero::is_zero(self) {
            return Err(Error::DivisionByZero);
        }
        let p = self.prec;
        let n2 = self.norm_sqr(p);
        let re = CONSTS.with(|cc| n2.ln(p, RM, &mut cc.borrow_mut()));
        let re = re.div(&BigFloat::from_i8(2, p), p, RM);
        let im = CBig::atan2(&self.im, &self.re, p);
        Ok(CBig::new(re, im, p))
    }

    fn conj(&self) -> Self {
        CBig::new(self.re.clone(), self.im.clone().neg(), self.prec)
    }

    fn sqrt(&self) -> Result<Self> {
        if Zero::is_zero(self) {
            return Ok(CBig::zero());
        }
        let (re, im) = self.approx_parts();
        let seed = num_complex::Complex64::new(re, im).sqrt();
        let mut w = CBig::from_f64_parts(seed.re, seed.im);
        // Newton: w <- (w + z/w)/2, doubling correct digits per step
        let half = CBig::from_ratio(1, 2);
        let steps = (self.prec as f64 / 52.0).log2().ceil().max(1.0) as usize + 2;
        for _ in 0..steps {
            w = (w.clone() + self.clone() / w.clone()) * half.clone();
        }
        Ok(w)
    }

    fn magnitude(&self) -> f64 {
        let (re, im) = self.approx_parts();
        re.hypot(im)
    }

    fn approx_parts(&self) -> (f64, f64) {
        (bf_to_f64(&self.re), bf_to_f64(&self.im))
    }

    fn default_tol() -> f64 {
        1e-12
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_field_ops_exact() {
        let a = rat(2, 3);
        let b = rat(5, 7);
        assert_eq!(a.clone() + b.clone(), rat(29, 21));
        assert_eq!(a.clone() * b.clone(), rat(10, 21));
        assert_eq!(a.clone().invert().unwrap(), rat(3, 2));
        assert_eq!(rat(0, 1).invert(), Err(Error::DivisionByZero));
        assert_eq!(a.ln(), Err(Error::LogUnavailable));
        assert!(Scalar::eq_default(&a, &rat(2, 3)));
        assert_eq!(a.powi(-2).unwrap(), rat(9, 4));
    }

    #[test]
    fn complex_double_ln() {
        let z = C64::from_ratio(1, 2);
        let l = Scalar::ln(&z).unwrap();
        assert!((l.re - (-std::f64::consts::LN_2)).abs() < 1e-15);
        // principal branch of a negative number
        let m = Scalar::ln(&C64::from_int(-1)).unwrap();
        assert!((m.im - std::f64::consts::PI).abs() < 1e-15);
    }

    #[test]
    fn big_float_basics() {
        set_big_precision(192);
        let a = CBig::from_ratio(1, 3);
        let b = CBig::from_int(3);
        let prod = a.clone() * b;
        assert!(prod.eq_tol(&CBig::one(), 1e-40));
        let l = CBig::from_int(-1).ln().unwrap();
        let (re, im) = l.approx_parts();
        assert!(re.abs() < 1e-30);
        assert!((im - std::f64::consts::PI).abs() < 1e-14);
        // division round-trip
        let q = CBig::from_ratio(22, 7);
        let r = q.clone() / CBig::from_int(11);
        assert!((r.magnitude() - 2.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn tolerance_policy() {
        let a = Complex64::new(1.0, 0.0);
        let b = Complex64::new(1.0 + 1e-13, 0.0);
        assert!(a.eq_default(&b));
        let c = Complex64::new(1.0 + 1e-9, 0.0);
        assert!(!a.eq_default(&c));
        assert!(a.eq_tol(&c, 1e-6));
    }
}
