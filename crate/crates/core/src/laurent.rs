//! Truncated Laurent series at a point.
//!
//! A series stores coefficients for exponents `lo ..= hi`; `hi` is the
//! truncation horizon (coefficients beyond it are unknown, not zero).
//! Multiplication propagates horizons by the min-rule.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug)]
pub struct LaurentSeries<S> {
    /// Exponent of `coeffs[0]`.
    lo: i64,
    /// Truncation horizon: coefficients valid for exponents `<= hi`.
    hi: i64,
    /// Coefficients for exponents `lo ..= hi` (length `hi - lo + 1`).
    coeffs: Vec<S>,
}

impl<S: Scalar> LaurentSeries<S> {
    pub fn new(lo: i64, hi: i64, mut coeffs: Vec<S>) -> Self {
        assert_eq!(
            coeffs.len() as i64,
            hi - lo + 1,
            "coefficient count mismatch"
        );
        // trim exact leading zeros so the min-rule is as sharp as possible
        let mut lo = lo;
        while lo < hi && coeffs.first().map_or(false, |c| c.is_zero()) {
            coeffs.remove(0);
            lo += 1;
        }
        LaurentSeries { lo, hi, coeffs }
    }

    /// The zero series, known up to `hi`.
    pub fn zero(hi: i64) -> Self {
        LaurentSeries {
            lo: hi,
            hi,
            coeffs: vec![S::zero()],
        }
    }

    pub fn constant(c: S, hi: i64) -> Self {
        let mut coeffs = vec![S::zero(); (hi + 1).max(1) as usize];
        if hi >= 0 {
            coeffs[0] = c;
            LaurentSeries::new(0, hi, coeffs)
        } else {
            LaurentSeries::zero(hi)
        }
    }

    /// Monomial `c * u^e`.
    pub fn monomial(c: S, e: i64, hi: i64) -> Self {
        if e > hi {
            return LaurentSeries::zero(hi);
        }
        let mut coeffs = vec![S::zero(); (hi - e + 1) as usize];
        coeffs[0] = c;
        LaurentSeries::new(e, hi, coeffs)
    }

    pub fn lo(&self) -> i64 {
        self.lo
    }

    pub fn hi(&self) -> i64 {
        self.hi
    }

    pub fn coeff(&self, e: i64) -> S {
        if e < self.lo || e > self.hi {
            S::zero()
        } else {
            self.coeffs[(e - self.lo) as usize].clone()
        }
    }

    /// Coefficient of `u^{-1}`.
    pub fn residue(&self) -> S {
        self.coeff(-1)
    }

    /// Exponent of the first not-exactly-zero coefficient, if any.
    pub fn order(&self) -> Option<i64> {
        self.coeffs
            .iter()
            .position(|c| !c.is_zero())
            .map(|i| self.lo + i as i64)
    }

    /// True when every stored coefficient of negative exponent is zero.
    pub fn principal_part_is_zero(&self) -> bool {
        (self.lo..0).all(|e| self.coeff(e).is_zero())
    }

    /// Largest magnitude over the stored principal-part coefficients.
    pub fn principal_part_norm(&self) -> f64 {
        (self.lo..0)
            .map(|e| self.coeff(e).magnitude())
            .fold(0.0, f64::max)
    }

    pub fn add(&self, other: &Self) -> Self {
        let hi = self.hi.min(other.hi);
        let lo = self.lo.min(other.lo).min(hi);
        let mut coeffs = Vec::with_capacity((hi - lo + 1) as usize);
        for e in lo..=hi {
            coeffs.push(self.coeff(e) + other.coeff(e));
        }
        LaurentSeries::new(lo, hi, coeffs)
    }

    pub fn neg(&self) -> Self {
        LaurentSeries {
            lo: self.lo,
            hi: self.hi,
            coeffs: self.coeffs.iter().map(|c| -c.clone()).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn scale(&self, k: &S) -> Self {
        LaurentSeries {
            lo: self.lo,
            hi: self.hi,
            coeffs: self.coeffs.iter().map(|c| c.clone() * k.clone()).collect(),
        }
    }

    /// Product with min-rule horizon `min(a.hi + b.lo, b.hi + a.lo)`.
    pub fn mul(&self, other: &Self) -> Self {
        let hi = (self.hi + other.lo).min(other.hi + self.lo);
        let lo = (self.lo + other.lo).min(hi);
        let mut coeffs = vec![S::zero(); (hi - lo + 1) as usize];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            let ea = self.lo + i as i64;
            for (j, b) in other.coeffs.iter().enumerate() {
                let e = ea + other.lo + j as i64;
                if e > hi {
                    break;
                }
                coeffs[(e - lo) as usize] =
                    coeffs[(e - lo) as usize].clone() + a.clone() * b.clone();
            }
        }
        LaurentSeries::new(lo, hi, coeffs)
    }

    /// Term-by-term derivative in the local variable.
    pub fn differentiate(&self) -> Self {
        let hi = self.hi - 1;
        let lo = (self.lo - 1).min(hi);
        let mut coeffs = vec![S::zero(); (hi - lo + 1) as usize];
        for (i, c) in self.coeffs.iter().enumerate() {
            let e = self.lo + i as i64;
            if e == 0 || e - 1 > hi {
                continue;
            }
            coeffs[(e - 1 - lo) as usize] = c.clone() * S::from_int(e);
        }
        LaurentSeries::new(lo, hi, coeffs)
    }

    /// Multiplicative inverse; requires a not-exactly-zero leading coefficient.
    /// The result is valid up to `hi - 2 * order`.
    pub fn invert(&self) -> Result<Self> {
        let ord = self.order().ok_or(Error::DivisionByZero)?;
        let lead = self.coeff(ord);
        let lead_inv = lead.invert()?;
        let rel = (self.hi - ord) as usize; // relative Taylor depth available
                                            // g = self / (lead * u^ord) = 1 + sum_{t>=1} g_t u^t
        let mut g = Vec::with_capacity(rel + 1);
        for t in 0..=rel {
            g.push(self.coeff(ord + t as i64) * lead_inv.clone());
        }
        // h = 1/g via h_t = -sum_{j=1..t} g_j h_{t-j}
        let mut h = vec![S::zero(); rel + 1];
        h[0] = S::one();
        for t in 1..=rel {
            let mut acc = S::zero();
            for j in 1..=t {
                acc = acc + g[j].clone() * h[t - j].clone();
            }
            h[t] = -acc;
        }
        let lo = -ord;
        let hi = self.hi - 2 * ord;
        let coeffs = h.into_iter().map(|c| c * lead_inv.clone()).collect();
        Ok(LaurentSeries::new(lo, hi, coeffs))
    }

    /// Evaluate the truncated series at local coordinate `u`.
    pub fn eval(&self, u: &S) -> Result<S> {
        let mut acc = S::zero();
        for (i, c) in self.coeffs.iter().enumerate() {
            let e = self.lo + i as i64;
            acc = acc + c.clone() * u.powi(e as i32)?;
        }
        Ok(acc)
    }
}
