//! Dense univariate polynomials over a [`Scalar`].

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense polynomial, `coeffs[k]` is the coefficient of `x^k`.
/// Invariant: no trailing zero coefficients (the zero polynomial is empty).
#[derive(Clone, Debug, PartialEq)]
pub struct Poly<S> {
    coeffs: Vec<S>,
}

impl<S: Scalar> Poly<S> {
    pub fn new(mut coeffs: Vec<S>) -> Self {
        while coeffs.last().map_or(false, |c| c.is_zero()) {
            coeffs.pop();
        }
        Poly { coeffs }
    }

    pub fn zero() -> Self {
        Poly { coeffs: vec![] }
    }

    pub fn constant(c: S) -> Self {
        Poly::new(vec![c])
    }

    /// The monic linear factor `x - a`.
    pub fn linear(a: S) -> Self {
        Poly::new(vec![-a, S::one()])
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn degree(&self) -> Option<usize> {
        if self.coeffs.is_empty() {
            None
        } else {
            Some(self.coeffs.len() - 1)
        }
    }

    pub fn coeffs(&self) -> &[S] {
        &self.coeffs
    }

    pub fn coeff(&self, k: usize) -> S {
        self.coeffs.get(k).cloned().unwrap_or_else(S::zero)
    }

    pub fn leading(&self) -> Option<&S> {
        self.coeffs.last()
    }

    pub fn eval(&self, x: &S) -> S {
        let mut acc = S::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc * x.clone() + c.clone();
        }
        acc
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut out = Vec::with_capacity(n);
        for k in 0..n {
            out.push(self.coeff(k) + other.coeff(k));
        }
        Poly::new(out)
    }

    pub fn sub(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut out = Vec::with_capacity(n);
        for k in 0..n {
            out.push(self.coeff(k) - other.coeff(k));
        }
        Poly::new(out)
    }

    pub fn neg(&self) -> Self {
        Poly::new(self.coeffs.iter().map(|c| -c.clone()).collect())
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Poly::zero();
        }
        let mut out = vec![S::zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] = out[i + j].clone() + a.clone() * b.clone();
            }
        }
        Poly::new(out)
    }

    pub fn scale(&self, k: &S) -> Self {
        Poly::new(self.coeffs.iter().map(|c| c.clone() * k.clone()).collect())
    }

    pub fn derivative(&self) -> Self {
        if self.coeffs.len() <= 1 {
            return Poly::zero();
        }
        let mut out = Vec::with_capacity(self.coeffs.len() - 1);
        for (k, c) in self.coeffs.iter().enumerate().skip(1) {
            out.push(c.clone() * S::from_int(k as i64));
        }
        Poly::new(out)
    }

    /// Antiderivative with zero constant term.
    pub fn antiderivative(&self) -> Result<Self> {
        let mut out = Vec::with_capacity(self.coeffs.len() + 1);
        out.push(S::zero());
        for (k, c) in self.coeffs.iter().enumerate() {
            out.push(c.clone() * S::from_int(k as i64 + 1).invert()?);
        }
        Ok(Poly::new(out))
    }

    /// Euclidean division `self = q * div + r` with `deg r < deg div`.
    pub fn div_rem(&self, div: &Self) -> Result<(Self, Self)> {
        let d = div.degree().ok_or(Error::DivisionByZero)?;
        let lead_inv = div.leading().unwrap().invert()?;
        let mut rem = self.coeffs.clone();
        if rem.len() <= d {
            return Ok((Poly::zero(), self.clone()));
        }
        let mut quot = vec![S::zero(); rem.len() - d];
        for k in (d..rem.len()).rev() {
            let q = rem[k].clone() * lead_inv.clone();
            if q.is_zero() {
                continue;
            }
            quot[k - d] = q.clone();
            for j in 0..=d {
                rem[k - d + j] = rem[k - d + j].clone() - q.clone() * div.coeff(j);
            }
        }
        Ok((Poly::new(quot), Poly::new(rem)))
    }

    /// Synthetic division by `(x - a)` of `self - self(a)`; the remainder of
    /// this division is zero by construction and is discarded, so the result
    /// is the difference quotient `(p(x) - p(a)) / (x - a)`.
    pub fn difference_quotient(&self, a: &S) -> Self {
        if self.coeffs.len() <= 1 {
            return Poly::zero();
        }
        let mut out = vec![S::zero(); self.coeffs.len() - 1];
        let mut carry = S::zero();
        for k in (1..self.coeffs.len()).rev() {
            carry = self.coeffs[k].clone() + carry * a.clone();
            out[k - 1] = carry.clone();
        }
        Poly::new(out)
    }

    /// Taylor coefficients at `center`, lowest order first, via repeated
    /// synthetic division (no large binomials).
    pub fn taylor_at(&self, center: &S, order: usize) -> Vec<S> {
        let mut work = self.coeffs.clone();
        let mut out = Vec::with_capacity(order + 1);
        for _ in 0..=order {
            if work.is_empty() {
                out.push(S::zero());
                continue;
            }
            // divide work by (x - center): remainder is the next coefficient
            let mut carry = S::zero();
            for k in (0..work.len()).rev() {
                let t = work[k].clone() + carry.clone() * center.clone();
                work[k] = carry;
                carry = t;
            }
            out.push(carry);
            work.pop();
        }
        out
    }

    /// Monic GCD via Euclid; meaningful on the exact backend only.
    pub fn gcd(&self, other: &Self) -> Result<Self> {
        let mut a = self.clone();
        let mut b = other.clone();
        while !b.is_zero() {
            let (_, r) = a.div_rem(&b)?;
            a = b;
            b = r;
        }
        if let Some(lead) = a.leading() {
            let inv = lead.invert()?;
            a = a.scale(&inv);
        }
        Ok(a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{rat, Rat, Scalar};

    fn p(cs: &[(i64, i64)]) -> Poly<Rat> {
        Poly::new(cs.iter().map(|&(n, d)| rat(n, d)).collect())
    }

    #[test]
    fn eval_and_arith() {
        // (x^2 + 2x + 3) at x = 2 -> 11
        let f = p(&[(3, 1), (2, 1), (1, 1)]);
        assert_eq!(f.eval(&rat(2, 1)), rat(11, 1));
        let g = p(&[(1, 1), (1, 1)]); // x + 1
        assert_eq!(f.mul(&g).eval(&rat(2, 1)), rat(33, 1));
        assert_eq!(f.derivative(), p(&[(2, 1), (2, 1)]));
        assert_eq!(
            f.derivative().antiderivative().unwrap(),
            p(&[(0, 1), (2, 1), (1, 1)])
        );
    }

    #[test]
    fn div_rem_roundtrip() {
        let f = p(&[(1, 1), (0, 1), (2, 1), (5, 1)]);
        let g = p(&[(1, 2), (3, 1)]);
        let (q, r) = f.div_rem(&g).unwrap();
        assert_eq!(q.mul(&g).add(&r), f);
        assert!(r.degree().unwrap_or(0) < g.degree().unwrap());
    }

    #[test]
    fn taylor_shift() {
        // x^3 at center 1: 1 + 3u + 3u^2 + u^3
        let f = p(&[(0, 1), (0, 1), (0, 1), (1, 1)]);
        let t = f.taylor_at(&rat(1, 1), 4);
        assert_eq!(
            t,
            vec![rat(1, 1), rat(3, 1), rat(3, 1), rat(1, 1), rat(0, 1)]
        );
    }

    #[test]
    fn difference_quotient_exact() {
        // (p(x) - p(a))/(x - a) for p = x^3 - 2x, a = 2: x^2 + 2x + 2
        let f = p(&[(0, 1), (-2, 1), (0, 1), (1, 1)]);
        let q = f.difference_quotient(&rat(2, 1));
        assert_eq!(q, p(&[(2, 1), (2, 1), (1, 1)]));
        // consistency: q * (x - a) + p(a) == p
        let rebuilt = q
            .mul(&Poly::linear(rat(2, 1)))
            .add(&Poly::constant(f.eval(&rat(2, 1))));
        assert_eq!(rebuilt, f);
    }

    #[test]
    fn gcd_monic() {
        // gcd((x-1)^2 (x+2), (x-1)(x+3)) = x - 1
        let a = Poly::linear(rat(1, 1))
            .mul(&Poly::linear(rat(1, 1)))
            .mul(&Poly::linear(rat(-2, 1)));
        let b = Poly::linear(rat(1, 1)).mul(&Poly::linear(rat(-3, 1)));
        assert_eq!(a.gcd(&b).unwrap(), Poly::linear(rat(1, 1)));
    }
}
