//! Rational functions in one variable: dense numerator over dense denominator,
//! normalized to a monic denominator (and fully reduced on the exact backend).

use crate::error::{Error, Result};
use crate::laurent::LaurentSeries;
use crate::poly::Poly;
use crate::scalar::Scalar;

/// Default cap on the principal-part depth of a local expansion.
pub const POLE_ORDER_CAP: usize = 64;

#[derive(Clone, Debug, PartialEq)]
pub struct RatFun<S> {
    num: Poly<S>,
    den: Poly<S>,
}

impl<S: Scalar> RatFun<S> {
    pub fn new(num: Poly<S>, den: Poly<S>) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::DivisionByZero);
        }
        let mut f = RatFun { num, den };
        f.normalize()?;
        Ok(f)
    }

    pub fn from_poly(p: Poly<S>) -> Self {
        RatFun {
            num: p,
            den: Poly::constant(S::one()),
        }
    }

    pub fn zero() -> Self {
        RatFun::from_poly(Poly::zero())
    }

    pub fn constant(c: S) -> Self {
        RatFun::from_poly(Poly::constant(c))
    }

    pub fn num(&self) -> &Poly<S> {
        &self.num
    }

    pub fn den(&self) -> &Poly<S> {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    fn normalize(&mut self) -> Result<()> {
        if self.num.is_zero() {
            self.den = Poly::constant(S::one());
            return Ok(());
        }
        if S::EXACT {
            let g = self.num.gcd(&self.den)?;
            if g.degree().unwrap_or(0) > 0 {
                self.num = self.num.div_rem(&g)?.0;
                self.den = self.den.div_rem(&g)?.0;
            }
        }
        let lead_inv = self.den.leading().unwrap().invert()?;
        self.num = self.num.scale(&lead_inv);
        self.den = self.den.scale(&lead_inv);
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        RatFun::new(
            self.num.mul(&other.den).add(&other.num.mul(&self.den)),
            self.den.mul(&other.den),
        )
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        RatFun::new(
            self.num.mul(&other.den).sub(&other.num.mul(&self.den)),
            self.den.mul(&other.den),
        )
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        RatFun::new(self.num.mul(&other.num), self.den.mul(&other.den))
    }

    pub fn div(&self, other: &Self) -> Result<Self> {
        if other.is_zero() {
            return Err(Error::DivisionByZero);
        }
        RatFun::new(self.num.mul(&other.den), self.den.mul(&other.num))
    }

    pub fn neg(&self) -> Self {
        RatFun {
            num: self.num.neg(),
            den: self.den.clone(),
        }
    }

    pub fn scale(&self, k: &S) -> Self {
        RatFun {
            num: self.num.scale(k),
            den: self.den.clone(),
        }
    }

    pub fn derivative(&self) -> Result<Self> {
        RatFun::new(
            self.num
                .derivative()
                .mul(&self.den)
                .sub(&self.num.mul(&self.den.derivative())),
            self.den.mul(&self.den),
        )
    }

    pub fn eval(&self, x: &S) -> Result<S> {
        let d = self.den.eval(x);
        if d.is_zero() {
            return Err(Error::EvaluationAtPole);
        }
        Ok(self.num.eval(x) * d.invert()?)
    }

    /// Laurent expansion at `center` with Taylor part up to `(x-center)^order`.
    ///
    /// Errors with `PoleOrderOverflow` when the principal part is deeper than
    /// `cap`.
    pub fn local_expand(&self, center: &S, order: i64, cap: usize) -> Result<LaurentSeries<S>> {
        if self.num.is_zero() {
            return Ok(LaurentSeries::zero(order));
        }
        // den = u^p * (unit series); num similar. depth needed for the
        // quotient's Taylor part: order + p - q where q = num valuation.
        let den_val =
            poly_valuation_at(&self.den, center, cap).ok_or_else(|| Error::PoleOrderOverflow {
                center: format!("{center}"),
                order: cap + 1,
                cap,
            })?;
        // series inversion of the denominator costs 2 * valuation of horizon
        let need = order + 2 * den_val as i64;
        if need < 0 {
            return Ok(LaurentSeries::zero(order));
        }
        let num_t = self.num.taylor_at(center, need as usize);
        let mut den_t = self.den.taylor_at(center, need as usize);
        // on approximate backends the coefficients below the valuation are
        // roundoff residue of the root location; clear them so the series
        // inversion starts at the right order
        for c in den_t.iter_mut().take(den_val) {
            *c = S::zero();
        }
        let num_s = LaurentSeries::new(0, need, num_t);
        let den_s = LaurentSeries::new(0, need, den_t);
        let quotient = num_s.mul(&den_s.invert()?);
        if quotient.lo() < -(cap as i64) {
            return Err(Error::PoleOrderOverflow {
                center: format!("{center}"),
                order: (-quotient.lo()) as usize,
                cap,
            });
        }
        // quotient horizon = order by construction; keep it tight anyway
        debug_assert!(quotient.hi() >= order);
        let mut coeffs = Vec::with_capacity((order - quotient.lo() + 1).max(1) as usize);
        if quotient.lo() <= order {
            for e in quotient.lo()..=order {
                coeffs.push(quotient.coeff(e));
            }
            Ok(LaurentSeries::new(quotient.lo(), order, coeffs))
        } else {
            Ok(LaurentSeries::zero(order))
        }
    }
}

/// Order of vanishing of `p` at `center`, or None when it exceeds `cap`.
/// Approximate backends treat coefficients below `1e-10 * max|coeff|` as the
/// roundoff shadow of an exact zero (a float root is never exactly on the
/// polynomial's zero set).
fn poly_valuation_at<S: Scalar>(p: &Poly<S>, center: &S, cap: usize) -> Option<usize> {
    let deg = p.degree()?;
    let t = p.taylor_at(center, deg.min(cap + 1));
    if S::EXACT {
        t.iter().position(|c| !c.is_zero())
    } else {
        let scale = t.iter().map(|c| c.magnitude()).fold(0.0f64, f64::max);
        t.iter().position(|c| c.magnitude() > 1e-10 * scale)
    }
}
