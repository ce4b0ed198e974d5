//! The potential `V`: its derivative `V'` is the input data, a polynomial plus
//! simple poles
//!
//! ```text
//! V'(x) = sum_k t_k x^k + sum_p S_p / (x - alpha_p)
//! ```
//!
//! so `V` itself is a polynomial part plus `sum_p S_p ln(x - alpha_p)`.
//! The log terms only matter through the constant term of Taylor expansions;
//! everything else stays rational.

use crate::error::{Error, Result};
use crate::laurent::LaurentSeries;
use crate::poly::Poly;
use crate::ratfun::RatFun;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct Potential<S> {
    vprime_poly: Poly<S>,
    poles: Vec<(S, S)>,
    v_poly: Poly<S>,
}

/// Taylor data of `V` and `V'` at a regular point.
///
/// `v` carries the full Taylor series of `V` *except* the log part of its
/// constant term, which is returned separately as `log_terms` (coefficient,
/// argument) pairs; `v_const_collapsed` folds them in on log-capable backends.
#[derive(Clone, Debug)]
pub struct PotentialJet<S> {
    pub v: LaurentSeries<S>,
    pub vprime: LaurentSeries<S>,
    pub log_terms: Vec<(S, S)>,
}

impl<S: Scalar> PotentialJet<S> {
    /// Constant term of `V` with log contributions folded in.
    /// Errors with `LogUnavailable` on the exact backend when a log argument
    /// is not 1 (ln 1 = 0 stays exact).
    pub fn v_const_collapsed(&self) -> Result<S> {
        let mut acc = self.v.coeff(0);
        for (c, arg) in &self.log_terms {
            if (arg.clone() - S::one()).is_zero() {
                continue;
            }
            acc = acc + c.clone() * arg.ln()?;
        }
        Ok(acc)
    }
}

impl<S: Scalar> Potential<S> {
    pub fn new(vprime_coeffs: Vec<S>, poles: Vec<(S, S)>) -> Result<Self> {
        let vprime_poly = Poly::new(vprime_coeffs);
        for (i, (a, _)) in poles.iter().enumerate() {
            for (b, _) in poles.iter().skip(i + 1) {
                if (a.clone() - b.clone()).is_zero() {
                    return Err(Error::InvalidInput(
                        "potential poles must be distinct".into(),
                    ));
                }
            }
        }
        if vprime_poly.is_zero() && poles.is_empty() {
            return Err(Error::InvalidInput("potential must be nonempty".into()));
        }
        let v_poly = vprime_poly.antiderivative()?;
        Ok(Potential {
            vprime_poly,
            poles,
            v_poly,
        })
    }

    /// Purely polynomial potential from the coefficients of `V'`.
    pub fn polynomial(vprime_coeffs: Vec<S>) -> Result<Self> {
        Potential::new(vprime_coeffs, vec![])
    }

    pub fn vprime_poly(&self) -> &Poly<S> {
        &self.vprime_poly
    }

    pub fn poles(&self) -> &[(S, S)] {
        &self.poles
    }

    pub fn has_poles(&self) -> bool {
        !self.poles.is_empty()
    }

    /// `V'` as a dense rational function.
    pub fn vprime_ratfun(&self) -> Result<RatFun<S>> {
        let mut acc = RatFun::from_poly(self.vprime_poly.clone());
        for (alpha, strength) in &self.poles {
            let term = RatFun::new(
                Poly::constant(strength.clone()),
                Poly::linear(alpha.clone()),
            )?;
            acc = acc.add(&term)?;
        }
        Ok(acc)
    }

    pub fn vprime_eval(&self, x: &S) -> Result<S> {
        let mut acc = self.vprime_poly.eval(x);
        for (alpha, strength) in &self.poles {
            let d = x.clone() - alpha.clone();
            if d.is_zero() {
                return Err(Error::EvaluationAtPole);
            }
            acc = acc + strength.clone() * d.invert()?;
        }
        Ok(acc)
    }

    /// Taylor coefficients of `V'` at a regular point, orders `0..=order`.
    pub fn vprime_taylor(&self, center: &S, order: usize) -> Result<LaurentSeries<S>> {
        let mut coeffs = self.vprime_poly.taylor_at(center, order);
        for (alpha, strength) in &self.poles {
            let d = center.clone() - alpha.clone();
            if d.is_zero() {
                return Err(Error::EvaluationAtPole);
            }
            // S / (x - alpha) = S * sum_t (-1)^t u^t / (c - alpha)^{t+1}
            let d_inv = d.invert()?;
            let mut cur = strength.clone() * d_inv.clone();
            for c in coeffs.iter_mut().take(order + 1) {
                *c = c.clone() + cur.clone();
                cur = -(cur * d_inv.clone());
            }
        }
        Ok(LaurentSeries::new(0, order as i64, coeffs))
    }

    /// Taylor data of `V` (constant split off into log terms) and `V'`.
    pub fn taylor(&self, center: &S, order: usize) -> Result<PotentialJet<S>> {
        let vprime = self.vprime_taylor(center, order)?;
        let mut v_coeffs = self.v_poly.taylor_at(center, order);
        let mut log_terms = Vec::with_capacity(self.poles.len());
        for (alpha, strength) in &self.poles {
            let d = center.clone() - alpha.clone();
            if d.is_zero() {
                return Err(Error::EvaluationAtPole);
            }
            log_terms.push((strength.clone(), d.clone()));
            // ln(d + u) - ln(d) = sum_{t>=1} (-1)^{t+1} u^t / (t d^t)
            let d_inv = d.invert()?;
            let mut pow = d_inv.clone();
            for t in 1..=order {
                let c = strength.clone()
                    * pow.clone()
                    * S::from_ratio(if t % 2 == 1 { 1 } else { -1 }, t as i64);
                v_coeffs[t] = v_coeffs[t].clone() + c;
                pow = pow * d_inv.clone();
            }
        }
        Ok(PotentialJet {
            v: LaurentSeries::new(0, order as i64, v_coeffs),
            vprime,
            log_terms,
        })
    }

    /// Value of `V` at a point, requiring a log-capable backend when `V'` has
    /// poles.
    pub fn v_eval(&self, x: &S) -> Result<S> {
        let jet = self.taylor(x, 0)?;
        jet.v_const_collapsed()
    }

    /// Copy with the polynomial coefficient `t_p` shifted by `delta`.
    pub fn perturb_coeff(&self, p: usize, delta: S) -> Result<Self> {
        let mut coeffs: Vec<S> = self.vprime_poly.coeffs().to_vec();
        if coeffs.len() <= p {
            coeffs.resize(p + 1, S::zero());
        }
        coeffs[p] = coeffs[p].clone() + delta;
        Potential::new(coeffs, self.poles.clone())
    }

    /// Overall scale `V -> lambda V` (for homogeneity checks).
    pub fn scale(&self, lambda: &S) -> Result<Self> {
        let coeffs = self
            .vprime_poly
            .coeffs()
            .iter()
            .map(|c| c.clone() * lambda.clone())
            .collect();
        let poles = self
            .poles
            .iter()
            .map(|(a, s)| (a.clone(), s.clone() * lambda.clone()))
            .collect();
        Potential::new(coeffs, poles)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{rat, Rat, Scalar, C64};

    fn gaudin() -> Potential<Rat> {
        // V' = x - 1/x
        Potential::new(vec![rat(0, 1), rat(1, 1)], vec![(rat(0, 1), rat(-1, 1))]).unwrap()
    }

    #[test]
    fn pure_polynomial_taylor() {
        // V' = x at 0, order 3: V {2: 1/2}, V' {1: 1}
        let p = Potential::polynomial(vec![rat(0, 1), rat(1, 1)]).unwrap();
        let jet = p.taylor(&rat(0, 1), 3).unwrap();
        assert_eq!(jet.v.coeff(2), rat(1, 2));
        assert_eq!(jet.v.coeff(0), rat(0, 1));
        assert_eq!(jet.v.coeff(1), rat(0, 1));
        assert_eq!(jet.v.coeff(3), rat(0, 1));
        assert_eq!(jet.vprime.coeff(1), rat(1, 1));
        assert!(jet.log_terms.is_empty());
        assert_eq!(jet.v_const_collapsed().unwrap(), rat(0, 1));
    }

    #[test]
    fn gaudin_taylor_at_root() {
        // V = x^2/2 - ln x at center 1: V(1) = 1/2 (the log argument is 1),
        // V'(1) = 0, V''(1) = 2.
        let jet = gaudin().taylor(&rat(1, 1), 2).unwrap();
        assert_eq!(jet.v_const_collapsed().unwrap(), rat(1, 2));
        assert_eq!(jet.vprime.coeff(0), rat(0, 1));
        assert_eq!(jet.vprime.coeff(1), rat(2, 1));
        // V Taylor: [u^2] V = V''/2 = 1
        assert_eq!(jet.v.coeff(2), rat(1, 1));
        assert_eq!(jet.v.coeff(1), rat(0, 1));
    }

    #[test]
    fn poly_plus_pole_derivatives() {
        // V' = x + 2/(x-3) at 1: V'(1) = 1 - 1 = 0, V''(1) = 1 - 2/4 = 1/2
        let p = Potential::new(vec![rat(0, 1), rat(1, 1)], vec![(rat(3, 1), rat(2, 1))]).unwrap();
        let s = p.vprime_taylor(&rat(1, 1), 1).unwrap();
        assert_eq!(s.coeff(0), rat(0, 1));
        assert_eq!(s.coeff(1), rat(1, 2));
        // finite-difference cross-check of the second derivative
        let h = rat(1, 1_000_000);
        let fd = (p.vprime_eval(&(rat(1, 1) + h.clone())).unwrap()
            - p.vprime_eval(&(rat(1, 1) - h.clone())).unwrap())
            / (rat(2, 1) * h);
        assert!((fd - rat(1, 2)).magnitude() < 1e-9);
    }

    #[test]
    fn log_constant_needs_capable_backend() {
        // Gaudin V at x = 2: rational backend refuses (ln 2), complex accepts
        let err = gaudin().v_eval(&rat(2, 1)).unwrap_err();
        assert_eq!(err, Error::LogUnavailable);
        let pc: Potential<C64> = Potential::new(
            vec![C64::from_int(0), C64::from_int(1)],
            vec![(C64::from_int(0), C64::from_int(-1))],
        )
        .unwrap();
        let v = pc.v_eval(&C64::from_int(2)).unwrap();
        assert!((v.re - (2.0 - 2.0_f64.ln())).abs() < 1e-14);
    }

    #[test]
    fn vprime_ratfun_matches_eval() {
        let p = gaudin();
        let rf = p.vprime_ratfun().unwrap();
        for x in [rat(2, 1), rat(-5, 3), rat(7, 11)] {
            assert_eq!(rf.eval(&x).unwrap(), p.vprime_eval(&x).unwrap());
        }
    }
}
