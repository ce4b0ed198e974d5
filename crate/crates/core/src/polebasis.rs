//! Functions represented on the pole basis `sum c_{j,k} / (x - s_j)^k` over a
//! fixed root list. All orders are >= 1, so every such function vanishes at
//! infinity.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::laurent::LaurentSeries;
use crate::poly::Poly;
use crate::ratfun::RatFun;
use crate::scalar::Scalar;

/// Sparse pole-basis function. Keys are `(root index, order >= 1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PoleBasis<S> {
    terms: BTreeMap<(usize, u32), S>,
}

impl<S: Scalar> Default for PoleBasis<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Scalar> PoleBasis<S> {
    pub fn new() -> Self {
        PoleBasis {
            terms: BTreeMap::new(),
        }
    }

    pub fn from_terms(terms: impl IntoIterator<Item = ((usize, u32), S)>) -> Self {
        let mut pb = PoleBasis::new();
        for ((j, k), c) in terms {
            pb.push(j, k, c);
        }
        pb
    }

    pub fn push(&mut self, root: usize, order: u32, coeff: S) {
        assert!(order >= 1, "pole-basis orders start at 1");
        let slot = self.terms.entry((root, order)).or_insert_with(S::zero);
        *slot = slot.clone() + coeff;
        if slot.is_zero() {
            self.terms.remove(&(root, order));
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&(usize, u32), &S)> {
        self.terms.iter()
    }

    pub fn coeff(&self, root: usize, order: u32) -> S {
        self.terms
            .get(&(root, order))
            .cloned()
            .unwrap_or_else(S::zero)
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn max_order_at(&self, root: usize) -> u32 {
        self.terms
            .keys()
            .filter(|(j, _)| *j == root)
            .map(|&(_, k)| k)
            .max()
            .unwrap_or(0)
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (&(j, k), c) in other.terms.iter() {
            out.push(j, k, c.clone());
        }
        out
    }

    pub fn scale(&self, k: &S) -> Self {
        PoleBasis {
            terms: self
                .terms
                .iter()
                .map(|(key, c)| (*key, c.clone() * k.clone()))
                .filter(|(_, c)| !c.is_zero())
                .collect(),
        }
    }

    pub fn neg(&self) -> Self {
        PoleBasis {
            terms: self
                .terms
                .iter()
                .map(|(key, c)| (*key, -c.clone()))
                .collect(),
        }
    }

    /// Derivative in x: `1/(x-s)^k -> -k/(x-s)^{k+1}`.
    pub fn derivative(&self) -> Self {
        PoleBasis {
            terms: self
                .terms
                .iter()
                .map(|(&(j, k), c)| ((j, k + 1), c.clone() * S::from_int(-(k as i64))))
                .collect(),
        }
    }

    /// Numeric value at `x`; errors when `x` hits a pole that actually appears.
    pub fn eval(&self, x: &S, roots: &[S]) -> Result<S> {
        let mut acc = S::zero();
        for (&(j, k), c) in self.terms.iter() {
            let d = x.clone() - roots[j].clone();
            if d.is_zero() {
                return Err(Error::EvaluationAtPole);
            }
            acc = acc + c.clone() * d.invert()?.powi(k as i32)?;
        }
        Ok(acc)
    }

    /// Laurent expansion at root `i` up to `(x - s_i)^order`.
    pub fn local_expand(&self, i: usize, roots: &[S], order: i64) -> LaurentSeries<S> {
        let mut acc = LaurentSeries::zero(order);
        for (&(j, k), c) in self.terms.iter() {
            acc = acc.add(&pole_term_series(j, k, i, roots, order).scale(c));
        }
        acc
    }

    /// Dense rational-function reconstruction (for cross-checks).
    pub fn to_ratfun(&self, roots: &[S]) -> Result<RatFun<S>> {
        let mut acc = RatFun::zero();
        for (&(j, k), c) in self.terms.iter() {
            let lin = Poly::linear(roots[j].clone());
            let mut den = Poly::constant(S::one());
            for _ in 0..k {
                den = den.mul(&lin);
            }
            acc = acc.add(&RatFun::new(Poly::constant(c.clone()), den)?)?;
        }
        Ok(acc)
    }
}

/// Laurent series at root `i` of the basis function `1/(x - s_j)^k`.
pub fn pole_term_series<S: Scalar>(
    j: usize,
    k: u32,
    i: usize,
    roots: &[S],
    order: i64,
) -> LaurentSeries<S> {
    if i == j {
        return LaurentSeries::monomial(S::one(), -(k as i64), order);
    }
    // 1/(x-s_j)^k = sum_t binom(k+t-1, t) (-1)^t u^t / (s_i - s_j)^{k+t}
    let d = roots[i].clone() - roots[j].clone();
    let d_inv = d.invert().expect("distinct roots");
    if order < 0 {
        return LaurentSeries::zero(order);
    }
    let mut coeffs = Vec::with_capacity(order as usize + 1);
    let mut cur = d_inv.clone().powi(k as i32).expect("nonzero");
    coeffs.push(cur.clone());
    for t in 0..order {
        // c_{t+1} = c_t * -(k+t) / ((t+1) (s_i - s_j))
        let ratio = S::from_ratio(-((k as i64) + t), t + 1);
        cur = cur * ratio * d_inv.clone();
        coeffs.push(cur.clone());
    }
    LaurentSeries::new(0, order, coeffs)
}

/// Laurent series at root `i` of `1/(x - b)^k` for a point `b` that is not a
/// root (Taylor data of an off-root pole).
pub fn offroot_pole_series<S: Scalar>(
    b: &S,
    k: u32,
    i: usize,
    roots: &[S],
    order: i64,
) -> Result<LaurentSeries<S>> {
    let d = roots[i].clone() - b.clone();
    if d.is_zero() {
        return Err(Error::EvaluationAtPole);
    }
    let d_inv = d.invert()?;
    if order < 0 {
        return Ok(LaurentSeries::zero(order));
    }
    let mut coeffs = Vec::with_capacity(order as usize + 1);
    let mut cur = d_inv.clone().powi(k as i32)?;
    coeffs.push(cur.clone());
    for t in 0..order {
        let ratio = S::from_ratio(-((k as i64) + t), t + 1);
        cur = cur * ratio * d_inv.clone();
        coeffs.push(cur.clone());
    }
    Ok(LaurentSeries::new(0, order, coeffs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{rat, Rat, Scalar};

    #[test]
    fn eval_reference_values() {
        // omega with hbar = 1/10, s = 1, at x = 2 -> 1/10
        let roots = vec![rat(1, 1)];
        let omega = PoleBasis::from_terms([((0usize, 1u32), rat(1, 10))]);
        assert_eq!(omega.eval(&rat(2, 1), &roots).unwrap(), rat(1, 10));
        // empty at any x -> 0
        let empty: PoleBasis<Rat> = PoleBasis::new();
        assert_eq!(empty.eval(&rat(5, 1), &roots).unwrap(), rat(0, 1));
        // {(j=0, k=2, c=1)} with s_0 = 0 at x = 2 -> 1/4
        let sq = PoleBasis::from_terms([((0usize, 2u32), rat(1, 1))]);
        assert_eq!(sq.eval(&rat(2, 1), &[rat(0, 1)]).unwrap(), rat(1, 4));
        assert!(sq.eval(&rat(0, 1), &[rat(0, 1)]).is_err());
    }

    #[test]
    fn expansion_of_offdiagonal_double_pole() {
        // 1/(x-s_1)^2 expanded at s_0: {t: (t+1)/(s_1-s_0)^{t+2}}
        let roots = vec![rat(0, 1), rat(2, 1)];
        let f = PoleBasis::from_terms([((1usize, 2u32), rat(1, 1))]);
        let s = f.local_expand(0, &roots, 2);
        assert_eq!(s.coeff(0), rat(1, 4));
        assert_eq!(s.coeff(1), rat(2, 8));
        assert_eq!(s.coeff(2), rat(3, 16));
        // residue of the omega-like simple pole at its own root
        let om = PoleBasis::from_terms([((0usize, 1u32), rat(1, 10))]);
        assert_eq!(om.local_expand(0, &roots, 0).residue(), rat(1, 10));
        // no simple pole -> zero residue
        let sq = PoleBasis::from_terms([((0usize, 2u32), rat(1, 1))]);
        assert_eq!(sq.local_expand(0, &roots, 0).residue(), rat(0, 1));
    }

    #[test]
    fn ratfun_reconstruction_agrees() {
        let roots = vec![rat(1, 1), rat(-1, 2)];
        let f = PoleBasis::from_terms([
            ((0usize, 1u32), rat(3, 7)),
            ((1usize, 2u32), rat(-2, 5)),
            ((0usize, 3u32), rat(1, 11)),
        ]);
        let rf = f.to_ratfun(&roots).unwrap();
        for x in [rat(2, 1), rat(5, 3), rat(-4, 9)] {
            assert_eq!(f.eval(&x, &roots).unwrap(), rf.eval(&x).unwrap());
        }
    }

    #[test]
    fn derivative_matches_ratfun_derivative() {
        let roots = vec![rat(1, 1)];
        let f = PoleBasis::from_terms([((0usize, 1u32), rat(2, 1)), ((0usize, 2u32), rat(1, 3))]);
        let d = f.derivative();
        let rf = f.to_ratfun(&roots).unwrap().derivative().unwrap();
        let x = rat(7, 2);
        assert_eq!(d.eval(&x, &roots).unwrap(), rf.eval(&x).unwrap());
    }
}
