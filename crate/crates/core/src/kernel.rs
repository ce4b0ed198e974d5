//! Recursion-kernel data.
//!
//! The kernel `K(x_0, x)` is determined (up to one free coefficient per root)
//! by the first-order ODE
//!
//! ```text
//! (2 omega(x) - V'(x) - hbar d/dx) K(x_0, x) = G(x_0, x)
//! ```
//!
//! together with analyticity of `K` at every root. Writing
//! `K(x_0, x) = sum_k K_{i,k}(x_0) (x - s_i)^k` near root `i` and expanding
//! each `K_{i,k}(x_0) = sum_{j,k'} K_{i,k;j,k'} / (x_0 - s_j)^{k'}`, matching
//! the coefficient of `(x - s_i)^{k-1}` in the ODE gives
//!
//! ```text
//! hbar (2 - k) K_{i,k} = [G]_{k-1} - sum_{l=0}^{k-1} (2 wt_l - v_{l}) K_{i,k-1-l}
//! ```
//!
//! which determines every order except `k = 2`, where the left side vanishes:
//! there the right side must vanish on its own (this is the Bethe condition
//! combined with `A = T^{-1}`, and is verified, not solved), and `K_{i,2}` is
//! a free choice, zero by default. The table is built purely from this
//! matching; the integral representation of `K` is never used.

use std::collections::BTreeMap;

use crate::bethe::BetheSystem;
use crate::error::{Error, Result};
use crate::poly::Poly;
use crate::ratfun::RatFun;
use crate::scalar::Scalar;

/// Pole-basis expansion of one `K_{i,k}(x_0)`: keys are `(j, k')`.
pub type KernelCoeff<S> = BTreeMap<(usize, u32), S>;

/// Relative tolerance for the order-1 matching residual on float backends.
const BETHE_MATCH_TOL: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct KernelTable<S> {
    k_max: usize,
    /// `coef[i][k]` = pole-basis data of `K_{i,k}(x_0)`.
    coef: Vec<Vec<KernelCoeff<S>>>,
    /// The chosen free coefficients `K_{i,2}` (empty = canonical zero choice).
    k2_choice: Option<Vec<KernelCoeff<S>>>,
}

impl<S: Scalar> KernelTable<S> {
    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn coeff(&self, i: usize, k: usize) -> &KernelCoeff<S> {
        &self.coef[i][k]
    }

    pub fn k2_choice(&self) -> Option<&Vec<KernelCoeff<S>>> {
        self.k2_choice.as_ref()
    }

    /// Diagnostics hook: scale one stored coefficient by `1 + rel`.
    pub fn corrupt_entry(&mut self, i: usize, k: usize, rel: f64) {
        let factor = S::one() + S::from_ratio((rel * 1e15) as i64, 1_000_000_000_000_000);
        if let Some((_, v)) = self.coef[i][k].iter_mut().next() {
            *v = v.clone() * factor;
        }
    }
}

fn map_scale<S: Scalar>(m: &KernelCoeff<S>, k: &S) -> KernelCoeff<S> {
    m.iter()
        .map(|(key, v)| (*key, v.clone() * k.clone()))
        .collect()
}

fn map_add_into<S: Scalar>(into: &mut KernelCoeff<S>, from: &KernelCoeff<S>, scale: &S) {
    for (key, v) in from {
        let slot = into.entry(*key).or_insert_with(S::zero);
        *slot = slot.clone() + v.clone() * scale.clone();
        if slot.is_zero() {
            into.remove(key);
        }
    }
}

fn map_norm<S: Scalar>(m: &KernelCoeff<S>) -> f64 {
    m.values().map(|v| v.magnitude()).fold(0.0, f64::max)
}

/// `[G(x_0, x)]_{(x-s_i)^{k-1}}` as pole-basis data in `x_0`, `k >= 1`.
fn g_coefficient<S: Scalar>(sys: &BetheSystem<S>, i: usize, k: usize) -> Result<KernelCoeff<S>> {
    let roots = sys.roots();
    let a = sys.inverse_hessian();
    let mut out = KernelCoeff::new();
    out.insert((i, k as u32), -S::one());
    for j in 0..roots.len() {
        let mut acc = S::zero();
        for b in 0..roots.len() {
            if b == i {
                continue;
            }
            let d = roots[b].clone() - roots[i].clone();
            acc = acc + a.at(b, j).clone() * d.invert()?.powi(k as i32)?;
        }
        let val = -(S::from_int(2) * acc);
        if !val.is_zero() {
            let slot = out.entry((j, 2)).or_insert_with(S::zero);
            *slot = slot.clone() + val;
            if slot.is_zero() {
                out.remove(&(j, 2));
            }
        }
    }
    Ok(out)
}

/// `2 wt_l - v_l` where `wt_l = hbar sum_{a != i} (-1)^l / (s_i - s_a)^{l+1}`
/// and `v_l` is the order-`l` Taylor coefficient of `V'` at `s_i`.
fn ode_factor<S: Scalar>(sys: &BetheSystem<S>, i: usize, l: usize, vp_taylor: &[S]) -> Result<S> {
    let roots = sys.roots();
    let mut wt = S::zero();
    for a in 0..roots.len() {
        if a == i {
            continue;
        }
        let d = (roots[i].clone() - roots[a].clone()).invert()?;
        let term = d.powi(l as i32 + 1)?;
        wt = wt + if l % 2 == 0 { term } else { -term };
    }
    Ok(S::from_int(2) * sys.hbar().clone() * wt - vp_taylor[l].clone())
}

/// Build the kernel coefficient table up to order `k_max`, optionally with a
/// custom choice of the free coefficients `K_{i,2}`.
pub fn build_kernel_table<S: Scalar>(
    sys: &BetheSystem<S>,
    k_max: usize,
    k2_choice: Option<Vec<KernelCoeff<S>>>,
) -> Result<KernelTable<S>> {
    if k_max < 3 {
        return Err(Error::InvalidInput("kernel table needs k_max >= 3".into()));
    }
    let m = sys.root_count();
    let h_inv = sys.hbar().invert()?;
    let mut coef: Vec<Vec<KernelCoeff<S>>> = Vec::with_capacity(m);
    for i in 0..m {
        let vp = sys.potential().vprime_taylor(&sys.roots()[i], k_max)?;
        let vp_taylor: Vec<S> = (0..=k_max as i64).map(|t| vp.coeff(t)).collect();
        let mut rows: Vec<KernelCoeff<S>> = Vec::with_capacity(k_max + 1);
        // K_{i,0} = (1/hbar) sum_j A_{i,j} / (x_0 - s_j)^2
        let mut k0 = KernelCoeff::new();
        for j in 0..m {
            let v = sys.inverse_hessian().at(i, j).clone() * h_inv.clone();
            if !v.is_zero() {
                k0.insert((j, 2), v);
            }
        }
        rows.push(k0);
        for k in 1..=k_max {
            let mut rhs = g_coefficient(sys, i, k)?;
            for l in 0..k {
                let f = ode_factor(sys, i, l, &vp_taylor)?;
                if f.is_zero() {
                    continue;
                }
                map_add_into(&mut rhs, &rows[k - 1 - l], &(-f));
            }
            if k == 2 {
                // hbar (2-k) vanishes: the right side is the Bethe/A=T^{-1}
                // consistency residual and must vanish on its own.
                let scale = 1.0_f64.max(map_norm(&rows[0])).max(map_norm(&rows[1]));
                let resid = map_norm(&rhs) / scale;
                let ok = if S::EXACT {
                    rhs.values().all(|v| v.is_zero())
                } else {
                    resid <= BETHE_MATCH_TOL
                };
                if !ok {
                    return Err(Error::BetheConsistencyViolation {
                        root: i,
                        residual: resid,
                    });
                }
                rows.push(k2_choice.as_ref().map(|c| c[i].clone()).unwrap_or_default());
            } else {
                let inv = (sys.hbar().clone() * S::from_int(2 - k as i64)).invert()?;
                rows.push(map_scale(&rhs, &inv));
            }
        }
        coef.push(rows);
    }
    Ok(KernelTable {
        k_max,
        coef,
        k2_choice,
    })
}

/// Report from re-checking the built table against the ODE and the closed
/// forms of the first coefficients.
#[derive(Clone, Debug)]
pub struct KernelReport {
    pub max_ode_residual: f64,
    pub k1_closed_form_residual: f64,
    pub k3_closed_form_residual: f64,
}

impl KernelReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_ode_residual <= tol
            && self.k1_closed_form_residual <= tol
            && self.k3_closed_form_residual <= tol
    }
}

/// Re-expand both sides of the defining ODE at every root up to the given
/// order and report the worst residual, together with the deviation of
/// `K_{i,1}` and `K_{i,3}` from their closed forms.
pub fn validate_kernel<S: Scalar>(
    table: &KernelTable<S>,
    sys: &BetheSystem<S>,
    order: usize,
) -> Result<KernelReport> {
    let order = order.min(table.k_max);
    let m = sys.root_count();
    let mut max_ode = 0.0f64;
    let mut k1_res = 0.0f64;
    let mut k3_res = 0.0f64;
    for i in 0..m {
        let vp = sys
            .potential()
            .vprime_taylor(&sys.roots()[i], order.max(3))?;
        let vp_taylor: Vec<S> = (0..=order.max(3) as i64).map(|t| vp.coeff(t)).collect();
        for k in 1..=order {
            // residual of hbar (2-k) K_{i,k} - (G_{k-1} - conv_k)
            let mut rhs = g_coefficient(sys, i, k)?;
            for l in 0..k {
                let f = ode_factor(sys, i, l, &vp_taylor)?;
                map_add_into(&mut rhs, &table.coef[i][k - 1 - l], &(-f));
            }
            let lhs_scale = sys.hbar().clone() * S::from_int(2 - k as i64);
            let mut diff = map_scale(&table.coef[i][k], &lhs_scale);
            map_add_into(&mut diff, &rhs, &(-S::one()));
            let scale = 1.0_f64.max(map_norm(&table.coef[i][k]));
            max_ode = max_ode.max(map_norm(&diff) / scale);
        }
        // closed form of K_{i,1}:
        // hbar K_{i,1} = -1/(x_0-s_i) - 2 sum_{a != i} sum_j A_{a,j} / ((s_a-s_i)(x_0-s_j)^2)
        let mut k1 = g_coefficient(sys, i, 1)?;
        map_add_into(
            &mut k1,
            &map_scale(&table.coef[i][1], sys.hbar()),
            &(-S::one()),
        );
        k1_res = k1_res.max(map_norm(&k1));
        // closed form of K_{i,3}:
        // hbar K_{i,3} = -hbar (2 sum 1/(s_a-s_i)^2 + V''/hbar) K_{i,1}
        //               -hbar (2 sum 1/(s_a-s_i)^3 + V'''/(2hbar)) K_{i,0}
        //               + 1/(x_0-s_i)^3 + 2 sum_{a!=i} sum_j A_{a,j}/((s_a-s_i)^3 (x_0-s_j)^2)
        let mut expect = KernelCoeff::new();
        let mut c1 = S::zero();
        let mut c0 = S::zero();
        for a in 0..m {
            if a == i {
                continue;
            }
            let d = (sys.roots()[a].clone() - sys.roots()[i].clone()).invert()?;
            c1 = c1 + S::from_int(2) * d.clone().powi(2)?;
            c0 = c0 + S::from_int(2) * d.clone().powi(3)?;
            for j in 0..m {
                let v =
                    S::from_int(2) * sys.inverse_hessian().at(a, j).clone() * d.clone().powi(3)?;
                if !v.is_zero() {
                    let slot = expect.entry((j, 2)).or_insert_with(S::zero);
                    *slot = slot.clone() + v;
                }
            }
        }
        expect.insert((i, 3), S::one());
        let h_inv = sys.hbar().invert()?;
        c1 = c1 + vp_taylor[1].clone() * h_inv.clone();
        c0 = c0 + vp_taylor[2].clone() * h_inv.clone();
        map_add_into(
            &mut expect,
            &table.coef[i][1],
            &(-(sys.hbar().clone() * c1)),
        );
        map_add_into(
            &mut expect,
            &table.coef[i][0],
            &(-(sys.hbar().clone() * c0)),
        );
        let mut diff = map_scale(&table.coef[i][3], sys.hbar());
        map_add_into(&mut diff, &expect, &(-S::one()));
        let scale = 1.0_f64.max(map_norm(&table.coef[i][3]));
        k3_res = k3_res.max(map_norm(&diff) / scale);
    }
    Ok(KernelReport {
        max_ode_residual: max_ode,
        k1_closed_form_residual: k1_res,
        k3_closed_form_residual: k3_res,
    })
}

/// Evaluate `B(x_1, x_2)`, the two-variable symmetric kernel
/// `1/(2 (x_1-x_2)^2) + sum_{i,j} A_{i,j} / ((x_1-s_i)^2 (x_2-s_j)^2)`.
pub fn b_eval<S: Scalar>(sys: &BetheSystem<S>, x1: &S, x2: &S) -> Result<S> {
    let d = x1.clone() - x2.clone();
    if d.is_zero() {
        return Err(Error::EvaluationAtPole);
    }
    let mut acc = d.invert()?.powi(2)? * S::from_ratio(1, 2);
    acc = acc + b_pole_part_eval(sys, x1, x2)?;
    Ok(acc)
}

/// The pole-tensor part of `B` (without the universal `1/(2(x_1-x_2)^2)`).
pub fn b_pole_part_eval<S: Scalar>(sys: &BetheSystem<S>, x1: &S, x2: &S) -> Result<S> {
    let roots = sys.roots();
    let mut acc = S::zero();
    for i in 0..roots.len() {
        let d1 = x1.clone() - roots[i].clone();
        if d1.is_zero() {
            return Err(Error::EvaluationAtPole);
        }
        let f1 = d1.invert()?.powi(2)?;
        for j in 0..roots.len() {
            let aij = sys.inverse_hessian().at(i, j);
            if aij.is_zero() {
                continue;
            }
            let d2 = x2.clone() - roots[j].clone();
            if d2.is_zero() {
                return Err(Error::EvaluationAtPole);
            }
            acc = acc + aij.clone() * f1.clone() * d2.invert()?.powi(2)?;
        }
    }
    Ok(acc)
}

/// Evaluate `G(x_0, x) = 1/(x-x_0) + 2 sum_{i,j} A_{i,j}/((x-s_i)(x_0-s_j)^2)`.
pub fn g_eval<S: Scalar>(sys: &BetheSystem<S>, x0: &S, x: &S) -> Result<S> {
    let d = x.clone() - x0.clone();
    if d.is_zero() {
        return Err(Error::EvaluationAtPole);
    }
    let mut acc = d.invert()?;
    let roots = sys.roots();
    for i in 0..roots.len() {
        let d1 = (x.clone() - roots[i].clone()).invert()?;
        for j in 0..roots.len() {
            let aij = sys.inverse_hessian().at(i, j);
            if aij.is_zero() {
                continue;
            }
            let d2 = (x0.clone() - roots[j].clone()).invert()?.powi(2)?;
            acc = acc + S::from_int(2) * aij.clone() * d1.clone() * d2;
        }
    }
    Ok(acc)
}

/// `G(x_0, x)` as a dense rational function of `x` for a fixed numeric `x_0`
/// (used to check `B = -(1/2) dG/dx` structurally).
pub fn g_ratfun_in_x<S: Scalar>(sys: &BetheSystem<S>, x0: &S) -> Result<RatFun<S>> {
    let mut acc = RatFun::new(Poly::constant(S::one()), Poly::linear(x0.clone()))?;
    let roots = sys.roots();
    for i in 0..roots.len() {
        let mut c = S::zero();
        for j in 0..roots.len() {
            let d2 = (x0.clone() - roots[j].clone()).invert()?.powi(2)?;
            c = c + S::from_int(2) * sys.inverse_hessian().at(i, j).clone() * d2;
        }
        acc = acc.add(&RatFun::new(
            Poly::constant(c),
            Poly::linear(roots[i].clone()),
        )?)?;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bethe::{solve_bethe, NewtonOptions};
    use crate::potential::Potential;
    use crate::scalar::{rat, Rat};

    fn gaudin_sys() -> BetheSystem<Rat> {
        let pot =
            Potential::new(vec![rat(0, 1), rat(1, 1)], vec![(rat(0, 1), rat(-1, 1))]).unwrap();
        solve_bethe(&pot, rat(1, 10), &[rat(9, 10)], &NewtonOptions::default()).unwrap()
    }

    fn m2_sys() -> BetheSystem<Rat> {
        let pot = Potential::polynomial(vec![rat(0, 1), rat(1, 1)]).unwrap();
        solve_bethe(
            &pot,
            rat(1, 4),
            &[rat(-2, 5), rat(2, 5)],
            &NewtonOptions::default(),
        )
        .unwrap()
    }

    #[test]
    fn gaudin_low_order_coefficients() {
        let sys = gaudin_sys();
        let t = build_kernel_table(&sys, 8, None).unwrap();
        // K_{0,0;0,2} = A/hbar = 1/V''(s) = 1/2
        assert_eq!(t.coeff(0, 0).get(&(0, 2)), Some(&rat(1, 2)));
        // hbar K_{0,1;0,1} = -1
        assert_eq!(t.coeff(0, 1).get(&(0, 1)), Some(&rat(-10, 1)));
        // the free coefficient defaults to zero
        assert!(t.coeff(0, 2).is_empty());
        // K_{0,3}: 1/(hbar x_0^3) + v2/(hbar^2 x_0) - v3/(hbar v2 x_0^2)
        // (shifted to center 1) with v2 = 2, v3 = -1
        assert_eq!(t.coeff(0, 3).get(&(0, 3)), Some(&rat(10, 1)));
        assert_eq!(t.coeff(0, 3).get(&(0, 1)), Some(&rat(200, 1)));
        assert_eq!(t.coeff(0, 3).get(&(0, 2)), Some(&rat(5, 1)));
    }

    #[test]
    fn ode_revalidates_and_closed_forms_match() {
        for sys in [gaudin_sys(), m2_sys()] {
            let t = build_kernel_table(&sys, 8, None).unwrap();
            let rep = validate_kernel(&t, &sys, 8).unwrap();
            assert_eq!(rep.max_ode_residual, 0.0);
            assert_eq!(rep.k1_closed_form_residual, 0.0);
            assert_eq!(rep.k3_closed_form_residual, 0.0);
        }
    }

    #[test]
    fn corrupted_coefficient_is_flagged() {
        let sys = gaudin_sys();
        let mut t = build_kernel_table(&sys, 8, None).unwrap();
        t.corrupt_entry(0, 3, 1e-6);
        let rep = validate_kernel(&t, &sys, 8).unwrap();
        assert!(rep.max_ode_residual > 0.0 || rep.k3_closed_form_residual > 0.0);
        assert!(!rep.passes(1e-12));
    }

    #[test]
    fn corrupted_a_breaks_consistency() {
        let mut sys = gaudin_sys();
        sys.corrupt_a_entry(0, 0, 1e-6);
        let err = build_kernel_table(&sys, 8, None).unwrap_err();
        assert!(matches!(err, Error::BetheConsistencyViolation { .. }));
    }

    #[test]
    fn b_kernel_reference_and_symmetry() {
        let sys = gaudin_sys();
        // B(x1,x2) = 1/(2(x1-x2)^2) + (1/20)/((x1-1)^2 (x2-1)^2)
        let v = b_eval(&sys, &rat(2, 1), &rat(3, 1)).unwrap();
        assert_eq!(v, rat(1, 2) + rat(1, 20) * rat(1, 4));
        for (p, q) in [(rat(2, 1), rat(3, 1)), (rat(-1, 2), rat(5, 3))] {
            assert_eq!(b_eval(&sys, &p, &q).unwrap(), b_eval(&sys, &q, &p).unwrap());
        }
        // decay: pole part vanishes like 1/x1^2
        let big = rat(1_000_000, 1);
        let far = b_pole_part_eval(&sys, &big, &rat(2, 1)).unwrap();
        assert!(far.magnitude() < 1e-10);
    }

    #[test]
    fn b_is_minus_half_derivative_of_g() {
        let sys = m2_sys();
        let x0 = rat(7, 3);
        let g = g_ratfun_in_x(&sys, &x0).unwrap();
        let minus_half = rat(-1, 2);
        let dg = g.derivative().unwrap().scale(&minus_half);
        for x in [rat(9, 4), rat(-3, 7)] {
            assert_eq!(dg.eval(&x).unwrap(), b_eval(&sys, &x, &x0).unwrap());
        }
    }

    #[test]
    fn k2_freedom_respected_by_builder() {
        let sys = m2_sys();
        let choice: Vec<KernelCoeff<Rat>> = (0..2)
            .map(|i| {
                let mut m = KernelCoeff::new();
                m.insert((i, 1), rat(3, 7));
                m
            })
            .collect();
        let t = build_kernel_table(&sys, 6, Some(choice.clone())).unwrap();
        assert_eq!(t.coeff(0, 2), &choice[0]);
        // the ODE still validates with the alternative free choice
        let rep = validate_kernel(&t, &sys, 6).unwrap();
        assert_eq!(rep.max_ode_residual, 0.0);
        // K_{i,3} is insensitive to the free choice (its K_{i,2} term carries
        // the Bethe-vanishing factor), but K_{i,4} onward must differ
        let canonical = build_kernel_table(&sys, 6, None).unwrap();
        assert_eq!(t.coeff(0, 3), canonical.coeff(0, 3));
        assert_ne!(t.coeff(0, 4), canonical.coeff(0, 4));
    }
}
