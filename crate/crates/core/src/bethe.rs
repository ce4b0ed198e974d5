//! Bethe system: the roots `s_i` solving
//!
//! ```text
//! V'(s_i) = 2 hbar sum_{j != i} 1 / (s_i - s_j)
//! ```
//!
//! together with the Hessian `T`, its inverse `A`, and the derived functions
//! `omega`, `Y`, `U`.
//!
//! Roots are found by damped Newton iteration; the Jacobian of the residual
//! map is exactly `hbar * T` evaluated at the current iterate, so `T` and `A`
//! fall out of the final step. On the exact backend a solution is accepted
//! only when the residual is exactly zero, which the solver attempts to reach
//! by snapping the converged iterate to nearby small-denominator rationals.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::polebasis::PoleBasis;
use crate::poly::Poly;
use crate::potential::Potential;
use crate::ratfun::RatFun;
use crate::scalar::Scalar;

/// Relative pairwise root-distance guard for approximate backends.
const MIN_ROOT_DISTANCE_REL: f64 = 1e-8;
/// Denominator bit bound for exact Newton iterates.
const ITERATE_DEN_BITS: u64 = 192;
/// Denominator bit bound for snapping candidates.
const SNAP_DEN_BITS: u64 = 64;

#[derive(Clone, Debug)]
pub struct NewtonOptions {
    pub max_iter: usize,
    pub tol: f64,
    pub max_halvings: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            max_iter: 200,
            tol: 1e-12,
            max_halvings: 20,
        }
    }
}

/// Solved Bethe data. Immutable after construction.
#[derive(Clone, Debug)]
pub struct BetheSystem<S> {
    potential: Potential<S>,
    hbar: S,
    roots: Vec<S>,
    t: Matrix<S>,
    a: Matrix<S>,
    residual: f64,
}

impl<S: Scalar> BetheSystem<S> {
    pub fn potential(&self) -> &Potential<S> {
        &self.potential
    }

    pub fn hbar(&self) -> &S {
        &self.hbar
    }

    pub fn roots(&self) -> &[S] {
        &self.roots
    }

    pub fn root_count(&self) -> usize {
        self.roots.len()
    }

    pub fn hessian(&self) -> &Matrix<S> {
        &self.t
    }

    pub fn inverse_hessian(&self) -> &Matrix<S> {
        &self.a
    }

    pub fn bethe_residual(&self) -> f64 {
        self.residual
    }

    /// Diagnostics hook: scale `A[i][j]` (and its mirror) by `1 + rel`.
    /// Downstream consistency checks are expected to notice.
    pub fn corrupt_a_entry(&mut self, i: usize, j: usize, rel: f64) {
        let factor = S::one() + S::from_ratio((rel * 1e15) as i64, 1_000_000_000_000_000);
        let v = self.a.at(i, j).clone() * factor.clone();
        *self.a.at_mut(i, j) = v.clone();
        if i != j {
            *self.a.at_mut(j, i) = v;
        }
    }

    /// `omega(x) = hbar * sum_i 1/(x - s_i)`.
    pub fn omega(&self) -> PoleBasis<S> {
        PoleBasis::from_terms((0..self.roots.len()).map(|j| ((j, 1u32), self.hbar.clone())))
    }

    /// `Y = V' - 2 omega` as a dense rational function.
    pub fn y_ratfun(&self) -> Result<RatFun<S>> {
        let mut acc = self.potential.vprime_ratfun()?;
        let two = S::from_int(2);
        for s in &self.roots {
            let term = RatFun::new(
                Poly::constant(-(two.clone() * self.hbar.clone())),
                Poly::linear(s.clone()),
            )?;
            acc = acc.add(&term)?;
        }
        Ok(acc)
    }

    /// `U = V'^2 - 2 hbar V'' - 4 hbar sum_i (V'(x) - V'(s_i)) / (x - s_i)`,
    /// assembled so that the `(x - s_i)` cancellations are explicit; `U` has
    /// poles only at the poles of `V'`.
    pub fn u_ratfun(&self) -> Result<RatFun<S>> {
        let vp = self.potential.vprime_ratfun()?;
        let mut acc = vp.mul(&vp)?;
        let minus_two_h = -(S::from_int(2) * self.hbar.clone());
        acc = acc.add(&vp.derivative()?.scale(&minus_two_h))?;
        let minus_four_h = -(S::from_int(4) * self.hbar.clone());
        for s in &self.roots {
            // polynomial part of the difference quotient
            let dq = self.potential.vprime_poly().difference_quotient(s);
            let mut term = RatFun::from_poly(dq);
            // pole parts: S_p (1/(x-a) - 1/(s-a)) / (x-s) = -S_p / ((s-a)(x-a))
            for (alpha, strength) in self.potential.poles() {
                let d = s.clone() - alpha.clone();
                if d.is_zero() {
                    return Err(Error::RootAtPotentialPole);
                }
                let c = -(strength.clone() * d.invert()?);
                term = term.add(&RatFun::new(
                    Poly::constant(c),
                    Poly::linear(alpha.clone()),
                )?)?;
            }
            acc = acc.add(&term.scale(&minus_four_h))?;
        }
        Ok(acc)
    }

    /// Residual of the Ricatti identity `Y^2 - 2 hbar Y' - U` as a RatFun;
    /// exactly zero on the exact backend for a valid system.
    pub fn ricatti_residual(&self) -> Result<RatFun<S>> {
        let y = self.y_ratfun()?;
        let u = self.u_ratfun()?;
        let minus_two_h = -(S::from_int(2) * self.hbar.clone());
        y.mul(&y)?
            .add(&y.derivative()?.scale(&minus_two_h))?
            .sub(&u)
    }

    /// Residual of `omega^2 + hbar omega' = hbar sum_i V'(s_i)/(x - s_i)`
    /// (only simple poles survive on the left).
    pub fn omega_square_identity_residual(&self) -> Result<RatFun<S>> {
        let om = self.omega().to_ratfun(&self.roots)?;
        let lhs = om.mul(&om)?.add(&om.derivative()?.scale(&self.hbar))?;
        let mut rhs = RatFun::zero();
        for s in self.roots.iter() {
            let c = self.hbar.clone() * self.potential.vprime_eval(s)?;
            rhs = rhs.add(&RatFun::new(Poly::constant(c), Poly::linear(s.clone()))?)?;
        }
        lhs.sub(&rhs)
    }

    /// Max magnitude of the residual of `T * A = I`.
    pub fn inverse_residual(&self) -> f64 {
        self.t.product_identity_residual(&self.a)
    }
}

/// Bethe residual vector `F_i = V'(s_i) - 2 hbar sum_{j != i} 1/(s_i - s_j)`.
fn residual_vec<S: Scalar>(pot: &Potential<S>, hbar: &S, roots: &[S]) -> Result<Vec<S>> {
    let two_h = S::from_int(2) * hbar.clone();
    roots
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut acc = pot.vprime_eval(s)?;
            for (j, t) in roots.iter().enumerate() {
                if i == j {
                    continue;
                }
                let d = s.clone() - t.clone();
                if d.is_zero() {
                    return Err(Error::RootCollision { min_distance: 0.0 });
                }
                acc = acc - two_h.clone() * d.invert()?;
            }
            Ok(acc)
        })
        .collect()
}

fn residual_norm<S: Scalar>(v: &[S]) -> f64 {
    v.iter().map(|x| x.magnitude()).fold(0.0, f64::max)
}

/// Hessian `T` of the Bethe action at the given roots.
fn hessian_at<S: Scalar>(pot: &Potential<S>, hbar: &S, roots: &[S]) -> Result<Matrix<S>> {
    let m = roots.len();
    let h_inv = hbar.invert()?;
    let mut t = Matrix::zeros(m);
    for i in 0..m {
        let v2 = pot.vprime_taylor(&roots[i], 1)?.coeff(1);
        let mut diag = v2 * h_inv.clone();
        for j in 0..m {
            if i == j {
                continue;
            }
            let d = roots[i].clone() - roots[j].clone();
            let inv2 = d.invert()?.powi(2)?;
            diag = diag + S::from_int(2) * inv2.clone();
            *t.at_mut(i, j) = -(S::from_int(2) * inv2);
        }
        *t.at_mut(i, i) = diag;
    }
    Ok(t)
}

fn root_scale<S: Scalar>(roots: &[S]) -> f64 {
    roots.iter().map(|r| r.magnitude()).fold(1.0, f64::max)
}

fn check_separation<S: Scalar>(pot: &Potential<S>, roots: &[S]) -> Result<()> {
    let scale = root_scale(roots);
    for (i, a) in roots.iter().enumerate() {
        for b in roots.iter().skip(i + 1) {
            let d = (a.clone() - b.clone()).magnitude();
            if d < MIN_ROOT_DISTANCE_REL * scale {
                return Err(Error::RootCollision { min_distance: d });
            }
        }
        for (alpha, _) in pot.poles() {
            if (a.clone() - alpha.clone()).is_zero() {
                return Err(Error::RootAtPotentialPole);
            }
        }
    }
    Ok(())
}

/// Solve the Bethe system by damped Newton iteration from the given seeds.
pub fn solve_bethe<S: Scalar>(
    potential: &Potential<S>,
    hbar: S,
    seeds: &[S],
    opts: &NewtonOptions,
) -> Result<BetheSystem<S>> {
    if seeds.is_empty() {
        return Err(Error::InvalidInput("at least one seed is required".into()));
    }
    if hbar.is_zero() {
        return Err(Error::InvalidInput("hbar must be nonzero".into()));
    }
    check_separation(potential, seeds)?;

    let mut roots = seeds.to_vec();
    let mut res = residual_vec(potential, &hbar, &roots)?;
    let mut norm = residual_norm(&res);
    let mut iterations = 0;
    while norm > opts.tol && iterations < opts.max_iter {
        let jac = hessian_at(potential, &hbar, &roots)?.scale_all(&hbar);
        let rhs: Vec<S> = res.iter().map(|r| -r.clone()).collect();
        let step = jac.solve(&rhs)?;
        let mut lambda = S::one();
        let mut accepted = false;
        for _ in 0..=opts.max_halvings {
            let candidate: Vec<S> = roots
                .iter()
                .zip(step.iter())
                .map(|(r, d)| {
                    (r.clone() + lambda.clone() * d.clone()).limit_denominator(ITERATE_DEN_BITS)
                })
                .collect();
            if check_separation(potential, &candidate).is_ok() {
                if let Ok(cres) = residual_vec(potential, &hbar, &candidate) {
                    let cnorm = residual_norm(&cres);
                    if cnorm < norm {
                        roots = candidate;
                        res = cres;
                        norm = cnorm;
                        accepted = true;
                        break;
                    }
                }
            }
            lambda = lambda * S::from_ratio(1, 2);
        }
        if !accepted {
            break;
        }
        iterations += 1;
    }
    if !S::EXACT {
        // polish to the arithmetic floor: full steps while they still help
        for _ in 0..4 {
            let Ok(jac) = hessian_at(potential, &hbar, &roots) else {
                break;
            };
            let rhs: Vec<S> = res.iter().map(|r| -r.clone()).collect();
            let Ok(step) = jac.scale_all(&hbar).solve(&rhs) else {
                break;
            };
            let candidate: Vec<S> = roots
                .iter()
                .zip(step.iter())
                .map(|(r, d)| r.clone() + d.clone())
                .collect();
            if check_separation(potential, &candidate).is_err() {
                break;
            }
            let Ok(cres) = residual_vec(potential, &hbar, &candidate) else {
                break;
            };
            let cnorm = residual_norm(&cres);
            if cnorm < norm {
                roots = candidate;
                res = cres;
                norm = cnorm;
            } else {
                break;
            }
        }
    }

    if S::EXACT {
        // certify: an exact system needs an exactly-zero residual
        if !res.iter().all(|r| r.is_zero()) {
            if let Some(snapped) = try_snap(potential, &hbar, &roots)? {
                roots = snapped;
            } else {
                return Err(Error::ExactRootsNotCertified {
                    residual: format!("{norm:.3e}"),
                });
            }
        }
    } else if norm > opts.tol {
        return Err(Error::NoConvergence {
            iterations,
            residual: norm,
        });
    }
    finalize(potential.clone(), hbar, roots)
}

/// Try to replace each converged iterate with a nearby small-denominator
/// rational so that the Bethe residual vanishes exactly.
fn try_snap<S: Scalar>(pot: &Potential<S>, hbar: &S, roots: &[S]) -> Result<Option<Vec<S>>> {
    let scale = root_scale(roots);
    // convergents come out ordered by increasing denominator; take, per root,
    // the smallest-denominator one inside a closeness window, widening the
    // window if the strict one certifies nothing
    for window in [1e-18, 1e-14, 1e-10] {
        let mut choice = Vec::with_capacity(roots.len());
        for r in roots.iter() {
            let pick = r
                .snap_candidates(SNAP_DEN_BITS)
                .into_iter()
                .find(|c| (c.clone() - r.clone()).magnitude() <= window * scale)
                .unwrap_or_else(|| r.clone());
            choice.push(pick);
        }
        if check_separation(pot, &choice).is_ok() {
            if let Ok(res) = residual_vec(pot, hbar, &choice) {
                if res.iter().all(|r| r.is_zero()) {
                    return Ok(Some(choice));
                }
            }
        }
    }
    Ok(None)
}

fn finalize<S: Scalar>(potential: Potential<S>, hbar: S, roots: Vec<S>) -> Result<BetheSystem<S>> {
    check_separation(&potential, &roots)?;
    let res = residual_vec(&potential, &hbar, &roots)?;
    let residual = residual_norm(&res);
    let t = hessian_at(&potential, &hbar, &roots)?;
    let a = t.inverse().map_err(|_| Error::SingularHessian)?;
    let sys = BetheSystem {
        potential,
        hbar,
        roots,
        t,
        a,
        residual,
    };
    debug_assert!(sys.t.is_symmetric(1e-12));
    if sys.inverse_residual() > 1e-10 {
        return Err(Error::SingularHessian);
    }
    Ok(sys)
}

impl<S: Scalar> Matrix<S> {
    fn scale_all(mut self, k: &S) -> Self {
        for i in 0..self.size() {
            for j in 0..self.size() {
                let v = self.at(i, j).clone() * k.clone();
                *self.at_mut(i, j) = v;
            }
        }
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{rat, Rat, C64};

    fn gaudin() -> Potential<Rat> {
        Potential::new(vec![rat(0, 1), rat(1, 1)], vec![(rat(0, 1), rat(-1, 1))]).unwrap()
    }

    #[test]
    fn gaudin_root_snaps_to_one() {
        let sys = solve_bethe(
            &gaudin(),
            rat(1, 10),
            &[rat(9, 10)],
            &NewtonOptions::default(),
        )
        .unwrap();
        assert_eq!(sys.roots(), &[rat(1, 1)]);
        assert_eq!(sys.bethe_residual(), 0.0);
        // A = hbar / V''(s) = (1/10) / 2
        assert_eq!(*sys.inverse_hessian().at(0, 0), rat(1, 20));
    }

    #[test]
    fn quadratic_m1_origin() {
        let pot = Potential::polynomial(vec![rat(0, 1), rat(1, 1)]).unwrap();
        let sys = solve_bethe(&pot, rat(1, 3), &[rat(3, 10)], &NewtonOptions::default()).unwrap();
        assert_eq!(sys.roots(), &[rat(0, 1)]);
    }

    #[test]
    fn quadratic_m2_symmetric_pair() {
        // V' = x, m = 2, hbar = 1/4: roots +-1/2, T = [[6,-2],[-2,6]],
        // A = [[3/16,1/16],[1/16,3/16]]
        let pot = Potential::polynomial(vec![rat(0, 1), rat(1, 1)]).unwrap();
        let sys = solve_bethe(
            &pot,
            rat(1, 4),
            &[rat(-2, 5), rat(2, 5)],
            &NewtonOptions::default(),
        )
        .unwrap();
        assert_eq!(sys.roots(), &[rat(-1, 2), rat(1, 2)]);
        assert_eq!(*sys.hessian().at(0, 0), rat(6, 1));
        assert_eq!(*sys.hessian().at(0, 1), rat(-2, 1));
        assert_eq!(*sys.inverse_hessian().at(0, 0), rat(3, 16));
        assert_eq!(*sys.inverse_hessian().at(0, 1), rat(1, 16));
        assert_eq!(sys.inverse_residual(), 0.0);
    }

    #[test]
    fn float_backend_converges() {
        let pot: Potential<C64> = Potential::new(
            vec![C64::from_int(0), C64::from_int(1)],
            vec![(C64::from_int(0), C64::from_int(-1))],
        )
        .unwrap();
        let sys = solve_bethe(
            &pot,
            C64::from_ratio(1, 10),
            &[C64::from_ratio(9, 10)],
            &NewtonOptions::default(),
        )
        .unwrap();
        assert!((sys.roots()[0] - C64::from_int(1)).magnitude() < 1e-12);
    }

    #[test]
    fn irrational_roots_refused_on_exact_backend() {
        // V' = x, m = 2, hbar = 1/3: roots +-1/sqrt(3) are irrational
        let pot = Potential::polynomial(vec![rat(0, 1), rat(1, 1)]).unwrap();
        let err = solve_bethe(
            &pot,
            rat(1, 3),
            &[rat(-3, 5), rat(3, 5)],
            &NewtonOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::ExactRootsNotCertified { .. }));
    }

    #[test]
    fn coincident_seeds_rejected() {
        let pot = Potential::polynomial(vec![rat(0, 1), rat(1, 1)]).unwrap();
        let err = solve_bethe(
            &pot,
            rat(1, 4),
            &[rat(2, 5), rat(2, 5)],
            &NewtonOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::RootCollision { .. }));
    }

    #[test]
    fn omega_and_y() {
        let sys = solve_bethe(
            &gaudin(),
            rat(1, 10),
            &[rat(9, 10)],
            &NewtonOptions::default(),
        )
        .unwrap();
        let om = sys.omega();
        assert_eq!(om.coeff(0, 1), rat(1, 10));
        // Y(2) = V'(2) - 2 omega(2) = 3/2 - 1/5 = 13/10
        let y = sys.y_ratfun().unwrap();
        assert_eq!(y.eval(&rat(2, 1)).unwrap(), rat(13, 10));
        // omega at a far point looks like m*hbar/x
        let far = rat(1_000_000, 1);
        let v = om.eval(&far, sys.roots()).unwrap();
        assert!((v.magnitude() - 1e-7).abs() < 1e-12);
    }

    #[test]
    fn ricatti_and_u_structure() {
        let sys = solve_bethe(
            &gaudin(),
            rat(1, 10),
            &[rat(9, 10)],
            &NewtonOptions::default(),
        )
        .unwrap();
        // exact zero RatFun on the rational backend
        assert!(sys.ricatti_residual().unwrap().is_zero());
        assert!(sys.omega_square_identity_residual().unwrap().is_zero());
        // U has no pole at the root: principal part of its expansion is empty
        let u = sys.u_ratfun().unwrap();
        let series = u.local_expand(&rat(1, 1), 0, 64).unwrap();
        assert!(series.principal_part_is_zero());
    }

    #[test]
    fn m2_ricatti_exact() {
        let pot = Potential::polynomial(vec![rat(0, 1), rat(1, 1)]).unwrap();
        let sys = solve_bethe(
            &pot,
            rat(1, 4),
            &[rat(-2, 5), rat(2, 5)],
            &NewtonOptions::default(),
        )
        .unwrap();
        assert!(sys.ricatti_residual().unwrap().is_zero());
        for i in 0..2 {
            let u = sys.u_ratfun().unwrap();
            let series = u.local_expand(&sys.roots()[i], 0, 64).unwrap();
            assert!(series.principal_part_is_zero());
        }
    }
}
