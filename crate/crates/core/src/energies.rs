//! Free energies.
//!
//! `F^(0)` and `F^(1)` have closed forms in the solved root data; both carry
//! logarithms, kept symbolic in a [`LogValue`] so the exact backend can still
//! state them. For `g >= 2` the free energy is defined through the dilaton
//! equation `(2 - 2g - hbar d/dhbar) F^(g) = -R(hbar)` with
//! `R(hbar) = sum_i Res_{x->s_i} V(x) W_1^(g)(x)`, solved by sampling `R` on
//! a geometric grid in hbar, fitting a Laurent polynomial, and integrating
//! term by term; the resonant power `k = 2 - 2g`, whose antiderivative would
//! be logarithmic, must come out numerically absent and is refused otherwise.

use crate::bethe::{solve_bethe, BetheSystem, NewtonOptions};
use crate::correlators::{residue_moment, RecursionContext, Weight};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::potential::Potential;
use crate::scalar::Scalar;

/// A scalar plus a formal sum of logarithms `sum c * ln(arg)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LogValue<S> {
    pub analytic: S,
    pub logs: Vec<(S, S)>,
}

impl<S: Scalar> LogValue<S> {
    pub fn new(analytic: S) -> Self {
        LogValue {
            analytic,
            logs: Vec::new(),
        }
    }

    /// Append `c * ln(arg)`; `ln 1 = 0` is dropped so exact backends keep
    /// collapsible values collapsible.
    pub fn push_log(&mut self, coeff: S, arg: S) -> Result<()> {
        if arg.is_zero() {
            return Err(Error::DivisionByZero);
        }
        if coeff.is_zero() || (arg.clone() - S::one()).is_zero() {
            return Ok(());
        }
        self.logs.push((coeff, arg));
        Ok(())
    }

    /// Scale the whole value.
    pub fn scale(&self, k: &S) -> Self {
        LogValue {
            analytic: self.analytic.clone() * k.clone(),
            logs: self
                .logs
                .iter()
                .map(|(c, a)| (c.clone() * k.clone(), a.clone()))
                .collect(),
        }
    }

    /// Numeric value; errors on the exact backend when any log remains.
    pub fn collapse(&self) -> Result<S> {
        let mut acc = self.analytic.clone();
        for (c, a) in &self.logs {
            acc = acc + c.clone() * a.ln()?;
        }
        Ok(acc)
    }
}

/// `F^(0) = hbar^2 sum_{i != j} ln(s_i - s_j) - hbar sum_i V(s_i)`.
pub fn f0<S: Scalar>(sys: &BetheSystem<S>) -> Result<LogValue<S>> {
    let roots = sys.roots();
    let h = sys.hbar().clone();
    let h2 = h.clone() * h.clone();
    let mut out = LogValue::new(S::zero());
    for i in 0..roots.len() {
        for j in 0..roots.len() {
            if i == j {
                continue;
            }
            out.push_log(h2.clone(), roots[i].clone() - roots[j].clone())?;
        }
    }
    for s in roots {
        let jet = sys.potential().taylor(s, 0)?;
        out.analytic = out.analytic.clone() - h.clone() * jet.v.coeff(0);
        for (c, arg) in jet.log_terms {
            out.push_log(-(h.clone() * c), arg)?;
        }
    }
    Ok(out)
}

/// `F^(1) = (1/2) ln det A + sum_{i != j} ln(s_i - s_j) + F^(0) / hbar^2`.
pub fn f1<S: Scalar>(sys: &BetheSystem<S>) -> Result<LogValue<S>> {
    let roots = sys.roots();
    let det_a = det(sys.inverse_hessian())?;
    let h_inv2 = sys.hbar().invert()?.powi(2)?;
    let mut out = f0(sys)?.scale(&h_inv2);
    out.push_log(S::from_ratio(1, 2), det_a)?;
    for i in 0..roots.len() {
        for j in 0..roots.len() {
            if i == j {
                continue;
            }
            out.push_log(S::one(), roots[i].clone() - roots[j].clone())?;
        }
    }
    Ok(out)
}

fn det<S: Scalar>(m: &Matrix<S>) -> Result<S> {
    m.determinant()
}

/// Grid and fit controls for the high-genus free-energy construction.
#[derive(Clone, Debug)]
pub struct FgOptions {
    /// Highest fitted hbar power beyond the constant term.
    pub k_max_fit: i32,
    /// Geometric grid ratio as (num, den); 21/20 spreads samples by ~5%.
    pub grid_ratio: (i64, i64),
    /// Relative tolerance on the held-out fit residual.
    pub fit_tol: f64,
    /// Relative tolerance on the resonant coefficient.
    pub resonant_tol: f64,
    pub newton: NewtonOptions,
}

impl Default for FgOptions {
    fn default() -> Self {
        FgOptions {
            k_max_fit: 1,
            grid_ratio: (21, 20),
            fit_tol: 1e-8,
            resonant_tol: 1e-7,
            newton: NewtonOptions::default(),
        }
    }
}

/// Sampled profile of `R(hbar)` and its Laurent fit.
#[derive(Clone, Debug)]
pub struct HbarProfile<S> {
    pub grid: Vec<S>,
    pub samples: Vec<S>,
    /// Fitted `(k, r_k)` pairs: `R(h) = sum r_k h^k`.
    pub coeffs: Vec<(i32, S)>,
    pub heldout_residual: f64,
    pub resonant_power: i32,
    pub resonant_rel: f64,
}

#[derive(Clone, Debug)]
pub struct FgResult<S> {
    pub value: S,
    pub profile: HbarProfile<S>,
}

/// `R(hbar) = sum_i Res V(x) W_1^(g)(x)` from a full pipeline run at `hbar`.
pub fn sample_r<S: Scalar>(
    pot: &Potential<S>,
    seeds: &[S],
    g: u32,
    hbar: &S,
    newton: &NewtonOptions,
) -> Result<S> {
    let sys = solve_bethe(pot, hbar.clone(), seeds, newton)?;
    let mut ctx = RecursionContext::new(sys)?;
    let w = ctx.compute_w(g, 1)?;
    let moment = residue_moment(
        &w,
        0,
        &Weight::PotentialV(pot),
        ctx.system(),
        ctx.pole_cap(),
    )?;
    Ok(moment.coeff(&[]))
}

/// `F^(g)` for `g >= 2`: sample `R` on a geometric grid around `hbar`, fit
/// `R(h) = sum_{k = 1-2g}^{k_max} r_k h^k` by least squares (two extra grid
/// points held out to validate the ansatz), then integrate term by term:
/// `F^(g) = sum_{k != 2-2g} r_k hbar^k / (k + 2g - 2)`.
pub fn fg_high<S: Scalar>(
    pot: &Potential<S>,
    seeds: &[S],
    g: u32,
    hbar: &S,
    opts: &FgOptions,
) -> Result<FgResult<S>> {
    if g < 2 {
        return Err(Error::InvalidInput("fg_high needs g >= 2".into()));
    }
    let k_min = 1 - 2 * g as i32;
    let n_coef = (opts.k_max_fit - k_min + 1) as usize;
    let q = n_coef + 2;
    // nodes j = -q .. q; the two extremes are held out of the fit
    let ratio = S::from_ratio(opts.grid_ratio.0, opts.grid_ratio.1);
    let mut grid = Vec::with_capacity(2 * q + 1);
    let mut taus = Vec::with_capacity(2 * q + 1);
    for j in -(q as i32)..=(q as i32) {
        let tau = ratio.powi(j)?;
        grid.push(hbar.clone() * tau.clone());
        taus.push(tau);
    }
    let samples: Vec<S> = grid
        .iter()
        .map(|h| sample_r(pot, seeds, g, h, &opts.newton))
        .collect::<Result<_>>()?;

    // least squares on the interior nodes in the scaled variable tau:
    // rho_k = r_k hbar^k, design M[row][c] = tau^{k_min + c}
    let interior: Vec<usize> = (1..grid.len() - 1).collect();
    let mut columns: Vec<Vec<S>> = Vec::with_capacity(n_coef);
    for c in 0..n_coef {
        let mut col = Vec::with_capacity(interior.len());
        for &row in &interior {
            col.push(taus[row].powi(k_min + c as i32)?);
        }
        columns.push(col);
    }
    let rhs: Vec<S> = interior.iter().map(|&row| samples[row].clone()).collect();
    let rho = if S::EXACT {
        // exact data: the normal equations are solved without rounding
        let mut normal: Matrix<S> = Matrix::zeros(n_coef);
        let mut nrhs = vec![S::zero(); n_coef];
        for row in 0..interior.len() {
            for a in 0..n_coef {
                let pa = columns[a][row].conj();
                for b in 0..n_coef {
                    *normal.at_mut(a, b) =
                        normal.at(a, b).clone() + pa.clone() * columns[b][row].clone();
                }
                nrhs[a] = nrhs[a].clone() + pa.clone() * rhs[row].clone();
            }
        }
        normal.solve(&nrhs)
    } else {
        crate::linalg::lstsq_columns(&columns, &rhs)
    }
    .map_err(|_| Error::NotLaurentPolynomial {
        heldout_residual: f64::INFINITY,
        tolerance: opts.fit_tol,
    })?;

    // held-out validation at the two extreme nodes
    let mut heldout = 0.0f64;
    for &row in &[0usize, grid.len() - 1] {
        let mut fitted = S::zero();
        for c in 0..n_coef {
            fitted = fitted + rho[c].clone() * taus[row].powi(k_min + c as i32)?;
        }
        heldout = heldout.max(fitted.rel_residual(&samples[row]));
    }
    if heldout > opts.fit_tol {
        return Err(Error::NotLaurentPolynomial {
            heldout_residual: heldout,
            tolerance: opts.fit_tol,
        });
    }

    // rho_k = r_k hbar^k; the resonant power k = 2 - 2g must be absent
    let resonant_power = 2 - 2 * g as i32;
    let scale = rho.iter().map(|c| c.magnitude()).fold(1e-300, f64::max);
    let res_idx = (resonant_power - k_min) as usize;
    let resonant_rel = rho[res_idx].magnitude() / scale;
    if resonant_rel > opts.resonant_tol {
        return Err(Error::ResonantTerm {
            coefficient: resonant_rel,
            tolerance: opts.resonant_tol,
        });
    }

    let mut value = S::zero();
    let mut coeffs = Vec::with_capacity(n_coef);
    for c in 0..n_coef {
        let k = k_min + c as i32;
        let r_k = rho[c].clone() * hbar.powi(-k)?;
        coeffs.push((k, r_k));
        if k == resonant_power {
            continue;
        }
        value = value + rho[c].clone() * S::from_int((k + 2 * g as i32 - 2) as i64).invert()?;
    }
    Ok(FgResult {
        value,
        profile: HbarProfile {
            grid,
            samples,
            coeffs,
            heldout_residual: heldout,
            resonant_power,
            resonant_rel,
        },
    })
}
