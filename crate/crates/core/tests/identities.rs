//! Cross-module identity oracles: residues against contour quadrature, the
//! global residue theorem, expansion as a ring morphism, and dense-rational
//! reconstruction of pole-basis data.

use nctr_core::bethe::{solve_bethe, NewtonOptions};
use nctr_core::correlators::RecursionContext;
use nctr_core::laurent::LaurentSeries;
use nctr_core::polebasis::PoleBasis;
use nctr_core::poly::Poly;
use nctr_core::potential::Potential;
use nctr_core::rat;
use nctr_core::ratfun::{RatFun, POLE_ORDER_CAP};
use nctr_core::scalar::{Rat, Scalar, C64};
use nctr_core::verify::check_w30_forms;
use proptest::prelude::*;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Trapezoid contour quadrature of `f` around `center` (spectrally accurate
/// for analytic-in-an-annulus integrands): an independent residue oracle.
fn contour_residue(f: &RatFun<C64>, center: C64, radius: f64, points: usize) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for k in 0..points {
        let theta = 2.0 * std::f64::consts::PI * k as f64 / points as f64;
        let dir = C64::new(theta.cos(), theta.sin());
        let z = center + dir * radius;
        // (1/2pi i) * integral f dz = (r/2pi) * sum f(z_k) e^{i theta_k} dtheta
        acc += f.eval(&z).unwrap() * dir;
    }
    acc * C64::new(radius / points as f64, 0.0)
}

#[test]
fn residue_matches_contour_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..12 {
        // random rational function with poles at -1, c, 2 (c the probed one)
        let c = C64::new(rng.gen_range(-2..=2) as f64 / 4.0, 0.0);
        let mut num = Vec::new();
        for _ in 0..4 {
            num.push(C64::new(rng.gen_range(-5..=5) as f64, 0.0));
        }
        let num = Poly::new(num);
        if num.is_zero() {
            continue;
        }
        let order = rng.gen_range(1..=3);
        let mut den = Poly::new(vec![C64::new(1.0, 0.0)]);
        for _ in 0..order {
            den = den.mul(&Poly::linear(c));
        }
        den = den.mul(&Poly::linear(C64::new(-1.0, 0.0)));
        den = den.mul(&Poly::linear(C64::new(2.0, 0.0)));
        let f = RatFun::new(num, den).unwrap();
        let series = f.local_expand(&c, 0, POLE_ORDER_CAP).unwrap();
        let oracle = contour_residue(&f, c, 0.2, 512);
        let diff = (series.residue() - oracle).norm();
        let scale = 1.0f64.max(series.residue().norm());
        assert!(
            diff / scale < 1e-10,
            "series {} vs contour {}",
            series.residue(),
            oracle
        );
    }
}

#[test]
fn global_residue_sum_vanishes_exactly() {
    // any rational function falling off like 1/x^2 has residues summing to 0
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..10 {
        let poles: Vec<Rat> = vec![
            rat(rng.gen_range(-9..=-1), 2),
            rat(rng.gen_range(1..=9), 3),
            rat(rng.gen_range(10..=19), 4),
        ];
        let mut den = Poly::new(vec![rat(1, 1)]);
        for p in &poles {
            den = den.mul(&Poly::linear(p.clone()));
        }
        // deg num <= deg den - 2
        let num = Poly::new(vec![
            rat(rng.gen_range(-9..=9), 1),
            rat(rng.gen_range(-9..=9), 1),
        ]);
        if num.is_zero() {
            continue;
        }
        let f = RatFun::new(num, den).unwrap();
        let mut total = rat(0, 1);
        for p in &poles {
            total = total + f.local_expand(p, 0, POLE_ORDER_CAP).unwrap().residue();
        }
        assert_eq!(total, rat(0, 1));
    }
}

#[test]
fn w_eval_matches_dense_reconstruction() {
    // rebuild W_1^(1) as a single dense rational function and compare
    let pot = Potential::new(vec![rat(0, 1), rat(1, 1)], vec![(rat(0, 1), rat(-1, 1))]).unwrap();
    let sys = solve_bethe(&pot, rat(1, 10), &[rat(9, 10)], &NewtonOptions::default()).unwrap();
    let roots = sys.roots().to_vec();
    let mut ctx = RecursionContext::new(sys).unwrap();
    let w = ctx.compute_w(1, 1).unwrap();
    let mut pb = PoleBasis::new();
    for (idx, c) in w.terms() {
        pb.push(idx[0].0, idx[0].1, c.clone());
    }
    let dense = pb.to_ratfun(&roots).unwrap();
    for x in [rat(2, 1), rat(-3, 7), rat(22, 5)] {
        assert_eq!(
            w.eval(&[x.clone()], &roots).unwrap(),
            dense.eval(&x).unwrap()
        );
    }
}

#[test]
fn w30_three_way_on_exact_m2() {
    let pot = Potential::polynomial(vec![rat(0, 1), rat(1, 1)]).unwrap();
    let sys = solve_bethe(
        &pot,
        rat(1, 4),
        &[rat(-2, 5), rat(2, 5)],
        &NewtonOptions::default(),
    )
    .unwrap();
    let mut ctx = RecursionContext::new(sys).unwrap();
    let rep = check_w30_forms(&mut ctx, 73).unwrap();
    assert!(rep.passed(), "{rep:?}");
    assert_eq!(rep.worst_residual, 0.0);
}

// ---------------------------------------------------------------------------
// property tests

fn small_rat() -> impl Strategy<Value = Rat> {
    (-6i64..=6, 1i64..=4).prop_map(|(n, d)| rat(n, d))
}

fn small_ratfun() -> impl Strategy<Value = RatFun<Rat>> {
    (
        proptest::collection::vec(small_rat(), 1..4),
        proptest::sample::subsequence(vec![rat(1, 1), rat(-2, 1), rat(3, 2)], 0..=2),
    )
        .prop_filter_map("nonzero", |(num, poles)| {
            let num = Poly::new(num);
            if num.is_zero() {
                return None;
            }
            let mut den = Poly::new(vec![rat(1, 1)]);
            for p in poles {
                den = den.mul(&Poly::linear(p));
            }
            RatFun::new(num, den).ok()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// local expansion is a ring morphism up to truncation
    #[test]
    fn expand_is_multiplicative(f in small_ratfun(), g in small_ratfun()) {
        let center = rat(1, 5); // away from the pole set used above
        let order = 4i64;
        let fs = f.local_expand(&center, order, POLE_ORDER_CAP).unwrap();
        let gs = g.local_expand(&center, order, POLE_ORDER_CAP).unwrap();
        let product = f.mul(&g).unwrap().local_expand(&center, order, POLE_ORDER_CAP).unwrap();
        let series_product = fs.mul(&gs);
        let hi = series_product.hi().min(product.hi());
        let lo = series_product.lo().min(product.lo());
        for e in lo..=hi {
            prop_assert_eq!(series_product.coeff(e), product.coeff(e));
        }
    }

    /// and additive
    #[test]
    fn expand_is_additive(f in small_ratfun(), g in small_ratfun()) {
        let center = rat(1, 5);
        let order = 3i64;
        let fs = f.local_expand(&center, order, POLE_ORDER_CAP).unwrap();
        let gs = g.local_expand(&center, order, POLE_ORDER_CAP).unwrap();
        let total = f.add(&g).unwrap().local_expand(&center, order, POLE_ORDER_CAP).unwrap();
        let series_sum = fs.add(&gs);
        for e in series_sum.lo()..=series_sum.hi().min(total.hi()) {
            prop_assert_eq!(series_sum.coeff(e), total.coeff(e));
        }
    }

    /// series inversion is a true inverse on its validity range
    #[test]
    fn series_inverse_roundtrip(cs in proptest::collection::vec(small_rat(), 1..5), shift in -2i64..=2) {
        let lead_ok = cs.iter().any(|c| *c != rat(0, 1));
        prop_assume!(lead_ok);
        let hi = shift + cs.len() as i64 - 1;
        let s = LaurentSeries::new(shift, hi, cs);
        prop_assume!(s.order().is_some());
        let inv = s.invert().unwrap();
        let prod = s.mul(&inv);
        for e in prod.lo()..=prod.hi() {
            prop_assert_eq!(prod.coeff(e), if e == 0 { rat(1, 1) } else { rat(0, 1) });
        }
    }

    /// evaluating the pole basis agrees with its dense reconstruction
    #[test]
    fn polebasis_dense_agreement(
        coeffs in proptest::collection::vec((0usize..2, 1u32..4, small_rat()), 1..5)
    ) {
        let roots = vec![rat(0, 1), rat(2, 1)];
        let mut pb = PoleBasis::new();
        for (j, k, c) in coeffs {
            pb.push(j, k, c);
        }
        let dense = pb.to_ratfun(&roots).unwrap();
        for x in [rat(1, 3), rat(7, 2), rat(-5, 4)] {
            prop_assert_eq!(pb.eval(&x, &roots).unwrap(), dense.eval(&x).unwrap());
        }
    }
}

#[test]
fn free_energy_fd_identities_and_homogeneity() {
    use nctr_core::verify::{
        check_dilaton_f, check_homogeneity, check_variational_f, reports_to_json, PipelineSpec,
    };
    let pot: Potential<C64> = Potential::new(
        vec![C64::from_int(0), C64::from_int(1)],
        vec![(C64::from_int(0), C64::from_int(-1))],
    )
    .unwrap();
    let spec = PipelineSpec {
        potential: &pot,
        hbar: C64::from_ratio(1, 10),
        seeds: vec![C64::from_int(1)],
        newton: NewtonOptions::default(),
    };
    let reports = vec![
        check_dilaton_f(&spec, 2, 3).unwrap(),
        check_variational_f(&spec, 2, 1, 3).unwrap(),
        check_homogeneity(&spec, 2, 3).unwrap(),
        check_homogeneity(&spec, 3, 3).unwrap(),
    ];
    for r in &reports {
        assert!(r.passed(), "{r:?}");
    }
    // report serialization surface: a JSON array of records
    let json = reports_to_json(&reports);
    let parsed: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(parsed.as_array().unwrap().len(), 4);
    assert_eq!(parsed[0]["name"], "dilaton_f2");
    assert_eq!(parsed[0]["status"], "pass");
}

#[test]
fn fg_refuses_non_laurent_integrand() {
    use nctr_core::energies::{fg_high, FgOptions};
    use nctr_core::error::Error;
    // hbar-dependent roots make the free-energy integrand analytic but not
    // a Laurent polynomial; the held-out validation must refuse the fit
    // rather than return a silently approximated value
    let pot = Potential::polynomial(vec![
        C64::from_ratio(1, 8),
        C64::from_ratio(-9, 8),
        C64::from_ratio(1, 4),
        C64::from_int(1),
    ])
    .unwrap();
    let h = C64::from_ratio(1, 20);
    let seeds = [C64::from_ratio(-11, 10), C64::from_ratio(11, 10)];
    let err = fg_high(&pot, &seeds, 2, &h, &FgOptions::default()).unwrap_err();
    assert!(matches!(err, Error::NotLaurentPolynomial { .. }), "{err}");
}
