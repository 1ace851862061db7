use std::collections::BTreeMap;

use normsol::grid::{ball_volume, grad_norm_sq, make_grid, mass, neg_laplacian, GridFunction};
use normsol::nonlinearity::{builtin, mass_critical_exponent, Hypothesis, NonlinearitySpec};
use proptest::prelude::*;

fn builtins() -> Vec<(NonlinearitySpec, usize)> {
    let mut out = Vec::new();
    for dim in 1..=5 {
        let lower = mass_critical_exponent(dim);
        let p = if dim <= 2 { lower + 2.0 } else { 0.5 * (lower + 2.0 * dim as f64 / (dim as f64 - 2.0)) };
        let params = BTreeMap::from([("p".to_string(), p)]);
        out.push((builtin("pure_power", dim, &params).unwrap(), dim));
        out.push((builtin("log_supercritical", dim, &BTreeMap::new()).unwrap(), dim));
        if dim >= 3 {
            out.push((builtin("critical_piecewise", dim, &BTreeMap::new()).unwrap(), dim));
            out.push((builtin("f6prime_example", dim, &BTreeMap::new()).unwrap(), dim));
        }
    }
    out
}

fn smooth(coef: &[f64], width: f64) -> impl Fn(f64) -> f64 + '_ {
    move |r| {
        let poly: f64 = coef.iter().enumerate().map(|(k, c)| c * r.powi(k as i32)).sum();
        poly * (-(r / width).powi(2)).exp()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn integration_by_parts_is_exact(
        dim in 1usize..=5,
        nodes in 16usize..400,
        stretch in prop::option::of(-0.9f64..2.0),
        values in prop::collection::vec(-2.0f64..2.0, 400),
    ) {
        let grid = make_grid(dim, 10.0, nodes, stretch);
        prop_assume!(grid.is_ok());
        let grid = grid.unwrap();
        let u = GridFunction::from_fn(grid.clone(), |r| {
            let i = grid.nodes().iter().position(|&x| x == r).unwrap();
            values[i]
        });
        let lhs = grad_norm_sq(&u);
        let rhs = neg_laplacian(&u).dot(&u);
        prop_assert!((lhs - rhs).abs() <= 1e-11 * lhs.abs().max(1.0), "{lhs} {rhs}");
    }

    #[test]
    fn laplacian_is_linear(
        dim in 1usize..=5,
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
        cu in prop::collection::vec(-1.0f64..1.0, 3),
        cv in prop::collection::vec(-1.0f64..1.0, 3),
    ) {
        let grid = make_grid(dim, 8.0, 301, None).unwrap();
        let u = GridFunction::from_fn(grid.clone(), smooth(&cu, 2.0));
        let v = GridFunction::from_fn(grid.clone(), smooth(&cv, 1.5));
        let lhs = neg_laplacian(&u.scale(a).axpy(b, &v));
        let rhs = neg_laplacian(&u).scale(a).axpy(b, &neg_laplacian(&v));
        // rounding in the differences is amplified by the operator norm 4/h^2
        let h = grid.nodes()[1];
        let scale = 4.0 / (h * h) * (a.abs() * u.norm() + b.abs() * v.norm());
        let diff = lhs.axpy(-1.0, &rhs).norm();
        prop_assert!(diff <= 16.0 * f64::EPSILON * scale, "{diff} {scale}");
    }

    #[test]
    fn weights_fill_the_ball(dim in 1usize..=5, nodes in 16usize..2000, radius in 0.5f64..50.0) {
        let grid = make_grid(dim, radius, nodes, None).unwrap();
        let total: f64 = grid.weights().iter().sum();
        let ball = ball_volume(dim, radius);
        prop_assert!((total / ball - 1.0).abs() < 1e-12);
    }

    #[test]
    fn energies_converge_under_refinement(
        dim in 1usize..=5,
        width in 0.7f64..2.0,
        coef in prop::collection::vec(0.2f64..1.0, 2),
    ) {
        let f = smooth(&coef, width);
        let at = |k: usize| {
            let g = make_grid(dim, 12.0, k, None).unwrap();
            let u = GridFunction::from_fn(g, &f);
            (mass(&u), grad_norm_sq(&u))
        };
        let (m1, d1) = at(201);
        let (m2, d2) = at(401);
        let (m3, d3) = at(801);
        // successive differences shrink by about four
        let ratio_m = (m1 - m2).abs() / (m2 - m3).abs().max(1e-300);
        let ratio_d = (d1 - d2).abs() / (d2 - d3).abs().max(1e-300);
        prop_assert!((m1 - m2).abs() < 1e-12 * m1 || ratio_m > 3.0, "mass ratio {ratio_m}");
        prop_assert!(ratio_d > 3.0, "energy ratio {ratio_d}");
    }

    #[test]
    fn superquadratic_odd_and_consistent(log_t in -4.0f64..4.0) {
        let t = 10f64.powf(log_t);
        for (nl, dim) in builtins() {
            if !nl.claims_all(&Hypothesis::FIBER) {
                continue;
            }
            let q = mass_critical_exponent(dim);
            for x in [t, -t] {
                let big_f = nl.primitive(x);
                prop_assert!(big_f > 0.0, "{} N={dim} F({x}) = {big_f}", nl.name());
                let gap = nl.f(x) * x - q * big_f;
                prop_assert!(gap > 0.0, "{} N={dim} gap({x}) = {gap}", nl.name());
            }
            if nl.claims(Hypothesis::Odd) {
                prop_assert_eq!(nl.f(-t), -nl.f(t));
            }
            prop_assert!(nl.primitive_mismatch(&[t, -t], 1e-8).is_none(), "{} N={dim} at {t}", nl.name());
        }
    }
}

#[test]
fn g_vanishes_toward_the_origin() {
    for (nl, dim) in builtins() {
        if !nl.claims_all(&[Hypothesis::F1, Hypothesis::F4]) {
            continue;
        }
        let values: Vec<f64> = (0..12).map(|k| nl.g(10f64.powi(-k), dim).abs()).collect();
        // a uniform contraction per decade forces the limit to zero
        for w in values.windows(2) {
            assert!(w[1] < 0.9 * w[0], "{} N={dim}: {values:?}", nl.name());
        }
    }
}
