//! Invariants over randomly generated states, directions and parameters.

use std::f64::consts::PI;

use proptest::prelude::*;
use solchart::delays::{DelayFunctional, FactorizedDelay, IntegralDelay};
use solchart::functionals::ExtLinFunctional;
use solchart::harness::{Scenario, SystemTag, MAX_SEED};
use solchart::{C0Fn, C1Fn, FnData, Grid, GridSpec};

fn grid() -> Grid {
    GridSpec::new(1.0, 1, 24).build().unwrap()
}

/// `c_0 + Σ_k c_k cos(k π (t + 1)) / k`.
fn series(g: &Grid, c: &[f64]) -> C1Fn {
    C1Fn::from_fn(g, |t| {
        c[0] + c[1..]
            .iter()
            .enumerate()
            .map(|(k, ck)| ck * ((k + 1) as f64 * PI * (t + 1.0)).cos() / (k + 1) as f64)
            .sum::<f64>()
    })
}

fn coeffs() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0..1.0f64, 6)
}

fn dense_max(f: &C0Fn) -> f64 {
    (0..=1000)
        .map(|i| f.eval(-1.0 + i as f64 / 1000.0).unwrap()[0].abs())
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sup_norm_is_sandwiched(c in coeffs()) {
        let g = grid();
        let f = series(&g, &c);
        let nodal = f.values().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let s = f.sup_norm();
        prop_assert!(s >= nodal);
        prop_assert!(s >= dense_max(f.as_c0()) - 1e-12);
        prop_assert!(s <= f.sup_norm_upper());
        prop_assert!(f.c1_norm() >= s);
    }

    #[test]
    fn lincomb_is_pointwise(c in coeffs(), d in coeffs(), a in -3.0..3.0f64, b in -3.0..3.0f64, t in -1.0..0.0f64) {
        let g = grid();
        let (x, y) = (series(&g, &c), series(&g, &d));
        let z = C1Fn::lincomb(a, &x, b, &y).unwrap();
        let expect = a * x.eval(t).unwrap()[0] + b * y.eval(t).unwrap()[0];
        prop_assert!((z.eval(t).unwrap()[0] - expect).abs() <= 1e-12 * (1.0 + expect.abs()));
    }

    #[test]
    fn quadrature_is_exact_on_polynomials(p in prop::collection::vec(-1.0..1.0f64, 1..10)) {
        let g = grid();
        let f = C0Fn::from_fn(&g, |t| p.iter().rev().fold(0.0, |acc, c| acc * t + c));
        // ∫_{-1}^0 t^k dt = (-1)^k / (k + 1).
        let exact: f64 = p.iter().enumerate().map(|(k, c)| c * if k % 2 == 0 { 1.0 } else { -1.0 } / (k + 1) as f64).sum();
        prop_assert!((f.integrate()[0] - exact).abs() <= 1e-13);
    }

    #[test]
    fn functional_is_bounded_and_linear(
        w in coeffs(), c in coeffs(), d in coeffs(),
        at in -1.0..0.0f64, weight in -2.0..2.0f64, a in -2.0..2.0f64,
    ) {
        let g = grid();
        let l = ExtLinFunctional::from_density(series(&g, &w).into_c0())
            .with_atom(at, vec![weight])
            .unwrap();
        let (x, y) = (series(&g, &c).into_c0(), series(&g, &d).into_c0());
        let lx = l.apply(&x).unwrap();
        prop_assert!(lx.abs() <= l.op_norm() * x.sup_norm() * (1.0 + 1e-12) + 1e-14);
        let combo = C0Fn::lincomb(a, &x, 1.0, &y).unwrap();
        let lin = l.apply(&combo).unwrap() - a * lx - l.apply(&y).unwrap();
        prop_assert!(lin.abs() <= 1e-12 * (1.0 + lx.abs()));
    }

    #[test]
    fn delays_stay_in_range_and_respect_q(c in coeffs(), d in coeffs(), level in -1.0..1.0f64) {
        let g = grid();
        let mut c = c;
        c[0] += level;
        let (x, y) = (series(&g, &c), series(&g, &d));
        let parts: Vec<Box<dyn DelayFunctional>> = vec![
            Box::new(IntegralDelay::standard(1.0)),
            Box::new(FactorizedDelay::mean_tanh(&g).unwrap()),
        ];
        for delay in parts {
            let q = delay.q_bound().certified().unwrap();
            let (dx, dy) = (delay.value(&x).unwrap()[0], delay.value(&y).unwrap()[0]);
            prop_assert!((-1.0..=0.0).contains(&dx));
            prop_assert!((dx - dy).abs() <= q * x.sub(&y).unwrap().sup_norm() * (1.0 + 1e-10) + 1e-14);
        }
    }

    #[test]
    fn serialization_round_trips(c in coeffs()) {
        let g = grid();
        let f = series(&g, &c);
        let json = serde_json::to_string(&f.to_data()).unwrap();
        let back = C1Fn::from_data(&serde_json::from_str::<FnData>(&json).unwrap()).unwrap();
        prop_assert_eq!(back.values(), f.values());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn transversal_has_unit_slope(y in -2.0..0.9f64) {
        let b = Scenario::s5().build().unwrap();
        let tr = b.chart.transversal();
        let tau = tr.tau(&[y]).unwrap();
        prop_assert!((tau.deriv_at_zero()[0] - 1.0).abs() <= 1e-10);
        prop_assert!(tau.sup_norm() <= tr.scaling().h(&[y]).unwrap());
    }

    #[test]
    fn projection_lands_on_the_manifold_and_is_flattened(c in coeffs(), level in -1.2..0.2f64) {
        let b = Scenario::s5().build().unwrap();
        let mut c: Vec<f64> = c.iter().map(|v| 0.3 * v).collect();
        c[0] = level;
        let phi = b.rfde.project_to_manifold(&series(&b.grid, &c)).unwrap();
        prop_assert!(b.rfde.membership_error(&phi).unwrap() <= 1e-10);
        if let Ok(r) = b.chart.flatten_residual(&phi) {
            prop_assert!(r <= 1e-8);
        }
    }

    #[test]
    fn chart_inverts_inside_the_region(c in coeffs(), level in -1.2..0.2f64) {
        let b = Scenario::s5().build().unwrap();
        let mut c: Vec<f64> = c.iter().map(|v| 0.3 * v).collect();
        c[0] = level;
        let phi = series(&b.grid, &c);
        prop_assume!(b.chart.region_test(&phi).is_inside());
        let zeta = b.chart.apply_chart(&phi).unwrap();
        let inv = b.chart.invert_chart(&zeta, &zeta).unwrap();
        prop_assert!(inv.phi.sub(&phi).unwrap().sup_norm() <= 1e-9);
        prop_assert!(inv.contraction <= b.chart.budget() + 0.05);
    }

    #[test]
    fn scenario_overrides_round_trip(seed in 0..=MAX_SEED, eps in 0.05..0.95f64, lin in any::<bool>()) {
        let base = if lin { Scenario::lin() } else { Scenario::s5() };
        let set = [format!("seed={seed}"), format!("region.eps={eps:?}")];
        let sc = Scenario::parse(&base.to_toml(), false, &set).unwrap();
        prop_assert_eq!(sc.seed, seed);
        prop_assert_eq!(sc.region.eps, eps);
        prop_assert_eq!(sc.system.tag, if lin { SystemTag::Lin } else { SystemTag::S5 });
        let again = Scenario::parse(&sc.to_toml(), false, &[]).unwrap();
        prop_assert_eq!(again, sc);
    }
}
