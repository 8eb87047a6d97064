use lensrig_core::metric::{catalog, CatalogName, CatalogParams, GaussianMetric};
use lensrig_core::thermostat::{
    apply_v0_spatial, flux_floor, flux_lower_bound_check, hardy_family, hardy_spot_check, mu_flow, v0, v0_inverse,
    v0_inverse_with, z_lambda, z_lambda_grad, SmallDomain, ZDomain,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn convex_metrics() -> Vec<GaussianMetric> {
    [CatalogName::FlatDisk, CatalogName::SphereCap, CatalogName::HyperbolicCollar]
        .into_iter()
        .map(|n| catalog(n, &CatalogParams::default()).unwrap())
        .collect()
}

fn starts(n: usize, om: &SmallDomain, seed: u64) -> Vec<[f64; 4]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| [rng.gen_range(0.0..=om.eps), rng.gen_range(-om.delta..=om.delta), rng.gen_range(0.0..=PI), 0.0])
        .collect()
}

#[test]
fn flow_curves_stay_on_one_side_of_the_normal() {
    let om = SmallDomain::default();
    for m in convex_metrics() {
        for p in starts(200, &om, 1) {
            let path = mu_flow(&m, &om, p).unwrap();
            let side = (p[2] - PI / 2.0).signum();
            for q in &path.points {
                assert!((q[2] - PI / 2.0) * side >= -1e-12, "{} crossed π/2 from {p:?}", m.name);
            }
            assert!(path.angle_growth() <= 1e-12);
            assert!((path.t_drift() - path.hit_s).abs() < 1e-9);
        }
    }
}

#[test]
fn hit_times_respect_the_bound() {
    let om = SmallDomain::default();
    for m in convex_metrics() {
        let bound = om.hit_bound(&m).unwrap();
        let worst = starts(1000, &om, 2).iter().map(|p| mu_flow(&m, &om, *p).unwrap().hit_s).fold(0.0, f64::max);
        assert!(worst <= bound, "{}: {worst} > {bound}", m.name);
        assert!(worst > 0.0);
    }
}

proptest! {
    #[test]
    fn z_is_independent_of_y(lambda in 0.01f64..0.5, x in 0.0f64..0.4, y in -0.6f64..0.6, th in 0.0f64..PI) {
        prop_assert_eq!(z_lambda_grad(lambda, x, y, th)[1], 0.0);
        prop_assert_eq!(z_lambda(lambda, x, y, th), z_lambda(lambda, x, y + 0.3, th));
    }

    #[test]
    fn z_gradient_matches_differences(lambda in 0.01f64..0.5, x in 0.0f64..0.4, th in 0.0f64..PI) {
        prop_assume!((th.sin() - 0.5).abs() > 1e-3);
        let h = 1e-6;
        let g = z_lambda_grad(lambda, x, 0.0, th);
        let dx = (z_lambda(lambda, x + h, 0.0, th) - z_lambda(lambda, x - h, 0.0, th)) / (2.0 * h);
        let dt = (z_lambda(lambda, x, 0.0, th + h) - z_lambda(lambda, x, 0.0, th - h)) / (2.0 * h);
        prop_assert!((g[0] - dx).abs() < 1e-8 && (g[2] - dt).abs() < 1e-8);
    }
}

#[test]
fn flux_floor_holds_on_the_domain() {
    let dom = ZDomain::new(0.1, 0.01, SmallDomain::default()).unwrap();
    for m in convex_metrics() {
        let rep = flux_lower_bound_check(&m, &dom, 10_000, 3).unwrap();
        assert_eq!(rep.violations, 0, "{} {:?}", m.name, rep.witness);
        // Recompute the pairing with difference quotients of z on fresh samples.
        let c0 = m.convexity.unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut n = 0;
        while n < 2000 {
            let p = [rng.gen_range(0.0..=0.4), rng.gen_range(-0.6..=0.6), rng.gen_range(0.0..=PI)];
            if !dom.contains(p[0], p[1], p[2]) || (p[2].sin() - 0.5).abs() < 1e-3 {
                continue;
            }
            n += 1;
            let v = v0(&m, p[0], p[1], p[2]).unwrap();
            let z = |x: f64, th: f64| z_lambda(0.1, x, 0.0, th);
            let h = 1e-7;
            let dz = [
                (z(p[0] + h, p[2]) - z(p[0] - h, p[2])) / (2.0 * h),
                (z(p[0], p[2] + h) - z(p[0], p[2] - h)) / (2.0 * h),
            ];
            let pairing = dz[0] * v[0] + dz[1] * v[2];
            assert!(pairing >= flux_floor(p[2], 0.1, c0) - 1e-7, "{} at {p:?}", m.name);
        }
    }
    let waist = catalog(CatalogName::HyperbolicWaist, &CatalogParams::default()).unwrap();
    assert!(flux_lower_bound_check(&waist, &dom, 10, 0).is_err());
    let fat = ZDomain::new(0.1, 0.05, SmallDomain::default()).unwrap();
    assert!(flux_lower_bound_check(&convex_metrics()[0], &fat, 10, 0).is_err());
}

#[test]
fn inverse_recovers_a_manufactured_solution() {
    let om = SmallDomain::default();
    let d2 = om.delta * om.delta;
    for m in convex_metrics() {
        let g = |x: f64, y: f64, th: f64| x * (d2 - y * y) * (1.0 + 0.3 * th.cos());
        // V₀g written out by hand.
        let vg = |x: f64, y: f64, th: f64| {
            let j = m.eval(x, y).unwrap();
            let (sn, cs) = th.sin_cos();
            let gx = (d2 - y * y) * (1.0 + 0.3 * cs);
            let gy = -2.0 * x * y * (1.0 + 0.3 * cs);
            let gt = -0.3 * x * (d2 - y * y) * sn;
            sn * gx + cs / j.v * gy + j.kappa() * cs * gt
        };
        for p in [[0.2, 0.1, 0.7], [0.05, -0.4, 2.5], [0.35, 0.55, 1.6]] {
            let err = |ds: f64| (v0_inverse_with(&m, &om, &vg, p, ds).unwrap() - g(p[0], p[1], p[2])).abs();
            let (coarse, fine) = (err(4e-3), err(2e-3));
            assert!(fine < 1e-6, "{} {p:?}: {fine:e}", m.name);
            assert!(fine < 1e-12 || (coarse / fine).log2() > 1.7, "{} {p:?}: {coarse:e} {fine:e}", m.name);
        }
        let f = |x: f64, y: f64, th: f64| (x + y).cos() * th.sin();
        let u = |x: f64, y: f64, th: f64| v0_inverse(&m, &om, &f, [x, y, th]).unwrap();
        let p = [0.2, 0.1, 0.7];
        let back = apply_v0_spatial(&m, &u, p, 1e-3).unwrap();
        assert!((back - f(p[0], p[1], p[2])).abs() < 1e-4, "{}", m.name);
    }
}

#[test]
fn hardy_ratio_shrinks_with_the_domain() {
    let om = SmallDomain::default();
    for m in convex_metrics() {
        for k in 1..=3 {
            let f = hardy_family(om.delta, k);
            let big = hardy_spot_check(&m, &ZDomain::new(0.1, 0.01, om).unwrap(), 6.0, &f, 24).unwrap();
            let small = hardy_spot_check(&m, &ZDomain::new(0.05, 0.005, om).unwrap(), 6.0, &f, 24).unwrap();
            assert!(small.low_weight <= 1.2 * 0.5 * big.low_weight, "{} k={k}: {small:?} vs {big:?}", m.name);
            assert!(small.high_weight <= 1.2 * 0.5 * big.high_weight, "{} k={k}", m.name);
        }
    }
}
