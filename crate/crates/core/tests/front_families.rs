use lensrig_core::front::{
    build_front_family, commutator_residual, flat_circle_radius_error, pseudo_front_verify, transport_residual,
    AssocFields, FrontMap, GridSpec,
};
use lensrig_core::geodesic::State;
use lensrig_core::metric::{catalog, wrap_angle, CatalogName, CatalogParams, GaussianMetric};
use lensrig_core::suite::{admissible_states, sample_states};

fn named(n: CatalogName) -> GaussianMetric {
    catalog(n, &CatalogParams::default()).unwrap()
}

fn small_grid() -> GridSpec {
    GridSpec { nx: 5, ny: 5, n_theta: 9, n_t: 5, ..GridSpec::default() }
}

#[test]
fn flat_circles_have_radius_t() {
    let map = FrontMap::Circle(named(CatalogName::FlatDisk));
    for t in [-0.25, -0.5, -1.0] {
        for (x, y) in [(0.0, 0.0), (0.3, 0.4), (0.4, -0.5)] {
            let e = flat_circle_radius_error(2.0, &map, x, y, t, 48).unwrap();
            assert!(e < 1e-6 * t.abs(), "t={t} ({x},{y}): {e:e}");
        }
    }
}

#[test]
fn flat_family_samples_are_straight_lines() {
    let m = named(CatalogName::FlatDisk);
    let fam = build_front_family(FrontMap::Circle(m.clone()), AssocFields::of(&m), small_grid());
    assert_eq!(fam.flagged(), 0);
    let g = fam.grid;
    let (xs, ys, ths, ts) = (g.xs(), g.ys(), g.thetas(), g.times());
    for (ix, &x) in xs.iter().enumerate() {
        for (iy, &y) in ys.iter().enumerate() {
            for (ith, &th) in ths.iter().enumerate() {
                for (it, &t) in ts.iter().enumerate() {
                    let r = 2.0 - x;
                    let (sy, cy) = y.sin_cos();
                    let v = [-th.sin() * cy - th.cos() * sy, -th.sin() * sy + th.cos() * cy];
                    let q = [r * cy + t * v[0], r * sy + t * v[1]];
                    let s = fam.samples[fam.index(ix, iy, ith, it)].unwrap();
                    let rr = q[0].hypot(q[1]);
                    assert!((2.0 - s.x - rr).abs() < 1e-10);
                    assert!(wrap_angle(s.y - q[1].atan2(q[0])).abs() < 1e-10);
                }
            }
        }
    }
}

#[test]
fn verification_agrees_at_both_slices() {
    let grid = small_grid();
    for name in [CatalogName::SphereCap, CatalogName::HyperbolicCollar] {
        let m = named(name);
        let nodes = grid.nodes(2);
        for (scale, expect) in [(1.0, true), (1.3, false)] {
            let assoc = AssocFields { metric: m.clone(), kappa_scale: scale };
            let fam = build_front_family(FrontMap::Circle(m.clone()), assoc, grid);
            let verdict = |t: f64| {
                let rep = pseudo_front_verify(&fam, &nodes, t, 1e-6, 1e-4).unwrap();
                rep.checks.iter().all(|c| c.pass)
            };
            let full = verdict(-grid.anchor);
            let half = verdict(-grid.anchor / 2.0);
            assert_eq!(full, half, "{name} scale {scale}");
            assert_eq!(full, expect, "{name} scale {scale}");
        }
    }
}

#[test]
fn frame_transport_and_commutators() {
    for name in [CatalogName::FlatDisk, CatalogName::SphereCap, CatalogName::HyperbolicWaist] {
        let m = named(name);
        let nodes = admissible_states(&m, &sample_states(10, 0.4, 5), -0.6, 1e-3);
        for s in &nodes {
            let tr = transport_residual(&m, s, -0.6, 1e-4).unwrap();
            let cm = commutator_residual(&m, s, -0.6, 1e-4).unwrap();
            for r in tr.into_iter().chain(cm) {
                assert!(r.abs() < 1e-6, "{name} {s:?}: {r:e}");
            }
        }
    }
}

#[test]
fn pseudo_map_with_equal_metrics_is_the_circle_map() {
    let m = named(CatalogName::SphereCap);
    let circle = FrontMap::Circle(m.clone());
    let pseudo = FrontMap::Pseudo { geometry: m.clone(), source: m.clone(), anchor: 0.5 };
    let s = State::new(0.2, 0.1, 1.1);
    let a = circle.eval(&s, -0.3).unwrap();
    let b = pseudo.eval(&s, -0.3).unwrap();
    assert!((a.x - b.x).abs() < 1e-10 && (a.y - b.y).abs() < 1e-10 && wrap_angle(a.theta - b.theta).abs() < 1e-10);
}
