//! Lens data of the rotationally symmetric models against chords and great
//! circles traced in their ambient models.

use lensrig_core::geodesic::{lens_fan, scattering, BoundaryId, State};
use lensrig_core::metric::{catalog, wrap_angle, CatalogName, CatalogParams};
use std::f64::consts::{PI, SQRT_2};

#[derive(Clone, Copy)]
enum Model {
    Plane,
    Sphere,
    Hyperboloid,
}

type V3 = [f64; 3];

fn ip(m: Model, a: V3, b: V3) -> f64 {
    let s = if matches!(m, Model::Hyperboloid) { -1.0 } else { 1.0 };
    a[0] * b[0] + a[1] * b[1] + s * a[2] * b[2]
}

/// Point, outward radial unit vector and angular unit vector at polar
/// radius `rho` and angle `y`.
fn polar(m: Model, rho: f64, y: f64) -> (V3, V3, V3) {
    let (sy, cy) = y.sin_cos();
    let ey = [-sy, cy, 0.0];
    match m {
        Model::Plane => ([rho * cy, rho * sy, 0.0], [cy, sy, 0.0], ey),
        Model::Sphere => {
            let (s, c) = rho.sin_cos();
            ([s * cy, s * sy, c], [c * cy, c * sy, -s], ey)
        }
        Model::Hyperboloid => {
            let (s, c) = (rho.sinh(), rho.cosh());
            ([s * cy, s * sy, c], [c * cy, c * sy, s], ey)
        }
    }
}

/// `(length, exit angle y, exit direction θ)` for the chord entering the
/// disk of radius `r` at `y0` with direction angle `theta`.
fn ambient_chord(m: Model, r: f64, y0: f64, theta: f64) -> (f64, f64, f64) {
    let (p, er, ey) = polar(m, r, y0);
    let (sn, cs) = theta.sin_cos();
    let v: V3 = std::array::from_fn(|i| -sn * er[i] + cs * ey[i]);
    let len = match m {
        Model::Plane => 2.0 * r * sn,
        Model::Sphere => 2.0 * (sn * r.tan()).atan(),
        Model::Hyperboloid => 2.0 * (sn * r.tanh()).atanh(),
    };
    let (q, dq): (V3, V3) = match m {
        Model::Plane => (std::array::from_fn(|i| p[i] + len * v[i]), v),
        Model::Sphere => {
            let (s, c) = len.sin_cos();
            (std::array::from_fn(|i| c * p[i] + s * v[i]), std::array::from_fn(|i| -s * p[i] + c * v[i]))
        }
        Model::Hyperboloid => {
            let (s, c) = (len.sinh(), len.cosh());
            (std::array::from_fn(|i| c * p[i] + s * v[i]), std::array::from_fn(|i| s * p[i] + c * v[i]))
        }
    };
    let y1 = q[1].atan2(q[0]);
    let (_, er1, ey1) = polar(m, r, y1);
    let th1 = (-ip(m, dq, er1)).atan2(ip(m, dq, ey1));
    (len, y1, th1)
}

fn check_fan(name: CatalogName, model: Model, r: f64, y0: f64) -> f64 {
    let m = catalog(name, &CatalogParams::default()).unwrap();
    let recs = lens_fan(&m, y0, 64).unwrap();
    assert_eq!(recs.len(), 64);
    let mut worst: f64 = 0.0;
    for rec in recs.iter().filter(|r| r.entry.theta < PI) {
        let (len, y1, th1) = ambient_chord(model, r, y0, rec.entry.theta);
        assert_eq!(rec.boundary, BoundaryId::Outer);
        worst = worst
            .max((rec.length - len).abs())
            .max(wrap_angle(rec.exit.y - y1).abs())
            .max(wrap_angle(rec.exit.theta - th1).abs());
    }
    worst
}

#[test]
fn flat_disk_fan_matches_chords() {
    for y0 in [0.0, 1.3, -2.9] {
        let w = check_fan(CatalogName::FlatDisk, Model::Plane, 2.0, y0);
        assert!(w < 1e-8, "y0={y0}: {w:e}");
    }
}

#[test]
fn sphere_cap_fan_matches_great_circles() {
    let w = check_fan(CatalogName::SphereCap, Model::Sphere, PI / 3.0, 0.4);
    assert!(w < 1e-8, "{w:e}");
}

#[test]
fn hyperbolic_fan_matches_hyperboloid_geodesics() {
    let w = check_fan(CatalogName::HyperbolicCollar, Model::Hyperboloid, PI / 3.0, 0.0);
    assert!(w < 1e-8, "{w:e}");
}

#[test]
fn quarter_turn_row() {
    let m = catalog(CatalogName::FlatDisk, &CatalogParams::default()).unwrap();
    let recs = lens_fan(&m, 0.0, 64).unwrap();
    let row = &recs[15];
    assert!((row.entry.theta - PI / 4.0).abs() < 1e-15);
    assert!((row.length - 2.0 * SQRT_2).abs() < 1e-6);
}

#[test]
fn tangent_direction_has_zero_length() {
    let m = catalog(CatalogName::FlatDisk, &CatalogParams::default()).unwrap();
    let last = lens_fan(&m, 0.0, 64).unwrap().pop().unwrap();
    assert_eq!(last.length, 0.0);
    assert_eq!(last.exit, last.entry);
}

#[test]
fn annulus_chords_that_reach_the_hole() {
    let m = catalog(CatalogName::FlatPolarAnnulus, &CatalogParams::default()).unwrap();
    let (outer, inner) = (2.0f64, 1.0f64);
    for k in 1..40 {
        let th = k as f64 * PI / 40.0;
        let rec = scattering(&m, &State::new(0.0, 0.2, th)).unwrap();
        let b = outer * th.cos().abs();
        if b < inner - 1e-3 {
            let len = outer * th.sin() - (inner * inner - b * b).sqrt();
            assert_eq!(rec.boundary, BoundaryId::Inner, "θ={th}");
            assert!((rec.length - len).abs() < 1e-8, "θ={th}");
            assert!((rec.exit.x - (outer - inner)).abs() < 1e-9);
        } else if b > inner + 1e-3 {
            assert_eq!(rec.boundary, BoundaryId::Outer, "θ={th}");
            assert!((rec.length - 2.0 * outer * th.sin()).abs() < 1e-8);
        }
    }
}

#[test]
fn outward_entry_rejected() {
    let m = catalog(CatalogName::FlatDisk, &CatalogParams::default()).unwrap();
    assert!(scattering(&m, &State::new(0.0, 0.0, -0.3)).is_err());
    assert!(scattering(&m, &State::new(0.1, 0.0, 0.3)).is_err());
}
