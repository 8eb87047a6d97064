//! Jacobi fields along geodesics and the canonical frame `(J, Y, X, B)`.
//!
//! Normal components solve `V̈ + G(γ(t)) V = 0`; they are integrated in
//! lockstep with the carrying geodesic so `G` is sampled at exactly the
//! stage points of the geodesic step.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodesic::{spray, step_count, State, DEFAULT_STEP};
use crate::metric::{wrap_angle, GaussianMetric};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct JacobiPair {
    pub perp: f64,
    pub perp_dot: f64,
    pub par: f64,
    pub par_dot: f64,
}

impl JacobiPair {
    pub fn normal(&self) -> (f64, f64) {
        (self.perp, self.perp_dot)
    }
}

/// `{a, b} = ȧ b − a ḃ` on normal components.
pub fn symplectic(a: (f64, f64), b: (f64, f64)) -> f64 {
    a.1 * b.0 - a.0 * b.1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackRow {
    pub t: f64,
    pub perp: f64,
    pub perp_dot: f64,
    pub par: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JacobiTrack {
    pub rows: Vec<TrackRow>,
    /// Set when the geodesic left the domain before the requested time.
    pub truncated: bool,
}

/// Combined geodesic + `K` normal Jacobi components.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Lock<const K: usize> {
    s: State,
    v: [(f64, f64); K],
}

/// Rates of the base state and of each locked Jacobi pair.
type LockRate<const K: usize> = ([f64; 3], [(f64, f64); K]);

fn lock_rhs<const K: usize>(m: &GaussianMetric, l: &Lock<K>) -> Result<LockRate<K>> {
    let ds = spray(m, &l.s)?;
    let g = m.eval(l.s.x, l.s.y)?.gauss();
    let mut dv = [(0.0, 0.0); K];
    for (d, v) in dv.iter_mut().zip(l.v.iter()) {
        *d = (v.1, -g * v.0);
    }
    Ok((ds, dv))
}

fn lock_add<const K: usize>(l: &Lock<K>, k: &([f64; 3], [(f64, f64); K]), h: f64) -> Lock<K> {
    let mut out = *l;
    out.s.x += h * k.0[0];
    out.s.y += h * k.0[1];
    out.s.theta += h * k.0[2];
    for (o, d) in out.v.iter_mut().zip(k.1.iter()) {
        o.0 += h * d.0;
        o.1 += h * d.1;
    }
    out
}

fn lock_step<const K: usize>(m: &GaussianMetric, l: &Lock<K>, dt: f64) -> Result<Lock<K>> {
    let k1 = lock_rhs(m, l)?;
    let k2 = lock_rhs(m, &lock_add(l, &k1, 0.5 * dt))?;
    let k3 = lock_rhs(m, &lock_add(l, &k2, 0.5 * dt))?;
    let k4 = lock_rhs(m, &lock_add(l, &k3, dt))?;
    let mut out = *l;
    let c = dt / 6.0;
    out.s.x += c * (k1.0[0] + 2.0 * k2.0[0] + 2.0 * k3.0[0] + k4.0[0]);
    out.s.y += c * (k1.0[1] + 2.0 * k2.0[1] + 2.0 * k3.0[1] + k4.0[1]);
    out.s.theta += c * (k1.0[2] + 2.0 * k2.0[2] + 2.0 * k3.0[2] + k4.0[2]);
    for i in 0..K {
        out.v[i].0 += c * (k1.1[i].0 + 2.0 * k2.1[i].0 + 2.0 * k3.1[i].0 + k4.1[i].0);
        out.v[i].1 += c * (k1.1[i].1 + 2.0 * k2.1[i].1 + 2.0 * k3.1[i].1 + k4.1[i].1);
    }
    if m.periodic() {
        out.s.y = wrap_angle(out.s.y);
    }
    Ok(out)
}

/// Integrate to `t`, calling `visit(time, state)` at every step including
/// the start. Returns the final state, or the time reached before the
/// geodesic left the domain.
fn lock_run<const K: usize>(
    m: &GaussianMetric,
    start: Lock<K>,
    t: f64,
    step: f64,
    mut visit: impl FnMut(f64, &Lock<K>),
) -> std::result::Result<Lock<K>, f64> {
    visit(0.0, &start);
    if t == 0.0 {
        return Ok(start);
    }
    let n = step_count(t, step);
    let dt = t / n as f64;
    let mut cur = start;
    for i in 0..n {
        cur = lock_step(m, &cur, dt).map_err(|_| i as f64 * dt)?;
        visit((i + 1) as f64 * dt, &cur);
    }
    Ok(cur)
}

/// Track of one Jacobi field from `start` to signed time `t_end`.
pub fn jacobi_integrate(m: &GaussianMetric, start: &State, init: &JacobiPair, t_end: f64) -> JacobiTrack {
    jacobi_integrate_with(m, start, init, t_end, DEFAULT_STEP)
}

pub fn jacobi_integrate_with(
    m: &GaussianMetric,
    start: &State,
    init: &JacobiPair,
    t_end: f64,
    step: f64,
) -> JacobiTrack {
    let mut rows = Vec::new();
    let l = Lock { s: *start, v: [(init.perp, init.perp_dot)] };
    let res = lock_run(m, l, t_end, step, |t, st| {
        rows.push(TrackRow { t, perp: st.v[0].0, perp_dot: st.v[0].1, par: init.par + init.par_dot * t })
    });
    JacobiTrack { rows, truncated: res.is_err() }
}

/// Initial data of the canonical fields at a base state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CanonicalFrame {
    pub j: JacobiPair,
    pub y: JacobiPair,
    pub x: JacobiPair,
    pub b: JacobiPair,
}

pub fn standard_frame(m: &GaussianMetric, x: f64, y: f64, theta: f64) -> Result<CanonicalFrame> {
    let jet = m.eval(x, y)?;
    let (sn, cs) = theta.sin_cos();
    let alpha = jet.v;
    Ok(CanonicalFrame {
        j: JacobiPair { perp: 1.0, perp_dot: 0.0, par: 0.0, par_dot: 0.0 },
        y: JacobiPair { perp: alpha * sn, perp_dot: jet.kappa() * alpha, par: alpha * cs, par_dot: 0.0 },
        x: JacobiPair { perp: -cs, perp_dot: 0.0, par: sn, par_dot: 0.0 },
        b: JacobiPair { perp: 0.0, perp_dot: -1.0, par: 0.0, par_dot: 0.0 },
    })
}

/// Normal components of `J`, `Y`, `B` at one time along the base geodesic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameValues {
    pub t: f64,
    /// Geodesic state at time `t`.
    pub state: State,
    pub j: (f64, f64),
    pub y: (f64, f64),
    pub b: (f64, f64),
}

impl FrameValues {
    /// `X = −cosθ₀ J` for base angle `θ₀`.
    pub fn x_field(&self, base_theta: f64) -> (f64, f64) {
        let c = -base_theta.cos();
        (c * self.j.0, c * self.j.1)
    }
}

fn frame_start(m: &GaussianMetric, base: &State) -> Result<Lock<3>> {
    let f = standard_frame(m, base.x, base.y, base.theta)?;
    Ok(Lock { s: *base, v: [f.j.normal(), f.y.normal(), f.b.normal()] })
}

fn values(t: f64, l: &Lock<3>) -> FrameValues {
    FrameValues { t, state: l.s, j: l.v[0], y: l.v[1], b: l.v[2] }
}

/// Frame values at time `t` (signed) for base state `base`.
pub fn frame_at(m: &GaussianMetric, base: &State, t: f64) -> Result<FrameValues> {
    frame_at_with(m, base, t, DEFAULT_STEP)
}

pub fn frame_at_with(m: &GaussianMetric, base: &State, t: f64, step: f64) -> Result<FrameValues> {
    let l = lock_run(m, frame_start(m, base)?, t, step, |_, _| {}).map_err(|t| Error::LeftDomain { t })?;
    Ok(values(t, &l))
}

/// Every step of the frame integration from `0` to `t`.
pub fn frame_track(m: &GaussianMetric, base: &State, t: f64, step: f64) -> Result<Vec<FrameValues>> {
    let mut out = Vec::new();
    lock_run(m, frame_start(m, base)?, t, step, |tt, l| out.push(values(tt, l)))
        .map_err(|t| Error::LeftDomain { t })?;
    Ok(out)
}

/// A field `κ(x, y)` with its `x` derivative, the input of the Jac operator.
pub trait KappaField {
    fn kappa(&self, x: f64, y: f64) -> f64;
    fn kappa_x(&self, x: f64, y: f64) -> f64;

    /// `−(∂ₓκ + κ²)`.
    fn riccati_potential(&self, x: f64, y: f64) -> f64 {
        let k = self.kappa(x, y);
        -(self.kappa_x(x, y) + k * k)
    }
}

impl KappaField for GaussianMetric {
    fn kappa(&self, x: f64, y: f64) -> f64 {
        self.jet_unchecked(x, y).kappa()
    }
    fn kappa_x(&self, x: f64, y: f64) -> f64 {
        self.jet_unchecked(x, y).kappa_x()
    }
}

/// κ of a metric multiplied by a constant.
#[derive(Debug, Clone)]
pub struct ScaledKappa<'a> {
    pub metric: &'a GaussianMetric,
    pub scale: f64,
}

impl KappaField for ScaledKappa<'_> {
    fn kappa(&self, x: f64, y: f64) -> f64 {
        self.scale * self.metric.kappa(x, y).unwrap_or(f64::NAN)
    }
    fn kappa_x(&self, x: f64, y: f64) -> f64 {
        self.scale * self.metric.jet_unchecked(x, y).kappa_x()
    }
}

/// Solution of `b̈ + 𝒢[κ](x+t, y) b = 0`, `b(0) = 0`, `ḃ(0) = −1`, sampled
/// at every step of `t ∈ [0, −x]`.
pub fn jac_track(field: &dyn KappaField, x: f64, y: f64, step: f64) -> Vec<(f64, f64, f64)> {
    let n = step_count(x, step);
    let dt = -x / n as f64;
    let f = |t: f64, v: (f64, f64)| (v.1, -field.riccati_potential(x + t, y) * v.0);
    let mut v = (0.0, -1.0);
    let mut out = Vec::with_capacity(n + 1);
    out.push((0.0, v.0, v.1));
    for i in 0..n {
        let t = i as f64 * dt;
        let k1 = f(t, v);
        let k2 = f(t + 0.5 * dt, (v.0 + 0.5 * dt * k1.0, v.1 + 0.5 * dt * k1.1));
        let k3 = f(t + 0.5 * dt, (v.0 + 0.5 * dt * k2.0, v.1 + 0.5 * dt * k2.1));
        let k4 = f(t + dt, (v.0 + dt * k3.0, v.1 + dt * k3.1));
        v.0 += dt / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
        v.1 += dt / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
        out.push(((i + 1) as f64 * dt, v.0, v.1));
    }
    out
}

/// `(b(−x), ḃ(−x))`.
pub fn jac_solve(field: &dyn KappaField, x: f64, y: f64) -> (f64, f64) {
    jac_solve_with(field, x, y, DEFAULT_STEP)
}

pub fn jac_solve_with(field: &dyn KappaField, x: f64, y: f64, step: f64) -> (f64, f64) {
    if x == 0.0 {
        return (0.0, -1.0);
    }
    let last = *jac_track(field, x, y, step).last().expect("non-empty track");
    (last.1, last.2)
}

/// `J − Y/(α sinθ) − κ B / sinθ` at time `t`; vanishes identically.
pub fn j_relation_residual(m: &GaussianMetric, x: f64, y: f64, theta: f64, t: f64) -> Result<f64> {
    let sn = theta.sin();
    if sn.abs() <= 1e-3 {
        return Err(Error::Precondition("sinθ too close to zero for the J relation".into()));
    }
    let jet = m.eval(x, y)?;
    let f = frame_at(m, &State::new(x, y, theta), t)?;
    Ok(f.j.0 - f.y.0 / (jet.v * sn) - jet.kappa() * f.b.0 / sn)
}

/// `Z = Y + ακ B`, which vanishes at `θ ∈ {0, π}`.
pub fn z_field(m: &GaussianMetric, x: f64, y: f64, theta: f64, t: f64) -> Result<f64> {
    let jet = m.eval(x, y)?;
    let f = frame_at(m, &State::new(x, y, theta), t)?;
    Ok(f.y.0 + jet.v * jet.kappa() * f.b.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{catalog, CatalogName, CatalogParams};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn metric(name: CatalogName) -> GaussianMetric {
        let p = CatalogParams {
            r0: if name == CatalogName::HyperbolicCollar { 1.0 } else { PI / 3.0 },
            ..Default::default()
        };
        catalog(name, &p).unwrap()
    }

    #[test]
    fn closed_form_tracks() {
        let b = JacobiPair { perp: 0.0, perp_dot: -1.0, ..Default::default() };
        let j = JacobiPair { perp: 1.0, ..Default::default() };
        let s = State::new(0.3, 0.1, 1.2);
        let flat = jacobi_integrate(&metric(CatalogName::FlatDisk), &s, &b, -1.0);
        let sphere = jacobi_integrate(&metric(CatalogName::SphereCap), &s, &b, -1.0);
        let hyp = jacobi_integrate(&metric(CatalogName::HyperbolicCollar), &s, &j, -1.0);
        assert!(!flat.truncated && !sphere.truncated && !hyp.truncated);
        for r in &flat.rows {
            assert_abs_diff_eq!(r.perp, -r.t, epsilon = 1e-10);
        }
        for r in &sphere.rows {
            assert_abs_diff_eq!(r.perp, -r.t.sin(), epsilon = 1e-8);
            assert_abs_diff_eq!(r.perp_dot, -r.t.cos(), epsilon = 1e-8);
        }
        for r in &hyp.rows {
            assert_abs_diff_eq!(r.perp, r.t.cosh(), epsilon = 1e-8);
        }
    }

    #[test]
    fn frame_initial_values() {
        let m = metric(CatalogName::FlatDisk);
        let f = standard_frame(&m, 0.5, 0.0, PI / 2.0).unwrap();
        assert_abs_diff_eq!(f.y.perp, 1.5);
        assert_abs_diff_eq!(f.y.perp_dot, -1.0);
        assert_abs_diff_eq!(f.x.perp, 0.0, epsilon = 1e-16);
        let f0 = standard_frame(&m, 0.5, 0.0, 0.0).unwrap();
        assert_eq!((f0.x.perp, f0.y.perp), (-1.0, 0.0));
        let s = standard_frame(&metric(CatalogName::SphereCap), 0.0, 0.0, PI / 3.0).unwrap();
        assert_abs_diff_eq!(s.y.perp, 0.75, epsilon = 1e-15);
    }

    #[test]
    fn symplectic_products_flat_closed_form() {
        let m = metric(CatalogName::FlatDisk);
        let f = frame_at(&m, &State::new(0.5, 0.0, PI / 2.0), -0.7).unwrap();
        assert_abs_diff_eq!(symplectic(f.y, f.j), -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(symplectic(f.j, f.b), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(symplectic(f.y, f.b), 1.5, epsilon = 1e-12);
    }

    #[test]
    fn jac_solve_closed_forms() {
        let flat = metric(CatalogName::FlatDisk);
        let (b, bd) = jac_solve(&flat, 0.4, 0.0);
        assert_abs_diff_eq!(b, 0.4, epsilon = 1e-12);
        assert_abs_diff_eq!(bd, -1.0, epsilon = 1e-12);
        let sph = metric(CatalogName::SphereCap);
        let (b, bd) = jac_solve(&sph, 0.4, 0.0);
        assert_abs_diff_eq!(b, 0.4f64.sin(), epsilon = 1e-10);
        assert_abs_diff_eq!(bd, -0.4f64.cos(), epsilon = 1e-10);
    }

    #[test]
    fn j_relation_and_z() {
        let m = metric(CatalogName::FlatDisk);
        for th in [0.3, 1.0, PI / 2.0, 2.7] {
            assert_abs_diff_eq!(j_relation_residual(&m, 0.2, 0.1, th, -0.8).unwrap(), 0.0, epsilon = 1e-10);
        }
        assert!(j_relation_residual(&m, 0.2, 0.1, 1e-4, -0.8).is_err());
        let s = metric(CatalogName::SphereCap);
        assert!(z_field(&s, 0.2, 0.1, 0.0, -0.9).unwrap().abs() < 1e-8);
        assert!(z_field(&s, 0.2, 0.1, PI, -0.9).unwrap().abs() < 1e-8);
    }
}
