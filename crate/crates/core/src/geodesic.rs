//! Geodesic flow on the unit circle bundle in Gaussian-polar coordinates.
//!
//! A state `(x, y, θ)` carries the unit vector `sinθ ∂ₓ + (cosθ/α) ∂_y`, so
//! `θ = π/2` points straight inward. The flow is
//! `ẋ = sinθ, ẏ = cosθ/α, θ̇ = κ cosθ`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::metric::{wrap_angle, GaussianMetric};

pub const DEFAULT_STEP: f64 = 1e-3;
const EVENT_TOL: f64 = 1e-10;
/// Below this `|cosθ|` a state on a disk model is treated as a meridian.
const MERIDIAN_TOL: f64 = 1e-12;
/// Substeps per unit of `α` when a step comes close to the pole.
const POLE_STEPS_PER_ALPHA: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl State {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        State { x, y, theta }
    }

    /// Chart components of the carried unit vector.
    pub fn direction(&self, alpha: f64) -> [f64; 2] {
        [self.theta.sin(), self.theta.cos() / alpha]
    }

    /// Same point, opposite direction.
    pub fn reversed(&self) -> State {
        State { theta: wrap_angle(self.theta + PI), ..*self }
    }
}

/// Right-hand side of the spray.
pub fn spray(m: &GaussianMetric, s: &State) -> Result<[f64; 3]> {
    let j = m.eval(s.x, s.y)?;
    if !(j.v > 0.0) {
        return Err(Error::OutOfDomain { x: s.x, y: s.y });
    }
    let (sn, cs) = s.theta.sin_cos();
    Ok([sn, cs / j.v, j.kappa() * cs])
}

fn add(s: &State, k: &[f64; 3], h: f64) -> State {
    State { x: s.x + h * k[0], y: s.y + h * k[1], theta: s.theta + h * k[2] }
}

fn normalize(m: &GaussianMetric, mut s: State) -> State {
    if m.periodic() {
        s.y = wrap_angle(s.y);
    }
    s
}

fn on_meridian(m: &GaussianMetric, s: &State) -> Option<f64> {
    let pole = m.pole()?;
    (s.theta.cos().abs() < MERIDIAN_TOL).then_some(pole)
}

/// One classical fourth-order step.
pub fn rk4_step(m: &GaussianMetric, s: &State, dt: f64) -> Result<State> {
    if let Some(pole) = on_meridian(m, s) {
        // Exact motion along a meridian, continued through the pole.
        let x = s.x + dt * s.theta.sin();
        if x >= pole {
            return Ok(normalize(m, State { x: 2.0 * pole - x, y: s.y + PI, theta: -s.theta }));
        }
        return Ok(State { x, ..*s });
    }
    if m.pole().is_some() {
        // Near the pole the chart scale α sets the step.
        let a = m.alpha(s.x, s.y)?;
        if dt.abs() > a / POLE_STEPS_PER_ALPHA {
            let mut cur = *s;
            let mut left = dt;
            while left != 0.0 {
                let a = m.alpha(cur.x, cur.y)?.max(1e-300);
                let h = left.signum() * left.abs().min(a / POLE_STEPS_PER_ALPHA);
                cur = rk4_plain(m, &cur, h)?;
                left = if (left - h).abs() < 1e-15 * dt.abs() { 0.0 } else { left - h };
            }
            return Ok(cur);
        }
    }
    rk4_plain(m, s, dt)
}

fn rk4_plain(m: &GaussianMetric, s: &State, dt: f64) -> Result<State> {
    let k1 = spray(m, s)?;
    let k2 = spray(m, &add(s, &k1, 0.5 * dt))?;
    let k3 = spray(m, &add(s, &k2, 0.5 * dt))?;
    let k4 = spray(m, &add(s, &k3, dt))?;
    let mut out = *s;
    out.x += dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]);
    out.y += dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]);
    out.theta += dt / 6.0 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]);
    Ok(normalize(m, out))
}

/// Number of equal steps covering `|t|` with steps no longer than `step`.
pub fn step_count(t: f64, step: f64) -> usize {
    ((t.abs() / step) - 1e-9).ceil().max(1.0) as usize
}

pub fn flow(m: &GaussianMetric, s: &State, t: f64) -> Result<State> {
    flow_with(m, s, t, DEFAULT_STEP)
}

pub fn flow_with(m: &GaussianMetric, s: &State, t: f64, step: f64) -> Result<State> {
    if t == 0.0 {
        return Ok(*s);
    }
    let n = step_count(t, step);
    let dt = t / n as f64;
    let mut cur = *s;
    for i in 0..n {
        cur = rk4_step(m, &cur, dt).map_err(|_| Error::LeftDomain { t: i as f64 * dt })?;
    }
    Ok(cur)
}

/// Flow and keep every intermediate state (`n + 1` samples).
pub fn flow_track(m: &GaussianMetric, s: &State, t: f64, step: f64) -> Result<Vec<State>> {
    let n = step_count(t, step);
    let dt = t / n as f64;
    let mut out = Vec::with_capacity(n + 1);
    out.push(*s);
    let mut cur = *s;
    for i in 0..n {
        cur = rk4_step(m, &cur, dt).map_err(|_| Error::LeftDomain { t: i as f64 * dt })?;
        out.push(cur);
    }
    Ok(out)
}

/// Half-step self check: difference between one run at `step` and one at
/// `step/2`, an estimate of the global error.
pub fn richardson_gap(m: &GaussianMetric, s: &State, t: f64, step: f64) -> Result<f64> {
    let a = flow_with(m, s, t, step)?;
    let b = flow_with(m, s, t, step / 2.0)?;
    Ok(state_distance(m, &a, &b))
}

/// Product distance on position × direction angle.
pub fn state_distance(m: &GaussianMetric, a: &State, b: &State) -> f64 {
    let dy = if m.periodic() { wrap_angle(a.y - b.y) } else { a.y - b.y };
    let alpha = m.eval(0.5 * (a.x + b.x), a.y).map(|j| j.v).unwrap_or(1.0);
    let dp = ((a.x - b.x).powi(2) + (alpha * dy).powi(2)).sqrt();
    dp + wrap_angle(a.theta - b.theta).abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryId {
    Outer,
    Inner,
    SidePlus,
    SideMinus,
}

impl BoundaryId {
    pub fn code(&self) -> u8 {
        match self {
            BoundaryId::Outer => 0,
            BoundaryId::Inner => 1,
            BoundaryId::SidePlus => 2,
            BoundaryId::SideMinus => 3,
        }
    }
}

/// Signed distances to each boundary piece; negative means outside.
fn boundary_values(m: &GaussianMetric, s: &State) -> [(BoundaryId, f64); 3] {
    let inner = m.inner_boundary.map_or(f64::INFINITY, |b| b - s.x);
    let side = m.side_boundary.map_or(f64::INFINITY, |h| h - s.y.abs());
    let side_id = if s.y >= 0.0 { BoundaryId::SidePlus } else { BoundaryId::SideMinus };
    [(BoundaryId::Outer, s.x), (BoundaryId::Inner, inner), (side_id, side)]
}

fn outside(m: &GaussianMetric, s: &State) -> Option<BoundaryId> {
    boundary_values(m, s).into_iter().find(|(_, v)| *v < 0.0).map(|(id, _)| id)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExitEvent {
    pub length: f64,
    pub boundary: BoundaryId,
    pub state: State,
}

/// First time the forward geodesic leaves the manifold.
pub fn exit_time(m: &GaussianMetric, s: &State, t_max: f64) -> Result<ExitEvent> {
    exit_time_with(m, s, t_max, DEFAULT_STEP)
}

pub fn exit_time_with(m: &GaussianMetric, s: &State, t_max: f64, step: f64) -> Result<ExitEvent> {
    // A step whose stage points leave the chart counts as a crossing too:
    // an inner boundary may sit on the edge of the chart.
    let crossed = |st: &Result<State>| st.as_ref().map_or(true, |st| outside(m, st).is_some());
    let mut t = 0.0;
    let mut cur = *s;
    while t < t_max {
        let next = rk4_step(m, &cur, step);
        if crossed(&next) {
            let (mut lo, mut hi) = (0.0, step);
            while hi - lo > EVENT_TOL {
                let mid = 0.5 * (lo + hi);
                if crossed(&rk4_step(m, &cur, mid)) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            let tau = 0.5 * (lo + hi);
            let state = rk4_step(m, &cur, tau).or_else(|_| rk4_step(m, &cur, lo))?;
            let (boundary, gap) = boundary_values(m, &state)
                .into_iter()
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .expect("three boundary pieces");
            if gap > 1e-6 {
                return Err(Error::LeftDomain { t: t + tau });
            }
            return Ok(ExitEvent { length: t + tau, boundary, state });
        }
        cur = next?;
        t += step;
    }
    Err(Error::NotExited { horizon: t_max })
}

/// One row of lens data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LensRecord {
    pub entry: State,
    pub exit: State,
    pub length: f64,
    pub boundary: BoundaryId,
}

pub fn default_horizon(m: &GaussianMetric) -> f64 {
    let span = (m.domain.x_max - m.domain.x_min.max(-m.domain.x_max)).abs().max(1.0);
    50.0 * 2.0 * span
}

/// Lens record of an inward boundary direction on `x = 0`.
pub fn scattering(m: &GaussianMetric, entry: &State) -> Result<LensRecord> {
    scattering_with(m, entry, DEFAULT_STEP)
}

pub fn scattering_with(m: &GaussianMetric, entry: &State, step: f64) -> Result<LensRecord> {
    if entry.x.abs() > 1e-12 {
        return Err(Error::Precondition(format!("entry must lie on x = 0, got x = {}", entry.x)));
    }
    let sn = entry.theta.sin();
    if sn < 0.0 {
        return Err(Error::Precondition("entry direction points outward".into()));
    }
    let entry = State { x: 0.0, ..*entry };
    if sn < 1e-13 {
        return Ok(LensRecord { entry, exit: entry, length: 0.0, boundary: BoundaryId::Outer });
    }
    let ev = exit_time_with(m, &entry, default_horizon(m), step)?;
    let mut exit = ev.state;
    exit.theta = wrap_angle(exit.theta);
    if ev.boundary == BoundaryId::Outer {
        exit.x = 0.0;
    }
    Ok(LensRecord { entry, exit, length: ev.length, boundary: ev.boundary })
}

/// Fan of `n` entry angles `kπ/n`, `k = 1..=n`, at boundary position `y0`.
pub fn lens_fan(m: &GaussianMetric, y0: f64, n: usize) -> Result<Vec<LensRecord>> {
    use rayon::prelude::*;
    (1..=n).into_par_iter().map(|k| scattering(m, &State::new(0.0, y0, k as f64 * PI / n as f64))).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    Known,
    Unknown,
    Outside,
}

type Predicate = Arc<dyn Fn(f64, f64) -> bool + Send + Sync>;

/// Splits the extended surface into the known part and the unknown interior.
#[derive(Clone)]
pub struct RegionMask {
    unknown: Option<Predicate>,
}

impl std::fmt::Debug for RegionMask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RegionMask").field("has_unknown", &self.unknown.is_some()).finish()
    }
}

impl RegionMask {
    pub fn all_known() -> Self {
        RegionMask { unknown: None }
    }

    pub fn with_unknown(pred: impl Fn(f64, f64) -> bool + Send + Sync + 'static) -> Self {
        RegionMask { unknown: Some(Arc::new(pred)) }
    }

    pub fn classify(&self, m: &GaussianMetric, x: f64, y: f64) -> Region {
        if !m.contains(x, y) {
            Region::Outside
        } else if x < m.known_depth {
            Region::Known
        } else if self.unknown.as_ref().is_some_and(|p| p(x, y)) {
            Region::Unknown
        } else {
            Region::Known
        }
    }
}

/// Extended scattering: the flow endpoint when it is observable from the
/// known region, `None` (absorbed) otherwise.
pub fn extended_scattering(m: &GaussianMetric, mask: &RegionMask, s: &State, t: f64) -> Result<Option<State>> {
    if mask.classify(m, s.x, s.y) != Region::Known {
        return Err(Error::Precondition("start state is not in the known region".into()));
    }
    match flow(m, s, t) {
        Ok(end) if mask.classify(m, end.x, end.y) == Region::Known => Ok(Some(end)),
        Ok(_) | Err(Error::LeftDomain { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{catalog, CatalogName, CatalogParams};
    use approx::assert_abs_diff_eq;

    fn flat() -> GaussianMetric {
        catalog(CatalogName::FlatDisk, &CatalogParams::default()).unwrap()
    }

    /// Gaussian chart of the flat disk to Cartesian coordinates.
    fn to_plane(s: &State, r: f64) -> ([f64; 2], [f64; 2]) {
        let rho = r - s.x;
        let (sy, cy) = s.y.sin_cos();
        let p = [rho * cy, rho * sy];
        // ∂ₓ = −radial, α⁻¹∂_y = angular unit vector.
        let v = [-s.theta.sin() * cy - s.theta.cos() * sy, -s.theta.sin() * sy + s.theta.cos() * cy];
        (p, v)
    }

    #[test]
    fn radial_geodesic() {
        let s = flow(&flat(), &State::new(0.0, 0.0, PI / 2.0), 0.7).unwrap();
        assert_abs_diff_eq!(s.x, 0.7, epsilon = 1e-12);
        assert_abs_diff_eq!(s.y, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.theta, PI / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn sphere_meridian() {
        let m = catalog(CatalogName::SphereCap, &CatalogParams::default()).unwrap();
        let s = flow(&m, &State::new(0.1, 0.3, PI / 2.0), 0.2).unwrap();
        assert_abs_diff_eq!(s.x, 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(s.y, 0.3, epsilon = 1e-12);
    }

    #[test]
    fn straight_line_in_plane() {
        let m = flat();
        let s0 = State::new(0.0, 0.0, PI / 4.0);
        let s1 = flow(&m, &s0, 0.5).unwrap();
        let (p0, v0) = to_plane(&s0, 2.0);
        let (p1, v1) = to_plane(&s1, 2.0);
        for i in 0..2 {
            assert_abs_diff_eq!(p1[i], p0[i] + 0.5 * v0[i], epsilon = 1e-8);
            assert_abs_diff_eq!(v1[i], v0[i], epsilon = 1e-8);
        }
    }

    #[test]
    fn chord_lengths() {
        let m = flat();
        for th in [PI / 4.0, PI / 2.0, 0.3, 2.5] {
            let rec = scattering(&m, &State::new(0.0, 0.4, th)).unwrap();
            assert_abs_diff_eq!(rec.length, 4.0 * th.sin(), epsilon = 1e-8);
            assert_abs_diff_eq!(wrap_angle(rec.exit.y - 0.4 - 2.0 * th), 0.0, epsilon = 1e-8);
            assert_abs_diff_eq!(wrap_angle(rec.exit.theta + th), 0.0, epsilon = 1e-8);
            assert_eq!(rec.boundary, BoundaryId::Outer);
        }
        let tangent = scattering(&m, &State::new(0.0, 0.0, 1e-6)).unwrap();
        assert!(tangent.length < 1e-5);
        assert!(matches!(scattering(&m, &State::new(0.0, 0.0, -0.2)), Err(Error::Precondition(_))));
    }

    #[test]
    fn annulus_inner_exit() {
        let p = CatalogParams { width: 1.0, ..Default::default() };
        let m = catalog(CatalogName::FlatPolarAnnulus, &p).unwrap();
        let rec = scattering(&m, &State::new(0.0, 0.0, PI / 2.0)).unwrap();
        assert_eq!(rec.boundary, BoundaryId::Inner);
        assert_abs_diff_eq!(rec.length, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn time_reversal() {
        let m = catalog(CatalogName::SphereCap, &CatalogParams::default()).unwrap();
        let s = State::new(0.2, -0.4, 1.1);
        let back = flow(&m, &flow(&m, &s, 0.8).unwrap(), -0.8).unwrap();
        assert!(state_distance(&m, &s, &back) < 1e-8);
        assert!(richardson_gap(&m, &s, 0.8, 1e-2).unwrap() < 1e-7);
    }

    #[test]
    fn extended_scattering_with_inner_disk() {
        let m = flat();
        // Unknown: concentric disk of radius 0.5.
        let mask = RegionMask::with_unknown(|x, _| x > 1.5);
        let s = State::new(0.0, 0.0, 0.4);
        let full = flow(&m, &s, 1.0).unwrap();
        assert_eq!(extended_scattering(&m, &mask, &s, 1.0).unwrap(), Some(full));
        let radial = State::new(0.0, 0.0, PI / 2.0);
        assert_eq!(extended_scattering(&m, &mask, &radial, 1.8).unwrap(), None);
        assert_eq!(
            extended_scattering(&m, &RegionMask::all_known(), &radial, 1.8).unwrap(),
            Some(flow(&m, &radial, 1.8).unwrap())
        );
    }
}
