//! Surface metrics in Gaussian normal form `dx² + α(x,y)² dy²`.
//!
//! `x` is the distance from the outer boundary curve `x = 0` (positive
//! inward), `y` runs along it. Every metric is an analytic profile in `x`
//! multiplied by a product of compactly supported bump factors, so all
//! derivatives are exact.

use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};

/// α and the derivatives the rest of the crate consumes.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Jet {
    pub v: f64,
    pub x: f64,
    pub y: f64,
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
    pub xxx: f64,
}

impl Jet {
    pub const ONE: Jet = Jet { v: 1.0, x: 0.0, y: 0.0, xx: 0.0, xy: 0.0, yy: 0.0, xxx: 0.0 };

    pub fn x_only(v: f64, x: f64, xx: f64, xxx: f64) -> Self {
        Jet { v, x, xx, xxx, ..Jet::default() }
    }

    /// Leibniz rule for the tracked derivatives.
    pub fn mul(&self, g: &Jet) -> Jet {
        let f = self;
        Jet {
            v: f.v * g.v,
            x: f.x * g.v + f.v * g.x,
            y: f.y * g.v + f.v * g.y,
            xx: f.xx * g.v + 2.0 * f.x * g.x + f.v * g.xx,
            xy: f.xy * g.v + f.x * g.y + f.y * g.x + f.v * g.xy,
            yy: f.yy * g.v + 2.0 * f.y * g.y + f.v * g.yy,
            xxx: f.xxx * g.v + 3.0 * f.xx * g.x + 3.0 * f.x * g.xx + f.v * g.xxx,
        }
    }

    pub fn kappa(&self) -> f64 {
        self.x / self.v
    }

    pub fn kappa_x(&self) -> f64 {
        let k = self.kappa();
        self.xx / self.v - k * k
    }

    pub fn kappa_y(&self) -> f64 {
        self.xy / self.v - self.x * self.y / (self.v * self.v)
    }

    pub fn gauss(&self) -> f64 {
        -self.xx / self.v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvatureSample {
    pub kappa: f64,
    pub gauss: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CatalogName {
    FlatDisk,
    SphereCap,
    HyperbolicCollar,
    FlatPolarAnnulus,
    HyperbolicWaist,
}

impl std::str::FromStr for CatalogName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "flat_disk" => CatalogName::FlatDisk,
            "sphere_cap" => CatalogName::SphereCap,
            "hyperbolic_collar" => CatalogName::HyperbolicCollar,
            "flat_polar_annulus" => CatalogName::FlatPolarAnnulus,
            "hyperbolic_waist" => CatalogName::HyperbolicWaist,
            other => return Err(Error::InvalidParam(format!("unknown metric `{other}`"))),
        })
    }
}

impl std::fmt::Display for CatalogName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            CatalogName::FlatDisk => "flat_disk",
            CatalogName::SphereCap => "sphere_cap",
            CatalogName::HyperbolicCollar => "hyperbolic_collar",
            CatalogName::FlatPolarAnnulus => "flat_polar_annulus",
            CatalogName::HyperbolicWaist => "hyperbolic_waist",
        };
        f.write_str(s)
    }
}

/// The `x`-dependent base profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Profile {
    /// Euclidean disk of radius `radius`, `α = R − x`.
    Flat { radius: f64 },
    /// Polar cap of the unit sphere with boundary colatitude `r0`.
    Sphere { r0: f64 },
    /// Geodesic disk of radius `r0` in the hyperbolic plane.
    Hyperbolic { r0: f64 },
    /// Hyperbolic cylinder `α = cosh(x − waist)`.
    Waist { waist: f64 },
}

impl Profile {
    fn jet(&self, x: f64) -> Jet {
        match *self {
            Profile::Flat { radius } => Jet::x_only(radius - x, -1.0, 0.0, 0.0),
            Profile::Sphere { r0 } => {
                let (s, c) = (r0 - x).sin_cos();
                Jet::x_only(s, -c, -s, c)
            }
            Profile::Hyperbolic { r0 } => {
                let (s, c) = ((r0 - x).sinh(), (r0 - x).cosh());
                Jet::x_only(s, -c, s, -c)
            }
            Profile::Waist { waist } => {
                let (s, c) = ((x - waist).sinh(), (x - waist).cosh());
                Jet::x_only(c, s, c, s)
            }
        }
    }

    /// `x` at which α vanishes, when the chart closes up at a pole.
    fn pole(&self) -> Option<f64> {
        match *self {
            Profile::Flat { radius } => Some(radius),
            Profile::Sphere { r0 } | Profile::Hyperbolic { r0 } => Some(r0),
            Profile::Waist { .. } => None,
        }
    }
}

/// Smooth bump factor `1 + amplitude·ψ`, with `ψ = exp(1 − 1/(1−u))` and
/// `u` the squared chart distance to `center` over `radius²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: (f64, f64),
    pub radius: f64,
    pub amplitude: f64,
    pub jet_order: u32,
}

impl Bump {
    fn factor(&self, x: f64, y: f64, periodic: bool) -> Jet {
        let dx = x - self.center.0;
        let mut dy = y - self.center.1;
        if periodic {
            dy = wrap_angle(dy);
        }
        let r2 = self.radius * self.radius;
        let u = (dx * dx + dy * dy) / r2;
        if u >= 1.0 || self.amplitude == 0.0 {
            return Jet::ONE;
        }
        let w = 1.0 / (1.0 - u);
        let phi = (1.0 - w).exp();
        let (w2, w3, w4) = (w * w, w * w * w, w * w * w * w);
        let d1 = -w2 * phi;
        let d2 = (w4 - 2.0 * w3) * phi;
        let d3 = (-w4 * w2 + 6.0 * w4 * w - 6.0 * w4) * phi;
        let (ux, uy, u2) = (2.0 * dx / r2, 2.0 * dy / r2, 2.0 / r2);
        let a = self.amplitude;
        Jet {
            v: 1.0 + a * phi,
            x: a * d1 * ux,
            y: a * d1 * uy,
            xx: a * (d2 * ux * ux + d1 * u2),
            xy: a * d2 * ux * uy,
            yy: a * (d2 * uy * uy + d1 * u2),
            xxx: a * (d3 * ux * ux * ux + 3.0 * d2 * ux * u2),
        }
    }

    fn x_extent(&self) -> (f64, f64) {
        (self.center.0 - self.radius, self.center.0 + self.radius)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub x_min: f64,
    pub x_max: f64,
    /// `None` when `y` is an angle of period 2π.
    pub y_half: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianMetric {
    pub name: String,
    pub profile: Profile,
    pub bumps: Vec<Bump>,
    pub domain: Domain,
    /// The collar `x < known_depth` is treated as known.
    pub known_depth: f64,
    /// Second boundary component `x = inner` (annulus models).
    pub inner_boundary: Option<f64>,
    /// Side boundaries `|y| = side` for non-periodic charts.
    pub side_boundary: Option<f64>,
    /// Lower bound on `-κ` over `x ≥ 0`, when the boundary is convex.
    pub convexity: Option<f64>,
}

pub fn wrap_angle(a: f64) -> f64 {
    let r = (a + PI).rem_euclid(TAU) - PI;
    if r <= -PI {
        r + TAU
    } else {
        r
    }
}

impl GaussianMetric {
    pub fn periodic(&self) -> bool {
        self.domain.y_half.is_none()
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let d = &self.domain;
        let in_x = x >= d.x_min && x <= d.x_max;
        let in_y = d.y_half.is_none_or(|h| y.abs() <= h);
        in_x && in_y && x.is_finite() && y.is_finite()
    }

    /// Exact α jet at a chart point.
    pub fn eval(&self, x: f64, y: f64) -> Result<Jet> {
        if !self.contains(x, y) {
            return Err(Error::OutOfDomain { x, y });
        }
        Ok(self.jet_unchecked(x, y))
    }

    pub(crate) fn jet_unchecked(&self, x: f64, y: f64) -> Jet {
        let periodic = self.periodic();
        self.bumps.iter().fold(self.profile.jet(x), |acc, b| acc.mul(&b.factor(x, y, periodic)))
    }

    pub fn alpha(&self, x: f64, y: f64) -> Result<f64> {
        Ok(self.eval(x, y)?.v)
    }

    pub fn kappa(&self, x: f64, y: f64) -> Result<f64> {
        Ok(self.eval(x, y)?.kappa())
    }

    pub fn gauss_curvature(&self, x: f64, y: f64) -> Result<f64> {
        Ok(self.eval(x, y)?.gauss())
    }

    pub fn curvature(&self, x: f64, y: f64) -> Result<CurvatureSample> {
        let j = self.eval(x, y)?;
        Ok(CurvatureSample { kappa: j.kappa(), gauss: j.gauss() })
    }

    /// Pole of a rotationally symmetric disk model.
    pub fn pole(&self) -> Option<f64> {
        if self.bumps.iter().all(|b| b.amplitude == 0.0) && self.periodic() {
            self.profile.pole()
        } else {
            None
        }
    }

    pub fn rotationally_symmetric(&self) -> bool {
        self.periodic() && self.bumps.iter().all(|b| b.amplitude == 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CatalogParams {
    /// Radius of the flat disk or annulus outer circle.
    pub radius: f64,
    /// Boundary colatitude / hyperbolic radius / waist position.
    pub r0: f64,
    /// Width of the annulus.
    pub width: f64,
    /// How far the analytic extension reaches beyond `x = 0`.
    pub extension: f64,
}

impl Default for CatalogParams {
    fn default() -> Self {
        CatalogParams { radius: 2.0, r0: PI / 3.0, width: 1.0, extension: 2.0 }
    }
}

pub fn catalog(name: CatalogName, p: &CatalogParams) -> Result<GaussianMetric> {
    let bad = |m: &str| Err(Error::InvalidParam(m.to_string()));
    let ext = p.extension;
    if !(ext >= 0.0) {
        return bad("extension must be non-negative");
    }
    let (profile, x_min, x_max, inner, convexity) = match name {
        CatalogName::FlatDisk => {
            if !(p.radius > 0.0) {
                return bad("flat_disk needs radius > 0");
            }
            (Profile::Flat { radius: p.radius }, -ext, p.radius, None, Some(1.0 / p.radius))
        }
        CatalogName::FlatPolarAnnulus => {
            if !(p.radius > 0.0 && p.width > 0.0 && p.width < p.radius) {
                return bad("flat_polar_annulus needs 0 < width < radius");
            }
            let r = p.radius;
            (Profile::Flat { radius: r }, -ext, p.width, Some(p.width), Some(1.0 / r))
        }
        CatalogName::SphereCap => {
            if !(p.r0 > 0.0 && p.r0 < PI / 2.0) {
                return bad("sphere_cap needs r0 in (0, π/2)");
            }
            // α stays positive down to colatitude π; convexity holds for x > r0 − π/2.
            let lo = (-ext).max(p.r0 - PI + 0.05);
            (Profile::Sphere { r0: p.r0 }, lo, p.r0, None, Some(1.0 / p.r0.tan()))
        }
        CatalogName::HyperbolicCollar => {
            if !(p.r0 > 0.0) {
                return bad("hyperbolic_collar needs r0 > 0");
            }
            (Profile::Hyperbolic { r0: p.r0 }, -ext, p.r0, None, Some(1.0 / p.r0.tanh()))
        }
        CatalogName::HyperbolicWaist => {
            if !(p.r0 > 0.0) {
                return bad("hyperbolic_waist needs waist position r0 > 0");
            }
            (Profile::Waist { waist: p.r0 }, -ext, 2.0 * p.r0 + ext, None, None)
        }
    };
    Ok(GaussianMetric {
        name: name.to_string(),
        profile,
        bumps: Vec::new(),
        domain: Domain { x_min, x_max, y_half: None },
        known_depth: 0.0,
        inner_boundary: inner,
        side_boundary: None,
        convexity,
    })
}

/// Multiply α by a bump factor supported away from the known collar.
pub fn bump_perturb(
    m: &GaussianMetric,
    center: (f64, f64),
    radius: f64,
    amplitude: f64,
    jet_order: u32,
) -> Result<GaussianMetric> {
    if jet_order > 3 {
        return Err(Error::InvalidParam("jet_order must be at most 3".into()));
    }
    if !(radius > 0.0) {
        return Err(Error::InvalidParam("bump radius must be positive".into()));
    }
    let b = Bump { center, radius, amplitude, jet_order };
    let (lo, hi) = b.x_extent();
    if lo <= m.known_depth {
        return Err(Error::Precondition(format!(
            "bump support reaches x = {lo}, inside the known collar x < {}",
            m.known_depth
        )));
    }
    if hi >= m.domain.x_max {
        return Err(Error::Precondition("bump support leaves the domain".into()));
    }
    if let Some(h) = m.domain.y_half {
        if center.1.abs() + radius >= h {
            return Err(Error::Precondition("bump support leaves the domain".into()));
        }
    }
    if amplitude.abs() >= 1.0 {
        return Err(Error::InvalidParam("bump amplitude must be below 1 in magnitude".into()));
    }
    Ok(with_bump_unchecked(m, b))
}

/// Attach a bump without the collar check; used to build deliberately
/// incompatible pairs.
pub fn with_bump_unchecked(m: &GaussianMetric, b: Bump) -> GaussianMetric {
    let mut out = m.clone();
    out.bumps.push(b);
    out.name = format!("{}+bump", m.name);
    out
}

/// Central-difference jet of α, used only as an oracle.
pub fn finite_difference_jet(m: &GaussianMetric, x: f64, y: f64, h: f64) -> Jet {
    let a = |dx: f64, dy: f64| m.jet_unchecked(x + dx, y + dy).v;
    let c = a(0.0, 0.0);
    Jet {
        v: c,
        x: (a(h, 0.0) - a(-h, 0.0)) / (2.0 * h),
        y: (a(0.0, h) - a(0.0, -h)) / (2.0 * h),
        xx: (a(h, 0.0) - 2.0 * c + a(-h, 0.0)) / (h * h),
        xy: (a(h, h) - a(h, -h) - a(-h, h) + a(-h, -h)) / (4.0 * h * h),
        yy: (a(0.0, h) - 2.0 * c + a(0.0, -h)) / (h * h),
        xxx: (a(2.0 * h, 0.0) - 2.0 * a(h, 0.0) + 2.0 * a(-h, 0.0) - a(-2.0 * h, 0.0)) / (2.0 * h * h * h),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn flat() -> GaussianMetric {
        catalog(CatalogName::FlatDisk, &CatalogParams::default()).unwrap()
    }

    fn sphere() -> GaussianMetric {
        catalog(CatalogName::SphereCap, &CatalogParams::default()).unwrap()
    }

    fn hyper() -> GaussianMetric {
        catalog(CatalogName::HyperbolicCollar, &CatalogParams { r0: 1.0, ..Default::default() }).unwrap()
    }

    #[test]
    fn flat_values() {
        let j = flat().eval(0.5, 1.3).unwrap();
        assert_eq!((j.v, j.x, j.y, j.xx, j.xy, j.yy, j.xxx), (1.5, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0));
        assert_abs_diff_eq!(flat().kappa(0.5, 0.0).unwrap(), -1.0 / 1.5, epsilon = 1e-15);
    }

    #[test]
    fn sphere_values() {
        let j = sphere().eval(0.0, 0.0).unwrap();
        assert_abs_diff_eq!(j.v, (PI / 3.0).sin(), epsilon = 1e-15);
        assert_abs_diff_eq!(j.x, -0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(j.kappa(), -1.0 / (PI / 3.0).tan(), epsilon = 1e-15);
        assert_abs_diff_eq!(hyper().kappa(0.0, 0.0).unwrap(), -1.0 / 1f64.tanh(), epsilon = 1e-14);
    }

    #[test]
    fn constant_curvatures() {
        for x in [0.0, 0.2, 0.7] {
            assert_abs_diff_eq!(flat().gauss_curvature(x, 0.3).unwrap(), 0.0);
            assert_abs_diff_eq!(sphere().gauss_curvature(x, 0.3).unwrap(), 1.0, epsilon = 1e-14);
            assert_abs_diff_eq!(hyper().gauss_curvature(x, 0.3).unwrap(), -1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn out_of_domain() {
        assert!(matches!(flat().eval(2.5, 0.0), Err(Error::OutOfDomain { .. })));
    }

    #[test]
    fn bump_matches_finite_differences() {
        let m = bump_perturb(&flat(), (0.5, 0.0), 0.2, 0.01, 3).unwrap();
        for &(x, y) in &[(0.5, 0.0), (0.45, 0.05), (0.6, -0.1), (0.38, 0.02)] {
            let a = m.eval(x, y).unwrap();
            let (f1, f2) = (finite_difference_jet(&m, x, y, 1e-3), finite_difference_jet(&m, x, y, 5e-4));
            let rich = |p: f64, q: f64| (4.0 * q - p) / 3.0;
            let f = Jet {
                x: rich(f1.x, f2.x),
                y: rich(f1.y, f2.y),
                xx: rich(f1.xx, f2.xx),
                xy: rich(f1.xy, f2.xy),
                yy: rich(f1.yy, f2.yy),
                ..f1
            };
            for (p, q) in [(a.x, f.x), (a.y, f.y), (a.xx, f.xx), (a.xy, f.xy), (a.yy, f.yy)] {
                assert_abs_diff_eq!(p, q, epsilon = 1e-6);
            }
            let g1 = finite_difference_jet(&m, x, y, 2e-3).xxx;
            let g2 = finite_difference_jet(&m, x, y, 1e-3).xxx;
            assert_abs_diff_eq!(a.xxx, rich(g1, g2), epsilon = 1e-4 * (1.0 + a.xxx.abs()));
        }
    }

    #[test]
    fn bump_invisible_off_support() {
        let base = flat();
        let m = bump_perturb(&base, (0.5, 0.0), 0.2, 0.01, 3).unwrap();
        for i in 0..=40 {
            let x = -0.5 + i as f64 * 0.05;
            for y in [-1.0, -0.25, 0.0, 0.25, 3.0] {
                let inside = (x - 0.5).powi(2) + y * y < 0.04;
                if !inside {
                    assert_eq!(m.eval(x, y).unwrap(), base.eval(x, y).unwrap());
                }
            }
        }
        let z = bump_perturb(&base, (0.5, 0.0), 0.2, 0.0, 3).unwrap();
        assert_eq!(z.eval(0.5, 0.0).unwrap(), base.eval(0.5, 0.0).unwrap());
    }

    #[test]
    fn bump_touching_collar_rejected() {
        let r = bump_perturb(&flat(), (0.15, 0.0), 0.2, 0.01, 3);
        assert!(matches!(r, Err(Error::Precondition(_))));
    }

    #[test]
    fn invalid_catalog_params() {
        let p = CatalogParams { r0: 2.0, ..Default::default() };
        assert!(catalog(CatalogName::SphereCap, &p).is_err());
        assert!("torus".parse::<CatalogName>().is_err());
    }

    proptest! {
        #[test]
        fn gauss_is_minus_second_derivative_ratio(x in -0.4f64..0.9, y in -3.0f64..3.0) {
            for m in [flat(), sphere(), hyper()] {
                let j = m.eval(x, y).unwrap();
                prop_assert!((j.gauss() + j.xx / j.v).abs() < 1e-10);
                prop_assert!((j.gauss() + j.kappa_x() + j.kappa() * j.kappa()).abs() < 1e-10);
            }
        }

        #[test]
        fn catalog_is_convex(x in 0.0f64..0.9, y in -3.0f64..3.0) {
            for m in [flat(), sphere(), hyper()] {
                prop_assert!(m.kappa(x, y).unwrap() < 0.0);
            }
        }

        #[test]
        fn wrap_stays_in_range(a in -50.0f64..50.0) {
            let w = wrap_angle(a);
            prop_assert!(w > -PI - 1e-12 && w <= PI + 1e-12);
            prop_assert!(((a - w) / TAU - ((a - w) / TAU).round()).abs() < 1e-9);
        }
    }
}
