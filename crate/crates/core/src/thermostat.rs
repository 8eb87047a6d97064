//! Flow curves of `𝒱₀ = −∂_t + V₀` on `Ω_small = [0, ε₁] × [−δ₁, δ₁] × [0, π]`,
//! the `z_λ` coordinate and its sublevel domains, and the integral
//! inverse of `V₀` along flow curves.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::metric::GaussianMetric;

/// `Ω_small` half-widths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmallDomain {
    pub eps: f64,
    pub delta: f64,
}

impl Default for SmallDomain {
    fn default() -> Self {
        SmallDomain { eps: 0.4, delta: 0.6 }
    }
}

impl SmallDomain {
    pub fn contains(&self, x: f64, y: f64, theta: f64) -> bool {
        (0.0..=self.eps).contains(&x) && y.abs() <= self.delta && (0.0..=PI).contains(&theta)
    }

    /// `2 max(1, sup α) (ε₁ + 2δ₁)`.
    pub fn hit_bound(&self, m: &GaussianMetric) -> Result<f64> {
        let mut sup: f64 = 0.0;
        for i in 0..=20 {
            for j in 0..=20 {
                let x = self.eps * i as f64 / 20.0;
                let y = -self.delta + 2.0 * self.delta * j as f64 / 20.0;
                sup = sup.max(m.alpha(x, y)?);
            }
        }
        Ok(2.0 * sup.max(1.0) * (self.eps + 2.0 * self.delta))
    }
}

/// `(min(½, sinθ) + ½)(x − λ) + λ/2`.
pub fn z_lambda(lambda: f64, x: f64, _y: f64, theta: f64) -> f64 {
    (theta.sin().min(0.5) + 0.5) * (x - lambda) + 0.5 * lambda
}

/// `∇_{x,y,θ} z_λ`, one-sided on the seam `sinθ = ½` (the `sinθ ≥ ½` branch).
pub fn z_lambda_grad(lambda: f64, x: f64, _y: f64, theta: f64) -> [f64; 3] {
    let s = theta.sin();
    if s < 0.5 {
        [s + 0.5, 0.0, theta.cos() * (x - lambda)]
    } else {
        [1.0, 0.0, 0.0]
    }
}

/// `V₀ = sinθ ∂ₓ + (cosθ/α) ∂_y + κ cosθ ∂θ`.
pub fn v0(m: &GaussianMetric, x: f64, y: f64, theta: f64) -> Result<[f64; 3]> {
    let j = m.eval(x, y)?;
    let (sn, cs) = theta.sin_cos();
    Ok([sn, cs / j.v, j.kappa() * cs])
}

/// `D_λ(z*) = {z_λ ≤ z*} ∩ Ω_small`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZDomain {
    pub lambda: f64,
    pub z_star: f64,
    pub omega: SmallDomain,
}

impl ZDomain {
    pub fn new(lambda: f64, z_star: f64, omega: SmallDomain) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::InvalidParam("λ must be positive".into()));
        }
        Ok(ZDomain { lambda, z_star, omega })
    }

    pub fn contains(&self, x: f64, y: f64, theta: f64) -> bool {
        self.omega.contains(x, y, theta) && z_lambda(self.lambda, x, y, theta) <= self.z_star
    }

    /// Largest `x` in the domain at angle `θ` (clipped to `[0, ε₁]`),
    /// `None` when the slice is empty.
    pub fn x_extent(&self, theta: f64) -> Option<f64> {
        let k = theta.sin().min(0.5) + 0.5;
        let hi = self.lambda + (self.z_star - 0.5 * self.lambda) / k;
        (hi >= 0.0).then(|| hi.min(self.omega.eps))
    }
}

/// `ρ̃(θ, λ)`: `¼` on `[π/6, 5π/6]`, `(3/16) c₀ λ + ½ sinθ` elsewhere.
pub fn flux_floor(theta: f64, lambda: f64, c0: f64) -> f64 {
    if (PI / 6.0..=5.0 * PI / 6.0).contains(&theta) {
        0.25
    } else {
        3.0 / 16.0 * c0 * lambda + 0.5 * theta.sin()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluxReport {
    pub samples: usize,
    pub violations: usize,
    /// Smallest `⟨∇z, V₀⟩ − ρ̃` seen.
    pub min_margin: f64,
    pub witness: Option<[f64; 3]>,
}

/// Sample `D_λ(z*)` uniformly (rejection from `Ω_small`) and test
/// `⟨∇z_λ, V₀⟩ ≥ ρ̃`. Seam points are skipped.
pub fn flux_lower_bound_check(m: &GaussianMetric, dom: &ZDomain, n_samples: usize, seed: u64) -> Result<FluxReport> {
    if dom.z_star > dom.lambda / 8.0 {
        return Err(Error::Precondition("z* must not exceed λ/8".into()));
    }
    let c0 = match m.convexity {
        Some(c) if c > 0.0 => c,
        _ => return Err(Error::Precondition("metric is not strictly convex near the boundary".into())),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts = Vec::with_capacity(n_samples);
    let mut tries = 0usize;
    while pts.len() < n_samples {
        tries += 1;
        if tries > 10_000 * n_samples.max(1) {
            return Err(Error::Degenerate("domain too thin to sample".into()));
        }
        let x = rng.gen_range(0.0..=dom.omega.eps);
        let y = rng.gen_range(-dom.omega.delta..=dom.omega.delta);
        let th = rng.gen_range(0.0..=PI);
        if dom.contains(x, y, th) && (th.sin() - 0.5).abs() > 1e-12 {
            pts.push([x, y, th]);
        }
    }
    let margins: Vec<Result<f64>> = pts
        .par_iter()
        .map(|p| {
            let g = z_lambda_grad(dom.lambda, p[0], p[1], p[2]);
            let v = v0(m, p[0], p[1], p[2])?;
            Ok(g[0] * v[0] + g[1] * v[1] + g[2] * v[2] - flux_floor(p[2], dom.lambda, c0))
        })
        .collect();
    let mut rep = FluxReport { samples: pts.len(), violations: 0, min_margin: f64::INFINITY, witness: None };
    for (p, r) in pts.iter().zip(margins) {
        let r = r?;
        if r < -1e-12 {
            rep.violations += 1;
            if rep.witness.is_none() {
                rep.witness = Some(*p);
            }
        }
        rep.min_margin = rep.min_margin.min(r);
    }
    Ok(rep)
}

pub const MU_STEP: f64 = 1e-3;

/// Samples of `μ(s) = (x, y, θ, t)` with `∂_s μ = −𝒱₀(μ)`, ending on `Γ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowPath {
    pub s: Vec<f64>,
    pub points: Vec<[f64; 4]>,
    pub hit_s: f64,
}

impl FlowPath {
    pub fn t_drift(&self) -> f64 {
        let (a, b) = (self.points[0], self.points[self.points.len() - 1]);
        (b[3] - a[3]).abs()
    }

    /// `max(|θ(s) − π/2|)` increase between consecutive samples; `≤ 0`
    /// when the angle approaches `π/2` monotonically.
    pub fn angle_growth(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| (w[1][2] - PI / 2.0).abs() - (w[0][2] - PI / 2.0).abs())
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

fn mu_rhs(m: &GaussianMetric, p: [f64; 4]) -> Result<[f64; 4]> {
    let v = v0(m, p[0], p[1], p[2])?;
    Ok([-v[0], -v[1], -v[2], 1.0])
}

fn mu_step(m: &GaussianMetric, p: [f64; 4], ds: f64) -> Result<[f64; 4]> {
    let add = |a: [f64; 4], k: [f64; 4], c: f64| [0, 1, 2, 3].map(|i| a[i] + c * k[i]);
    let k1 = mu_rhs(m, p)?;
    let k2 = mu_rhs(m, add(p, k1, 0.5 * ds))?;
    let k3 = mu_rhs(m, add(p, k2, 0.5 * ds))?;
    let k4 = mu_rhs(m, add(p, k3, ds))?;
    Ok([0, 1, 2, 3].map(|i| p[i] + ds / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])))
}

/// Signed distance to `Γ = {x = 0} ∪ {|y| = δ₁}`; negative once past it.
fn gamma_gap(omega: &SmallDomain, p: [f64; 4]) -> f64 {
    p[0].min(omega.delta - p[1].abs())
}

pub fn mu_flow(m: &GaussianMetric, omega: &SmallDomain, start: [f64; 4]) -> Result<FlowPath> {
    mu_flow_with(m, omega, start, MU_STEP)
}

pub fn mu_flow_with(m: &GaussianMetric, omega: &SmallDomain, start: [f64; 4], ds: f64) -> Result<FlowPath> {
    if !omega.contains(start[0], start[1], start[2]) {
        return Err(Error::Precondition("start point is outside Ω_small".into()));
    }
    let horizon = 4.0 * omega.hit_bound(m)?;
    let mut path = FlowPath { s: vec![0.0], points: vec![start], hit_s: 0.0 };
    if gamma_gap(omega, start) <= 0.0 {
        return Ok(path);
    }
    let mut p = start;
    let mut s = 0.0;
    while s < horizon {
        let q = mu_step(m, p, ds)?;
        if gamma_gap(omega, q) <= 0.0 {
            let (mut lo, mut hi) = (0.0, ds);
            while hi - lo > 1e-14 {
                let mid = 0.5 * (lo + hi);
                if gamma_gap(omega, mu_step(m, p, mid)?) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let end = mu_step(m, p, hi)?;
            path.hit_s = s + hi;
            path.s.push(path.hit_s);
            path.points.push(end);
            return Ok(path);
        }
        p = q;
        s += ds;
        path.s.push(s);
        path.points.push(p);
    }
    Err(Error::NotExited { horizon })
}

/// `V₀⁻¹ f (p) = ∫₀^ŝ f(π μ_p(s)) ds`, trapezoid at the flow step.
pub fn v0_inverse(
    m: &GaussianMetric,
    omega: &SmallDomain,
    f: &dyn Fn(f64, f64, f64) -> f64,
    point: [f64; 3],
) -> Result<f64> {
    v0_inverse_with(m, omega, f, point, MU_STEP)
}

pub fn v0_inverse_with(
    m: &GaussianMetric,
    omega: &SmallDomain,
    f: &dyn Fn(f64, f64, f64) -> f64,
    point: [f64; 3],
    ds: f64,
) -> Result<f64> {
    let path = mu_flow_with(m, omega, [point[0], point[1], point[2], 0.0], ds)?;
    let vals: Vec<f64> = path.points.iter().map(|p| f(p[0], p[1], p[2])).collect();
    Ok(path.s.windows(2).zip(vals.windows(2)).map(|(s, v)| 0.5 * (s[1] - s[0]) * (v[0] + v[1])).sum())
}

/// `V₀ g` by central differences.
pub fn apply_v0_spatial(m: &GaussianMetric, g: &dyn Fn(f64, f64, f64) -> f64, p: [f64; 3], h: f64) -> Result<f64> {
    let v = v0(m, p[0], p[1], p[2])?;
    let d = |k: usize| {
        let (mut a, mut b) = (p, p);
        a[k] += h;
        b[k] -= h;
        (g(a[0], a[1], a[2]) - g(b[0], b[1], b[2])) / (2.0 * h)
    };
    Ok(v[0] * d(0) + v[1] * d(1) + v[2] * d(2))
}

/// Ratios of the two weighted Hardy inequalities at `s = 1`, `P = 0`,
/// volume `α dx dy dθ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HardyRatio {
    /// `∫|f|² sin^{2a} / ∫|V₀f|² sin^{2a+2}`.
    pub low_weight: f64,
    /// `∫|f|² sin^{2a+2} / ∫|V₀f|² sin^{2a+2}`.
    pub high_weight: f64,
}

/// Midpoint quadrature over `D_λ(z*)`, integrating `x` exactly up to the
/// slice extent so the boundary of the domain is resolved.
pub fn hardy_spot_check(
    m: &GaussianMetric,
    dom: &ZDomain,
    a: f64,
    f: &dyn Fn(f64, f64, f64) -> f64,
    n: usize,
) -> Result<HardyRatio> {
    let n = n.max(4);
    let (mut num_i, mut num_ii, mut den) = (0.0, 0.0, 0.0);
    for it in 0..2 * n {
        let th = PI * (it as f64 + 0.5) / (2 * n) as f64;
        let Some(xmax) = dom.x_extent(th) else { continue };
        let sn = th.sin();
        let (w_i, w_ii) = (sn.powf(2.0 * a), sn.powf(2.0 * a + 2.0));
        for ix in 0..n {
            let x = xmax * (ix as f64 + 0.5) / n as f64;
            for iy in 0..n {
                let y = -dom.omega.delta + 2.0 * dom.omega.delta * (iy as f64 + 0.5) / n as f64;
                let dv = m.alpha(x, y)? * xmax / n as f64 * 2.0 * dom.omega.delta / n as f64 * PI / (2 * n) as f64;
                let fv = f(x, y, th);
                let vf = apply_v0_spatial(m, f, [x, y, th], 1e-5)?;
                num_i += fv * fv * w_i * dv;
                num_ii += fv * fv * w_ii * dv;
                den += vf * vf * w_ii * dv;
            }
        }
    }
    if den == 0.0 {
        return Err(Error::Degenerate("V₀f vanishes on the domain".into()));
    }
    Ok(HardyRatio { low_weight: num_i / den, high_weight: num_ii / den })
}

/// `x (δ₁² − y²) sin^k θ`, vanishing on `Γ`.
pub fn hardy_family(delta: f64, k: i32) -> impl Fn(f64, f64, f64) -> f64 {
    move |x, y, th| x * (delta * delta - y * y) * th.sin().powi(k)
}
