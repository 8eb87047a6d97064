//! Curve-shortening flow of closed curves and one-layer stripping of
//! scattering data through a known collar.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geodesic::{default_horizon, rk4_step, scattering_with, State};
use crate::metric::{wrap_angle, GaussianMetric};

/// Conformal models `λ(w)² |dw|²` on the unit disk or the plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConformalKind {
    Flat,
    /// Stereographic unit sphere, `λ = 2/(1 + |w|²)`.
    Sphere,
    /// Poincaré disk, `λ = 2/(1 − |w|²)`.
    Hyperbolic,
}

/// A chart a curve lives in.
#[derive(Debug, Clone)]
pub enum ChartSurface {
    Conformal(ConformalKind),
    /// Gaussian chart, `y` lifted to the real line.
    Gaussian(GaussianMetric),
}

impl ChartSurface {
    /// `(g₁₁, g₁₂, g₂₂)`.
    pub fn metric(&self, p: [f64; 2]) -> Result<[f64; 3]> {
        match self {
            ChartSurface::Conformal(k) => {
                let l = conformal_factor(*k, p)?;
                Ok([l * l, 0.0, l * l])
            }
            ChartSurface::Gaussian(m) => {
                let a = m.alpha(p[0], p[1])?;
                Ok([1.0, 0.0, a * a])
            }
        }
    }

    /// `Γᵏ` as `[k][(11, 12, 22)]`.
    pub fn christoffel(&self, p: [f64; 2]) -> Result<[[f64; 3]; 2]> {
        match self {
            ChartSurface::Conformal(k) => {
                let r2 = p[0] * p[0] + p[1] * p[1];
                // ∇ log λ.
                let d = match k {
                    ConformalKind::Flat => [0.0, 0.0],
                    ConformalKind::Sphere => [-2.0 * p[0] / (1.0 + r2), -2.0 * p[1] / (1.0 + r2)],
                    ConformalKind::Hyperbolic => {
                        conformal_factor(*k, p)?;
                        [2.0 * p[0] / (1.0 - r2), 2.0 * p[1] / (1.0 - r2)]
                    }
                };
                Ok([[d[0], d[1], -d[0]], [-d[1], d[0], d[1]]])
            }
            ChartSurface::Gaussian(m) => {
                let j = m.eval(p[0], p[1])?;
                Ok([[0.0, 0.0, -j.v * j.x], [0.0, j.x / j.v, j.y / j.v]])
            }
        }
    }

    fn norm(&self, p: [f64; 2], v: [f64; 2]) -> Result<f64> {
        let g = self.metric(p)?;
        Ok((g[0] * v[0] * v[0] + 2.0 * g[1] * v[0] * v[1] + g[2] * v[1] * v[1]).sqrt())
    }
}

fn conformal_factor(k: ConformalKind, p: [f64; 2]) -> Result<f64> {
    let r2 = p[0] * p[0] + p[1] * p[1];
    match k {
        ConformalKind::Flat => Ok(1.0),
        ConformalKind::Sphere => Ok(2.0 / (1.0 + r2)),
        ConformalKind::Hyperbolic if r2 < 1.0 => Ok(2.0 / (1.0 - r2)),
        ConformalKind::Hyperbolic => Err(Error::OutOfDomain { x: p[0], y: p[1] }),
    }
}

/// Closed polyline; node `i + n` is node `i` shifted by `lift`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedCurve {
    pub nodes: Vec<[f64; 2]>,
    pub lift: [f64; 2],
}

impl ClosedCurve {
    pub fn circle(center: [f64; 2], r: f64, n: usize) -> Self {
        let nodes = (0..n)
            .map(|i| {
                let a = 2.0 * PI * i as f64 / n as f64;
                [center[0] + r * a.cos(), center[1] + r * a.sin()]
            })
            .collect();
        ClosedCurve { nodes, lift: [0.0, 0.0] }
    }

    /// `x = x0 + amp·sin y` around a periodic Gaussian chart.
    pub fn latitude(x0: f64, amp: f64, n: usize) -> Self {
        let nodes = (0..n)
            .map(|i| {
                let y = -PI + 2.0 * PI * i as f64 / n as f64;
                [x0 + amp * y.sin(), y]
            })
            .collect();
        ClosedCurve { nodes, lift: [0.0, 2.0 * PI] }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, i: isize) -> [f64; 2] {
        let n = self.nodes.len() as isize;
        let k = i.rem_euclid(n);
        let wraps = (i - k) / n;
        let p = self.nodes[k as usize];
        [p[0] + wraps as f64 * self.lift[0], p[1] + wraps as f64 * self.lift[1]]
    }

    fn segment_lengths(&self, s: &ChartSurface) -> Result<Vec<f64>> {
        (0..self.len() as isize)
            .map(|i| {
                let (a, b) = (self.node(i), self.node(i + 1));
                s.norm([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])], [b[0] - a[0], b[1] - a[1]])
            })
            .collect()
    }

    pub fn length(&self, s: &ChartSurface) -> Result<f64> {
        Ok(self.segment_lengths(s)?.iter().sum())
    }

    pub fn min_spacing(&self, s: &ChartSurface) -> Result<f64> {
        Ok(self.segment_lengths(s)?.into_iter().fold(f64::INFINITY, f64::min))
    }

    /// Uniform-arc resampling to `n` nodes with Catmull-Rom interpolation,
    /// starting at node 0.
    pub fn resample(&self, s: &ChartSurface, n: usize) -> Result<ClosedCurve> {
        let seg = self.segment_lengths(s)?;
        let total: f64 = seg.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Degenerate("curve has zero length".into()));
        }
        let mut out = Vec::with_capacity(n);
        let mut k = 0usize;
        let mut acc = 0.0;
        for j in 0..n {
            let target = total * j as f64 / n as f64;
            while k + 1 < seg.len() && acc + seg[k] < target {
                acc += seg[k];
                k += 1;
            }
            let t = if seg[k] > 0.0 { ((target - acc) / seg[k]).clamp(0.0, 1.0) } else { 0.0 };
            let ki = k as isize;
            let (p0, p1, p2, p3) = (self.node(ki - 1), self.node(ki), self.node(ki + 1), self.node(ki + 2));
            let cr = |c: usize| {
                0.5 * (2.0 * p1[c]
                    + (-p0[c] + p2[c]) * t
                    + (2.0 * p0[c] - 5.0 * p1[c] + 4.0 * p2[c] - p3[c]) * t * t
                    + (-p0[c] + 3.0 * p1[c] - 3.0 * p2[c] + p3[c]) * t * t * t)
            };
            out.push([cr(0), cr(1)]);
        }
        Ok(ClosedCurve { nodes: out, lift: self.lift })
    }
}

/// Signed geodesic curvature and unit normal `J c'/|c'|` at every node.
fn curvature_and_normal(s: &ChartSurface, c: &ClosedCurve) -> Result<Vec<(f64, [f64; 2])>> {
    if c.len() < 16 {
        return Err(Error::Precondition("curve needs at least 16 nodes".into()));
    }
    (0..c.len() as isize)
        .into_par_iter()
        .map(|i| {
            let (a, p, b) = (c.node(i - 1), c.node(i), c.node(i + 1));
            let d1 = [0.5 * (b[0] - a[0]), 0.5 * (b[1] - a[1])];
            let d2 = [b[0] - 2.0 * p[0] + a[0], b[1] - 2.0 * p[1] + a[1]];
            let g = s.metric(p)?;
            let gm = s.christoffel(p)?;
            let quad = |k: usize| gm[k][0] * d1[0] * d1[0] + 2.0 * gm[k][1] * d1[0] * d1[1] + gm[k][2] * d1[1] * d1[1];
            let acc = [d2[0] + quad(0), d2[1] + quad(1)];
            let det = (g[0] * g[2] - g[1] * g[1]).sqrt();
            let sigma = (g[0] * d1[0] * d1[0] + 2.0 * g[1] * d1[0] * d1[1] + g[2] * d1[1] * d1[1]).sqrt();
            if !(sigma > 0.0) {
                return Err(Error::Degenerate("coincident curve nodes".into()));
            }
            let jv = [-(g[1] * d1[0] + g[2] * d1[1]) / det, (g[0] * d1[0] + g[1] * d1[1]) / det];
            let inner = g[0] * acc[0] * jv[0] + g[1] * (acc[0] * jv[1] + acc[1] * jv[0]) + g[2] * acc[1] * jv[1];
            Ok((inner / sigma.powi(3), [jv[0] / sigma, jv[1] / sigma]))
        })
        .collect()
}

/// Signed geodesic curvature at every node (positive when the curve bends
/// to its left).
pub fn curvature_of_curve(s: &ChartSurface, c: &ClosedCurve) -> Result<Vec<f64>> {
    Ok(curvature_and_normal(s, c)?.into_iter().map(|(k, _)| k).collect())
}

/// Largest admissible step relative to `(min spacing)²`.
pub const STABILITY: f64 = 0.4;

/// Move every node along its curvature vector for time `dτ`, then respace.
pub fn shorten_step(s: &ChartSurface, c: &ClosedCurve, dtau: f64) -> Result<ClosedCurve> {
    let h = c.min_spacing(s)?;
    if dtau > STABILITY * h * h {
        return Err(Error::InvalidParam(format!("step {dtau:e} exceeds the stability bound {:e}", STABILITY * h * h)));
    }
    let kn = curvature_and_normal(s, c)?;
    let nodes = c.nodes.iter().zip(kn).map(|(p, (k, n))| [p[0] + dtau * k * n[0], p[1] + dtau * k * n[1]]).collect();
    ClosedCurve { nodes, lift: c.lift }.resample(s, c.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeKind {
    CollapsedToPoint,
    ClosedGeodesic,
    Budget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoliationOutcome {
    pub kind: OutcomeKind,
    pub final_curve: ClosedCurve,
    pub tau_final: f64,
    pub steps: usize,
    /// Lengths recorded every `snapshot_every` steps.
    pub lengths: Vec<(f64, f64)>,
    /// Curves recorded every `snapshot_every` steps.
    pub snapshots: Vec<(f64, ClosedCurve)>,
    /// Whether every accepted curve had curvature of one sign.
    pub convex_throughout: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolveOptions {
    pub dtau_max: f64,
    pub tau_max: f64,
    pub max_steps: usize,
    /// Node count never drops below this when the curve shrinks.
    pub min_nodes: usize,
    pub point_length: f64,
    pub geodesic_curvature: f64,
    pub snapshot_every: usize,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions {
            dtau_max: 1e-4,
            tau_max: 50.0,
            max_steps: 2_000_000,
            min_nodes: 16,
            point_length: 1e-3,
            geodesic_curvature: 1e-4,
            snapshot_every: 100,
        }
    }
}

pub fn evolve(s: &ChartSurface, curve: &ClosedCurve, opt: &EvolveOptions) -> Result<FoliationOutcome> {
    let mut c = curve.resample(s, curve.len())?;
    let spacing0 = c.length(s)? / c.len() as f64;
    let mut tau = 0.0;
    let mut out = FoliationOutcome {
        kind: OutcomeKind::Budget,
        final_curve: c.clone(),
        tau_final: 0.0,
        steps: 0,
        lengths: Vec::new(),
        snapshots: Vec::new(),
        convex_throughout: true,
    };
    let sign0 = curvature_of_curve(s, &c)?.iter().sum::<f64>().signum();
    for step in 0..opt.max_steps {
        let len = c.length(s)?;
        let k = curvature_of_curve(s, &c)?;
        if k.iter().any(|v| v * sign0 <= 0.0) {
            out.convex_throughout = false;
        }
        if step % opt.snapshot_every.max(1) == 0 {
            out.lengths.push((tau, len));
            out.snapshots.push((tau, c.clone()));
        }
        let kmax = k.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let kind = if len < opt.point_length {
            Some(OutcomeKind::CollapsedToPoint)
        } else if kmax < opt.geodesic_curvature && len > 1e-2 {
            Some(OutcomeKind::ClosedGeodesic)
        } else if tau >= opt.tau_max {
            Some(OutcomeKind::Budget)
        } else {
            None
        };
        if let Some(kind) = kind {
            out.kind = kind;
            break;
        }
        if len / (c.len() as f64) < 0.5 * spacing0 && c.len() / 2 >= opt.min_nodes {
            c = c.resample(s, c.len() / 2)?;
        }
        let h = c.min_spacing(s)?;
        let dtau = opt.dtau_max.min(0.99 * STABILITY * h * h);
        c = shorten_step(s, &c, dtau)?;
        tau += dtau;
        out.steps = step + 1;
    }
    out.final_curve = c;
    out.tau_final = tau;
    Ok(out)
}

/// Scattering data on a boundary level `x = level`: for entry `(y, θ)`,
/// the exit position offset, exit angle and length. Offsets and angles are
/// unwrapped along `θ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LensTable {
    pub level: f64,
    pub ys: Vec<f64>,
    pub thetas: Vec<f64>,
    /// Indexed `iy·nθ + iθ`.
    pub cells: Vec<Option<TableEntry>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableEntry {
    pub offset: f64,
    pub exit_theta: f64,
    pub length: f64,
}

fn unwrap_along_theta(cells: &mut [Option<TableEntry>], n_theta: usize) {
    for row in cells.chunks_mut(n_theta) {
        let mut prev: Option<TableEntry> = None;
        for c in row.iter_mut() {
            if let (Some(p), Some(e)) = (prev, c.as_mut()) {
                e.offset = p.offset + wrap_angle(e.offset - p.offset);
                e.exit_theta = p.exit_theta + wrap_angle(e.exit_theta - p.exit_theta);
            }
            if c.is_some() {
                prev = *c;
            }
        }
    }
}

fn table_axes(ny: usize, n_theta: usize) -> (Vec<f64>, Vec<f64>) {
    let ys = (0..ny).map(|i| -PI + 2.0 * PI * i as f64 / ny as f64).collect();
    let ths = (0..n_theta).map(|i| PI * i as f64 / (n_theta - 1) as f64).collect();
    (ys, ths)
}

impl LensTable {
    /// Bilinear lookup, periodic in `y`; `None` outside the angle range or
    /// next to a missing cell.
    pub fn lookup(&self, y: f64, theta: f64) -> Option<TableEntry> {
        let (ny, nt) = (self.ys.len(), self.thetas.len());
        let (t0, t1) = (self.thetas[0], self.thetas[nt - 1]);
        if !(t0 - 1e-12..=t1 + 1e-12).contains(&theta) {
            return None;
        }
        let theta = theta.clamp(t0, t1);
        let dy = 2.0 * PI / ny as f64;
        let u = (y - self.ys[0]).rem_euclid(2.0 * PI) / dy;
        let iy = (u.floor() as usize).min(ny - 1);
        let fy = u - iy as f64;
        let v = (theta - t0) / (t1 - t0) * (nt - 1) as f64;
        let it = (v.floor() as usize).min(nt - 2);
        let ft = v - it as f64;
        let get = |a: usize, b: usize| self.cells[(a % ny) * nt + b];
        let (c00, c01, c10, c11) = (get(iy, it)?, get(iy, it + 1)?, get(iy + 1, it)?, get(iy + 1, it + 1)?);
        // Offsets must move the same way along θ on both rows.
        if (c01.offset - c00.offset) * (c11.offset - c10.offset) < 0.0 {
            return None;
        }
        let mix = |f: fn(&TableEntry) -> f64| {
            let a = f(&c00) * (1.0 - ft) + f(&c01) * ft;
            let b = f(&c10) * (1.0 - ft) + f(&c11) * ft;
            a * (1.0 - fy) + b * fy
        };
        Some(TableEntry { offset: mix(|e| e.offset), exit_theta: mix(|e| e.exit_theta), length: mix(|e| e.length) })
    }

    pub fn get(&self, iy: usize, it: usize) -> Option<TableEntry> {
        self.cells[iy * self.thetas.len() + it]
    }
}

/// Direct scattering table of `m` on its outer boundary.
pub fn outer_lens_table(m: &GaussianMetric, ny: usize, n_theta: usize, step: f64) -> Result<LensTable> {
    if !m.periodic() {
        return Err(Error::Precondition("layer stripping needs a periodic chart".into()));
    }
    let (ys, thetas) = table_axes(ny, n_theta);
    let idx: Vec<(f64, f64)> = ys.iter().flat_map(|&y| thetas.iter().map(move |&t| (y, t))).collect();
    let cells: Vec<Result<Option<TableEntry>>> = idx
        .par_iter()
        .map(|&(y, th)| {
            let r = scattering_with(m, &State::new(0.0, y, th), step)?;
            Ok(Some(TableEntry {
                offset: wrap_angle(r.exit.y - y),
                exit_theta: wrap_angle(r.exit.theta),
                length: r.length,
            }))
        })
        .collect();
    let mut cells = cells.into_iter().collect::<Result<Vec<_>>>()?;
    unwrap_along_theta(&mut cells, n_theta);
    Ok(LensTable { level: 0.0, ys, thetas, cells })
}

/// Integrate until `x` reaches `level` from the starting side. Fails when
/// the geodesic leaves through `x = 0` first or never arrives.
fn trace_to_level(m: &GaussianMetric, s: &State, level: f64, step: f64) -> Result<(f64, State)> {
    let side = (s.x - level).signum();
    if (s.x - level).abs() < 1e-14 || side == 0.0 {
        return Ok((0.0, *s));
    }
    let gap = |st: &State| side * (st.x - level);
    let t_max = default_horizon(m);
    let mut t = 0.0;
    let mut cur = *s;
    while t < t_max {
        let next = rk4_step(m, &cur, step)?;
        if gap(&next) <= 0.0 {
            let (mut lo, mut hi) = (0.0, step);
            while hi - lo > 1e-14 {
                let mid = 0.5 * (lo + hi);
                if gap(&rk4_step(m, &cur, mid)?) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let tau = 0.5 * (lo + hi);
            return Ok((t + tau, rk4_step(m, &cur, tau)?));
        }
        if next.x < -1e-12 && level > 0.0 {
            return Err(Error::Precondition("geodesic left through the outer boundary".into()));
        }
        cur = next;
        t += step;
    }
    Err(Error::NotExited { horizon: t_max })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StripResult {
    pub table: LensTable,
    /// Entries below the angle cutoff or whose traces failed.
    pub skipped: usize,
    pub attempted: usize,
}

/// Scattering data on `x = level` recovered from the table on
/// `x = outer.level` and the metric on the collar between them.
pub fn layer_strip_scattering(
    m: &GaussianMetric,
    outer: &LensTable,
    level: f64,
    ny: usize,
    n_theta: usize,
    min_angle: f64,
    step: f64,
) -> Result<StripResult> {
    if level < outer.level {
        return Err(Error::InvalidParam("inner level lies outside the outer one".into()));
    }
    let (ys, thetas) = table_axes(ny, n_theta);
    let idx: Vec<(f64, f64)> = ys.iter().flat_map(|&y| thetas.iter().map(move |&t| (y, t))).collect();
    let sin_min = min_angle.sin();
    let cells: Vec<Option<TableEntry>> = idx
        .par_iter()
        .map(|&(y, th)| {
            if th.sin() < sin_min {
                return None;
            }
            let entry = State::new(level, y, th);
            let (t1, o_rev) = trace_to_level(m, &entry.reversed(), outer.level, step).ok()?;
            let o = o_rev.reversed();
            // Inward headings live in [0, π]; fold round-off at the ends back in.
            let mut th_o = wrap_angle(o.theta);
            if th_o < -PI + 1e-12 {
                th_o += 2.0 * PI;
            } else if (-1e-12..0.0).contains(&th_o) {
                th_o = 0.0;
            }
            let rec = outer.lookup(o.y, th_o)?;
            let exit = State::new(outer.level, o.y + rec.offset, rec.exit_theta);
            let (t2, q_rev) = trace_to_level(m, &exit.reversed(), level, step).ok()?;
            let q = q_rev.reversed();
            Some(TableEntry {
                offset: wrap_angle(q.y - y),
                exit_theta: wrap_angle(q.theta),
                length: rec.length - t1 - t2,
            })
        })
        .collect();
    let skipped = cells.iter().filter(|c| c.is_none()).count();
    let mut cells = cells;
    unwrap_along_theta(&mut cells, n_theta);
    Ok(StripResult { table: LensTable { level, ys, thetas, cells }, skipped, attempted: idx.len() })
}
