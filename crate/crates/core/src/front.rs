//! Circle-front families `Ψ(x, y, θ, t)` and their verification passes.
//!
//! A family is evaluated on demand through a [`FrontMap`]; parameter
//! derivatives are central differences of that map, projected onto the
//! moving frame `(Ψ², RΨ²)` at the image point.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geodesic::{extended_scattering, flow_with, state_distance, Region, RegionMask, State, DEFAULT_STEP};
use crate::jacobi::{frame_at_with, jac_solve_with, symplectic, FrameValues, KappaField};
use crate::metric::{wrap_angle, GaussianMetric};
use crate::report::{max_abs, Check};

/// Chart components `(sinθ, cosθ/α)` of the polar direction.
pub fn polar_dir(m: &GaussianMetric, x: f64, y: f64, theta: f64) -> Result<[f64; 2]> {
    let a = m.alpha(x, y)?;
    Ok([theta.sin(), theta.cos() / a])
}

/// How a family is evaluated.
#[derive(Debug, Clone)]
pub enum FrontMap {
    /// `Ψ(s, t) = flow_t(s)` in one metric.
    Circle(GaussianMetric),
    /// Fronts of `source` carried over to `geometry`: follow `source` back
    /// to time `−anchor`, then `geometry` forward.
    Pseudo { geometry: GaussianMetric, source: GaussianMetric, anchor: f64 },
}

impl FrontMap {
    pub fn geometry(&self) -> &GaussianMetric {
        match self {
            FrontMap::Circle(m) => m,
            FrontMap::Pseudo { geometry, .. } => geometry,
        }
    }

    pub fn eval(&self, base: &State, t: f64) -> Result<State> {
        self.eval_with(base, t, DEFAULT_STEP)
    }

    pub fn eval_with(&self, base: &State, t: f64, step: f64) -> Result<State> {
        match self {
            FrontMap::Circle(m) => flow_with(m, base, t, step),
            FrontMap::Pseudo { geometry, source, anchor } => {
                let mid = flow_with(source, base, -anchor, step)?;
                flow_with(geometry, &mid, t + anchor, step)
            }
        }
    }
}

/// The `(α, κ)` pair a family is declared to carry.
#[derive(Debug, Clone)]
pub struct AssocFields {
    pub metric: GaussianMetric,
    /// κ is `kappa_scale · ∂ₓα/α`; `1` for consistent fields.
    pub kappa_scale: f64,
}

impl AssocFields {
    pub fn of(m: &GaussianMetric) -> Self {
        AssocFields { metric: m.clone(), kappa_scale: 1.0 }
    }

    pub fn alpha(&self, x: f64, y: f64) -> Result<f64> {
        self.metric.alpha(x, y)
    }

    pub fn alpha_x(&self, x: f64, y: f64) -> Result<f64> {
        Ok(self.metric.eval(x, y)?.x)
    }

    pub fn kappa_at(&self, x: f64, y: f64) -> Result<f64> {
        Ok(self.kappa_scale * self.metric.kappa(x, y)?)
    }
}

impl KappaField for AssocFields {
    fn kappa(&self, x: f64, y: f64) -> f64 {
        self.kappa_scale * KappaField::kappa(&self.metric, x, y)
    }
    fn kappa_x(&self, x: f64, y: f64) -> f64 {
        self.kappa_scale * KappaField::kappa_x(&self.metric, x, y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_range: (f64, f64),
    pub nx: usize,
    pub y_range: (f64, f64),
    pub ny: usize,
    /// Nodes on `[0, π]`; odd counts contain `π/2`.
    pub n_theta: usize,
    /// `T`; slices cover `[−2T, 0]`.
    pub anchor: f64,
    pub n_t: usize,
    pub step: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            x_range: (0.0, 0.4),
            nx: 21,
            y_range: (-0.5, 0.5),
            ny: 21,
            n_theta: 65,
            anchor: 0.5,
            n_t: 5,
            step: DEFAULT_STEP,
        }
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

impl GridSpec {
    pub fn xs(&self) -> Vec<f64> {
        linspace(self.x_range.0, self.x_range.1, self.nx)
    }
    pub fn ys(&self) -> Vec<f64> {
        linspace(self.y_range.0, self.y_range.1, self.ny)
    }
    pub fn thetas(&self) -> Vec<f64> {
        let mut v = linspace(0.0, PI, self.n_theta);
        if self.n_theta % 2 == 1 {
            v[self.n_theta / 2] = PI / 2.0;
        }
        v
    }
    pub fn times(&self) -> Vec<f64> {
        linspace(-2.0 * self.anchor, 0.0, self.n_t)
    }
    pub fn len(&self) -> usize {
        self.nx * self.ny * self.n_theta * self.n_t
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Base states of every `stride`-th node in each direction.
    pub fn nodes(&self, stride: usize) -> Vec<State> {
        let s = stride.max(1);
        let (xs, ys, ts) = (self.xs(), self.ys(), self.thetas());
        let mut out = Vec::new();
        for &x in xs.iter().step_by(s) {
            for &y in ys.iter().step_by(s) {
                for &th in ts.iter().step_by(s) {
                    out.push(State::new(x, y, th));
                }
            }
        }
        out
    }
}

/// Sampled family; `samples[((ix·ny + iy)·nθ + iθ)·nt + it]`, `None` where
/// the flow left the domain.
#[derive(Debug, Clone)]
pub struct FrontFamily {
    pub grid: GridSpec,
    pub map: FrontMap,
    pub assoc: AssocFields,
    pub samples: Vec<Option<State>>,
}

impl FrontFamily {
    pub fn index(&self, ix: usize, iy: usize, ith: usize, it: usize) -> usize {
        let g = &self.grid;
        ((ix * g.ny + iy) * g.n_theta + ith) * g.n_t + it
    }

    pub fn flagged(&self) -> usize {
        self.samples.iter().filter(|s| s.is_none()).count()
    }
}

pub fn build_front_family(map: FrontMap, assoc: AssocFields, grid: GridSpec) -> FrontFamily {
    let bases = grid.nodes(1);
    let times = grid.times();
    let seg = if grid.n_t > 1 { 2.0 * grid.anchor / (grid.n_t - 1) as f64 } else { 0.0 };
    let columns: Vec<Vec<Option<State>>> = bases
        .par_iter()
        .map(|b| {
            // Slices from t = 0 backwards, stored in increasing time order.
            let mut col = vec![None; times.len()];
            let mut cur = map.eval_with(b, 0.0, grid.step).ok();
            for k in (0..times.len()).rev() {
                col[k] = cur;
                if k > 0 {
                    cur = cur.and_then(|s| match &map {
                        FrontMap::Circle(m) => flow_with(m, &s, -seg, grid.step).ok(),
                        FrontMap::Pseudo { .. } => map.eval_with(b, times[k - 1], grid.step).ok(),
                    });
                }
            }
            col
        })
        .collect();
    FrontFamily { grid, map, assoc, samples: columns.into_iter().flatten().collect() }
}

/// Frame components of the three parameter derivatives at one node:
/// index 0 is `∂ₓ`, 1 is `∂_y`, 2 is `∂θ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FdFrame {
    pub image: State,
    /// `⟨∂Ψ¹, Ψ²⟩`.
    pub par: [f64; 3],
    /// `⟨∂Ψ¹, RΨ²⟩`.
    pub perp: [f64; 3],
    /// `⟨∇Ψ², RΨ²⟩`.
    pub nabla: [f64; 3],
}

/// Frame components of a chart variation `(dx, dy, dΘ)` at `at`.
pub fn project(m: &GaussianMetric, at: &State, d: [f64; 3]) -> Result<(f64, f64, f64)> {
    let j = m.eval(at.x, at.y)?;
    let (sn, cs) = at.theta.sin_cos();
    let par = sn * d[0] + j.v * cs * d[1];
    let perp = -cs * d[0] + j.v * sn * d[1];
    let nabla = j.x * d[1] - d[2];
    Ok((par, perp, nabla))
}

/// Inverse of [`project`].
pub fn unproject(m: &GaussianMetric, at: &State, f: (f64, f64, f64)) -> Result<[f64; 3]> {
    let j = m.eval(at.x, at.y)?;
    let (sn, cs) = at.theta.sin_cos();
    let dx = f.0 * sn - f.1 * cs;
    let dy = (f.0 * cs + f.1 * sn) / j.v;
    Ok([dx, dy, j.x * dy - f.2])
}

pub(crate) fn chart_diff(m: &GaussianMetric, a: &State, b: &State) -> [f64; 3] {
    let dy = if m.periodic() { wrap_angle(a.y - b.y) } else { a.y - b.y };
    [a.x - b.x, dy, wrap_angle(a.theta - b.theta)]
}

pub fn fd_frame(map: &FrontMap, base: &State, t: f64, h: f64) -> Result<FdFrame> {
    let geom = map.geometry();
    let image = map.eval(base, t)?;
    let mut out = FdFrame { image, par: [0.0; 3], perp: [0.0; 3], nabla: [0.0; 3] };
    for k in 0..3 {
        let shift = |sgn: f64| {
            let mut s = *base;
            match k {
                0 => s.x += sgn * h,
                1 => s.y += sgn * h,
                _ => s.theta += sgn * h,
            }
            s
        };
        let p = map.eval(&shift(1.0), t)?;
        let q = map.eval(&shift(-1.0), t)?;
        let d = chart_diff(geom, &p, &q).map(|v| v / (2.0 * h));
        let (a, b, c) = project(geom, &image, d)?;
        out.par[k] = a;
        out.perp[k] = b;
        out.nabla[k] = c;
    }
    Ok(out)
}

/// `J`, `Y`, `B` normal pairs read off a finite-difference frame.
/// `J` needs `|cosθ|` away from zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReadFrame {
    pub j: Option<(f64, f64)>,
    pub y: (f64, f64),
    pub b: (f64, f64),
}

pub const MIN_COS_FOR_J: f64 = 0.05;

pub fn read_frame(fd: &FdFrame, theta: f64) -> ReadFrame {
    let c = theta.cos();
    let j = (c.abs() >= MIN_COS_FOR_J).then(|| (-fd.perp[0] / c, -fd.nabla[0] / c));
    ReadFrame { j, y: (fd.perp[1], fd.nabla[1]), b: (fd.perp[2], fd.nabla[2]) }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossCheck {
    pub max_residual: f64,
    pub conormality: f64,
    pub nodes: usize,
}

/// Compare finite-difference projections with integrated frame values:
/// `∂ₓΨ¹ = sinθ Ψ² − cosθ J RΨ²`, `∂_yΨ¹ = α cosθ Ψ² + Y RΨ²`,
/// `∂θΨ¹ = B RΨ²`, and the matching `∇Ψ²` normal components.
pub fn fd_jacobi_crosscheck(m: &GaussianMetric, nodes: &[State], t: f64, h: f64) -> Result<CrossCheck> {
    let map = FrontMap::Circle(m.clone());
    let per_node: Vec<Result<(f64, f64)>> = nodes
        .par_iter()
        .map(|s| {
            let fd = fd_frame(&map, s, t, h)?;
            let fr = frame_at_with(m, s, t, DEFAULT_STEP)?;
            let alpha = m.alpha(s.x, s.y)?;
            let (sn, cs) = s.theta.sin_cos();
            let expect_par = [sn, alpha * cs, 0.0];
            let expect_perp = [-cs * fr.j.0, fr.y.0, fr.b.0];
            let expect_nabla = [-cs * fr.j.1, fr.y.1, fr.b.1];
            let mut r: f64 = 0.0;
            for k in 0..3 {
                r = max_abs(r, fd.par[k] - expect_par[k]);
                r = max_abs(r, fd.perp[k] - expect_perp[k]);
                r = max_abs(r, fd.nabla[k] - expect_nabla[k]);
            }
            Ok((r, fd.par[2].abs()))
        })
        .collect();
    let mut out = CrossCheck { max_residual: 0.0, conormality: 0.0, nodes: nodes.len() };
    for r in per_node {
        let (a, b) = r?;
        out.max_residual = max_abs(out.max_residual, a);
        out.conormality = max_abs(out.conormality, b);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub checks: Vec<Check>,
    /// Nodes where `J` could not be read because `cosθ ≈ 0`.
    pub skipped_j: usize,
    pub t: f64,
}

impl ConditionReport {
    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Residuals of the pseudo-front conditions at time `t`:
/// symplectic products, parallel components, the `π/2` anchor, the Jac
/// equation and the Riccati relation `∂ₓα = κα`.
pub fn pseudo_front_verify(family: &FrontFamily, nodes: &[State], t: f64, tol: f64, h: f64) -> Result<ConditionReport> {
    let map = &family.map;
    let assoc = &family.assoc;
    let rows: Vec<Result<[f64; 5]>> = nodes
        .par_iter()
        .map(|s| {
            let fd = fd_frame(map, s, t, h)?;
            let rf = read_frame(&fd, s.theta);
            let alpha = assoc.alpha(s.x, s.y)?;
            let kappa = assoc.kappa_at(s.x, s.y)?;
            let (sn, cs) = s.theta.sin_cos();
            let (s1, s3) = match rf.j {
                Some(j) => ((symplectic(j, rf.b) - 1.0).abs(), (symplectic(rf.y, j) - kappa * alpha).abs()),
                None => (f64::NAN, f64::NAN),
            };
            let s2 = (symplectic(rf.y, rf.b) - alpha * sn).abs();
            let par = (fd.par[0] - sn).abs().max((fd.par[1] - alpha * cs).abs()).max(fd.par[2].abs());
            Ok([s1, s2, s3, par, 0.0])
        })
        .collect();
    let mut acc = [0.0f64; 4];
    let mut skipped = 0;
    for r in rows {
        let r = r?;
        if r[0].is_nan() {
            skipped += 1;
        } else {
            acc[0] = max_abs(acc[0], r[0]);
            acc[2] = max_abs(acc[2], r[2]);
        }
        acc[1] = max_abs(acc[1], r[1]);
        acc[3] = max_abs(acc[3], r[3]);
    }

    let mut xy: Vec<(f64, f64)> = nodes.iter().map(|s| (s.x, s.y)).collect();
    xy.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    xy.dedup();
    let geom = map.geometry();
    let anchor_jac: Vec<Result<[f64; 3]>> = xy
        .par_iter()
        .map(|&(x, y)| {
            let base = State::new(x, y, PI / 2.0);
            let img = map.eval(&base, -x)?;
            let anchor = state_distance(geom, &img, &State::new(0.0, y, PI / 2.0));
            let jac = jac_solve_with(assoc, x, y, DEFAULT_STEP);
            let jac_res = if x == 0.0 {
                0.0
            } else {
                let fd = fd_frame(map, &base, -x, h)?;
                (jac.0 - fd.perp[2]).abs().max((jac.1 - fd.nabla[2]).abs())
            };
            let ric = (assoc.alpha_x(x, y)? - assoc.kappa_at(x, y)? * assoc.alpha(x, y)?).abs();
            Ok([anchor, jac_res, ric])
        })
        .collect();
    let mut acc2 = [0.0f64; 3];
    for r in anchor_jac {
        let r = r?;
        for k in 0..3 {
            acc2[k] = max_abs(acc2[k], r[k]);
        }
    }
    let checks = vec![
        Check::new("symplectic_jb", acc[0], tol),
        Check::new("symplectic_yb", acc[1], tol),
        Check::new("symplectic_yj", acc[2], tol),
        Check::new("parallel_components", acc[3], tol),
        Check::new("half_pi_anchor", acc2[0], tol),
        Check::new("jac_equation", acc2[1], tol),
        Check::new("riccati", acc2[2], tol),
    ];
    Ok(ConditionReport { checks, skipped_j: skipped, t })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LensAgreement {
    pub a1: f64,
    pub a2: f64,
    pub compared: usize,
    pub absorbed: usize,
    pub checks: Vec<Check>,
}

/// A1: family at `−T` against extended scattering of the known metric on
/// known base points. A2: `α`, `κ` against the known metric on `x = 0` and
/// on the side lines `y = ±δ` of the grid.
pub fn lens_agreement(
    family: &FrontFamily,
    known: &GaussianMetric,
    mask: &RegionMask,
    tol: f64,
) -> Result<LensAgreement> {
    let g = &family.grid;
    let t = -g.anchor;
    let nodes: Vec<State> =
        g.nodes(1).into_iter().filter(|s| mask.classify(known, s.x, s.y) == Region::Known).collect();
    let res: Vec<Result<Option<f64>>> = nodes
        .par_iter()
        .map(|s| {
            let img = family.map.eval(s, t)?;
            Ok(extended_scattering(known, mask, s, t)?.map(|e| state_distance(known, &img, &e)))
        })
        .collect();
    let (mut a1, mut compared, mut absorbed) = (0.0f64, 0, 0);
    for r in res {
        match r? {
            Some(d) => {
                a1 = max_abs(a1, d);
                compared += 1;
            }
            None => absorbed += 1,
        }
    }
    let assoc = &family.assoc;
    let mut a2 = 0.0f64;
    let mut probe = |x: f64, y: f64| -> Result<()> {
        a2 = max_abs(a2, assoc.alpha(x, y)? - known.alpha(x, y)?);
        a2 = max_abs(a2, assoc.kappa_at(x, y)? - known.kappa(x, y)?);
        Ok(())
    };
    for y in g.ys() {
        probe(0.0, y)?;
    }
    for x in g.xs() {
        probe(x, g.y_range.0)?;
        probe(x, g.y_range.1)?;
    }
    let checks = vec![Check::new("lens_a1", a1, tol), Check::new("lens_a2", a2, tol)];
    Ok(LensAgreement { a1, a2, compared, absorbed, checks })
}

fn frame(m: &GaussianMetric, x: f64, y: f64, th: f64, t: f64) -> Result<FrameValues> {
    frame_at_with(m, &State::new(x, y, th), t, DEFAULT_STEP)
}

/// Frame values and their base-point central differences.
struct FrameDerivs {
    c: FrameValues,
    dx: FrameValues,
    dy: FrameValues,
    dth: FrameValues,
}

fn diff(a: &FrameValues, b: &FrameValues, h: f64) -> FrameValues {
    let d = |p: (f64, f64), q: (f64, f64)| ((p.0 - q.0) / (2.0 * h), (p.1 - q.1) / (2.0 * h));
    FrameValues { t: a.t, state: a.state, j: d(a.j, b.j), y: d(a.y, b.y), b: d(a.b, b.b) }
}

fn frame_derivs(m: &GaussianMetric, s: &State, t: f64, h: f64) -> Result<FrameDerivs> {
    let (x, y, th) = (s.x, s.y, s.theta);
    Ok(FrameDerivs {
        c: frame(m, x, y, th, t)?,
        dx: diff(&frame(m, x + h, y, th, t)?, &frame(m, x - h, y, th, t)?, h),
        dy: diff(&frame(m, x, y + h, th, t)?, &frame(m, x, y - h, th, t)?, h),
        dth: diff(&frame(m, x, y, th + h, t)?, &frame(m, x, y, th - h, t)?, h),
    })
}

/// Residuals of the transport identity
/// `−cos²θ α J̇ + ∂ₓY + cosθ ∂_yJ − sinθ Ẏ` and of the Y transport equation
/// `𝒱Y + P Y + cosθ B ∂_yκ` with `P = cosθ ∂_y(1/α)`.
pub fn transport_residual(m: &GaussianMetric, s: &State, t: f64, h: f64) -> Result<[f64; 2]> {
    let d = frame_derivs(m, s, t, h)?;
    let jet = m.eval(s.x, s.y)?;
    let (sn, cs) = s.theta.sin_cos();
    let (a, k) = (jet.v, jet.kappa());
    let r1 = -cs * cs * a * d.c.j.1 + d.dx.y.0 + cs * d.dy.j.0 - sn * d.c.y.1;
    let vy = -d.c.y.1 + sn * d.dx.y.0 + cs / a * d.dy.y.0 + k * cs * d.dth.y.0;
    let p = -cs * jet.y / (a * a);
    let r2 = vy + p * d.c.y.0 + cs * d.c.b.0 * jet.kappa_y();
    Ok([r1, r2])
}

/// Residuals of `∂_yB − ∂θY − α cosθ Ḃ` and
/// `∂ₓB − sinθ J + cosθ ∂θJ − sinθ Ḃ`.
pub fn commutator_residual(m: &GaussianMetric, s: &State, t: f64, h: f64) -> Result<[f64; 2]> {
    let d = frame_derivs(m, s, t, h)?;
    let a = m.alpha(s.x, s.y)?;
    let (sn, cs) = s.theta.sin_cos();
    let r1 = d.dy.b.0 - d.dth.y.0 - a * cs * d.c.b.1;
    let r2 = d.dx.b.0 - sn * d.c.j.0 + cs * d.dth.j.0 - sn * d.c.b.1;
    Ok([r1, r2])
}

/// Scalar test field on `(x, y, θ, t)`.
pub type TestField<'a> = &'a (dyn Fn([f64; 4]) -> f64 + Sync);

fn partial(f: TestField, p: [f64; 4], k: usize, h: f64) -> f64 {
    let (mut a, mut b) = (p, p);
    a[k] += h;
    b[k] -= h;
    (f(a) - f(b)) / (2.0 * h)
}

/// `𝒱₀ f = −∂_t f + sinθ ∂ₓf + (cosθ/α) ∂_y f + κ cosθ ∂θ f`.
pub fn apply_v0(m: &GaussianMetric, f: TestField, p: [f64; 4], h: f64) -> f64 {
    let j = m.jet_unchecked(p[0], p[1]);
    let (sn, cs) = p[2].sin_cos();
    -partial(f, p, 3, h)
        + sn * partial(f, p, 0, h)
        + cs / j.v * partial(f, p, 1, h)
        + j.kappa() * cs * partial(f, p, 2, h)
}

/// Residuals of `[𝒱₀, ∂ₓ]`, `[𝒱₀, ∂_y]`, `[𝒱₀, ∂θ]` against
/// `cosθ(α_x/α² ∂_y − κ_x ∂θ)`, `cosθ(α_y/α² ∂_y − κ_y ∂θ)` and
/// `−cosθ ∂ₓ + (sinθ/α) ∂_y + κ sinθ ∂θ`.
pub fn v0_commutator_residual(m: &GaussianMetric, f: TestField, p: [f64; 4], h: f64) -> [f64; 3] {
    let j = m.jet_unchecked(p[0], p[1]);
    let (sn, cs) = p[2].sin_cos();
    let a2 = j.v * j.v;
    let fd = |k: usize| partial(f, p, k, h);
    let mut out = [0.0; 3];
    for (k, o) in out.iter_mut().enumerate() {
        let dk = move |q: [f64; 4]| partial(f, q, k, h);
        let v_of_dk = apply_v0(m, &dk, p, h);
        let vf = |q: [f64; 4]| apply_v0(m, f, q, h);
        let dk_of_v = partial(&vf, p, k, h);
        let lhs = v_of_dk - dk_of_v;
        let rhs = match k {
            0 => cs * (j.x / a2 * fd(1) - j.kappa_x() * fd(2)),
            1 => cs * (j.y / a2 * fd(1) - j.kappa_y() * fd(2)),
            _ => -cs * fd(0) + sn / j.v * fd(1) + j.kappa() * sn * fd(2),
        };
        *o = lhs - rhs;
    }
    out
}

/// Largest `|d_g(center, Ψ¹) − |t||` over a fan of directions, measured
/// with the planar distance of the flat disk chart.
pub fn flat_circle_radius_error(radius: f64, map: &FrontMap, x: f64, y: f64, t: f64, n: usize) -> Result<f64> {
    let to_plane = |s: &State| {
        let r = radius - s.x;
        [r * s.y.cos(), r * s.y.sin()]
    };
    let c = to_plane(&State::new(x, y, 0.0));
    let mut err: f64 = 0.0;
    for k in 0..n {
        let th = 2.0 * PI * k as f64 / n as f64;
        let p = to_plane(&map.eval(&State::new(x, y, th), t)?);
        let d = ((p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2)).sqrt();
        err = max_abs(err, d - t.abs());
    }
    if err.is_finite() {
        Ok(err)
    } else {
        Err(Error::Degenerate("non-finite circle radius".into()))
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

    #[test]
    fn polar_dir_values() {
        let m = flat();
        let d = polar_dir(&m, 0.3, 0.0, PI / 2.0).unwrap();
        assert_abs_diff_eq!(d[0], 1.0);
        assert_abs_diff_eq!(d[1], 0.0, epsilon = 1e-16);
        let d = polar_dir(&m, 0.5, 0.0, 0.0).unwrap();
        assert_abs_diff_eq!(d[1], 2.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn project_roundtrip() {
        let m = flat();
        let at = State::new(0.2, 0.1, 0.7);
        let d = [0.3, -0.2, 0.05];
        let f = project(&m, &at, d).unwrap();
        let back = unproject(&m, &at, f).unwrap();
        for k in 0..3 {
            assert_abs_diff_eq!(back[k], d[k], epsilon = 1e-14);
        }
    }

    #[test]
    fn zero_slice_is_base_point() {
        let grid = GridSpec { nx: 3, ny: 3, n_theta: 5, n_t: 3, ..Default::default() };
        let fam = build_front_family(FrontMap::Circle(flat()), AssocFields::of(&flat()), grid);
        assert_eq!(fam.flagged(), 0);
        let xs = grid.xs();
        let ys = grid.ys();
        for ith in 0..5 {
            let s = fam.samples[fam.index(1, 2, ith, 2)].unwrap();
            assert_eq!((s.x, s.y), (xs[1], ys[2]));
        }
    }

    #[test]
    fn flat_circles() {
        let map = FrontMap::Circle(flat());
        let e = flat_circle_radius_error(2.0, &map, 0.3, 0.2, -0.5, 32).unwrap();
        assert!(e < 1e-7, "{e}");
    }

    #[test]
    fn commutators_on_test_field() {
        let m = catalog(CatalogName::SphereCap, &CatalogParams::default()).unwrap();
        let f = |p: [f64; 4]| (p[0] + 2.0 * p[1]).sin() * p[2].cos() * (0.5 * p[3]).exp();
        let r = v0_commutator_residual(&m, &f, [0.2, 0.1, 0.8, -0.3], 1e-3);
        for v in r {
            assert!(v.abs() < 1e-5, "{r:?}");
        }
    }
}
