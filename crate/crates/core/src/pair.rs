//! Two metrics with equal boundary jets: the difference map `F = H − Id`
//! between the pseudo-front of `m1` over `m0` and the circle fronts of
//! `m0`, the δ-fields, and the identities they satisfy.

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::front::{build_front_family, chart_diff, unproject, AssocFields, FrontFamily, FrontMap, GridSpec};
use crate::geodesic::{flow_with, State, DEFAULT_STEP};
use crate::jacobi::{frame_at_with, FrameValues};
use crate::metric::{wrap_angle, GaussianMetric, Jet};
use crate::report::{max_abs, Check};

pub const NEWTON_MAX_ITER: usize = 50;
pub const NEWTON_TOL: f64 = 1e-10;
const POLISH_TOL: f64 = 1e-14;
const JET_TOL: f64 = 1e-12;

/// Grid used for pair computations unless configured otherwise.
pub fn default_pair_grid() -> GridSpec {
    GridSpec {
        x_range: (0.0, 0.4),
        nx: 9,
        y_range: (-0.6, 0.6),
        ny: 13,
        n_theta: 17,
        anchor: 1.0,
        n_t: 3,
        step: DEFAULT_STEP,
    }
}

#[derive(Debug, Clone)]
pub struct PairedSetup {
    pub m0: GaussianMetric,
    pub m1: GaussianMetric,
    pub grid: GridSpec,
    pub family0: FrontFamily,
    pub family1: FrontFamily,
    /// Fronts of `m1` carried over to the geometry of `m0`.
    pub pseudo: FrontFamily,
    /// Largest jet difference found on the collar.
    pub jet_gap: f64,
}

impl PairedSetup {
    pub fn anchor(&self) -> f64 {
        self.grid.anchor
    }
}

fn jet_gap(a: &Jet, b: &Jet) -> f64 {
    [a.v - b.v, a.x - b.x, a.y - b.y, a.xx - b.xx, a.xy - b.xy, a.yy - b.yy, a.xxx - b.xxx]
        .into_iter()
        .fold(0.0, max_abs)
}

/// Largest jet difference of α over the extension and the known collar.
pub fn collar_jet_mismatch(m0: &GaussianMetric, m1: &GaussianMetric) -> f64 {
    let x_hi = m0.known_depth.max(0.0);
    let x_lo = m0.domain.x_min.max(m1.domain.x_min);
    let ys: Vec<f64> = match m0.domain.y_half {
        Some(h) => (0..=64).map(|i| -h + 2.0 * h * i as f64 / 64.0).collect(),
        None => (0..64).map(|i| -PI + 2.0 * PI * i as f64 / 64.0).collect(),
    };
    let mut gap: f64 = 0.0;
    for i in 0..=40 {
        let x = x_lo + (x_hi - x_lo) * i as f64 / 40.0;
        for &y in &ys {
            gap = gap.max(jet_gap(&m0.jet_unchecked(x, y), &m1.jet_unchecked(x, y)));
        }
    }
    gap
}

pub fn build_extension_pair(m0: &GaussianMetric, m1: &GaussianMetric, grid: GridSpec) -> Result<PairedSetup> {
    if m0.domain != m1.domain {
        return Err(Error::Precondition("metrics live on different domains".into()));
    }
    let gap = collar_jet_mismatch(m0, m1);
    if !(gap <= JET_TOL) {
        return Err(Error::Precondition(format!("boundary jets differ by {gap:e}")));
    }
    let family0 = build_front_family(FrontMap::Circle(m0.clone()), AssocFields::of(m0), grid);
    let family1 = build_front_family(FrontMap::Circle(m1.clone()), AssocFields::of(m1), grid);
    let pseudo_map = FrontMap::Pseudo { geometry: m0.clone(), source: m1.clone(), anchor: grid.anchor };
    let pseudo = build_front_family(pseudo_map, AssocFields::of(m1), grid);
    Ok(PairedSetup { m0: m0.clone(), m1: m1.clone(), grid, family0, family1, pseudo, jet_gap: gap })
}

fn shifted(s: &State, f: [f64; 3]) -> State {
    State::new(s.x + f[0], s.y + f[1], s.theta + f[2])
}

fn inf_norm(v: [f64; 3]) -> f64 {
    v.into_iter().fold(0.0, max_abs)
}

/// Chart columns of `∂(flow_{−T})/∂(x, y, θ)` at `h`, from the frame.
fn flow_jacobian(m: &GaussianMetric, h: &State, fr: &FrameValues) -> Result<Matrix3<f64>> {
    let a = m.alpha(h.x, h.y)?;
    let (sn, cs) = h.theta.sin_cos();
    let cols = [(sn, -cs * fr.j.0, -cs * fr.j.1), (a * cs, fr.y.0, fr.y.1), (0.0, fr.b.0, fr.b.1)];
    let mut out = Matrix3::zeros();
    for (k, c) in cols.into_iter().enumerate() {
        let d = unproject(m, &fr.state, c)?;
        out.set_column(k, &Vector3::from(d));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeSolve {
    pub f: [f64; 3],
    pub residual: f64,
    pub iterations: usize,
}

/// `flow_{m1}(s, −T)`, the point the displaced `m0` geodesic must reach.
pub fn target_point(pair: &PairedSetup, s: &State) -> Result<State> {
    flow_with(&pair.m1, s, -pair.anchor(), pair.grid.step)
}

/// Damped Newton for `flow_{m0}(s + F, −T) = flow_{m1}(s, −T)`.
pub fn solve_node(pair: &PairedSetup, s: &State, guess: [f64; 3]) -> Result<NodeSolve> {
    let target = target_point(pair, s)?;
    let (m0, t, step) = (&pair.m0, -pair.anchor(), pair.grid.step);
    let eval = |h: &State| -> Result<([f64; 3], FrameValues)> {
        let fr = frame_at_with(m0, h, t, step)?;
        Ok((chart_diff(m0, &fr.state, &target), fr))
    };
    let mut h = shifted(s, guess);
    let (mut r, mut fr) = eval(&h)?;
    let mut rn = inf_norm(r);
    let mut iterations = 0;
    while rn > POLISH_TOL && iterations < NEWTON_MAX_ITER {
        iterations += 1;
        let jac = flow_jacobian(m0, &h, &fr)?;
        let Some(delta) = jac.lu().solve(&-Vector3::from(r)) else {
            return Err(Error::Degenerate("singular flow Jacobian".into()));
        };
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let cand = shifted(&h, [lambda * delta[0], lambda * delta[1], lambda * delta[2]]);
            if let Ok((rc, frc)) = eval(&cand) {
                if inf_norm(rc) < rn {
                    accepted = Some((cand, rc, frc));
                    break;
                }
            }
            lambda *= 0.5;
        }
        match accepted {
            Some((cand, rc, frc)) => {
                h = cand;
                r = rc;
                fr = frc;
                rn = inf_norm(r);
            }
            // No decrease possible: the residual sits at roundoff level.
            None => break,
        }
    }
    if !(rn < NEWTON_TOL) {
        return Err(Error::NoConvergence { residual: rn });
    }
    let dy = if m0.periodic() { wrap_angle(h.y - s.y) } else { h.y - s.y };
    Ok(NodeSolve { f: [h.x - s.x, dy, wrap_angle(h.theta - s.theta)], residual: rn, iterations })
}

/// `F` on a grid; index `(ix·ny + iy)·nθ + iθ`, `None` marks flagged nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifferenceMap {
    pub grid: GridSpec,
    pub f: Vec<Option<[f64; 3]>>,
    pub residual: Vec<f64>,
    pub max_iterations: usize,
}

impl DifferenceMap {
    pub fn index(&self, ix: usize, iy: usize, ith: usize) -> usize {
        (ix * self.grid.ny + iy) * self.grid.n_theta + ith
    }

    pub fn flagged(&self) -> usize {
        self.f.iter().filter(|f| f.is_none()).count()
    }

    pub fn max_abs_f(&self) -> f64 {
        self.f.iter().flatten().fold(0.0, |acc, f| acc.max(inf_norm(*f)))
    }

    pub fn node(&self, ix: usize, iy: usize, ith: usize) -> State {
        let g = &self.grid;
        State::new(g.xs()[ix], g.ys()[iy], g.thetas()[ith])
    }

    /// Max neighbour jump over `spacing · max|∇F|`, with the slope
    /// estimated from centred differences; stays below about 1 for a
    /// continuous field.
    pub fn continuity_ratio(&self) -> f64 {
        let g = &self.grid;
        let dims = [g.nx, g.ny, g.n_theta];
        let spacing = [
            (g.x_range.1 - g.x_range.0) / (g.nx.max(2) - 1) as f64,
            (g.y_range.1 - g.y_range.0) / (g.ny.max(2) - 1) as f64,
            PI / (g.n_theta.max(2) - 1) as f64,
        ];
        let get = |i: [usize; 3]| self.f[self.index(i[0], i[1], i[2])];
        let (mut jump, mut slope) = (0.0f64, 0.0f64);
        for ix in 0..g.nx {
            for iy in 0..g.ny {
                for it in 0..g.n_theta {
                    let i = [ix, iy, it];
                    let Some(c) = get(i) else { continue };
                    for k in 0..3 {
                        if i[k] + 1 < dims[k] {
                            let mut j = i;
                            j[k] += 1;
                            if let Some(n) = get(j) {
                                jump = jump.max(inf_norm([n[0] - c[0], n[1] - c[1], n[2] - c[2]]) / spacing[k]);
                            }
                        }
                        if i[k] >= 1 && i[k] + 1 < dims[k] {
                            let (mut lo, mut hi) = (i, i);
                            lo[k] -= 1;
                            hi[k] += 1;
                            if let (Some(a), Some(b)) = (get(lo), get(hi)) {
                                let d = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
                                slope = slope.max(inf_norm(d) / (2.0 * spacing[k]));
                            }
                        }
                    }
                }
            }
        }
        if jump == 0.0 {
            0.0
        } else {
            jump / (10.0 * slope)
        }
    }
}

/// Solve `F` on `grid`, sweeping each `(y, θ)` column in increasing `x`
/// from `F = 0` and warm-starting every node from its neighbour.
pub fn difference_map(pair: &PairedSetup, grid: &GridSpec) -> DifferenceMap {
    let (xs, ys, ths) = (grid.xs(), grid.ys(), grid.thetas());
    let columns: Vec<(usize, usize)> = (0..grid.ny).flat_map(|iy| (0..grid.n_theta).map(move |it| (iy, it))).collect();
    // Per node: solution, residual, Newton iterations.
    type NodeSolve = (Option<[f64; 3]>, f64, usize);
    let solved: Vec<Vec<NodeSolve>> = columns
        .par_iter()
        .map(|&(iy, it)| {
            let mut guess = [0.0; 3];
            xs.iter()
                .map(|&x| match solve_node(pair, &State::new(x, ys[iy], ths[it]), guess) {
                    Ok(n) => {
                        guess = n.f;
                        (Some(n.f), n.residual, n.iterations)
                    }
                    Err(Error::NoConvergence { residual }) => (None, residual, NEWTON_MAX_ITER),
                    Err(_) => (None, f64::NAN, 0),
                })
                .collect()
        })
        .collect();
    let n = grid.nx * grid.ny * grid.n_theta;
    let mut out = DifferenceMap { grid: *grid, f: vec![None; n], residual: vec![0.0; n], max_iterations: 0 };
    for (col, &(iy, it)) in solved.into_iter().zip(columns.iter()) {
        for (ix, (f, r, k)) in col.into_iter().enumerate() {
            let i = out.index(ix, iy, it);
            out.f[i] = f;
            out.residual[i] = r;
            out.max_iterations = out.max_iterations.max(k);
        }
    }
    out
}

/// δ-quantities at one node, all at `t = −T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaNode {
    pub f: [f64; 3],
    /// `(δY, δẎ)`: `m1` frame minus `m0` frame at the same base state.
    pub delta_y: (f64, f64),
    pub delta_b: (f64, f64),
    pub delta_j: (f64, f64),
    /// `δB + cosθ J₀ ∂θa − Y₀ ∂θb − B₀ ∂θc`, of order `|F|`.
    pub db_remainder: f64,
    /// `δJ − (δY/α₀ + κ₀ δB + δκ B₀)/sinθ`; `None` for `|sinθ| ≤ 0.1`.
    pub dj_remainder: Option<f64>,
    /// Gap between `dj_remainder` and its closed form
    /// `(−Y₁ δα/(α₀α₁) + δκ δB)/sinθ`.
    pub dj_closed_form_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifferenceField {
    pub grid: GridSpec,
    /// Indexed `ix·ny + iy`.
    pub delta_alpha: Vec<f64>,
    pub delta_kappa: Vec<f64>,
    /// Indexed like [`DifferenceMap::f`].
    pub nodes: Vec<Option<DeltaNode>>,
}

impl DifferenceField {
    pub fn max_delta(&self) -> f64 {
        let mut m = self.delta_alpha.iter().chain(&self.delta_kappa).fold(0.0, |a, v| max_abs(a, *v));
        for n in self.nodes.iter().flatten() {
            for v in [n.delta_y.0, n.delta_y.1, n.delta_b.0, n.delta_b.1, n.delta_j.0, n.delta_j.1] {
                m = max_abs(m, v);
            }
        }
        m
    }

    /// `max|δB remainder| / max|F|`.
    pub fn db_remainder_constant(&self) -> f64 {
        let (mut r, mut f) = (0.0f64, 0.0f64);
        for n in self.nodes.iter().flatten() {
            r = max_abs(r, n.db_remainder);
            f = f.max(inf_norm(n.f));
        }
        if f == 0.0 {
            r
        } else {
            r / f
        }
    }
}

/// `∂θF` at a node by central differences of Newton solves.
pub fn theta_derivative(pair: &PairedSetup, s: &State, f: [f64; 3], h: f64) -> Result<[f64; 3]> {
    let p = solve_node(pair, &State::new(s.x, s.y, s.theta + h), f)?.f;
    let q = solve_node(pair, &State::new(s.x, s.y, s.theta - h), f)?.f;
    Ok([0, 1, 2].map(|k| (p[k] - q[k]) / (2.0 * h)))
}

pub fn delta_fields(pair: &PairedSetup, dm: &DifferenceMap) -> Result<DifferenceField> {
    let g = dm.grid;
    let (xs, ys) = (g.xs(), g.ys());
    let mut delta_alpha = Vec::with_capacity(g.nx * g.ny);
    let mut delta_kappa = Vec::with_capacity(g.nx * g.ny);
    for &x in &xs {
        for &y in &ys {
            let (j0, j1) = (pair.m0.eval(x, y)?, pair.m1.eval(x, y)?);
            delta_alpha.push(j1.v - j0.v);
            delta_kappa.push(j1.kappa() - j0.kappa());
        }
    }
    let t = -pair.anchor();
    let step = g.step;
    let idx: Vec<usize> = (0..dm.f.len()).collect();
    let nodes: Vec<Result<Option<DeltaNode>>> = idx
        .par_iter()
        .map(|&i| {
            let Some(f) = dm.f[i] else { return Ok(None) };
            let it = i % g.n_theta;
            let iy = (i / g.n_theta) % g.ny;
            let ix = i / (g.n_theta * g.ny);
            let s = dm.node(ix, iy, it);
            let f0 = frame_at_with(&pair.m0, &s, t, step)?;
            let f1 = frame_at_with(&pair.m1, &s, t, step)?;
            let d = |a: (f64, f64), b: (f64, f64)| (a.0 - b.0, a.1 - b.1);
            let (dy, db, dj) = (d(f1.y, f0.y), d(f1.b, f0.b), d(f1.j, f0.j));
            let dth = theta_derivative(pair, &s, f, 1e-4)?;
            let (sn, cs) = s.theta.sin_cos();
            let db_remainder = db.0 - (-cs * f0.j.0 * dth[0] + f0.y.0 * dth[1] + f0.b.0 * dth[2]);
            let (a0, a1) = (pair.m0.eval(s.x, s.y)?, pair.m1.eval(s.x, s.y)?);
            let (da, dk) = (a1.v - a0.v, a1.kappa() - a0.kappa());
            let (dj_remainder, dj_closed_form_gap) = if sn.abs() > 0.1 {
                let lin = dj.0 - (dy.0 / a0.v + a0.kappa() * db.0 + dk * f0.b.0) / sn;
                let closed = (-f1.y.0 * da / (a0.v * a1.v) + dk * db.0) / sn;
                (Some(lin), Some(lin - closed))
            } else {
                (None, None)
            };
            Ok(Some(DeltaNode {
                f,
                delta_y: dy,
                delta_b: db,
                delta_j: dj,
                db_remainder,
                dj_remainder,
                dj_closed_form_gap,
            }))
        })
        .collect();
    let nodes = nodes.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(DifferenceField { grid: g, delta_alpha, delta_kappa, nodes })
}

/// `Ā` at a displaced base state with its closed-form inverse and the
/// spectrum of `M₀ = −Ā⁻¹L + κ₀I`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixA {
    pub base: State,
    pub alpha0: f64,
    pub kappa0: f64,
    pub a: Matrix3<f64>,
    pub inverse: Matrix3<f64>,
    pub det: f64,
    pub m0: Matrix3<f64>,
    /// `|det Ā + α₀|`.
    pub det_residual: f64,
    /// `max|Ā·Ā⁻¹ − I|`.
    pub inverse_residual: f64,
    /// `|M₀ω₁ − κ₀ω₁|`, `|M₀ω₂|`, `|M₀ω₃|`.
    pub eigvec_residuals: [f64; 3],
    /// `|M₀ω − κ₀ω|` for `ω = (sinθ, cosθ/α₀, −κ₀cosθ)`.
    pub flipped_eigvec_residual: f64,
    /// Real parts sorted ascending, with the largest imaginary part.
    pub eigenvalues: [f64; 3],
    pub eigen_imag: f64,
}

/// Assemble `Ā` from the `m0` frame at `base` and time `t`.
pub fn matrix_a_at(m0: &GaussianMetric, base: &State, t: f64, step: f64) -> Result<MatrixA> {
    let fr = frame_at_with(m0, base, t, step)?;
    let jet = m0.eval(base.x, base.y)?;
    let (al, ka) = (jet.v, jet.kappa());
    let (sn, cs) = base.theta.sin_cos();
    let a = Matrix3::new(sn, al * cs, 0.0, -cs * fr.j.0, fr.y.0, fr.b.0, -cs * fr.j.1, fr.y.1, fr.b.1);
    let det = a.determinant();
    if det.abs() < 1e-6 * al {
        return Err(Error::Degenerate(format!("near-singular matrix, det = {det:e}")));
    }
    let (j, y, b) = (fr.j, fr.y, fr.b);
    let inverse = Matrix3::new(
        sn,
        b.1 * cs,
        -b.0 * cs,
        cs / al,
        -b.1 * sn / al,
        b.0 * sn / al,
        ka * cs,
        j.1 * cs * cs + y.1 * sn / al,
        -j.0 * cs * cs - y.0 * sn / al,
    );
    let inverse_residual = (a * inverse - Matrix3::identity()).abs().max();
    let l = ka * Matrix3::new(0.0, 0.0, 0.0, -cs * j.0, y.0, b.0, -cs * j.1, y.1, b.1);
    let m0m = -inverse * l + ka * Matrix3::identity();
    let w1 = Vector3::new(sn, cs / al, ka * cs);
    let w2 = Vector3::new(-cs, sn / al, 0.0);
    let w3 = Vector3::new(0.0, 0.0, 1.0);
    let wf = Vector3::new(sn, cs / al, -ka * cs);
    let ev = m0m.complex_eigenvalues();
    let mut re = [ev[0].re, ev[1].re, ev[2].re];
    re.sort_by(f64::total_cmp);
    Ok(MatrixA {
        base: *base,
        alpha0: al,
        kappa0: ka,
        a,
        inverse,
        det,
        m0: m0m,
        det_residual: (det + al).abs(),
        inverse_residual,
        eigvec_residuals: [(m0m * w1 - ka * w1).norm(), (m0m * w2).norm(), (m0m * w3).norm()],
        flipped_eigvec_residual: (m0m * wf - ka * wf).norm(),
        eigenvalues: re,
        eigen_imag: ev.iter().fold(0.0, |a, c| a.max(c.im.abs())),
    })
}

/// `Ā` for the node `s` with difference `f`.
pub fn matrix_a(pair: &PairedSetup, s: &State, f: [f64; 3]) -> Result<MatrixA> {
    matrix_a_at(&pair.m0, &shifted(s, f), -pair.anchor(), pair.grid.step)
}

/// Residual norms of the first-order system at one node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FirstOrderResidual {
    /// `Ā∂ₓF − RHSₓ`, `Ā∂_yF − RHS_y`, `Ā∂θF − RHSθ` (inf norms).
    pub exact: [f64; 3],
    /// The same against the alternative right-hand sides with a zero first
    /// row and the opposite angle-correction sign; nonzero in general.
    pub alt_rhs: [f64; 2],
    /// `max|Ā − A|`, `A` taken at the undisplaced node.
    pub a_vs_abar: f64,
    pub f_norm: f64,
}

/// Residuals of `Ā∂F = RHS` with `∂F` from central differences of step `h`.
pub fn first_order_residual(pair: &PairedSetup, s: &State, f: [f64; 3], h: f64) -> Result<FirstOrderResidual> {
    let t = -pair.anchor();
    let step = pair.grid.step;
    let mut dfs = [[0.0; 3]; 3];
    for (k, df) in dfs.iter_mut().enumerate() {
        let mut e = [0.0; 3];
        e[k] = h;
        let p = solve_node(pair, &shifted(s, e), f)?.f;
        let q = solve_node(pair, &shifted(s, e.map(|v| -v)), f)?.f;
        *df = [0, 1, 2].map(|i| (p[i] - q[i]) / (2.0 * h));
    }
    let bar = matrix_a(pair, s, f)?;
    let plain = matrix_a_at(&pair.m0, s, t, step)?;
    let h0 = shifted(s, f);
    let f0 = frame_at_with(&pair.m0, &h0, t, step)?;
    let f1 = frame_at_with(&pair.m1, s, t, step)?;
    let d = |a: (f64, f64), b: (f64, f64)| (a.0 - b.0, a.1 - b.1);
    let (dj, dy, db) = (d(f1.j, f0.j), d(f1.y, f0.y), d(f1.b, f0.b));
    let (al0, al1) = (pair.m0.alpha(h0.x, h0.y)?, pair.m1.alpha(s.x, s.y)?);
    let (sn, cs) = s.theta.sin_cos();
    let (snc, csc) = h0.theta.sin_cos();
    let dc = csc - cs;
    let rhs_x = Vector3::new(sn - snc, -(cs * dj.0 - dc * f0.j.0), -(cs * dj.1 - dc * f0.j.1));
    let rhs_y = Vector3::new(cs * (al1 - al0) - dc * al0, dy.0, dy.1);
    let rhs_t = Vector3::new(0.0, db.0, db.1);
    let alt_x = -Vector3::new(0.0, cs * dj.0 + dc * f0.j.0, cs * dj.1 + dc * f0.j.1);
    let alt_y = Vector3::new(cs * (al1 - al0) + dc * al0, dy.0, dy.1);
    let lhs = |k: usize| bar.a * Vector3::from(dfs[k]);
    let n = |v: Vector3<f64>| v.amax();
    Ok(FirstOrderResidual {
        exact: [n(lhs(0) - rhs_x), n(lhs(1) - rhs_y), n(lhs(2) - rhs_t)],
        alt_rhs: [n(lhs(0) - alt_x), n(lhs(1) - alt_y)],
        a_vs_abar: (bar.a - plain.a).abs().max(),
        f_norm: inf_norm(f),
    })
}

/// One sample of the C-difference track along `t ↦ (x + t, y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CRow {
    pub t: f64,
    pub c: f64,
    pub c_dot: f64,
    pub b0: f64,
    pub b0_dot: f64,
}

/// Solve `C̈ + G₁(x+t) C = −b₀ (G₁ − G₀)(x+t)` with `C(0) = Ċ(0) = 0`,
/// together with `b̈₀ + G₀ b₀ = 0`, `b₀(0) = 0`, `ḃ₀(0) = −1`, on
/// `t ∈ [0, −x]`.
pub fn c_difference_with(m0: &GaussianMetric, m1: &GaussianMetric, x: f64, y: f64, step: f64) -> Vec<CRow> {
    let n = crate::geodesic::step_count(x, step).max(1);
    let dt = -x / n as f64;
    let g = |m: &GaussianMetric, t: f64| m.jet_unchecked(x + t, y).gauss();
    let rhs = |t: f64, v: [f64; 4]| {
        let (g0, g1) = (g(m0, t), g(m1, t));
        [v[1], -g1 * v[0] - v[2] * (g1 - g0), v[3], -g0 * v[2]]
    };
    let add = |v: [f64; 4], k: [f64; 4], c: f64| [0, 1, 2, 3].map(|i| v[i] + c * k[i]);
    let mut v = [0.0, 0.0, 0.0, -1.0];
    let row = |t: f64, v: [f64; 4]| CRow { t, c: v[0], c_dot: v[1], b0: v[2], b0_dot: v[3] };
    let mut out = vec![row(0.0, v)];
    for i in 0..n {
        let t = i as f64 * dt;
        let k1 = rhs(t, v);
        let k2 = rhs(t + 0.5 * dt, add(v, k1, 0.5 * dt));
        let k3 = rhs(t + 0.5 * dt, add(v, k2, 0.5 * dt));
        let k4 = rhs(t + dt, add(v, k3, dt));
        v = [0, 1, 2, 3].map(|j| v[j] + dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]));
        out.push(row((i + 1) as f64 * dt, v));
    }
    out
}

pub fn c_difference(pair: &PairedSetup, x: f64, y: f64) -> Vec<CRow> {
    c_difference_with(&pair.m0, &pair.m1, x, y, pair.grid.step)
}

/// `C(−x)` against `B₁ − B₀` from direct frame integration at `θ = π/2`.
pub fn c_difference_crosscheck(pair: &PairedSetup, x: f64, y: f64) -> Result<f64> {
    let track = c_difference(pair, x, y);
    let s = State::new(x, y, PI / 2.0);
    let b0 = frame_at_with(&pair.m0, &s, -x, pair.grid.step)?.b.0;
    let b1 = frame_at_with(&pair.m1, &s, -x, pair.grid.step)?.b.0;
    Ok((track.last().expect("non-empty track").c - (b1 - b0)).abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolterraResidual {
    /// `δα/α₁ + ∫K δα + Ċ(−x) − ∫V C`.
    pub residual: f64,
    /// Largest magnitude among the four terms.
    pub scale: f64,
    pub delta_alpha: f64,
    /// The alternative form `δα/α₀ + ½∫Ã δα − Ċ(−x) + ∫V C`; nonzero in general.
    pub alt_residual: f64,
}

fn trapezoid(ts: &[f64], fs: &[f64]) -> f64 {
    // Nodes run from 0 down to −x; integrate from −x to 0.
    ts.windows(2).zip(fs.windows(2)).map(|(t, f)| 0.5 * (t[0] - t[1]) * (f[0] + f[1])).sum()
}

/// Residual of the Volterra equation for `δα` at `(x, y)`, with kernel
/// `K = (−Ȧ + A δκ)/α₁`, `A = −ḃ₀ + (δκ + 2κ₀) b₀`.
pub fn volterra_residual_with(m0: &GaussianMetric, m1: &GaussianMetric, x: f64, y: f64, step: f64) -> VolterraResidual {
    let track = c_difference_with(m0, m1, x, y, step);
    let mut ts = Vec::with_capacity(track.len());
    let (mut k_int, mut vc_int, mut kp_int) = (Vec::new(), Vec::new(), Vec::new());
    for r in &track {
        let (j0, j1) = (m0.jet_unchecked(x + r.t, y), m1.jet_unchecked(x + r.t, y));
        let (k0, k1) = (j0.kappa(), j1.kappa());
        let dk = k1 - k0;
        let dk_x = j1.kappa_x() - j0.kappa_x();
        let da = j1.v - j0.v;
        let w = dk + 2.0 * k0;
        let a = -r.b0_dot + w * r.b0;
        let a_dot = j0.gauss() * r.b0 + (dk_x + 2.0 * j0.kappa_x()) * r.b0 + w * r.b0_dot;
        ts.push(r.t);
        k_int.push((-a_dot + a * dk) / j1.v * da);
        vc_int.push(j1.gauss() * r.c);
        // d/dt (2A/α₀) = 2(Ȧ − A κ₀)/α₀.
        let a_tilde = -2.0 * (a_dot - a * k0) / j0.v + w * r.b0 * a;
        kp_int.push(a_tilde * da);
    }
    let (j0, j1) = (m0.jet_unchecked(x, y), m1.jet_unchecked(x, y));
    let da = j1.v - j0.v;
    let c_dot_end = track.last().expect("non-empty track").c_dot;
    let terms = [da / j1.v, trapezoid(&ts, &k_int), c_dot_end, trapezoid(&ts, &vc_int)];
    let residual = terms[0] + terms[1] + terms[2] - terms[3];
    let alt_residual = da / j0.v + 0.5 * trapezoid(&ts, &kp_int) - c_dot_end + terms[3];
    VolterraResidual { residual, scale: terms.iter().fold(0.0, |a, v| a.max(v.abs())), delta_alpha: da, alt_residual }
}

pub fn volterra_residual(pair: &PairedSetup, x: f64, y: f64) -> VolterraResidual {
    volterra_residual_with(&pair.m0, &pair.m1, x, y, pair.grid.step)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaKappaIdentity {
    /// `max|δκ − (∂ₓδα − κ₀δα)/α₁|` with analytic `∂ₓδα`.
    pub analytic: f64,
    /// The same with `∂ₓδα` by central differences of step `h`.
    pub finite_difference: f64,
}

pub fn delta_kappa_identity(
    m0: &GaussianMetric,
    m1: &GaussianMetric,
    points: &[(f64, f64)],
    h: f64,
) -> DeltaKappaIdentity {
    let mut out = DeltaKappaIdentity { analytic: 0.0, finite_difference: 0.0 };
    for &(x, y) in points {
        let (j0, j1) = (m0.jet_unchecked(x, y), m1.jet_unchecked(x, y));
        let dk = j1.kappa() - j0.kappa();
        let da = j1.v - j0.v;
        let k0 = j0.kappa();
        let an = dk - ((j1.x - j0.x) - k0 * da) / j1.v;
        let dd = |x: f64| m1.jet_unchecked(x, y).v - m0.jet_unchecked(x, y).v;
        let fd = dk - ((dd(x + h) - dd(x - h)) / (2.0 * h) - k0 * da) / j1.v;
        out.analytic = max_abs(out.analytic, an);
        out.finite_difference = max_abs(out.finite_difference, fd);
    }
    out
}

/// The grid `(x, y)` nodes.
pub fn xy_points(grid: &GridSpec) -> Vec<(f64, f64)> {
    let ys = grid.ys();
    grid.xs().into_iter().flat_map(|x| ys.iter().map(move |&y| (x, y))).collect()
}

/// Summary checks for a pair at tolerance `tol`.
pub fn pair_checks(pair: &PairedSetup, dm: &DifferenceMap, tol: f64) -> Vec<Check> {
    let g = &dm.grid;
    let mut gamma: f64 = 0.0;
    let mut half: f64 = 0.0;
    for ix in 0..g.nx {
        for iy in 0..g.ny {
            for it in 0..g.n_theta {
                let Some(f) = dm.f[dm.index(ix, iy, it)] else { continue };
                let s = dm.node(ix, iy, it);
                if s.x == 0.0 {
                    gamma = gamma.max(inf_norm(f));
                }
                if s.theta == PI / 2.0 {
                    half = half.max(inf_norm(f));
                }
            }
        }
    }
    let dk = delta_kappa_identity(&pair.m0, &pair.m1, &xy_points(g), 1e-4);
    vec![
        Check::new("newton_flagged", dm.flagged() as f64, 0.5),
        Check::new("f_on_boundary", gamma, tol),
        Check::new("f_at_half_pi", half, tol),
        Check::new("delta_kappa_identity", dk.analytic, tol),
    ]
}
