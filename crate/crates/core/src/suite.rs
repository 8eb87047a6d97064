//! Check batteries grouped the way the command line and the acceptance
//! run report them. Each returns named residual checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::foliation::{
    evolve, layer_strip_scattering, outer_lens_table, ChartSurface, ClosedCurve, ConformalKind, EvolveOptions,
    OutcomeKind,
};
use crate::front::{
    commutator_residual, fd_jacobi_crosscheck, lens_agreement, pseudo_front_verify, transport_residual,
    v0_commutator_residual,
};
use crate::geodesic::{flow_with, lens_fan, RegionMask, State, DEFAULT_STEP};
use crate::jacobi::{frame_track, jacobi_integrate, symplectic, JacobiPair};
use crate::metric::{catalog, wrap_angle, CatalogName, CatalogParams, GaussianMetric, Profile};
use crate::pair::{
    c_difference_crosscheck, delta_fields, delta_kappa_identity, first_order_residual, matrix_a_at, pair_checks,
    solve_node, volterra_residual_with, xy_points, DifferenceMap, PairedSetup,
};
use crate::report::{max_abs, Check};
use crate::thermostat::{flux_lower_bound_check, mu_flow, z_lambda, ZDomain};

/// Every catalog model at its default parameters.
pub fn catalog_metrics() -> Result<Vec<GaussianMetric>> {
    [
        CatalogName::FlatDisk,
        CatalogName::SphereCap,
        CatalogName::HyperbolicCollar,
        CatalogName::FlatPolarAnnulus,
        CatalogName::HyperbolicWaist,
    ]
    .into_iter()
    .map(|n| catalog(n, &CatalogParams::default()))
    .collect()
}

/// Seeded states with `x ∈ [0, x_hi]`, `|y| ≤ 0.5` and `θ ∈ [0, 2π)`.
pub fn sample_states(n: usize, x_hi: f64, seed: u64) -> Vec<State> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let x = rng.gen_range(0.0..=x_hi);
            let y = rng.gen_range(-0.5..=0.5);
            let th = rng.gen_range(0.0..2.0 * PI);
            State::new(x, y, th)
        })
        .collect()
}

/// Keep the states whose geodesics, and those of nearby states within
/// `margin` in each coordinate, stay in the domain over `[t, 0]`.
pub fn admissible_states(m: &GaussianMetric, states: &[State], t: f64, margin: f64) -> Vec<State> {
    states
        .par_iter()
        .filter(|s| {
            let mut probes = vec![**s];
            for k in (0..3).filter(|_| margin > 0.0) {
                for sg in [-1.0, 1.0] {
                    let mut v = [s.x, s.y, s.theta];
                    v[k] += sg * margin;
                    probes.push(State::new(v[0], v[1], v[2]));
                }
            }
            probes.iter().all(|p| m.contains(p.x, p.y) && flow_with(m, p, t, DEFAULT_STEP).is_ok())
        })
        .copied()
        .collect()
}

/// The first `n` admissible states of the seeded sample stream.
pub fn admissible_sample(m: &GaussianMetric, n: usize, x_hi: f64, seed: u64, t: f64, margin: f64) -> Vec<State> {
    let mut draw = n.max(1);
    loop {
        let mut kept = admissible_states(m, &sample_states(draw, x_hi, seed), t, margin);
        if kept.len() >= n || draw >= 64 * n.max(1) {
            kept.truncate(n);
            return kept;
        }
        draw *= 2;
    }
}

/// The three symplectic products along `[t_end, 0]` against
/// `1`, `α sinθ` and `κα` at the base.
pub fn symplectic_checks(m: &GaussianMetric, states: &[State], t_end: f64, tol: f64) -> Result<Vec<Check>> {
    let rows: Vec<Result<[f64; 3]>> = states
        .par_iter()
        .map(|s| {
            let jet = m.eval(s.x, s.y)?;
            let (a, k) = (jet.v, jet.kappa());
            let mut r = [0.0f64; 3];
            for f in frame_track(m, s, t_end, DEFAULT_STEP)? {
                r[0] = max_abs(r[0], symplectic(f.j, f.b) - 1.0);
                r[1] = max_abs(r[1], symplectic(f.y, f.b) - a * s.theta.sin());
                r[2] = max_abs(r[2], symplectic(f.y, f.j) - k * a);
            }
            Ok(r)
        })
        .collect();
    let mut worst = [0.0f64; 3];
    for r in rows {
        let r = r?;
        for k in 0..3 {
            worst[k] = worst[k].max(r[k]);
        }
    }
    Ok(vec![
        Check::new("symplectic_jb", worst[0], tol),
        Check::new("symplectic_yb", worst[1], tol),
        Check::new("symplectic_yj", worst[2], tol),
    ])
}

/// Flat `B = −t`, sphere `B = −sin t`, hyperbolic `J = cosh t` on `[−1, 0]`.
pub fn closed_form_track_checks(s: &State) -> Result<Vec<Check>> {
    let p = CatalogParams::default();
    let b = JacobiPair { perp: 0.0, perp_dot: -1.0, ..Default::default() };
    let j = JacobiPair { perp: 1.0, ..Default::default() };
    let flat = jacobi_integrate(&catalog(CatalogName::FlatDisk, &p)?, s, &b, -1.0);
    let sphere = jacobi_integrate(&catalog(CatalogName::SphereCap, &p)?, s, &b, -1.0);
    let hyp = jacobi_integrate(&catalog(CatalogName::HyperbolicCollar, &p)?, s, &j, -1.0);
    if flat.truncated || sphere.truncated || hyp.truncated {
        return Err(Error::LeftDomain { t: -1.0 });
    }
    let worst = |rows: &[crate::jacobi::TrackRow], f: &dyn Fn(f64) -> f64| {
        rows.iter().fold(0.0, |a, r| max_abs(a, r.perp - f(r.t)))
    };
    Ok(vec![
        Check::new("flat_b_track", worst(&flat.rows, &|t| -t), 1e-10),
        Check::new("sphere_b_track", worst(&sphere.rows, &|t| -t.sin()), 1e-8),
        Check::new("hyperbolic_j_track", worst(&hyp.rows, &|t| t.cosh()), 1e-8),
    ])
}

/// Gauss curvature of the unperturbed catalog profiles.
pub fn model_gauss(m: &GaussianMetric) -> f64 {
    match m.profile {
        Profile::Flat { .. } => 0.0,
        Profile::Sphere { .. } => 1.0,
        Profile::Hyperbolic { .. } | Profile::Waist { .. } => -1.0,
    }
}

/// `G + ∂ₓ²α/α` against the model curvature, and `G + ∂ₓκ + κ²`, on `n`
/// seeded points of the domain.
pub fn curvature_chain_checks(m: &GaussianMetric, n: usize, seed: u64, tol: f64) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hi = m.domain.x_max.min(m.inner_boundary.unwrap_or(f64::INFINITY));
    let (mut model, mut computed, mut riccati) = (0.0f64, 0.0f64, 0.0f64);
    let g0 = model_gauss(m);
    for _ in 0..n {
        let x = rng.gen_range(m.domain.x_min.max(-1.0)..0.9 * hi);
        let y = rng.gen_range(-0.5..0.5);
        let jet = m.eval(x, y)?;
        model = max_abs(model, g0 + jet.xx / jet.v);
        computed = max_abs(computed, m.gauss_curvature(x, y)? - g0);
        riccati = max_abs(riccati, jet.gauss() + jet.kappa_x() + jet.kappa() * jet.kappa());
    }
    Ok(vec![
        Check::new("gauss_vs_alpha_xx", model, tol),
        Check::new("gauss_model", computed, tol),
        Check::new("gauss_riccati", riccati, tol),
    ])
}

/// Chord oracle on a flat disk of radius `r`: length `2r sinθ`, arc
/// offset `2rθ`, exit angle mirrored.
pub fn flat_lens_checks(m: &GaussianMetric, radius: f64, n: usize, tol: f64) -> Result<Vec<Check>> {
    let recs = lens_fan(m, 0.0, n)?;
    let (mut len, mut arc, mut ang) = (0.0f64, 0.0f64, 0.0f64);
    for r in &recs {
        let th = r.entry.theta;
        len = max_abs(len, r.length - 2.0 * radius * th.sin());
        arc = max_abs(arc, radius * wrap_angle(r.exit.y - r.entry.y - 2.0 * th));
        ang = max_abs(ang, wrap_angle(r.exit.theta + th));
    }
    Ok(vec![
        Check::new("lens_length", len, tol),
        Check::new("lens_arc_offset", arc, tol),
        Check::new("lens_exit_angle", ang, tol),
    ])
}

/// Great-circle oracle on a polar cap of colatitude `r0`.
pub fn sphere_lens_checks(m: &GaussianMetric, r0: f64, n: usize, tol: f64) -> Result<Vec<Check>> {
    let recs = lens_fan(m, 0.0, n)?;
    let (mut len, mut off, mut ang) = (0.0f64, 0.0f64, 0.0f64);
    let (s0, c0) = r0.sin_cos();
    for r in &recs {
        let th = r.entry.theta;
        let l = 2.0 * (th.sin() * r0.tan()).atan();
        // Pole, entry and exit form an isosceles spherical triangle.
        let d = ((l.cos() - c0 * c0) / (s0 * s0)).clamp(-1.0, 1.0).acos();
        let d = if th > PI / 2.0 { 2.0 * PI - d } else { d };
        len = max_abs(len, r.length - l);
        off = max_abs(off, wrap_angle(r.exit.y - r.entry.y - d));
        ang = max_abs(ang, wrap_angle(r.exit.theta + th));
    }
    Ok(vec![
        Check::new("cap_lens_length", len, tol),
        Check::new("cap_lens_offset", off, tol),
        Check::new("cap_lens_exit_angle", ang, tol),
    ])
}

/// Finite-difference front derivatives against the frame at step `h`,
/// plus the observed order from steps `4h_r` and `2h_r`.
pub fn crosscheck_checks(
    m: &GaussianMetric,
    nodes: &[State],
    t: f64,
    h: f64,
    h_r: f64,
    tol: f64,
) -> Result<Vec<Check>> {
    let fine = fd_jacobi_crosscheck(m, nodes, t, h)?;
    let a = fd_jacobi_crosscheck(m, nodes, t, 4.0 * h_r)?.max_residual;
    let b = fd_jacobi_crosscheck(m, nodes, t, 2.0 * h_r)?.max_residual;
    let order = (a / b).log2();
    Ok(vec![
        Check::new("frame_crosscheck", fine.max_residual, tol),
        Check::new("frame_conormal", fine.conormality, tol),
        Check::expect_above("frame_crosscheck_order", order, 1.8),
    ])
}

fn test_field(p: [f64; 4]) -> f64 {
    (p[0] + 0.3 * p[1]).sin() * (2.0 * p[2]).cos() + p[3] * p[3] * p[0] + (p[1] - p[2]).cos() * p[3]
}

/// Transport identity, Y transport equation, the two frame commutators and
/// the three `𝒱₀` commutators at step `h`.
pub fn transport_checks(m: &GaussianMetric, nodes: &[State], t: f64, h: f64, tol: f64) -> Result<Vec<Check>> {
    let rows: Vec<Result<[f64; 7]>> = nodes
        .par_iter()
        .map(|s| {
            let tr = transport_residual(m, s, t, h)?;
            let cm = commutator_residual(m, s, t, h)?;
            let vc = v0_commutator_residual(m, &test_field, [s.x, s.y, s.theta, t], h);
            Ok([tr[0], tr[1], cm[0], cm[1], vc[0], vc[1], vc[2]])
        })
        .collect();
    let mut w = [0.0f64; 7];
    for r in rows {
        let r = r?;
        for k in 0..7 {
            w[k] = max_abs(w[k], r[k]);
        }
    }
    let names = [
        "transport_identity",
        "y_transport",
        "commutator_y_theta",
        "commutator_x_theta",
        "v0_commutator_x",
        "v0_commutator_y",
        "v0_commutator_theta",
    ];
    Ok(names.iter().zip(w).map(|(n, r)| Check::new(*n, r, tol)).collect())
}

/// `det Ā = −α₀`, the closed-form inverse and the `M₀` spectrum on `n`
/// seeded base states at time `t`.
pub fn matrix_checks(m: &GaussianMetric, n: usize, seed: u64, t: f64) -> Result<Vec<Check>> {
    let states = admissible_sample(m, n, 0.4, seed, t, 0.0);
    let rows: Vec<Result<[f64; 5]>> = states
        .par_iter()
        .map(|s| {
            let ma = matrix_a_at(m, s, t, DEFAULT_STEP)?;
            let e = ma.eigenvalues;
            let mut expect = [ma.kappa0, 0.0, 0.0];
            expect.sort_by(f64::total_cmp);
            let spectrum = (0..3).fold(ma.eigen_imag, |a, k| max_abs(a, e[k] - expect[k]));
            let vec_res = ma.eigvec_residuals.iter().fold(0.0, |a, v| max_abs(a, *v));
            Ok([ma.det_residual, ma.inverse_residual, vec_res, spectrum, ma.flipped_eigvec_residual])
        })
        .collect();
    let mut w = [0.0f64; 4];
    let mut flipped: f64 = 0.0;
    for r in rows {
        let r = r?;
        for k in 0..4 {
            w[k] = max_abs(w[k], r[k]);
        }
        flipped = flipped.max(r[4]);
    }
    Ok(vec![
        Check::new("det_minus_alpha", w[0], 1e-8),
        Check::new("inverse_closed_form", w[1], 1e-8),
        Check::new("m0_eigenvectors", w[2], 1e-7),
        Check::new("m0_spectrum", w[3], 1e-7),
        // The sign-flipped first eigenvector must not pass.
        Check::expect_above("m0_flipped_eigenvector", flipped, 1e-3),
    ])
}

/// Pair with `m1 = m0`: everything measuring a difference is zero.
pub fn identity_pair_checks(pair: &PairedSetup, dm: &DifferenceMap, tol: f64, verify_tol: f64) -> Result<Vec<Check>> {
    let df = delta_fields(pair, dm)?;
    let mut out = vec![
        Check::new("newton_flagged", dm.flagged() as f64, 0.5),
        Check::new("identity_f", dm.max_abs_f(), tol),
        Check::new("identity_deltas", df.max_delta(), tol),
    ];
    let nodes = pair.grid.nodes(2);
    let rep = pseudo_front_verify(&pair.pseudo, &nodes, -pair.anchor(), verify_tol, 1e-4)?;
    out.extend(rep.checks);
    let mask = RegionMask::with_unknown(|x, _| x > 0.0);
    out.extend(lens_agreement(&pair.pseudo, &pair.m0, &mask, verify_tol)?.checks);
    Ok(out)
}

/// The bump pair used throughout: flat disk `R = 2` against the same disk
/// with a small bump at `(0.5, 0)`.
pub fn bump_pair_metrics() -> Result<(GaussianMetric, GaussianMetric)> {
    let m0 = catalog(CatalogName::FlatDisk, &CatalogParams::default())?;
    let m1 = crate::metric::bump_perturb(&m0, (0.5, 0.0), 0.2, 0.01, 3)?;
    Ok((m0, m1))
}

/// Boundary and half-angle zeros of `F`, convergence order of the
/// first-order system, the `C`-difference crosscheck, the Volterra
/// residual and the `δκ` identity.
pub fn bump_pair_checks(pair: &PairedSetup, dm: &DifferenceMap) -> Result<Vec<Check>> {
    let (m0, m1) = (&pair.m0, &pair.m1);
    let mut out: Vec<Check> =
        pair_checks(pair, dm, 1e-7).into_iter().filter(|c| c.name != "delta_kappa_identity").collect();
    out.push(Check::expect_above("bump_f_nonzero", dm.max_abs_f(), 1e-4));

    let probes = [State::new(0.35, 0.05, 1.0), State::new(0.3, -0.1, 2.0)];
    let mut order = f64::INFINITY;
    for s in &probes {
        let f = solve_node(pair, s, [0.0; 3])?.f;
        let a = first_order_residual(pair, s, f, 4e-3)?.exact;
        let b = first_order_residual(pair, s, f, 2e-3)?.exact;
        for k in 0..3 {
            order = order.min((a[k] / b[k]).log2());
        }
    }
    out.push(Check::expect_above("first_order_convergence", order, 1.8));

    let mut cc: f64 = 0.0;
    let mut volterra: f64 = 0.0;
    for &(x, y) in &[(0.1, 0.0), (0.25, 0.05), (0.35, 0.0), (0.4, -0.1)] {
        cc = max_abs(cc, c_difference_crosscheck(pair, x, y)?);
        let v = volterra_residual_with(m0, m1, x, y, 5e-4);
        if v.scale > 0.0 {
            volterra = max_abs(volterra, v.residual / v.scale);
        }
    }
    out.push(Check::new("c_difference_vs_delta_b", cc, 1e-7));
    out.push(Check::new("volterra_relative", volterra, 1e-5));
    let dk = delta_kappa_identity(m0, m1, &xy_points(&pair.grid), 1e-4);
    out.push(Check::new("delta_kappa_identity", dk.analytic, 1e-10));
    Ok(out)
}

/// Size of the forms that are not expected to vanish: `max|Ā − A|`, the
/// alternative first-order right-hand sides and the alternative Volterra
/// form, at the same probes as [`bump_pair_checks`].
pub fn pair_discrepancies(pair: &PairedSetup) -> Result<Vec<(&'static str, f64)>> {
    let (mut a_vs_abar, mut alt_rhs, mut alt_volterra): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for s in [State::new(0.35, 0.05, 1.0), State::new(0.3, -0.1, 2.0)] {
        let f = solve_node(pair, &s, [0.0; 3])?.f;
        let r = first_order_residual(pair, &s, f, 2e-3)?;
        a_vs_abar = max_abs(a_vs_abar, r.a_vs_abar);
        alt_rhs = alt_rhs.max(r.alt_rhs[0]).max(r.alt_rhs[1]);
    }
    for &(x, y) in &[(0.1, 0.0), (0.25, 0.05), (0.35, 0.0), (0.4, -0.1)] {
        let v = volterra_residual_with(&pair.m0, &pair.m1, x, y, 5e-4);
        if v.scale > 0.0 {
            alt_volterra = max_abs(alt_volterra, v.alt_residual / v.scale);
        }
    }
    Ok(vec![("a_vs_abar", a_vs_abar), ("alt_first_order_rhs", alt_rhs), ("alt_volterra_relative", alt_volterra)])
}

/// Start and hitting parameter of one `μ` path.
pub type PathHit = ([f64; 4], f64);

/// `z_λ` spot values, the flux floor on `dom` and the hitting-time bound
/// on `paths` seeded starts in `Ω_small`.
pub fn thermostat_checks(
    m: &GaussianMetric,
    dom: &ZDomain,
    flux_samples: usize,
    paths: usize,
    seed: u64,
) -> Result<(Vec<Check>, Vec<PathHit>)> {
    let lambda = dom.lambda;
    let mut spot: f64 = 0.0;
    for x in [0.0, 0.05, 0.2, 0.37] {
        spot = max_abs(spot, z_lambda(lambda, x, 0.0, PI / 2.0) - (x - lambda / 2.0));
        spot = max_abs(spot, z_lambda(lambda, x, 0.0, 0.0) - x / 2.0);
    }
    let omega = dom.omega;
    let flux = flux_lower_bound_check(m, dom, flux_samples, seed)?;
    let bound = omega.hit_bound(m)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let starts: Vec<[f64; 4]> = (0..paths)
        .map(|_| {
            [rng.gen_range(0.0..=omega.eps), rng.gen_range(-omega.delta..=omega.delta), rng.gen_range(0.0..=PI), 0.0]
        })
        .collect();
    let hits: Vec<Result<PathHit>> = starts.par_iter().map(|p| Ok((*p, mu_flow(m, &omega, *p)?.hit_s))).collect();
    let hits = hits.into_iter().collect::<Result<Vec<_>>>()?;
    let worst = hits.iter().fold(0.0f64, |a, h| a.max(h.1));
    let checks = vec![
        Check::new("z_lambda_spot", spot, 1e-15),
        Check::new("flux_violations", flux.violations as f64, 0.5),
        Check::new("hit_time_over_bound", worst / bound, 1.0),
    ];
    Ok((checks, hits))
}

/// Flat circle collapse time, the waist geodesic, and layer stripping of
/// the flat disk through a collar of width ½.
pub fn foliation_checks() -> Result<Vec<Check>> {
    let flat = ChartSurface::Conformal(ConformalKind::Flat);
    let o = evolve(&flat, &ClosedCurve::circle([0.0, 0.0], 2.0, 128), &EvolveOptions::default())?;
    let collapse =
        if o.kind == OutcomeKind::CollapsedToPoint { (o.tau_final / 2.0 - 1.0).abs() } else { f64::INFINITY };

    let p = CatalogParams::default();
    let waist = p.r0;
    let surf = ChartSurface::Gaussian(catalog(CatalogName::HyperbolicWaist, &p)?);
    let opt = EvolveOptions { dtau_max: 1e-2, ..Default::default() };
    let o = evolve(&surf, &ClosedCurve::latitude(0.0, 0.05, 64), &opt)?;
    let located = if o.kind == OutcomeKind::ClosedGeodesic {
        o.final_curve.nodes.iter().fold(0.0, |a, q| max_abs(a, q[0] - waist))
    } else {
        f64::INFINITY
    };

    let disk = catalog(CatalogName::FlatDisk, &p)?;
    let outer = outer_lens_table(&disk, 8, 1001, 5e-3)?;
    let strip = layer_strip_scattering(&disk, &outer, 0.5, 16, 41, 0.02, 5e-3)?;
    let (mut len, mut ang) = (0.0f64, 0.0f64);
    for (iy, _) in strip.table.ys.iter().enumerate() {
        for (it, th) in strip.table.thetas.iter().enumerate() {
            if let Some(e) = strip.table.get(iy, it) {
                len = max_abs(len, e.length - 3.0 * th.sin());
                ang = max_abs(ang, wrap_angle(e.offset - 2.0 * th));
                ang = max_abs(ang, wrap_angle(e.exit_theta + th));
            }
        }
    }
    let coverage = (strip.attempted - strip.skipped) as f64;
    Ok(vec![
        Check::new("flat_collapse_time", collapse, 0.05),
        Check::new("waist_location", located, 1e-3),
        Check::new("strip_length", len, 1e-5),
        Check::new("strip_angles", ang, 1e-5),
        Check::expect_above("strip_records", coverage, 1.0),
    ])
}
