//! One function per subcommand. Each writes its artifacts under the output
//! directory and returns the report.

use std::f64::consts::PI;
use std::path::Path;

use lensrig_core::foliation::{
    evolve, layer_strip_scattering, outer_lens_table, ChartSurface, ClosedCurve, ConformalKind, EvolveOptions,
    OutcomeKind,
};
use lensrig_core::front::{build_front_family, flat_circle_radius_error, AssocFields, FrontMap, GridSpec};
use lensrig_core::geodesic::{lens_fan, State, DEFAULT_STEP};
use lensrig_core::jacobi::frame_track;
use lensrig_core::metric::{catalog, wrap_angle, CatalogName, GaussianMetric};
use lensrig_core::pair::{build_extension_pair, difference_map, DifferenceMap};
use lensrig_core::report::{max_abs, Check};
use lensrig_core::suite;
use lensrig_core::thermostat::{SmallDomain, ZDomain};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{bounds, fmt_f64, write_csv, write_text, Provenance, Report, Svg};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Lens,
    Jacobi,
    Front,
    Verify,
    Diff,
    Domains,
    Foliate,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Lens => "lens",
            Command::Jacobi => "jacobi",
            Command::Front => "front",
            Command::Verify => "verify",
            Command::Diff => "diff",
            Command::Domains => "domains",
            Command::Foliate => "foliate",
        }
    }
}

/// Run `cmd` and write `report.json` plus its artifacts.
pub fn run(cmd: Command, cfg: &RunConfig) -> Result<Report, CliError> {
    cfg.validate()?;
    let out = cfg.out_dir();
    std::fs::create_dir_all(&out).map_err(|e| CliError::io(&out, e))?;
    let mut report = match cmd {
        Command::Lens => lens(cfg, &out)?,
        Command::Jacobi => jacobi(cfg, &out)?,
        Command::Front => front(cfg, &out)?,
        Command::Verify => verify(cfg, &out)?,
        Command::Diff => diff(cfg, &out)?,
        Command::Domains => domains(cfg, &out)?,
        Command::Foliate => foliate(cfg, &out)?,
    };
    report.artifacts.sort();
    write_text(&out.join("report.json"), &crate::output::to_json(&report))?;
    Ok(report)
}

fn provenance(cfg: &RunConfig, metrics: Vec<String>, grid: bool) -> Provenance {
    Provenance {
        version: env!("CARGO_PKG_VERSION").into(),
        metrics,
        grid: grid.then(|| cfg.grid_spec()),
        step: cfg.grid.step,
        seed: cfg.run.seed,
        tol: cfg.run.tol,
    }
}

fn f(v: f64) -> String {
    fmt_f64(v)
}

fn catalog_name(m: &GaussianMetric) -> Option<CatalogName> {
    m.name.parse().ok()
}

fn lens(cfg: &RunConfig, out: &Path) -> Result<Report, CliError> {
    let m = cfg.metric()?;
    let n = cfg.lens.fan;
    let mut rep = Report::new("lens", provenance(cfg, vec![m.name.clone()], false));
    let recs = lens_fan(&m, cfg.lens.y0, n)?;
    let rows: Vec<Vec<String>> = recs
        .iter()
        .enumerate()
        .map(|(k, r)| {
            vec![
                (k + 1).to_string(),
                f(r.entry.theta),
                f(r.entry.y),
                f(r.exit.y),
                f(r.exit.theta),
                f(r.length),
                r.boundary.code().to_string(),
            ]
        })
        .collect();
    write_csv(&out.join("lens.csv"), &["k", "theta_in", "y_in", "y_out", "theta_out", "length", "boundary"], &rows)?;
    let pts: Vec<[f64; 2]> = recs.iter().map(|r| [wrap_angle(r.exit.y - r.entry.y), r.exit.theta]).collect();
    let (lo, hi) = bounds(pts.iter().copied());
    let mut svg = Svg::new(lo, hi, 480.0);
    svg.label(&format!("{} exit offset vs exit angle", m.name));
    for p in &pts {
        svg.dot(*p, "black");
    }
    write_text(&out.join("lens.svg"), &svg.finish())?;
    rep.artifacts.extend(["lens.csv".into(), "lens.svg".into()]);
    let tol = cfg.run.tol.unwrap_or(1e-6);
    let p = cfg.catalog_params();
    match catalog_name(&m) {
        Some(CatalogName::FlatDisk) => rep.push(suite::flat_lens_checks(&m, p.radius, n, tol)?),
        Some(CatalogName::SphereCap) => rep.push(suite::sphere_lens_checks(&m, p.r0, n, tol)?),
        _ => {}
    }
    rep.summary.insert("records".into(), recs.len() as f64);
    rep.summary.insert("max_length".into(), recs.iter().fold(0.0, |a, r| a.max(r.length)));
    Ok(rep)
}

fn jacobi(cfg: &RunConfig, out: &Path) -> Result<Report, CliError> {
    let m = cfg.metric()?;
    let mut rep = Report::new("jacobi", provenance(cfg, vec![m.name.clone()], false));
    let states = suite::sample_states(cfg.run.samples, 0.4, cfg.run.seed);
    let kept = suite::admissible_states(&m, &states, -1.0, 0.0);
    rep.flagged = states.len() - kept.len();
    rep.push(suite::symplectic_checks(&m, &kept, -1.0, cfg.run.tol.unwrap_or(1e-8))?);
    rep.push(suite::closed_form_track_checks(&State::new(0.3, 0.1, 1.2))?);
    if let Some(s) = kept.first() {
        let rows: Vec<Vec<String>> = frame_track(&m, s, -1.0, DEFAULT_STEP)?
            .iter()
            .map(|v| vec![f(v.t), f(v.j.0), f(v.j.1), f(v.y.0), f(v.y.1), f(v.b.0), f(v.b.1)])
            .collect();
        write_csv(&out.join("frame.csv"), &["t", "j", "j_dot", "y", "y_dot", "b", "b_dot"], &rows)?;
        rep.artifacts.push("frame.csv".into());
        rep.summary.insert("track_x".into(), s.x);
        rep.summary.insert("track_y".into(), s.y);
        rep.summary.insert("track_theta".into(), s.theta);
    }
    Ok(rep)
}

fn front(cfg: &RunConfig, out: &Path) -> Result<Report, CliError> {
    let m = cfg.metric()?;
    let grid = cfg.grid_spec();
    let mut rep = Report::new("front", provenance(cfg, vec![m.name.clone()], true));
    let fam = build_front_family(FrontMap::Circle(m.clone()), AssocFields::of(&m), grid);
    rep.flagged = fam.flagged();
    let (xs, ys, ths, ts) = (grid.xs(), grid.ys(), grid.thetas(), grid.times());
    let mut rows = Vec::with_capacity(fam.samples.len());
    let mut last_slice = Vec::new();
    for (ix, x) in xs.iter().enumerate() {
        for (iy, y) in ys.iter().enumerate() {
            for (ith, th) in ths.iter().enumerate() {
                for (it, t) in ts.iter().enumerate() {
                    let s = fam.samples[fam.index(ix, iy, ith, it)];
                    let img = match s {
                        Some(p) => [f(p.x), f(p.y), f(p.theta)],
                        None => [String::new(), String::new(), String::new()],
                    };
                    if let (Some(p), 0) = (s, it) {
                        last_slice.push([p.y, p.x]);
                    }
                    let mut r = vec![ix.to_string(), iy.to_string(), ith.to_string(), it.to_string()];
                    r.extend([f(*x), f(*y), f(*th), f(*t)]);
                    r.extend(img);
                    rows.push(r);
                }
            }
        }
    }
    let header = ["ix", "iy", "itheta", "it", "x", "y", "theta", "t", "img_x", "img_y", "img_theta"];
    write_csv(&out.join("front.csv"), &header, &rows)?;
    let (lo, hi) = bounds(last_slice.iter().copied());
    let mut svg = Svg::new(lo, hi, 480.0);
    svg.label(&format!("{} front at t = {:.3}", m.name, ts[0]));
    for p in &last_slice {
        svg.dot(*p, "steelblue");
    }
    write_text(&out.join("front.svg"), &svg.finish())?;
    rep.artifacts.extend(["front.csv".into(), "front.svg".into()]);

    let t = -grid.anchor;
    let nodes = suite::admissible_states(&m, &grid.nodes(2), t, 5e-3);
    let tol = cfg.run.tol.unwrap_or(1e-5);
    rep.push(suite::crosscheck_checks(&m, &nodes, t, 1e-4, 1e-3, tol)?);
    if catalog_name(&m) == Some(CatalogName::FlatDisk) {
        let mut e: f64 = 0.0;
        for s in grid.nodes(4) {
            e = max_abs(e, flat_circle_radius_error(cfg.metric.radius, &fam.map, s.x, s.y, t, 32)?);
        }
        rep.push([Check::new("flat_circle_radius", e, 1e-8)]);
    }
    rep.summary.insert("samples".into(), fam.samples.len() as f64);
    Ok(rep)
}

fn verify(cfg: &RunConfig, out: &Path) -> Result<Report, CliError> {
    let m = cfg.metric()?;
    let mut rep = Report::new("verify", provenance(cfg, vec![m.name.clone()], false));
    let seed = cfg.run.seed;
    let kept = suite::admissible_sample(&m, cfg.run.samples, 0.4, seed, -1.0, 5e-3);
    rep.summary.insert("states".into(), kept.len() as f64);
    rep.push(suite::symplectic_checks(&m, &kept, -1.0, cfg.run.tol.unwrap_or(1e-8))?);
    rep.push(suite::curvature_chain_checks(&m, 200, seed, 1e-10)?);
    let tol = cfg.run.tol.unwrap_or(1e-5);
    rep.push(suite::crosscheck_checks(&m, &kept, -1.0, 1e-4, 1e-3, tol)?);
    rep.push(suite::transport_checks(&m, &kept, -1.0, 1e-4, tol)?);
    rep.push(suite::matrix_checks(&m, 500, seed, -1.0)?);
    let rows: Vec<Vec<String>> =
        rep.checks.iter().map(|c| vec![c.name.clone(), f(c.residual), f(c.tolerance), c.pass.to_string()]).collect();
    write_csv(&out.join("checks.csv"), &["name", "residual", "tolerance", "pass"], &rows)?;
    rep.artifacts.push("checks.csv".into());
    Ok(rep)
}

fn diff(cfg: &RunConfig, out: &Path) -> Result<Report, CliError> {
    let (m0, m1) = cfg.pair_metrics()?;
    let grid = cfg.grid_spec();
    let mut rep = Report::new("diff", provenance(cfg, vec![m0.name.clone(), m1.name.clone()], true));
    let pair = build_extension_pair(&m0, &m1, grid)?;
    let dm = difference_map(&pair, &grid);
    rep.flagged = dm.flagged();
    let mut rows = Vec::new();
    for ix in 0..grid.nx {
        for iy in 0..grid.ny {
            for it in 0..grid.n_theta {
                let i = dm.index(ix, iy, it);
                let s = dm.node(ix, iy, it);
                let mut r = vec![f(s.x), f(s.y), f(s.theta)];
                match dm.f[i] {
                    Some(v) => r.extend([f(v[0]), f(v[1]), f(v[2])]),
                    None => r.extend([String::new(), String::new(), String::new()]),
                }
                r.push(f(dm.residual[i]));
                rows.push(r);
            }
        }
    }
    write_csv(&out.join("difference.csv"), &["x", "y", "theta", "a", "b", "c", "residual"], &rows)?;
    rep.artifacts.push("difference.csv".into());
    write_text(&out.join("difference.svg"), &residual_heatmap(&dm, &grid))?;
    rep.artifacts.push("difference.svg".into());
    rep.summary.insert("max_abs_f".into(), dm.max_abs_f());
    rep.summary.insert("max_newton_iterations".into(), dm.max_iterations as f64);
    if m0.name == m1.name && m0.bumps == m1.bumps {
        rep.push(suite::identity_pair_checks(&pair, &dm, cfg.run.tol.unwrap_or(1e-8), 1e-6)?);
    } else {
        rep.push(suite::bump_pair_checks(&pair, &dm)?);
        for (k, v) in suite::pair_discrepancies(&pair)? {
            rep.summary.insert(k.into(), v);
        }
    }
    Ok(rep)
}

/// Newton residual, largest over `x`, on the `(θ, y)` plane; log scale from
/// 1e−16 (white) to 1e−6 (black), flagged cells black.
fn residual_heatmap(dm: &DifferenceMap, grid: &GridSpec) -> String {
    let (ys, ths) = (grid.ys(), grid.thetas());
    let half = |v: &[f64]| if v.len() > 1 { 0.5 * (v[1] - v[0]).abs() } else { 0.5 };
    let (dt, dy) = (half(&ths), half(&ys));
    let lo = [ths[0] - dt, ys[0] - dy];
    let hi = [ths[ths.len() - 1] + dt, ys[ys.len() - 1] + dy];
    let mut svg = Svg::new(lo, hi, 480.0);
    for (iy, y) in ys.iter().enumerate() {
        for (it, th) in ths.iter().enumerate() {
            let worst = (0..grid.nx)
                .map(|ix| dm.index(ix, iy, it))
                .map(|i| if dm.f[i].is_some() { dm.residual[i] } else { f64::INFINITY })
                .fold(0.0, f64::max);
            let shade = if worst.is_finite() { (worst.max(1e-16).log10() + 16.0) / 10.0 } else { 1.0 };
            svg.cell([th - dt, y - dy], [th + dt, y + dy], shade);
        }
    }
    svg.label("Newton residual over (theta, y), max over x");
    svg.finish()
}

fn domains(cfg: &RunConfig, out: &Path) -> Result<Report, CliError> {
    let m = cfg.metric()?;
    let d = &cfg.domains;
    let mut rep = Report::new("domains", provenance(cfg, vec![m.name.clone()], false));
    let dom = ZDomain::new(d.lambda, d.z_star, SmallDomain { eps: d.eps, delta: d.delta })?;
    let (checks, hits) = suite::thermostat_checks(&m, &dom, d.flux_samples, d.paths, cfg.run.seed)?;
    rep.push(checks);
    let rows: Vec<Vec<String>> = hits.iter().map(|(p, s)| vec![f(p[0]), f(p[1]), f(p[2]), f(*s)]).collect();
    write_csv(&out.join("hits.csv"), &["x", "y", "theta", "hit_s"], &rows)?;
    rep.artifacts.push("hits.csv".into());
    rep.summary.insert("hit_bound".into(), dom.omega.hit_bound(&m)?);
    rep.summary.insert("max_hit".into(), hits.iter().fold(0.0, |a, h| a.max(h.1)));
    Ok(rep)
}

fn foliate(cfg: &RunConfig, out: &Path) -> Result<Report, CliError> {
    let fo = &cfg.foliate;
    let p = cfg.catalog_params();
    let (surface, curve, expect) = match fo.surface.as_str() {
        "flat" => (
            ChartSurface::Conformal(ConformalKind::Flat),
            ClosedCurve::circle([0.0, 0.0], fo.radius, fo.nodes),
            Some(fo.radius * fo.radius / 2.0),
        ),
        "sphere" => {
            if fo.radius >= PI / 2.0 {
                return Err(CliError::Config("foliate.radius must be below π/2 on the sphere".into()));
            }
            let c = ClosedCurve::circle([0.0, 0.0], (fo.radius / 2.0).tan(), fo.nodes);
            (ChartSurface::Conformal(ConformalKind::Sphere), c, Some(-fo.radius.cos().ln()))
        }
        "hyperbolic" => {
            let c = ClosedCurve::circle([0.0, 0.0], (fo.radius / 2.0).tanh(), fo.nodes);
            (ChartSurface::Conformal(ConformalKind::Hyperbolic), c, Some(fo.radius.cosh().ln()))
        }
        _ => {
            let m = catalog(CatalogName::HyperbolicWaist, &p)?;
            (ChartSurface::Gaussian(m), ClosedCurve::latitude(fo.x0, fo.amplitude, fo.nodes), None)
        }
    };
    let mut rep = Report::new("foliate", provenance(cfg, vec![fo.surface.clone()], false));
    let opt = EvolveOptions {
        dtau_max: fo.dtau,
        tau_max: fo.tau_max,
        snapshot_every: fo.snapshot_every,
        ..Default::default()
    };
    let o = evolve(&surface, &curve, &opt)?;
    rep.summary.insert("tau_final".into(), o.tau_final);
    rep.summary.insert("steps".into(), o.steps as f64);
    rep.summary.insert("final_length".into(), o.final_curve.length(&surface)?);
    rep.push([Check::new("convexity_preserved", if o.convex_throughout { 0.0 } else { 1.0 }, 0.5)]);
    match expect {
        Some(tau) => {
            let r =
                if o.kind == OutcomeKind::CollapsedToPoint { (o.tau_final / tau - 1.0).abs() } else { f64::INFINITY };
            rep.push([Check::new("collapse_time", r, 0.05)]);
        }
        None => {
            let r = if o.kind == OutcomeKind::ClosedGeodesic {
                o.final_curve.nodes.iter().fold(0.0, |a, q| max_abs(a, q[0] - p.r0))
            } else {
                f64::INFINITY
            };
            rep.push([Check::new("waist_location", r, 1e-3)]);
        }
    }
    let mut rows = Vec::new();
    for (k, (tau, c)) in o.snapshots.iter().enumerate() {
        for (i, q) in c.nodes.iter().enumerate() {
            rows.push(vec![k.to_string(), f(*tau), i.to_string(), f(q[0]), f(q[1])]);
        }
    }
    write_csv(&out.join("curves.csv"), &["snapshot", "tau", "node", "x", "y"], &rows)?;
    rep.artifacts.push("curves.csv".into());
    let (lo, hi) = bounds(o.snapshots.iter().flat_map(|(_, c)| c.nodes.iter().copied()));
    let every = o.snapshots.len().div_ceil(40).max(1);
    for (k, (tau, c)) in o.snapshots.iter().enumerate().step_by(every) {
        let mut svg = Svg::new(lo, hi, 400.0);
        svg.label(&format!("tau = {tau:.4}"));
        svg.polyline(&c.nodes, c.lift == [0.0, 0.0], "black");
        let name = format!("frames/frame_{k:05}.svg");
        write_text(&out.join(&name), &svg.finish())?;
        rep.artifacts.push(name);
    }
    if fo.surface == "flat" && fo.strip_width > 0.0 {
        let checks = strip(cfg, out, &mut rep.artifacts)?;
        rep.push(checks);
    }
    Ok(rep)
}

/// Layer-strip the flat disk of the `[metric]` radius and compare with the
/// chord oracle of the inner disk.
fn strip(cfg: &RunConfig, out: &Path, artifacts: &mut Vec<String>) -> Result<Vec<Check>, CliError> {
    let p = cfg.catalog_params();
    let w = cfg.foliate.strip_width;
    let disk = catalog(CatalogName::FlatDisk, &p)?;
    let outer = outer_lens_table(&disk, 8, 1001, 5e-3)?;
    let res = layer_strip_scattering(&disk, &outer, w, 16, 41, 0.02, 5e-3)?;
    let inner = p.radius - w;
    let (mut len, mut ang) = (0.0f64, 0.0f64);
    let mut rows = Vec::new();
    for (iy, y) in res.table.ys.iter().enumerate() {
        for (it, th) in res.table.thetas.iter().enumerate() {
            let Some(e) = res.table.get(iy, it) else { continue };
            len = max_abs(len, e.length - 2.0 * inner * th.sin());
            ang = max_abs(ang, wrap_angle(e.offset - 2.0 * th));
            ang = max_abs(ang, wrap_angle(e.exit_theta + th));
            rows.push(vec![f(*y), f(*th), f(e.offset), f(e.exit_theta), f(e.length)]);
        }
    }
    write_csv(&out.join("strip.csv"), &["y", "theta", "offset", "exit_theta", "length"], &rows)?;
    artifacts.push("strip.csv".into());
    Ok(vec![
        Check::new("strip_length", len, 1e-5),
        Check::new("strip_angles", ang, 1e-5),
        Check::new("strip_skipped_fraction", res.skipped as f64 / res.attempted as f64, 0.1),
    ])
}
