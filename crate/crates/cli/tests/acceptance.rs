//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

use std::f64::consts::PI;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use lensrig_core::geodesic::State;
use lensrig_core::metric::{catalog, CatalogName, CatalogParams, GaussianMetric};
use lensrig_core::pair::{build_extension_pair, default_pair_grid, difference_map};
use lensrig_core::report::Check;
use lensrig_core::suite;
use lensrig_core::thermostat::{SmallDomain, ZDomain};

const SEED: u64 = 20240611;

type Outcome = Result<Vec<Check>, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn named(n: CatalogName) -> GaussianMetric {
    catalog(n, &CatalogParams::default()).expect("catalog defaults are valid")
}

fn tagged(m: &GaussianMetric, checks: Vec<Check>) -> Vec<Check> {
    checks.into_iter().map(|c| Check { name: format!("{}/{}", m.name, c.name), ..c }).collect()
}

fn count_check(name: String, got: usize, want: usize) -> Check {
    Check::new(name, (got as f64 - want as f64).abs(), 0.5)
}

fn three_models() -> Vec<GaussianMetric> {
    vec![named(CatalogName::FlatDisk), named(CatalogName::SphereCap), named(CatalogName::HyperbolicCollar)]
}

fn symplectic() -> Outcome {
    let mut out = Vec::new();
    for m in three_models() {
        let states = suite::admissible_sample(&m, 100, 0.4, SEED, -1.0, 0.0);
        out.push(count_check(format!("{}/states", m.name), states.len(), 100));
        out.extend(tagged(&m, suite::symplectic_checks(&m, &states, -1.0, 1e-8).map_err(|e| e.to_string())?));
    }
    Ok(out)
}

fn closed_tracks() -> Outcome {
    let mut out = Vec::new();
    for s in [State::new(0.3, 0.1, 1.2), State::new(0.1, -0.4, 2.6), State::new(0.35, 0.0, 0.3)] {
        out.extend(suite::closed_form_track_checks(&s).map_err(|e| e.to_string())?);
    }
    Ok(out)
}

fn curvature_chain() -> Outcome {
    let mut out = Vec::new();
    for m in suite::catalog_metrics().map_err(|e| e.to_string())? {
        out.extend(tagged(&m, suite::curvature_chain_checks(&m, 200, SEED, 1e-10).map_err(|e| e.to_string())?));
    }
    Ok(out)
}

fn lens() -> Outcome {
    let flat = named(CatalogName::FlatDisk);
    let sphere = named(CatalogName::SphereCap);
    let mut out = suite::flat_lens_checks(&flat, 2.0, 64, 1e-6).map_err(|e| e.to_string())?;
    out.extend(suite::sphere_lens_checks(&sphere, PI / 3.0, 64, 1e-6).map_err(|e| e.to_string())?);
    Ok(out)
}

fn frame_nodes(m: &GaussianMetric) -> Vec<State> {
    suite::admissible_sample(m, 40, 0.4, SEED, -1.0, 5e-3)
}

fn crosscheck() -> Outcome {
    let mut out = Vec::new();
    for m in suite::catalog_metrics().map_err(|e| e.to_string())? {
        let nodes = frame_nodes(&m);
        let checks = suite::crosscheck_checks(&m, &nodes, -1.0, 1e-4, 1e-3, 1e-5).map_err(|e| e.to_string())?;
        out.extend(tagged(&m, checks));
    }
    Ok(out)
}

fn transport() -> Outcome {
    let mut out = Vec::new();
    for m in suite::catalog_metrics().map_err(|e| e.to_string())? {
        let nodes = frame_nodes(&m);
        out.extend(tagged(&m, suite::transport_checks(&m, &nodes, -1.0, 1e-4, 1e-5).map_err(|e| e.to_string())?));
    }
    Ok(out)
}

fn matrix() -> Outcome {
    let mut out = Vec::new();
    for m in suite::catalog_metrics().map_err(|e| e.to_string())? {
        let n = suite::admissible_sample(&m, 500, 0.4, SEED, -1.0, 0.0).len();
        out.push(count_check(format!("{}/samples", m.name), n, 500));
        out.extend(tagged(&m, suite::matrix_checks(&m, 500, SEED, -1.0).map_err(|e| e.to_string())?));
    }
    Ok(out)
}

fn identity_pair() -> Outcome {
    let m = named(CatalogName::FlatDisk);
    let pair = build_extension_pair(&m, &m, default_pair_grid()).map_err(|e| e.to_string())?;
    let dm = difference_map(&pair, &pair.grid);
    suite::identity_pair_checks(&pair, &dm, 1e-8, 1e-6).map_err(|e| e.to_string())
}

fn bump_pair() -> Outcome {
    let (m0, m1) = suite::bump_pair_metrics().map_err(|e| e.to_string())?;
    let pair = build_extension_pair(&m0, &m1, default_pair_grid()).map_err(|e| e.to_string())?;
    let dm = difference_map(&pair, &pair.grid);
    suite::bump_pair_checks(&pair, &dm).map_err(|e| e.to_string())
}

fn thermostat() -> Outcome {
    let dom = ZDomain::new(0.1, 0.01, SmallDomain::default()).map_err(|e| e.to_string())?;
    let mut out = Vec::new();
    for m in three_models() {
        let (checks, hits) = suite::thermostat_checks(&m, &dom, 10_000, 1_000, SEED).map_err(|e| e.to_string())?;
        out.push(count_check(format!("{}/paths", m.name), hits.len(), 1_000));
        out.extend(tagged(&m, checks));
    }
    Ok(out)
}

fn foliation() -> Outcome {
    suite::foliation_checks().map_err(|e| e.to_string())
}

fn run_binary(out: &Path, args: &[&str]) -> Result<(), String> {
    let st = Command::new(env!("CARGO_BIN_EXE_lensrig"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .map_err(|e| e.to_string())?;
    match st.status.code() {
        Some(0) => Ok(()),
        c => Err(format!("lensrig {} exited with {c:?}", args.join(" "))),
    }
}

fn determinism() -> Outcome {
    let mut out = Vec::new();
    for cmd in ["verify", "domains", "lens"] {
        let dirs = [tempfile::tempdir().map_err(|e| e.to_string())?, tempfile::tempdir().map_err(|e| e.to_string())?];
        for d in &dirs {
            run_binary(d.path(), &[cmd, "--seed", "7"])?;
        }
        let read = |d: &tempfile::TempDir| std::fs::read(d.path().join("report.json")).map_err(|e| e.to_string());
        let same = read(&dirs[0])? == read(&dirs[1])?;
        out.push(Check::new(format!("{cmd}/report_bytes_differ"), if same { 0.0 } else { 1.0 }, 0.5));
    }
    Ok(out)
}

fn summary(checks: &[Check]) -> String {
    let failed: Vec<&str> = checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
    if failed.is_empty() {
        // Closest call among the upper-bound checks.
        let worst = checks
            .iter()
            .filter(|c| c.tolerance > 0.0 && c.residual <= c.tolerance)
            .max_by(|a, b| (a.residual / a.tolerance).total_cmp(&(b.residual / b.tolerance)));
        match worst {
            Some(c) => format!("{} checks, tightest {} {:.2e} < {:.0e}", checks.len(), c.name, c.residual, c.tolerance),
            None => format!("{} checks", checks.len()),
        }
    } else {
        format!("{} of {} checks failed: {}", failed.len(), checks.len(), failed.join(", "))
    }
}

fn main() -> ExitCode {
    let criteria: [Criterion; 12] = [
        ("symplectic conservation", symplectic),
        ("closed-form Jacobi tracks", closed_tracks),
        ("curvature chain", curvature_chain),
        ("lens oracle", lens),
        ("frame crosscheck", crosscheck),
        ("transport and commutators", transport),
        ("matrix algebra", matrix),
        ("identity pair", identity_pair),
        ("bump pair", bump_pair),
        ("thermostat domains", thermostat),
        ("foliation", foliation),
        ("determinism", determinism),
    ];
    let start = Instant::now();
    let mut failures = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let (pass, detail) = match f() {
            Ok(checks) => (!checks.is_empty() && checks.iter().all(|c| c.pass), summary(&checks)),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failures += 1;
        }
        let tag = if pass { "PASS" } else { "FAIL" };
        println!("{tag} criterion {:>2} {name}: {detail} ({:.1} s)", i + 1, t.elapsed().as_secs_f64());
    }
    println!("{} of 12 criteria passed in {:.1} s", 12 - failures, start.elapsed().as_secs_f64());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
