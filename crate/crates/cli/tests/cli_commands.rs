use std::path::Path;
use std::process::{Command, Output};

use lensrig::Report;

fn lensrig(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lensrig")).args(args).arg("--out").arg(out).output().expect("binary runs")
}

fn report(out: &Path) -> Report {
    let text = std::fs::read_to_string(out.join("report.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn csv_rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path).unwrap().records().map(|r| r.unwrap()).collect()
}

#[test]
fn lens_writes_one_record_per_direction() {
    let dir = tempfile::tempdir().unwrap();
    let o = lensrig(dir.path(), &["lens"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&dir.path().join("lens.csv"));
    assert_eq!(rows.len(), 64);
    let svg = std::fs::read_to_string(dir.path().join("lens.svg")).unwrap();
    assert_eq!(svg.matches("<circle").count(), 64);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.lines().any(|l| l.starts_with("PASS lens_length")));

    let rep = report(dir.path());
    assert!(rep.pass);
    assert_eq!(rep.command, "lens");
    assert_eq!(rep.artifacts, vec!["lens.csv".to_string(), "lens.svg".to_string()]);
    // Round trip through the schema.
    assert_eq!(serde_json::from_str::<Report>(&lensrig::output::to_json(&rep)).unwrap(), rep);
}

#[test]
fn fan_override_sets_record_count() {
    let dir = tempfile::tempdir().unwrap();
    let o = lensrig(dir.path(), &["lens", "--metric", "sphere_cap", "--fan", "16"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(csv_rows(&dir.path().join("lens.csv")).len(), 16);
    let svg = std::fs::read_to_string(dir.path().join("lens.svg")).unwrap();
    assert_eq!(svg.matches("<circle").count(), 16);
}

#[test]
fn failed_check_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = lensrig(dir.path(), &["lens", "--tol", "1e-300"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!report(dir.path()).pass);
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL "));
}

#[test]
fn bad_configuration_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = lensrig(dir.path(), &["lens", "--metric", "torus"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("torus"));

    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[grid]\nnxx = 3\n").unwrap();
    let o = lensrig(dir.path(), &["lens", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("nxx") && err.contains("line 2"), "{err}");

    let o = lensrig(dir.path(), &["domains", "--metric", "hyperbolic_waist"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn flagged_samples_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let o = lensrig(dir.path(), &["jacobi", "--metric", "flat_polar_annulus"]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stdout));
    let rep = report(dir.path());
    assert!(rep.flagged > 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains(&format!("flagged {}", rep.flagged)));
}

#[test]
fn identical_pair_has_zero_difference() {
    let dir = tempfile::tempdir().unwrap();
    let o = lensrig(dir.path(), &["diff", "--m0", "flat_disk", "--m1", "flat_disk"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let rows = csv_rows(&dir.path().join("difference.csv"));
    assert!(!rows.is_empty());
    for r in &rows {
        for k in 3..6 {
            assert_eq!(r[k].parse::<f64>().unwrap(), 0.0);
        }
    }
    let rep = report(dir.path());
    assert_eq!(rep.summary["max_abs_f"], 0.0);
    let svg = std::fs::read_to_string(dir.path().join("difference.svg")).unwrap();
    assert_eq!(svg.matches("<rect").count(), 13 * 17);
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = lensrig(d.path(), &["jacobi", "--seed", "7"]);
        assert_eq!(o.status.code(), Some(0));
    }
    for name in ["report.json", "frame.csv"] {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert_eq!(x, y, "{name}");
    }
}

#[test]
fn foliate_writes_frames() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("fol.toml");
    std::fs::write(&cfg, "[foliate]\nsurface = \"sphere\"\nradius = 1.0\ndtau = 1e-3\nstrip_width = 0.0\n").unwrap();
    let o = lensrig(dir.path(), &["foliate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let rep = report(dir.path());
    assert!(rep.artifacts.iter().any(|a| a.starts_with("frames/frame_")));
    assert!(rep.artifacts.contains(&"curves.csv".to_string()));
    for a in &rep.artifacts {
        assert!(dir.path().join(a).exists(), "{a}");
    }
}
