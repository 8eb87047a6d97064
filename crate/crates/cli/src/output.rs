//! Report schema and the JSON, CSV and SVG writers. Floats are written
//! with 17 significant digits.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::Path;

use lensrig_core::front::GridSpec;
use lensrig_core::report::Check;

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub version: String,
    pub metrics: Vec<String>,
    pub grid: Option<GridSpec>,
    pub step: f64,
    pub seed: u64,
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub command: String,
    pub pass: bool,
    pub checks: Vec<Check>,
    /// Grid nodes or samples where a computation did not converge.
    pub flagged: usize,
    pub summary: BTreeMap<String, f64>,
    pub provenance: Provenance,
    /// Files written next to the report, relative to the output directory.
    pub artifacts: Vec<String>,
}

impl Report {
    pub fn new(command: &str, provenance: Provenance) -> Self {
        Report {
            schema_version: SCHEMA_VERSION,
            command: command.into(),
            pass: true,
            checks: Vec::new(),
            flagged: 0,
            summary: BTreeMap::new(),
            provenance,
            artifacts: Vec::new(),
        }
    }

    pub fn push(&mut self, checks: impl IntoIterator<Item = Check>) {
        self.checks.extend(checks);
        self.pass = self.checks.iter().all(|c| c.pass);
    }

    /// `0` pass, `1` failed check, `3` flagged nodes.
    pub fn exit_code(&self) -> i32 {
        if self.flagged > 0 {
            3
        } else if self.pass {
            0
        } else {
            1
        }
    }
}

pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

/// Pretty JSON with every float in fixed 17-digit scientific form.
struct FixedFloats(serde_json::ser::PrettyFormatter<'static>);

impl serde_json::ser::Formatter for FixedFloats {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        w.write_all(fmt_f64(v).as_bytes())
    }
    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser =
        serde_json::Serializer::with_formatter(&mut buf, FixedFloats(serde_json::ser::PrettyFormatter::new()));
    value.serialize(&mut ser).expect("in-memory serialization");
    buf.push(b'\n');
    String::from_utf8(buf).expect("JSON is UTF-8")
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Rows of already formatted cells.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::io(path, io::Error::other(e));
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(r).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::io(path, io::Error::other(e.to_string())))?;
    write_text(path, &String::from_utf8(bytes).expect("CSV is UTF-8"))
}

/// A minimal SVG canvas mapping a data box onto `size × size` pixels.
pub struct Svg {
    body: String,
    lo: [f64; 2],
    hi: [f64; 2],
    size: f64,
}

impl Svg {
    pub fn new(lo: [f64; 2], hi: [f64; 2], size: f64) -> Self {
        Svg { body: String::new(), lo, hi, size }
    }

    fn map(&self, p: [f64; 2]) -> (f64, f64) {
        let sx = (p[0] - self.lo[0]) / (self.hi[0] - self.lo[0]).max(1e-300);
        let sy = (p[1] - self.lo[1]) / (self.hi[1] - self.lo[1]).max(1e-300);
        (10.0 + sx * (self.size - 20.0), self.size - 10.0 - sy * (self.size - 20.0))
    }

    pub fn dot(&mut self, p: [f64; 2], color: &str) {
        let (x, y) = self.map(p);
        let _ = writeln!(self.body, r#"<circle cx="{x:.3}" cy="{y:.3}" r="2" fill="{color}"/>"#);
    }

    pub fn polyline(&mut self, pts: &[[f64; 2]], closed: bool, color: &str) {
        let mut d = String::new();
        for p in pts.iter().chain(pts.first().filter(|_| closed)) {
            let (x, y) = self.map(*p);
            let _ = write!(d, "{x:.3},{y:.3} ");
        }
        let _ = writeln!(self.body, r#"<polyline points="{}" fill="none" stroke="{color}"/>"#, d.trim_end());
    }

    /// Axis-aligned cell from `lo` to `hi`, gray level `shade ∈ [0, 1]` with 1 black.
    pub fn cell(&mut self, lo: [f64; 2], hi: [f64; 2], shade: f64) {
        let (x0, y1) = self.map(lo);
        let (x1, y0) = self.map(hi);
        let g = (255.0 * (1.0 - shade.clamp(0.0, 1.0))).round() as u8;
        let _ = writeln!(
            self.body,
            r#"<rect x="{x0:.3}" y="{y0:.3}" width="{:.3}" height="{:.3}" fill="rgb({g},{g},{g})"/>"#,
            x1 - x0,
            y1 - y0
        );
    }

    pub fn label(&mut self, text: &str) {
        let _ = writeln!(self.body, r#"<text x="12" y="22" font-size="14">{text}</text>"#);
    }

    pub fn finish(&self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{s}\" height=\"{s}\" viewBox=\"0 0 {s} {s}\">\n{}</svg>\n",
            self.body,
            s = self.size
        )
    }
}

/// Bounding box of a point set, padded when degenerate.
pub fn bounds(pts: impl IntoIterator<Item = [f64; 2]>) -> ([f64; 2], [f64; 2]) {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in pts {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    for k in 0..2 {
        if !(hi[k] > lo[k]) {
            let c = if lo[k].is_finite() { lo[k] } else { 0.0 };
            lo[k] = c - 1.0;
            hi[k] = c + 1.0;
        }
    }
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_have_17_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(-2.0), "-2.0000000000000000e0");
        let s = to_json(&vec![1.5f64, 1e-300]);
        assert!(s.contains("1.5000000000000000e0") && s.contains("1.0000000000000000e-300"));
        let back: Vec<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, vec![1.5, 1e-300]);
    }

    #[test]
    fn svg_counts_dots() {
        let mut s = Svg::new([0.0, 0.0], [1.0, 1.0], 100.0);
        for i in 0..5 {
            s.dot([i as f64 / 5.0, 0.5], "black");
        }
        assert_eq!(s.finish().matches("<circle").count(), 5);
    }
}
