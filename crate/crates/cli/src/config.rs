//! Run configuration: `key = value` lines under `[section]` headers.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use lensrig_core::front::GridSpec;
use lensrig_core::metric::{bump_perturb, catalog, CatalogName, CatalogParams, GaussianMetric};
use lensrig_core::pair::default_pair_grid;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub run: RunSection,
    pub metric: MetricSection,
    pub pair: PairSection,
    pub bump: Option<BumpSection>,
    pub grid: GridSection,
    pub lens: LensSection,
    pub domains: DomainsSection,
    pub foliate: FoliateSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub seed: u64,
    /// Overrides the per-check tolerances where a command allows it.
    pub tol: Option<f64>,
    pub out: Option<PathBuf>,
    /// Random base states for the sampled checks.
    pub samples: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection { seed: 0, tol: None, out: None, samples: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricSection {
    pub name: String,
    pub radius: f64,
    pub r0: f64,
    pub width: f64,
    pub extension: f64,
}

impl Default for MetricSection {
    fn default() -> Self {
        let p = CatalogParams::default();
        MetricSection { name: "flat_disk".into(), radius: p.radius, r0: p.r0, width: p.width, extension: p.extension }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PairSection {
    pub m0: String,
    pub m1: String,
}

impl Default for PairSection {
    fn default() -> Self {
        PairSection { m0: "flat_disk".into(), m1: "flat_disk".into() }
    }
}

/// Applied to `m1` of a pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BumpSection {
    pub x: f64,
    pub y: f64,
    pub radius: f64,
    pub amplitude: f64,
    #[serde(default = "default_jet_order")]
    pub jet_order: u32,
}

fn default_jet_order() -> u32 {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub y_min: f64,
    pub y_max: f64,
    pub ny: usize,
    pub n_theta: usize,
    pub anchor: f64,
    pub n_t: usize,
    pub step: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        let g = default_pair_grid();
        GridSection {
            x_min: g.x_range.0,
            x_max: g.x_range.1,
            nx: g.nx,
            y_min: g.y_range.0,
            y_max: g.y_range.1,
            ny: g.ny,
            n_theta: g.n_theta,
            anchor: g.anchor,
            n_t: g.n_t,
            step: g.step,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LensSection {
    pub fan: usize,
    pub y0: f64,
}

impl Default for LensSection {
    fn default() -> Self {
        LensSection { fan: 64, y0: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DomainsSection {
    pub lambda: f64,
    pub z_star: f64,
    pub eps: f64,
    pub delta: f64,
    pub flux_samples: usize,
    pub paths: usize,
}

impl Default for DomainsSection {
    fn default() -> Self {
        DomainsSection { lambda: 0.1, z_star: 0.01, eps: 0.4, delta: 0.6, flux_samples: 10_000, paths: 1_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FoliateSection {
    /// `flat`, `sphere`, `hyperbolic` (conformal disk models) or `waist`.
    pub surface: String,
    /// Initial circle radius, measured in the surface metric.
    pub radius: f64,
    pub nodes: usize,
    pub dtau: f64,
    pub tau_max: f64,
    /// Starting latitude and its wobble, for `waist`.
    pub x0: f64,
    pub amplitude: f64,
    pub snapshot_every: usize,
    /// Collar width for the flat layer-strip run; `0` skips it.
    pub strip_width: f64,
}

impl Default for FoliateSection {
    fn default() -> Self {
        FoliateSection {
            surface: "flat".into(),
            radius: 2.0,
            nodes: 128,
            dtau: 1e-4,
            tau_max: 50.0,
            x0: 0.0,
            amplitude: 0.05,
            snapshot_every: 100,
            strip_width: 0.5,
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub tol: Option<f64>,
    pub metric: Option<String>,
    pub fan: Option<usize>,
    pub m0: Option<String>,
    pub m1: Option<String>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = &o.out {
            self.run.out = Some(v.clone());
        }
        if let Some(v) = o.seed {
            self.run.seed = v;
        }
        if let Some(v) = o.tol {
            self.run.tol = Some(v);
        }
        if let Some(v) = &o.metric {
            self.metric.name = v.clone();
        }
        if let Some(v) = o.fan {
            self.lens.fan = v;
        }
        if let Some(v) = &o.m0 {
            self.pair.m0 = v.clone();
        }
        if let Some(v) = &o.m1 {
            self.pair.m1 = v.clone();
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if let Some(t) = self.run.tol {
            if !(t > 0.0) {
                return bad(format!("run.tol must be positive, got {t}"));
            }
        }
        for (field, name) in
            [("metric.name", &self.metric.name), ("pair.m0", &self.pair.m0), ("pair.m1", &self.pair.m1)]
        {
            if name.parse::<CatalogName>().is_err() {
                return bad(format!("{field}: unknown metric `{name}`"));
            }
        }
        let g = &self.grid;
        if g.nx == 0 || g.ny == 0 || g.n_theta < 2 || g.n_t == 0 {
            return bad("grid: nx, ny, n_t must be at least 1 and n_theta at least 2".into());
        }
        if !(g.step > 0.0 && g.anchor > 0.0 && g.x_max >= g.x_min && g.y_max >= g.y_min) {
            return bad("grid: step and anchor must be positive and ranges ordered".into());
        }
        if self.lens.fan == 0 {
            return bad("lens.fan must be at least 1".into());
        }
        let d = &self.domains;
        if !(d.lambda > 0.0 && d.eps > 0.0 && d.delta > 0.0) {
            return bad("domains: lambda, eps and delta must be positive".into());
        }
        let f = &self.foliate;
        if !["flat", "sphere", "hyperbolic", "waist"].contains(&f.surface.as_str()) {
            return bad(format!("foliate.surface: unknown surface `{}`", f.surface));
        }
        if !(f.dtau > 0.0 && f.tau_max > 0.0 && f.radius > 0.0 && f.strip_width >= 0.0) || f.nodes < 16 {
            return bad("foliate: dtau, tau_max, radius must be positive and nodes at least 16".into());
        }
        Ok(())
    }

    pub fn catalog_params(&self) -> CatalogParams {
        let m = &self.metric;
        CatalogParams { radius: m.radius, r0: m.r0, width: m.width, extension: m.extension }
    }

    pub fn metric_named(&self, name: &str) -> Result<GaussianMetric, CliError> {
        let n: CatalogName = name.parse().map_err(|e: lensrig_core::Error| CliError::Config(e.to_string()))?;
        Ok(catalog(n, &self.catalog_params())?)
    }

    pub fn metric(&self) -> Result<GaussianMetric, CliError> {
        self.metric_named(&self.metric.name)
    }

    /// `(m0, m1)` with the bump, if any, applied to `m1`.
    pub fn pair_metrics(&self) -> Result<(GaussianMetric, GaussianMetric), CliError> {
        let m0 = self.metric_named(&self.pair.m0)?;
        let mut m1 = self.metric_named(&self.pair.m1)?;
        if let Some(b) = &self.bump {
            m1 = bump_perturb(&m1, (b.x, b.y), b.radius, b.amplitude, b.jet_order)?;
        }
        Ok((m0, m1))
    }

    pub fn grid_spec(&self) -> GridSpec {
        let g = &self.grid;
        GridSpec {
            x_range: (g.x_min, g.x_max),
            nx: g.nx,
            y_range: (g.y_min, g.y_max),
            ny: g.ny,
            n_theta: g.n_theta,
            anchor: g.anchor,
            n_t: g.n_t,
            step: g.step,
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.run.out.clone().unwrap_or_else(|| PathBuf::from("lensrig-out"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        let c = RunConfig::parse("").unwrap();
        assert_eq!(c, RunConfig::default());
        c.validate().unwrap();
    }

    #[test]
    fn sections_and_overrides() {
        let mut c = RunConfig::parse("[run]\nseed = 4\n[metric]\nname = \"sphere_cap\"\n[lens]\nfan = 8\n").unwrap();
        assert_eq!((c.run.seed, c.metric.name.as_str(), c.lens.fan), (4, "sphere_cap", 8));
        c.apply(&Overrides { seed: Some(9), fan: Some(16), ..Default::default() });
        assert_eq!((c.run.seed, c.lens.fan), (9, 16));
    }

    #[test]
    fn unknown_field_reports_location() {
        let e = RunConfig::parse("[run]\nseed = 1\n\n[grid]\nnxx = 3\n").unwrap_err().to_string();
        assert!(e.contains("nxx") && e.contains("line 5"), "{e}");
    }

    #[test]
    fn bad_values_rejected() {
        let mut c = RunConfig::default();
        c.run.tol = Some(-1.0);
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.metric.name = "torus".into();
        assert!(c.validate().is_err());
    }
}
