//! Named residual checks shared by the verification passes.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    /// Passes iff `residual < tolerance`; a NaN residual fails.
    pub fn new(name: impl Into<String>, residual: f64, tolerance: f64) -> Self {
        Check { name: name.into(), residual, tolerance, pass: residual < tolerance }
    }

    /// A check that must fail to count as passing (negative controls).
    pub fn expect_above(name: impl Into<String>, residual: f64, threshold: f64) -> Self {
        Check { name: name.into(), residual, tolerance: threshold, pass: residual >= threshold }
    }
}

pub fn all_pass(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.pass)
}

/// Running maximum that treats NaN as infinite.
pub fn max_abs(acc: f64, v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        acc.max(v.abs())
    }
}
