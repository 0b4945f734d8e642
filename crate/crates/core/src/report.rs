//! Outcome of a numerical verification.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};

/// Residual summary of one check. `pass` holds iff the relative residual is
/// below the tolerance recorded under `params["tolerance"]`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct VerificationReport {
    pub check: String,
    pub params: BTreeMap<String, f64>,
    pub samples: u64,
    pub max_abs_err: f64,
    pub max_rel_err: f64,
    pub measured_constants: BTreeMap<String, f64>,
    pub pass: bool,
    pub seed: u64,
    pub runtime_ms: u64,
}

impl VerificationReport {
    pub fn new(check: &str, tolerance: f64) -> Self {
        let mut params = BTreeMap::new();
        params.insert("tolerance".to_string(), tolerance);
        VerificationReport {
            check: check.to_string(),
            params,
            samples: 0,
            max_abs_err: 0.0,
            max_rel_err: 0.0,
            measured_constants: BTreeMap::new(),
            pass: true,
            seed: 0,
            runtime_ms: 0,
        }
    }

    pub fn tolerance(&self) -> f64 {
        self.params.get("tolerance").copied().unwrap_or(0.0)
    }

    pub fn param(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Record one residual `|value - expected|` against `scale`.
    pub fn record(&mut self, abs_err: f64, scale: f64) {
        self.samples += 1;
        let rel = if scale > 0.0 { abs_err / scale } else if abs_err == 0.0 { 0.0 } else { f64::INFINITY };
        if abs_err.is_nan() || rel.is_nan() {
            self.max_abs_err = f64::NAN;
            self.max_rel_err = f64::NAN;
        } else {
            self.max_abs_err = self.max_abs_err.max(abs_err);
            self.max_rel_err = self.max_rel_err.max(rel);
        }
        self.refresh();
    }

    pub fn constant(&mut self, name: &str, value: f64) {
        self.measured_constants.insert(name.to_string(), value);
    }

    /// Mark as failed regardless of residuals.
    pub fn fail(&mut self) {
        self.params.insert("forced_failure".to_string(), 1.0);
        self.pass = false;
    }

    /// Recompute `pass` from the residuals.
    pub fn refresh(&mut self) {
        let forced = self.params.contains_key("forced_failure");
        self.pass = !forced && self.max_rel_err < self.tolerance();
    }

    /// Fold another report's residuals into this one.
    pub fn merge(&mut self, other: &VerificationReport) {
        self.samples += other.samples;
        self.max_abs_err = self.max_abs_err.max(other.max_abs_err);
        self.max_rel_err = self.max_rel_err.max(other.max_rel_err);
        if other.max_rel_err.is_nan() {
            self.max_rel_err = f64::NAN;
        }
        if other.params.contains_key("forced_failure") {
            self.fail();
        }
        self.refresh();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pass_tracks_tolerance() {
        let mut r = VerificationReport::new("x", 1e-8);
        r.record(1e-12, 1.0);
        assert!(r.pass);
        r.record(1e-3, 1.0);
        assert!(!r.pass);
        assert_eq!(r.samples, 2);
        let mut z = VerificationReport::new("z", 1e-8);
        z.record(0.0, 0.0);
        assert!(z.pass);
        z.record(f64::NAN, 1.0);
        assert!(!z.pass);
    }
}
