//! Serializable outcomes of verification runs and iterative solves.

use serde::{Deserialize, Serialize};

/// Outcome of a sampled property check.
///
/// `max_violation` is the largest observed amount by which the property failed
/// (non-positive when the property held strictly on every trial).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub property: String,
    pub trials: usize,
    pub max_violation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl VerifyReport {
    pub fn new(property: impl Into<String>, trials: usize, max_violation: f64, tolerance: f64) -> Self {
        // NaN compares false, so a NaN violation never passes.
        let pass = max_violation <= tolerance;
        VerifyReport {
            property: property.into(),
            trials,
            max_violation,
            tolerance,
            pass,
        }
    }

    /// Combines several sub-checks into one report that passes only if all of them do.
    pub fn all(property: impl Into<String>, parts: &[VerifyReport]) -> Self {
        let trials = parts.iter().map(|r| r.trials).max().unwrap_or(0);
        let pass = !parts.is_empty() && parts.iter().all(|r| r.pass);
        let max_violation = parts
            .iter()
            .map(|r| r.max_violation - r.tolerance)
            .fold(f64::NEG_INFINITY, nan_max);
        VerifyReport {
            property: property.into(),
            trials,
            max_violation,
            tolerance: 0.0,
            pass,
        }
    }
}

/// Result of an iterative minimization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub minimizer: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Final value of the stopping quantity (iterate change or duality gap).
    #[serde(skip)]
    pub residual: f64,
}

/// `max` that propagates NaN, so a single broken trial poisons the reduction.
pub(crate) fn nan_max(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else {
        a.max(b)
    }
}
