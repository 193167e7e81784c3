//! Run reports shared by every solver and serialized by the CLI.

use serde::{Deserialize, Serialize};

use crate::metrics::MetricReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Relative displacement fell below the tolerance.
    Converged,
    /// Iteration budget exhausted.
    MaxIterations,
    /// Stepsize shrank below the floor without a certified step.
    StalledStepsize,
}

/// Per-iteration traces plus final metrics.
///
/// Traces hold one entry per accepted iteration, evaluated at the new iterate.
/// Single-objective baselines fill `psi1_trace` only and leave the bi-level
/// traces empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub method: String,
    pub iterations: usize,
    pub converged: bool,
    pub termination: Termination,
    pub psi1_trace: Vec<f64>,
    pub psi2_trace: Vec<f64>,
    pub alpha_trace: Vec<f64>,
    pub beta_trace: Vec<f64>,
    pub nu_trace: Vec<f64>,
    pub wall_time_seconds: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricReport>,
}

impl RunReport {
    pub fn new(method: impl Into<String>) -> Self {
        Self {
            method: method.into(),
            iterations: 0,
            converged: false,
            termination: Termination::MaxIterations,
            psi1_trace: Vec::new(),
            psi2_trace: Vec::new(),
            alpha_trace: Vec::new(),
            beta_trace: Vec::new(),
            nu_trace: Vec::new(),
            wall_time_seconds: 0.0,
            metrics: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization is infallible")
    }

    /// JSON with the timing field zeroed, for byte-level reproducibility checks.
    pub fn to_json_without_timing(&self) -> String {
        let mut r = self.clone();
        r.wall_time_seconds = 0.0;
        r.to_json()
    }

    pub fn final_psi1(&self) -> Option<f64> {
        self.psi1_trace.last().copied()
    }

    pub fn final_psi2(&self) -> Option<f64> {
        self.psi2_trace.last().copied()
    }
}
