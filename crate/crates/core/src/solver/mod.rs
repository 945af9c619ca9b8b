//! Regularized solves, continuation in the damping and the truncation, and
//! residuals of the solution forms.

mod continuation;
mod iterate;
mod pointwise;
mod residual;
mod transport;

pub use continuation::{
    Problem,
    alpha_continuation, k_sweep, richardson, AlphaReport, AlphaStage, KStage, KSweepReport,
};
pub use iterate::{
    inner_monotone_solve, outer_fixed_point, MASS_CAP_RTOL, MONOTONE_FAILURE_RTOL, ROUNDING_RTOL, InnerOutcome, InnerPolicy, InnerStart, OuterOutcome, SolveTrace,
    Termination, TraceRecord,
};
pub use pointwise::{backward_segment, exponential_form_at};
pub use residual::{
    residual_mild, residual_renormalized, standard_test_functions, MildOperator, TestFunction,
};
pub use transport::{FluxTallies, TrackInflow, TransportPlan};

use serde::{Deserialize, Serialize};

use crate::error::{DvmError, Result};

/// Numerical parameters of a solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Damping rate for a single regularized solve.
    pub alpha: f64,
    /// Truncation level for a single regularized solve.
    pub k: f64,
    /// Cells across the larger extent of the domain.
    pub grid_n: usize,
    /// Track spacing in cell units.
    pub track_fraction: f64,
    /// Line-quadrature step `h_s` in cell units.
    pub quadrature_fraction: f64,
    /// Relative L¹ increment stopping the inner ladder.
    pub tol_inner: f64,
    /// Relative L¹ change stopping the Picard loop.
    pub tol_outer: f64,
    /// Cauchy distance ratio above which the continuation is flagged.
    pub tol_continuation: f64,
    pub max_inner: usize,
    pub max_outer: usize,
    /// Strictly decreasing damping rates.
    pub alpha_schedule: Vec<f64>,
    /// Increasing truncation levels.
    pub k_schedule: Vec<f64>,
    /// Boundary smoothing support as a fraction of the perimeter (`1/k` if unset).
    pub boundary_support_fraction: Option<f64>,
    /// Arclength samples per component for boundary data.
    pub boundary_nodes: usize,
    /// Warm-start each continuation stage from the previous solution.
    pub warm_start: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            k: 16.0,
            grid_n: 64,
            track_fraction: 0.25,
            quadrature_fraction: 0.5,
            tol_inner: 1e-13,
            tol_outer: 1e-10,
            tol_continuation: 1.0,
            max_inner: 400,
            max_outer: 200,
            alpha_schedule: (1..=6).map(|e| 0.5f64.powi(e)).collect(),
            k_schedule: vec![4.0, 16.0, 64.0, 256.0],
            boundary_support_fraction: None,
            boundary_nodes: crate::fields::DEFAULT_BOUNDARY_NODES,
            warm_start: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(DvmError::Precondition(m));
        if !(self.alpha > 0.0) {
            return bad(format!("alpha = {} must be positive", self.alpha));
        }
        if !(self.k > 1.0) {
            return bad(format!("k = {} must exceed 1", self.k));
        }
        if self.grid_n < 4 {
            return bad("grid_n must be at least 4".into());
        }
        if !(self.track_fraction > 0.0 && self.track_fraction <= 1.0) {
            return bad("track_fraction must lie in (0, 1]".into());
        }
        if !(self.quadrature_fraction > 0.0) {
            return bad("quadrature_fraction must be positive".into());
        }
        if !(self.tol_inner > 0.0 && self.tol_outer > 0.0) {
            return bad("tolerances must be positive".into());
        }
        if self.max_inner == 0 || self.max_outer == 0 {
            return bad("iteration limits must be positive".into());
        }
        if self.alpha_schedule.is_empty()
            || self.alpha_schedule.iter().any(|a| !(*a > 0.0))
            || self.alpha_schedule.windows(2).any(|w| w[1] >= w[0])
        {
            return bad("alpha_schedule must be positive and strictly decreasing".into());
        }
        if self.k_schedule.is_empty()
            || self.k_schedule.iter().any(|k| !(*k > 1.0))
            || self.k_schedule.windows(2).any(|w| w[1] <= w[0])
        {
            return bad("k_schedule must exceed 1 and be strictly increasing".into());
        }
        if self.boundary_nodes < 16 {
            return bad("boundary_nodes must be at least 16".into());
        }
        Ok(())
    }

    /// Mass cap `c_α = (1/α) Σ_i inflow_i`.
    pub fn mass_cap(alpha: f64, inflow: &[f64]) -> f64 {
        inflow.iter().sum::<f64>() / alpha
    }
}
