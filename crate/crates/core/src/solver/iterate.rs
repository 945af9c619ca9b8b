use std::time::Instant;

use serde::Serialize;

use super::transport::{FluxTallies, TrackInflow, TransportPlan};
use super::SolverConfig;
use crate::collision::collision_fields;
use crate::error::{DvmError, Result};
use crate::fields::{Field, MollifierPlan};
use crate::model::VelocityModel;

/// Relative size of a ladder decrease treated as a hard failure.
pub const MONOTONE_FAILURE_RTOL: f64 = 1e-10;
/// Cellwise relative decrease attributed to rounding rather than counted
/// as a ladder violation.
pub const ROUNDING_RTOL: f64 = 64.0 * f64::EPSILON;
/// Relative slack on the mass cap.
pub const MASS_CAP_RTOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TraceRecord {
    /// L¹ increment (inner) or relative L¹ change (outer).
    pub increment: f64,
    pub mass: f64,
    pub min: f64,
    pub wall_ms: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Termination {
    Converged,
    MaxIterations,
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveTrace {
    pub records: Vec<TraceRecord>,
    pub termination: Termination,
}

impl SolveTrace {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }
}

/// Starting iterate of the inner ladder.
#[derive(Clone, Copy, Debug)]
pub enum InnerStart<'a> {
    /// `F⁰ = 0`, the monotone reference path.
    Zero,
    /// A given field (no monotonicity guarantee).
    Warm(&'a Field),
}

#[derive(Clone, Debug)]
pub struct InnerOutcome {
    pub field: Field,
    pub trace: SolveTrace,
    pub tallies: FluxTallies,
    /// Cells where `F^{q+1} < F^q` by more than rounding, over the whole
    /// ladder (zero start only).
    pub monotone_violations: usize,
    /// Decreases within [`ROUNDING_RTOL`] of the cell value.
    pub rounding_decreases: usize,
    /// Largest decrease seen, relative to the field maximum.
    pub max_violation: f64,
    pub mass_cap: f64,
    /// Largest `mass(F^q) / c_α` over the ladder.
    pub max_mass_ratio: f64,
}

/// Monotone exponential-form ladder for the damped, convolved, truncated
/// system with frozen smoothed state `smoothed = μ_α ∗ f`:
/// `F^{q+1}` transports the boundary data with gain
/// `Σ Γ T(F^q_l) T(S_m)` and rate `α + Σ Γ T(S_j)/(1 + F^q_i/k)`.
#[allow(clippy::too_many_arguments)]
pub fn inner_monotone_solve(
    plan: &TransportPlan,
    model: &VelocityModel,
    inflow: &TrackInflow,
    smoothed: &Field,
    alpha: f64,
    k: f64,
    cfg: &SolverConfig,
    start: InnerStart<'_>,
) -> Result<InnerOutcome> {
    let grid = plan.grid().clone();
    let p = model.p();
    let mass_cap = SolverConfig::mass_cap(alpha, &plan.inflow_flux(inflow));
    let monotone = matches!(start, InnerStart::Zero);
    let mut current = match start {
        InnerStart::Zero => Field::zeros(grid.clone(), p),
        InnerStart::Warm(f) => f.clone(),
    };
    let mut records = Vec::new();
    let mut violations = 0usize;
    let mut rounding = 0usize;
    let mut max_violation: f64 = 0.0;
    let mut max_mass_ratio: f64 = 0.0;
    let mut tallies = FluxTallies::default();
    let mut termination = Termination::MaxIterations;
    for _ in 0..cfg.max_inner {
        let t0 = Instant::now();
        let (gain, nu) = collision_fields(model, &current, smoothed, k);
        let (next, tl) = plan.sweep(inflow, &nu, &gain, alpha);
        tallies = tl;
        let scale = next.max().max(f64::MIN_POSITIVE);
        if monotone {
            for (a, b) in current.data().iter().zip(next.data()) {
                if b < a {
                    if a - b <= ROUNDING_RTOL * a {
                        rounding += 1;
                    } else {
                        violations += 1;
                    }
                    max_violation = max_violation.max((a - b) / scale);
                }
            }
            if max_violation > MONOTONE_FAILURE_RTOL {
                return Err(DvmError::Numerical(format!(
                    "inner ladder decreased by {max_violation:e} (relative)"
                )));
            }
        }
        let increment = next.l1_distance(&current);
        let mass = next.mass();
        if mass_cap > 0.0 {
            max_mass_ratio = max_mass_ratio.max(mass / mass_cap);
        } else if mass > 0.0 {
            max_mass_ratio = f64::INFINITY;
        }
        records.push(TraceRecord {
            increment,
            mass,
            min: next.min(),
            wall_ms: t0.elapsed().as_secs_f64() * 1e3,
        });
        current = next;
        if increment <= cfg.tol_inner * mass || mass == 0.0 && increment == 0.0 {
            termination = Termination::Converged;
            break;
        }
    }
    if monotone && max_mass_ratio > 1.0 + MASS_CAP_RTOL {
        return Err(DvmError::Numerical(format!(
            "inner iterate mass exceeds the cap: ratio {max_mass_ratio}"
        )));
    }
    Ok(InnerOutcome {
        field: current,
        trace: SolveTrace { records, termination },
        tallies,
        monotone_violations: violations,
        rounding_decreases: rounding,
        max_violation,
        mass_cap,
        max_mass_ratio,
    })
}

/// How each inner ladder of the Picard loop starts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum InnerPolicy {
    /// Every ladder starts at zero.
    Cold,
    /// Each ladder starts from the previous Picard iterate.
    FromPrevious,
}

#[derive(Clone, Debug)]
pub struct OuterOutcome {
    pub field: Field,
    pub trace: SolveTrace,
    pub inner: Vec<SolveTrace>,
    pub tallies: FluxTallies,
    pub mass_cap: f64,
    pub monotone_violations: usize,
    pub rounding_decreases: usize,
    pub max_violation: f64,
    pub max_mass_ratio: f64,
    pub inner_all_converged: bool,
}

impl OuterOutcome {
    pub fn converged(&self) -> bool {
        self.trace.converged() && self.inner_all_converged
    }

    /// `inflow − outflow − α·mass` from the last sweep.
    pub fn balance_defect(&self, alpha: f64) -> f64 {
        self.tallies.total_inflow() - self.tallies.total_outflow() - alpha * self.field.mass()
    }
}

/// Picard iteration `f ← 𝒯 f`, where `𝒯 f` is the inner ladder limit for
/// the smoothed state `μ_α ∗ f`.
#[allow(clippy::too_many_arguments)]
pub fn outer_fixed_point(
    plan: &TransportPlan,
    model: &VelocityModel,
    inflow: &TrackInflow,
    mollifier: &MollifierPlan,
    alpha: f64,
    k: f64,
    cfg: &SolverConfig,
    initial: Option<&Field>,
    policy: InnerPolicy,
) -> Result<OuterOutcome> {
    let grid = plan.grid().clone();
    let p = model.p();
    let mut f = initial.cloned().unwrap_or_else(|| Field::zeros(grid.clone(), p));
    let mut smoothed = Field::zeros(grid.clone(), p);
    let mut records = Vec::new();
    let mut inner_traces = Vec::new();
    let mut termination = Termination::MaxIterations;
    let mut out_tallies = FluxTallies::default();
    let mut mass_cap = 0.0;
    let (mut violations, mut rounding, mut max_violation, mut max_ratio) = (0usize, 0usize, 0.0f64, 0.0f64);
    let mut all_inner = true;
    for it in 0..cfg.max_outer {
        let t0 = Instant::now();
        for i in 0..p {
            mollifier.apply_into(f.component(i), smoothed.component_mut(i));
        }
        let start = match policy {
            InnerPolicy::FromPrevious if it > 0 || initial.is_some() => InnerStart::Warm(&f),
            _ => InnerStart::Zero,
        };
        let inner = inner_monotone_solve(plan, model, inflow, &smoothed, alpha, k, cfg, start)?;
        violations += inner.monotone_violations;
        rounding += inner.rounding_decreases;
        max_violation = max_violation.max(inner.max_violation);
        max_ratio = max_ratio.max(inner.max_mass_ratio);
        mass_cap = inner.mass_cap;
        all_inner &= inner.trace.converged();
        inner_traces.push(inner.trace);
        out_tallies = inner.tallies;
        let next = inner.field;
        let norm = next.l1_norm();
        let change = if norm > 0.0 { next.l1_distance(&f) / norm } else { next.l1_distance(&f) };
        records.push(TraceRecord {
            increment: change,
            mass: next.mass(),
            min: next.min(),
            wall_ms: t0.elapsed().as_secs_f64() * 1e3,
        });
        f = next;
        if change <= cfg.tol_outer {
            termination = Termination::Converged;
            break;
        }
    }
    Ok(OuterOutcome {
        field: f,
        trace: SolveTrace { records, termination },
        inner: inner_traces,
        tallies: out_tallies,
        mass_cap,
        monotone_violations: violations,
        rounding_decreases: rounding,
        max_violation,
        max_mass_ratio: max_ratio,
        inner_all_converged: all_inner,
    })
}
