use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use serde::Serialize;

use super::iterate::{outer_fixed_point, InnerPolicy, OuterOutcome};
use super::residual::{residual_mild, MildOperator};
use super::transport::{FluxTallies, TransportPlan};
use super::SolverConfig;
use crate::diagnostics::{k_stage_summary, KStageSummary};
use crate::error::{DvmError, Result};
use crate::fields::{BoundaryData, Field, Grid, MollifierPlan};
use crate::geometry::ConvexDomain;
use crate::model::{validate_rules, VelocityModel};

/// A model on a gridded domain with its transport plan, shared by every
/// solve of a sweep.
pub struct Problem {
    model: VelocityModel,
    grid: Arc<Grid>,
    plan: TransportPlan,
    cfg: SolverConfig,
    mollifiers: Mutex<HashMap<u64, Arc<MollifierPlan>>>,
}

impl Problem {
    pub fn new(domain: &ConvexDomain, model: VelocityModel, cfg: SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let report = validate_rules(&model);
        if !report.is_valid() {
            return Err(DvmError::Physics(format!(
                "model rules invalid ({} violation(s))",
                report.violations.len()
            )));
        }
        if let Some((a, b)) = crate::model::check_genericity(&model).offending_pair {
            return Err(DvmError::Physics(format!("velocities {} and {} are parallel", a + 1, b + 1)));
        }
        let grid = Arc::new(Grid::new(domain, cfg.grid_n));
        let plan = TransportPlan::new(grid.clone(), &model, cfg.track_fraction);
        Ok(Self { model, grid, plan, cfg, mollifiers: Mutex::new(HashMap::new()) })
    }

    pub fn model(&self) -> &VelocityModel {
        &self.model
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn domain(&self) -> &ConvexDomain {
        self.grid.domain()
    }

    pub fn plan(&self) -> &TransportPlan {
        &self.plan
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    /// Line-quadrature step used by residuals and pointwise evaluations.
    pub fn h_s(&self) -> f64 {
        self.cfg.quadrature_fraction * self.grid.h()
    }

    pub fn mollifier(&self, alpha: f64) -> Arc<MollifierPlan> {
        let mut cache = self.mollifiers.lock().expect("mollifier cache");
        cache
            .entry(alpha.to_bits())
            .or_insert_with(|| Arc::new(MollifierPlan::new(&self.grid, alpha)))
            .clone()
    }

    /// Boundary data at level `k`: capped at `k/2` and smoothed.
    pub fn boundary_at(&self, boundary: &BoundaryData, k: f64) -> Result<BoundaryData> {
        boundary.truncate_and_mollify(k, self.cfg.boundary_support_fraction)
    }

    /// One damped, convolved, truncated solve at `(α, k)` with boundary
    /// data already at level `k`.
    pub fn solve(
        &self,
        boundary_k: &BoundaryData,
        alpha: f64,
        k: f64,
        initial: Option<&Field>,
        policy: InnerPolicy,
    ) -> Result<OuterOutcome> {
        let inflow = self.plan.inflow(boundary_k);
        let moll = self.mollifier(alpha);
        outer_fixed_point(&self.plan, &self.model, &inflow, &moll, alpha, k, &self.cfg, initial, policy)
    }
}

/// Summary of one damping level.
#[derive(Clone, Debug, Serialize)]
pub struct AlphaStage {
    pub alpha: f64,
    #[serde(skip)]
    pub field: Field,
    pub mass: f64,
    pub mass_cap: f64,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub converged: bool,
    pub tallies: FluxTallies,
    /// `inflow − outflow − α·mass` of the last sweep.
    pub balance_defect: f64,
    pub monotone_violations: usize,
    pub rounding_decreases: usize,
    pub max_mass_ratio: f64,
}

impl AlphaStage {
    pub fn from_outcome(alpha: f64, o: OuterOutcome) -> Self {
        let mass = o.field.mass();
        Self {
            alpha,
            mass,
            mass_cap: o.mass_cap,
            outer_iterations: o.trace.iterations(),
            inner_iterations: o.inner.iter().map(|t| t.iterations()).sum(),
            converged: o.converged(),
            balance_defect: o.balance_defect(alpha),
            tallies: o.tallies,
            monotone_violations: o.monotone_violations,
            rounding_decreases: o.rounding_decreases,
            max_mass_ratio: o.max_mass_ratio,
            field: o.field,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct AlphaReport {
    pub k: f64,
    pub stages: Vec<AlphaStage>,
    /// L¹ distances between consecutive stages.
    pub cauchy: Vec<f64>,
    /// Set when some Cauchy distance grows by more than the configured ratio.
    pub cauchy_increasing: bool,
    /// Linear extrapolation to `α = 0` from the last two stages.
    #[serde(skip)]
    pub extrapolated: Option<Field>,
    /// Mild residual of the undamped level-`k` system at the last stage.
    pub final_residual: Vec<f64>,
}

impl AlphaReport {
    pub fn final_field(&self) -> &Field {
        &self.stages.last().expect("at least one stage").field
    }

    pub fn all_converged(&self) -> bool {
        self.stages.iter().all(|s| s.converged)
    }

    /// Level-`k` solution estimate: the extrapolation to zero damping if
    /// there are two stages, otherwise the last stage.
    pub fn best_estimate(&self) -> &Field {
        self.extrapolated.as_ref().unwrap_or_else(|| self.final_field())
    }
}

/// Linear extrapolation to zero damping from solutions at `α_fine < α_coarse`,
/// clamped at zero.
pub fn richardson(fine: &Field, alpha_fine: f64, coarse: &Field, alpha_coarse: f64) -> Field {
    let r = alpha_fine / alpha_coarse;
    let mut out = fine.clone();
    for (o, c) in out.data_mut().iter_mut().zip(coarse.data()) {
        *o = ((*o - r * c) / (1.0 - r)).max(0.0);
    }
    out
}

/// Solves along the damping schedule at fixed `k`, warm-starting each stage
/// from the previous one when configured.
pub fn alpha_continuation(
    problem: &Problem,
    boundary_k: &BoundaryData,
    k: f64,
    initial: Option<&Field>,
) -> Result<AlphaReport> {
    let cfg = problem.config();
    let mut stages: Vec<AlphaStage> = Vec::with_capacity(cfg.alpha_schedule.len());
    for &alpha in &cfg.alpha_schedule {
        let start = if cfg.warm_start {
            stages.last().map(|s| &s.field).or(initial)
        } else {
            None
        };
        let outcome = problem.solve(boundary_k, alpha, k, start, InnerPolicy::Cold)?;
        log::info!(
            "k = {k}, α = {alpha}: {} outer iterations, mass {:.6}",
            outcome.trace.iterations(),
            outcome.field.mass()
        );
        stages.push(AlphaStage::from_outcome(alpha, outcome));
    }
    let cauchy: Vec<f64> = stages.windows(2).map(|w| w[1].field.l1_distance(&w[0].field)).collect();
    let cauchy_increasing = cauchy
        .windows(2)
        .any(|w| w[1] > cfg.tol_continuation * w[0] && w[1] > 1e-14 * (1.0 + w[0]));
    let extrapolated = match stages.as_slice() {
        [.., a, b] => Some(richardson(&b.field, b.alpha, &a.field, a.alpha)),
        _ => None,
    };
    let final_residual = residual_mild(
        problem.grid(),
        problem.model(),
        boundary_k,
        &stages.last().unwrap().field,
        MildOperator::Truncated(k),
        problem.h_s(),
    );
    Ok(AlphaReport { k, stages, cauchy, cauchy_increasing, extrapolated, final_residual })
}

#[derive(Clone, Debug, Serialize)]
pub struct KStage {
    pub k: f64,
    pub report: AlphaReport,
    pub summary: KStageSummary,
}

#[derive(Clone, Debug, Serialize)]
pub struct KSweepReport {
    pub stages: Vec<KStage>,
    /// L¹ distances between the estimates of consecutive levels.
    pub k_distances: Vec<f64>,
}

impl KSweepReport {
    /// Solution estimate of the last level (bias-corrected when available).
    pub fn final_field(&self) -> &Field {
        self.stages.last().expect("at least one level").report.best_estimate()
    }

    pub fn all_converged(&self) -> bool {
        self.stages.iter().all(|s| s.report.all_converged())
    }
}

/// Runs the damping continuation for every truncation level of the
/// schedule, with boundary data capped and smoothed at each level.
pub fn k_sweep(problem: &Problem, boundary: &BoundaryData) -> Result<KSweepReport> {
    let cfg = problem.config();
    let mut stages: Vec<KStage> = Vec::with_capacity(cfg.k_schedule.len());
    for &k in &cfg.k_schedule {
        let bk = problem.boundary_at(boundary, k)?;
        let initial = if cfg.warm_start {
            stages.last().map(|s| &s.report.stages[0].field)
        } else {
            None
        };
        let report = alpha_continuation(problem, &bk, k, initial)?;
        let summary = k_stage_summary(problem, &bk, &report)?;
        stages.push(KStage { k, report, summary });
    }
    let k_distances =
        stages.windows(2).map(|w| w[1].report.best_estimate().l1_distance(w[0].report.best_estimate())).collect();
    Ok(KSweepReport { stages, k_distances })
}
