use serde::Serialize;

use crate::collision::truncate;
use crate::fields::{sample_values, xlnx, Field, Grid};
use crate::geometry::Side;
use crate::model::VelocityModel;

/// Truncated entropy dissipation `D^k`.
#[derive(Clone, Debug, Serialize)]
pub struct EntropyDissipation {
    pub k: f64,
    /// Sum over finite terms.
    pub total: f64,
    /// Smallest finite term `Γ (a − b) ln(a/b)` at any cell.
    pub min_term: f64,
    /// Terms below zero (none by construction of the ratio).
    pub negative_terms: usize,
    /// Cells with a term where exactly one of the products vanishes.
    pub singular_cells: usize,
}

/// `Σ_{ijlm} Γ ∫ (a − b) ln(a/b)` with `a = T(F_i)T(F_j)`, `b = T(F_l)T(F_m)`,
/// `T(x) = x/(1 + x/k)`. Terms with `a = b` (including `0 = 0`) vanish;
/// terms with exactly one of `a, b` zero are infinite and only counted.
pub fn entropy_dissipation(model: &VelocityModel, field: &Field, k: f64) -> EntropyDissipation {
    let grid = field.grid();
    let areas = grid.areas();
    let p = model.p();
    let mut state = vec![0.0; p];
    let mut total = 0.0;
    let mut min_term = f64::INFINITY;
    let mut negative_terms = 0;
    let mut singular_cells = 0;
    for c in 0..field.ncells() {
        field.state(c, &mut state);
        let t: Vec<f64> = state.iter().map(|&x| truncate(x, k)).collect();
        let mut singular = false;
        for (i, term) in model.table().iter() {
            let a = t[i] * t[term.j];
            let b = t[term.l] * t[term.m];
            let val = if a == b {
                0.0
            } else if a == 0.0 || b == 0.0 {
                singular = true;
                continue;
            } else {
                term.weight * (a - b) * (a / b).ln()
            };
            if val < 0.0 {
                negative_terms += 1;
            }
            min_term = min_term.min(val);
            total += val * areas[c];
        }
        singular_cells += singular as usize;
    }
    if !min_term.is_finite() {
        min_term = 0.0;
    }
    EntropyDissipation { k, total, min_term, negative_terms, singular_cells }
}

/// Entropy functional `∫_{F_i<k} F_i ln F_i + ln(k/2) ∫_{F_i≥k} F_i`.
#[derive(Clone, Debug, Serialize)]
pub struct EntropyBound {
    pub k: f64,
    pub per_component: Vec<f64>,
    pub total: f64,
    /// `Σ_i (v_i·n0)` times the component values, when `n0` is known.
    pub weighted: Option<f64>,
}

pub fn entropy_bound_check(model: &VelocityModel, field: &Field, k: f64) -> EntropyBound {
    let areas = field.grid().areas();
    let lk = (k / 2.0).ln();
    let per_component: Vec<f64> = (0..model.p())
        .map(|i| {
            field
                .component(i)
                .iter()
                .zip(areas)
                .map(|(&f, a)| a * if f < k { xlnx(f) } else { lk * f })
                .sum()
        })
        .collect();
    let weighted = model.positive_direction().map(|n0| {
        per_component.iter().enumerate().map(|(i, e)| model.velocity(i).dot(&n0) * e).sum()
    });
    if weighted.is_none() {
        log::warn!("no positive direction: weighted entropy functional skipped");
    }
    EntropyBound { k, total: per_component.iter().sum(), per_component, weighted }
}

/// Outgoing entropy flow `Σ_i ∫_{∂Ω_i^−} F ln(F/(1 + F/k)) |v_i·n| dσ`.
pub fn boundary_entropy_flow(grid: &Grid, model: &VelocityModel, field: &Field, k: f64, nodes: usize) -> f64 {
    (0..model.p())
        .map(|i| {
            grid.domain()
                .boundary_quadrature(model.velocity(i), Side::Outflow, nodes)
                .iter()
                .map(|n| {
                    let f = sample_values(grid, field.component(i), n.z).0;
                    if f > 0.0 {
                        n.weight * f * (f / (1.0 + f / k)).ln()
                    } else {
                        0.0
                    }
                })
                .sum::<f64>()
        })
        .sum()
}
