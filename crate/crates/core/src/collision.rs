//! Gain, loss and collision frequency, plain and truncated.

use rayon::prelude::*;

use crate::error::{DvmError, Result};
use crate::fields::Field;
use crate::model::{CollisionTable, VelocityModel};

/// Truncation `x / (1 + x/k)`; the identity for `k = ∞`.
#[inline(always)]
pub fn truncate(x: f64, k: f64) -> f64 {
    x / (1.0 + x / k)
}

/// Per-component gain `Q⁺`, frequency `ν`, loss `Q⁻ = f ν` and net `Q`.
#[derive(Clone, Debug, PartialEq)]
pub struct CollisionEval {
    pub gain: Vec<f64>,
    pub freq: Vec<f64>,
    pub loss: Vec<f64>,
    pub net: Vec<f64>,
}

fn check_state(values: &[f64], p: usize, what: &str) -> Result<()> {
    if values.len() != p {
        return Err(DvmError::Precondition(format!("{what} has {} entries, expected {p}", values.len())));
    }
    if let Some(x) = values.iter().find(|x| !(**x >= 0.0) || !x.is_finite()) {
        return Err(DvmError::Domain(format!("{what} contains {x}, expected finite values ≥ 0")));
    }
    Ok(())
}

/// Fills `gain` and `freq` with
/// `Q⁺_i = Σ Γ T(local_l) T(smoothed_m)` and
/// `ν_i = Σ Γ T(smoothed_j) / (1 + local_i/k)`.
#[inline]
pub fn kernel(
    table: &CollisionTable,
    local: &[f64],
    smoothed: &[f64],
    k: f64,
    gain: &mut [f64],
    freq: &mut [f64],
) {
    for i in 0..local.len() {
        let mut g = 0.0;
        let mut nu = 0.0;
        for t in table.terms_for(i) {
            g += t.weight * truncate(local[t.l], k) * truncate(smoothed[t.m], k);
            nu += t.weight * truncate(smoothed[t.j], k);
        }
        gain[i] = g;
        freq[i] = nu / (1.0 + local[i] / k);
    }
}

fn assemble(local: &[f64], gain: Vec<f64>, freq: Vec<f64>) -> CollisionEval {
    let loss: Vec<f64> = local.iter().zip(&freq).map(|(f, n)| f * n).collect();
    let net = gain.iter().zip(&loss).map(|(g, l)| g - l).collect();
    CollisionEval { gain, freq, loss, net }
}

pub fn eval_untruncated(model: &VelocityModel, values: &[f64]) -> Result<CollisionEval> {
    eval_convolved_truncated(model, values, values, f64::INFINITY)
}

pub fn eval_truncated(model: &VelocityModel, values: &[f64], k: f64) -> Result<CollisionEval> {
    if !(k > 1.0) {
        return Err(DvmError::Precondition(format!("truncation level k = {k} must exceed 1")));
    }
    eval_convolved_truncated(model, values, values, k)
}

/// Gain and frequency with one factor of every product taken from the
/// smoothed state. `k = ∞` gives the untruncated operator.
pub fn eval_convolved_truncated(
    model: &VelocityModel,
    local: &[f64],
    smoothed: &[f64],
    k: f64,
) -> Result<CollisionEval> {
    let p = model.p();
    check_state(local, p, "local state")?;
    check_state(smoothed, p, "smoothed state")?;
    if !(k > 1.0) {
        return Err(DvmError::Precondition(format!("truncation level k = {k} must exceed 1")));
    }
    let mut gain = vec![0.0; p];
    let mut freq = vec![0.0; p];
    kernel(model.table(), local, smoothed, k, &mut gain, &mut freq);
    Ok(assemble(local, gain, freq))
}

/// Cellwise gain and frequency fields for a (local, smoothed) pair.
pub fn collision_fields(model: &VelocityModel, local: &Field, smoothed: &Field, k: f64) -> (Field, Field) {
    let p = model.p();
    let n = local.ncells();
    let grid = local.grid().clone();
    let table = model.table();
    // cell-major scratch, transposed afterwards
    let mut g_cm = vec![0.0; n * p];
    let mut f_cm = vec![0.0; n * p];
    g_cm.par_chunks_mut(p).zip(f_cm.par_chunks_mut(p)).enumerate().for_each_init(
        || (vec![0.0; p], vec![0.0; p]),
        |(a, b), (c, (g, f))| {
            local.state(c, a);
            smoothed.state(c, b);
            kernel(table, a, b, k, g, f);
        },
    );
    let mut gain = vec![0.0; n * p];
    let mut freq = vec![0.0; n * p];
    for c in 0..n {
        for i in 0..p {
            gain[i * n + c] = g_cm[c * p + i];
            freq[i * n + c] = f_cm[c * p + i];
        }
    }
    (Field::from_data(grid.clone(), p, gain), Field::from_data(grid, p, freq))
}

/// Cellwise net collision term `Q⁺ − F ν` of a field (self-consistent,
/// truncated at level `k`, `k = ∞` for the plain operator).
pub fn net_field(model: &VelocityModel, field: &Field, k: f64) -> Field {
    let (gain, freq) = collision_fields(model, field, field, k);
    let mut out = gain;
    for (o, (f, nu)) in out.data_mut().iter_mut().zip(field.data().iter().zip(freq.data())) {
        *o -= f * nu;
    }
    out
}
