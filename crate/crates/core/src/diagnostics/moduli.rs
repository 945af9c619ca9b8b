use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{DvmError, Result};
use crate::fields::{sample_values, Grid};
use crate::Vec2;

/// `∫ |g(z + h d) − g(z)| / ∫ |g|` over cells with both points in the
/// domain, for every `h` of the list.
pub fn translation_modulus(grid: &Grid, values: &[f64], dir: Vec2, h_list: &[f64]) -> Result<Vec<f64>> {
    let d = grid.domain();
    let limit = d.diameter() / 4.0;
    if let Some(h) = h_list.iter().find(|h| !(**h > 0.0 && **h <= limit * (1.0 + 1e-12))) {
        return Err(DvmError::Precondition(format!("shift {h} outside (0, diameter/4]")));
    }
    let dir = dir.normalize();
    let areas = grid.areas();
    let norm: f64 = values.iter().zip(areas).map(|(g, a)| g.abs() * a).sum();
    Ok(h_list
        .iter()
        .map(|&h| {
            if norm == 0.0 {
                return 0.0;
            }
            let diff: f64 = (0..grid.len())
                .filter_map(|c| {
                    let z = grid.center(c);
                    let shifted = z + dir * h;
                    d.contains(shifted).then(|| (sample_values(grid, values, shifted).0 - values[c]).abs() * areas[c])
                })
                .sum();
            diff / norm
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModulusRow {
    pub quantity: String,
    pub component: usize,
    pub h: f64,
    pub value: f64,
}

/// Empirical equicontinuity moduli.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ModuliTable {
    pub rows: Vec<ModulusRow>,
}

impl ModuliTable {
    pub fn push(&mut self, quantity: &str, component: usize, h_list: &[f64], values: &[f64]) {
        for (&h, &value) in h_list.iter().zip(values) {
            self.rows.push(ModulusRow { quantity: quantity.to_string(), component, h, value });
        }
    }

    /// Mean over components of one quantity at the shift closest to `h`.
    pub fn mean_at(&self, quantity: &str, h: f64) -> Option<f64> {
        let rows: Vec<&ModulusRow> = self.rows.iter().filter(|r| r.quantity == quantity).collect();
        let best = rows.iter().map(|r| r.h).min_by(|a, b| (a - h).abs().total_cmp(&(b - h).abs()))?;
        let sel: Vec<f64> = rows.iter().filter(|r| r.h == best).map(|r| r.value).collect();
        Some(sel.iter().sum::<f64>() / sel.len() as f64)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("quantity,component,h,value\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{:e},{:e}", r.quantity, r.component + 1, r.h, r.value);
        }
        s
    }
}
