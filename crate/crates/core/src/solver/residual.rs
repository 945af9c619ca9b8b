use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::pointwise::backward_segment;
use crate::collision::net_field;
use crate::fields::{line_integral, sample_values, BoundaryData, Field, Grid};
use crate::geometry::Side;
use crate::model::VelocityModel;
use crate::Vec2;

/// Which collision operator a residual uses.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum MildOperator {
    Untruncated,
    Truncated(f64),
}

impl MildOperator {
    pub fn level(&self) -> f64 {
        match self {
            MildOperator::Untruncated => f64::INFINITY,
            MildOperator::Truncated(k) => *k,
        }
    }
}

/// Per-component L¹ norm of
/// `F_i(z) − f_bi(z_i⁺(z)) − ∫₀^{s_i⁺(z)} Q_i(F)(z_i⁺ + s v_i) ds`
/// over the cell centres, with `Q` sampled bilinearly from its cell values.
pub fn residual_mild(
    grid: &Grid,
    model: &VelocityModel,
    boundary: &BoundaryData,
    field: &Field,
    op: MildOperator,
    h_s: f64,
) -> Vec<f64> {
    let q = net_field(model, field, op.level());
    let areas = grid.areas();
    (0..model.p())
        .map(|i| {
            let v = model.velocity(i);
            let qi = q.component(i);
            let fi = field.component(i);
            (0..grid.len())
                .into_par_iter()
                .map(|c| {
                    let z = grid.center(c);
                    let Ok(seg) = backward_segment(grid, z, v) else { return 0.0 };
                    if seg.grazing {
                        return 0.0;
                    }
                    let fb = boundary.eval_at(grid.domain(), i, seg.z_plus);
                    let integral = line_integral(grid, qi, &seg, 0.0, seg.s_plus, h_s);
                    (fi[c] - fb - integral).abs() * areas[c]
                })
                .collect::<Vec<f64>>()
                .iter()
                .sum()
        })
        .collect()
}

/// Test function `((x − c_x)/a)^px ((y − c_y)/b)^py`, optionally multiplied
/// by the cutoff `(1 − g²)²` that vanishes on the boundary (`g` the
/// domain gauge).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestFunction {
    pub px: u32,
    pub py: u32,
    pub cutoff: bool,
}

impl TestFunction {
    pub fn value(&self, grid: &Grid, z: Vec2) -> f64 {
        let d = grid.domain();
        let (a, b) = d.semi_axes();
        let r = z - d.center();
        let mono = (r.x / a).powi(self.px as i32) * (r.y / b).powi(self.py as i32);
        if self.cutoff {
            let g = d.phi(z) + 1.0;
            mono * (1.0 - g * g).max(0.0).powi(2)
        } else {
            mono
        }
    }

    /// Central-difference gradient.
    pub fn gradient(&self, grid: &Grid, z: Vec2) -> Vec2 {
        let e = 1e-6 * grid.domain().diameter();
        let dx = Vec2::new(e, 0.0);
        let dy = Vec2::new(0.0, e);
        Vec2::new(
            (self.value(grid, z + dx) - self.value(grid, z - dx)) / (2.0 * e),
            (self.value(grid, z + dy) - self.value(grid, z - dy)) / (2.0 * e),
        )
    }
}

/// Monomials of degree ≤ 2, plain and with the boundary cutoff.
pub fn standard_test_functions() -> Vec<TestFunction> {
    let mut out = Vec::new();
    for cutoff in [false, true] {
        for (px, py) in [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)] {
            out.push(TestFunction { px, py, cutoff });
        }
    }
    out
}

/// Defect of the weak identity for `ln(1 + F_i)`, per component:
/// `∫_{∂Ω_i⁻} φ ln(1+F_i)|v_i·n| − ∫_{∂Ω_i⁺} φ ln(1+f_bi)|v_i·n|
///  − ∫_Ω ln(1+F_i) v_i·∇φ − ∫_Ω φ Q_i(F)/(1+F_i)`.
pub fn residual_renormalized(
    grid: &Grid,
    model: &VelocityModel,
    boundary: &BoundaryData,
    field: &Field,
    test: &TestFunction,
    op: MildOperator,
    boundary_nodes: usize,
) -> Vec<f64> {
    let q = net_field(model, field, op.level());
    let domain = grid.domain();
    let areas = grid.areas();
    (0..model.p())
        .map(|i| {
            let v = model.velocity(i);
            let fi = field.component(i);
            let out: f64 = domain
                .boundary_quadrature(v, Side::Outflow, boundary_nodes)
                .iter()
                .map(|n| {
                    let trace = sample_values(grid, fi, n.z).0;
                    n.weight * test.value(grid, n.z) * trace.ln_1p()
                })
                .sum();
            let inn: f64 = domain
                .boundary_quadrature(v, Side::Inflow, boundary_nodes)
                .iter()
                .map(|n| n.weight * test.value(grid, n.z) * boundary.eval(i, n.s).ln_1p())
                .sum();
            let interior: f64 = (0..grid.len())
                .map(|c| {
                    let z = grid.center(c);
                    let g = fi[c].ln_1p();
                    let term = g * v.dot(&test.gradient(grid, z))
                        + test.value(grid, z) * q.get(i, c) / (1.0 + fi[c]);
                    term * areas[c]
                })
                .sum();
            out - inn - interior
        })
        .collect()
}
