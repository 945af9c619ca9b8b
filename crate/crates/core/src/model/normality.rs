use nalgebra::DMatrix;
use serde::Serialize;

use super::{validate_rules, VelocityModel};
use crate::error::{DvmError, Result};

/// Relative singular-value threshold for numerical rank.
pub const RANK_RTOL: f64 = 1e-10;

/// Dimensions and bases of the collision-invariant space and the
/// Maxwellian span `{1, v_x, v_y, |v|²}` on the velocity set.
#[derive(Clone, Debug, Serialize)]
pub struct NormalityCertificate {
    /// Dimension of `{Ψ : Ψ_i + Ψ_j − Ψ_l − Ψ_m = 0 for every active rule}`.
    pub d_inv: usize,
    /// Rank of the `p × 4` Maxwellian evaluation matrix.
    pub d_max: usize,
    pub constraint_rank: usize,
    pub maxwellian_contained: bool,
    pub normal: bool,
    /// Orthonormal basis of the invariant space, one vector of length `p` each.
    pub invariant_basis: Vec<Vec<f64>>,
    /// Columns `1, v_x, v_y, |v|²` evaluated on the velocity set.
    pub maxwellian_basis: Vec<Vec<f64>>,
}

fn singular_values_and_vt(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let svd = m.svd(false, true);
    let vt = svd.v_t.expect("v_t requested");
    (svd.singular_values.iter().copied().collect(), vt)
}

fn numerical_rank(s: &[f64]) -> usize {
    let smax = s.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    s.iter().filter(|&&x| x > RANK_RTOL * smax).count()
}

/// Builds the collision-invariant system and compares it with the
/// Maxwellian span. Fails with a structural error when the rule list does
/// not validate.
pub fn check_normality(model: &VelocityModel) -> Result<NormalityCertificate> {
    let report = validate_rules(model);
    if !report.is_valid() {
        return Err(DvmError::Structural(format!(
            "rule list is inconsistent ({} violation(s))",
            report.violations.len()
        )));
    }
    let p = model.p();
    let active: Vec<_> = model.rules().iter().filter(|r| r.gamma > 0.0).collect();
    let rows = active.len().max(p);
    let mut c = DMatrix::<f64>::zeros(rows, p);
    for (row, r) in active.iter().enumerate() {
        c[(row, r.i)] += 1.0;
        c[(row, r.j)] += 1.0;
        c[(row, r.l)] -= 1.0;
        c[(row, r.m)] -= 1.0;
    }
    let (s, vt) = singular_values_and_vt(c.clone());
    let constraint_rank = numerical_rank(&s);
    let d_inv = p - constraint_rank;
    let smax = s.iter().copied().fold(0.0, f64::max);
    let mut invariant_basis = Vec::with_capacity(d_inv);
    for (k, &sv) in s.iter().enumerate() {
        if smax == 0.0 || sv <= RANK_RTOL * smax {
            invariant_basis.push(vt.row(k).iter().copied().collect::<Vec<f64>>());
        }
    }
    // padding guarantees vt is p × p, so every missing singular value is a zero
    debug_assert_eq!(invariant_basis.len(), d_inv);

    let mut mx = DMatrix::<f64>::zeros(p, 4);
    for (i, v) in model.velocities().iter().enumerate() {
        mx[(i, 0)] = 1.0;
        mx[(i, 1)] = v.x;
        mx[(i, 2)] = v.y;
        mx[(i, 3)] = v.norm_squared();
    }
    let d_max = numerical_rank(mx.clone().svd(false, false).singular_values.as_slice());
    let maxwellian_basis: Vec<Vec<f64>> =
        (0..4).map(|col| mx.column(col).iter().copied().collect()).collect();

    let cm = &c * &mx;
    let scale = c.norm().max(1.0) * mx.norm().max(1.0);
    let maxwellian_contained = cm.iter().all(|x| x.abs() <= RANK_RTOL * scale);

    Ok(NormalityCertificate {
        d_inv,
        d_max,
        constraint_rank,
        maxwellian_contained,
        normal: maxwellian_contained && d_inv == d_max,
        invariant_basis,
        maxwellian_basis,
    })
}
