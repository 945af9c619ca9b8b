use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{DvmError, Result};
use crate::fields::{line_integral, sample_values, Field, Grid};
use crate::geometry::ConvexDomain;
use crate::Vec2;

/// Distance used for the strips next to the two tangency points of a velocity.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StripMetric {
    /// Transverse distance from the tangent line.
    #[default]
    Euclidean,
    /// Both chord endpoints within this arclength of the tangency point.
    Arclength,
}

/// Exceptional set of one component at one threshold.
#[derive(Clone, Debug, Serialize)]
pub struct ExceptionalSet {
    pub component: usize,
    pub epsilon: f64,
    /// Area of the union used for the mask.
    pub measure: f64,
    /// Area of the characteristics with a large exit value or integrated frequency.
    pub threshold_measure: f64,
    pub strip_measure_euclidean: f64,
    pub strip_measure_arclength: f64,
    /// Unmasked cells violating `F ≤ (1/ε) e^{1/ε}` or `∫ν ≤ scale/ε`.
    pub complement_violations: usize,
    /// Largest `F / ((1/ε) e^{1/ε})` over unmasked cells.
    pub complement_max_ratio: f64,
    /// `true` on cells outside the set.
    #[serde(skip)]
    pub chi: Vec<bool>,
}

struct ChordData {
    exit: f64,
    nu_total: f64,
    strip_euclid: bool,
    strip_arc: bool,
}

fn periodic_distance(a: f64, b: f64, l: f64) -> f64 {
    let d = (a - b).rem_euclid(l);
    d.min(l - d)
}

fn chord_data(
    grid: &Grid,
    domain: &ConvexDomain,
    f: &[f64],
    nu: &[f64],
    v: Vec2,
    c: usize,
    epsilon: f64,
    h_s: f64,
) -> ChordData {
    let z = grid.center(c);
    let w = Vec2::new(-v.y, v.x).normalize();
    let tangency = domain.tangency_points(v);
    let strip_euclid = tangency.iter().any(|t| w.dot(&(z - t)).abs() < epsilon);
    let Ok(seg) = domain.trace(z, v) else {
        return ChordData { exit: 0.0, nu_total: 0.0, strip_euclid, strip_arc: true };
    };
    let l = domain.perimeter();
    let (sp, sm) = (domain.arclength_of(seg.z_plus), domain.arclength_of(seg.z_minus));
    let strip_arc = tangency.iter().any(|t| {
        let st = domain.arclength_of(*t);
        periodic_distance(sp, st, l) < epsilon && periodic_distance(sm, st, l) < epsilon
    });
    let exit = sample_values(grid, f, seg.z_minus).0;
    let nu_total = if seg.grazing { 0.0 } else { line_integral(grid, nu, &seg, 0.0, seg.duration(), h_s) };
    ChordData { exit, nu_total, strip_euclid, strip_arc }
}

/// Cells on characteristics where the exit value exceeds `1/ε` or the
/// integrated frequency over the whole chord exceeds `nu_scale/ε`, joined
/// with the tangency strips of width `ε` in the chosen metric.
#[allow(clippy::too_many_arguments)]
pub fn exceptional_sets(
    grid: &Grid,
    field: &Field,
    nu: &Field,
    velocities: &[Vec2],
    epsilon: f64,
    nu_scale: f64,
    metric: StripMetric,
    h_s: f64,
) -> Result<Vec<ExceptionalSet>> {
    if !(epsilon > 0.0) {
        return Err(DvmError::Precondition(format!("epsilon = {epsilon} must be positive")));
    }
    let domain = grid.domain();
    let areas = grid.areas();
    let bound = (1.0 / epsilon) * (1.0 / epsilon).exp();
    Ok(velocities
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = field.component(i);
            let data: Vec<ChordData> = (0..grid.len())
                .into_par_iter()
                .map(|c| chord_data(grid, domain, f, nu.component(i), v, c, epsilon, h_s))
                .collect();
            let mut set = ExceptionalSet {
                component: i,
                epsilon,
                measure: 0.0,
                threshold_measure: 0.0,
                strip_measure_euclidean: 0.0,
                strip_measure_arclength: 0.0,
                complement_violations: 0,
                complement_max_ratio: 0.0,
                chi: vec![true; grid.len()],
            };
            for (c, d) in data.iter().enumerate() {
                let a = areas[c];
                let large = d.exit > 1.0 / epsilon || d.nu_total > nu_scale / epsilon;
                set.threshold_measure += a * large as u8 as f64;
                set.strip_measure_euclidean += a * d.strip_euclid as u8 as f64;
                set.strip_measure_arclength += a * d.strip_arc as u8 as f64;
                let strip = match metric {
                    StripMetric::Euclidean => d.strip_euclid,
                    StripMetric::Arclength => d.strip_arc,
                };
                if large || strip {
                    set.measure += a;
                    set.chi[c] = false;
                } else {
                    let ratio = f[c] / bound;
                    set.complement_max_ratio = set.complement_max_ratio.max(ratio);
                    if ratio > 1.0 || d.nu_total > nu_scale / epsilon {
                        set.complement_violations += 1;
                    }
                }
            }
            set
        })
        .collect())
}
