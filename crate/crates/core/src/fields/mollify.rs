use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{sample_weights, Grid};
use crate::geometry::ConvexDomain;
use crate::Vec2;

/// `exp(1/(r² − 1))` on `r < 1`, zero elsewhere (unnormalized).
pub fn bump(r: f64) -> f64 {
    if r.abs() < 1.0 {
        (1.0 / (r * r - 1.0)).exp()
    } else {
        0.0
    }
}

/// Interior mollifier radius and boundary smoothing support.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MollifierSpec {
    /// Radius of the interior kernel `μ_α`.
    pub alpha: f64,
    /// Support of the boundary kernel as a fraction of the perimeter; `None`
    /// means `1/k`.
    pub boundary_support_fraction: Option<f64>,
}

impl MollifierSpec {
    pub fn boundary_support(&self, k: f64) -> f64 {
        self.boundary_support_fraction.unwrap_or(1.0 / k)
    }
}

/// Precomputed discrete convolution with `μ_α` on the masked cells.
///
/// Each row holds the kernel weights of one cell. Stencil points outside
/// the domain take the value at their nearest boundary point (the normal
/// extension), interpolated bilinearly, so every row is a convex
/// combination of cell values.
#[derive(Clone, Debug)]
pub struct MollifierPlan {
    alpha: f64,
    stencil_len: usize,
    offsets: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl MollifierPlan {
    pub fn new(grid: &Grid, alpha: f64) -> Self {
        let h = grid.h();
        if alpha < 2.0 * h {
            log::info!("mollifier radius {alpha} below two cells ({})", 2.0 * h);
        }
        let stencil = kernel_stencil(h, alpha);
        let n = grid.len();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        let mut exterior: HashMap<(isize, isize), Vec<(usize, f64)>> = HashMap::new();
        let mut row: Vec<(usize, f64)> = Vec::new();
        for c in 0..n {
            offsets.push(cols.len());
            row.clear();
            let (cx, cy) = grid.cell_coords(c);
            for &(dx, dy, w) in &stencil {
                let (x, y) = (cx as isize + dx, cy as isize + dy);
                match grid.masked_index(x, y) {
                    Some(k) => row.push((k, w)),
                    None => {
                        let ext = exterior.entry((x, y)).or_insert_with(|| {
                            let p = grid.origin()
                                + Vec2::new((x as f64 + 0.5) * h, (y as f64 + 0.5) * h);
                            let z = nearest_boundary_point(grid.domain(), p);
                            let (sw, len, _) = sample_weights(grid, z);
                            sw[..len].to_vec()
                        });
                        row.extend(ext.iter().map(|&(k, v)| (k, v * w)));
                    }
                }
            }
            row.sort_by_key(|e| e.0);
            let mut last = usize::MAX;
            for &(k, w) in &row {
                if k == last {
                    *vals.last_mut().unwrap() += w;
                } else {
                    cols.push(k as u32);
                    vals.push(w);
                    last = k;
                }
            }
        }
        offsets.push(cols.len());
        Self { alpha, stencil_len: stencil.len(), offsets, cols, vals }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// True when the kernel reduces to the centre point.
    pub fn is_identity(&self) -> bool {
        self.stencil_len == 1
    }

    pub fn apply(&self, values: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.offsets.len() - 1];
        self.apply_into(values, &mut out);
        out
    }

    pub fn apply_into(&self, values: &[f64], out: &mut [f64]) {
        if self.is_identity() {
            out.copy_from_slice(values);
            return;
        }
        for (c, o) in out.iter_mut().enumerate() {
            let (a, b) = (self.offsets[c], self.offsets[c + 1]);
            *o = self.cols[a..b]
                .iter()
                .zip(&self.vals[a..b])
                .map(|(&k, &w)| w * values[k as usize])
                .sum();
        }
    }
}

/// Lattice offsets with `|offset| h < α` and normalized bump weights.
pub(crate) fn kernel_stencil(h: f64, alpha: f64) -> Vec<(isize, isize, f64)> {
    let r = (alpha / h).floor() as isize + 1;
    let mut out = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            let d = ((dx * dx + dy * dy) as f64).sqrt() * h;
            let w = if dx == 0 && dy == 0 { bump(0.0) } else { bump(d / alpha) };
            if w > 0.0 {
                out.push((dx, dy, w));
            }
        }
    }
    let total: f64 = out.iter().map(|e| e.2).sum();
    for e in &mut out {
        e.2 /= total;
    }
    out
}

/// Closest boundary point to an exterior point: polar-angle scan, then
/// golden-section refinement.
pub(crate) fn nearest_boundary_point(domain: &ConvexDomain, p: Vec2) -> Vec2 {
    let c = domain.center();
    let at = |t: f64| c + Vec2::new(t.cos(), t.sin()) * domain.polar_radius(t);
    let dist = |t: f64| (at(t) - p).norm_squared();
    let m = 720;
    let step = std::f64::consts::TAU / m as f64;
    let mut best = (0.0, f64::INFINITY);
    for k in 0..m {
        let t = k as f64 * step;
        let d = dist(t);
        if d < best.1 {
            best = (t, d);
        }
    }
    let (mut lo, mut hi) = (best.0 - step, best.0 + step);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut x1, mut x2) = (hi - g * (hi - lo), lo + g * (hi - lo));
    let (mut f1, mut f2) = (dist(x1), dist(x2));
    for _ in 0..60 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = dist(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = dist(x2);
        }
    }
    at(0.5 * (lo + hi))
}
