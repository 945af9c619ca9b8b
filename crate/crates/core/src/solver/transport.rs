//! Flat-source characteristic sweeps.
//!
//! For each velocity the domain is covered by parallel tracks with
//! transverse spacing `δ`. A track is cut into segments by the lattice;
//! each segment belongs to the masked cell owning the lattice cell it
//! crosses. Segment lengths are rescaled per cell so that `δ Σ ℓ` over the
//! segments of a cell equals the cell area `A_c`. On each segment the
//! source `q` and the rate `σ = α + ν` are constant and the transport
//! equation is integrated exactly, which makes the discrete balance
//! `inflow − outflow = Σ_c A_c (σ_c F_c − q_c)` hold to rounding.

use std::sync::Arc;

use rayon::prelude::*;

use crate::fields::{BoundaryData, Field, Grid};
use crate::model::VelocityModel;
use crate::Vec2;

#[derive(Clone, Debug)]
struct Track {
    entry_s: f64,
    start: u32,
    end: u32,
}

#[derive(Clone, Debug)]
struct ComponentTracks {
    speed: f64,
    delta: f64,
    tracks: Vec<Track>,
    seg_cell: Vec<u32>,
    seg_len: Vec<f64>,
    uncovered: usize,
}

/// Precomputed tracks for every velocity of a model on a grid.
#[derive(Clone, Debug)]
pub struct TransportPlan {
    grid: Arc<Grid>,
    comps: Vec<ComponentTracks>,
}

/// Inflow and outflow fluxes of one sweep, per component.
#[derive(Clone, Debug, Default, PartialEq, serde::Serialize)]
pub struct FluxTallies {
    pub inflow: Vec<f64>,
    pub outflow: Vec<f64>,
}

impl FluxTallies {
    pub fn total_inflow(&self) -> f64 {
        self.inflow.iter().sum()
    }

    pub fn total_outflow(&self) -> f64 {
        self.outflow.iter().sum()
    }
}

/// Boundary values at the entry point of every track.
#[derive(Clone, Debug)]
pub struct TrackInflow {
    values: Vec<Vec<f64>>,
}

impl TrackInflow {
    pub fn is_zero(&self) -> bool {
        self.values.iter().flatten().all(|&x| x == 0.0)
    }
}

impl TransportPlan {
    /// `track_fraction` is the track spacing in units of the cell size.
    pub fn new(grid: Arc<Grid>, model: &VelocityModel, track_fraction: f64) -> Self {
        let comps = model
            .velocities()
            .par_iter()
            .map(|&v| build_component(&grid, v, track_fraction * grid.h()))
            .collect();
        Self { grid, comps }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn p(&self) -> usize {
        self.comps.len()
    }

    pub fn track_count(&self, i: usize) -> usize {
        self.comps[i].tracks.len()
    }

    pub fn segment_count(&self) -> usize {
        self.comps.iter().map(|c| c.seg_len.len()).sum()
    }

    /// Masked cells not crossed by any track, summed over components.
    pub fn uncovered_cells(&self) -> usize {
        self.comps.iter().map(|c| c.uncovered).sum()
    }

    pub fn inflow(&self, boundary: &BoundaryData) -> TrackInflow {
        TrackInflow {
            values: self
                .comps
                .iter()
                .enumerate()
                .map(|(i, c)| c.tracks.iter().map(|t| boundary.eval(i, t.entry_s)).collect())
                .collect(),
        }
    }

    /// Total inflow flux `Σ_i ∫_{∂Ω_i^+} (v_i·n) f_bi dσ` in the track
    /// quadrature used by [`Self::sweep`].
    pub fn inflow_flux(&self, inflow: &TrackInflow) -> Vec<f64> {
        self.comps
            .iter()
            .zip(&inflow.values)
            .map(|(c, vals)| c.speed * c.delta * vals.iter().sum::<f64>())
            .collect()
    }

    /// One transport solve `v_i·∇F_i = q_i − (α + ν_i) F_i` with inflow data,
    /// for frozen cellwise `ν` and `q`.
    pub fn sweep(&self, inflow: &TrackInflow, nu: &Field, gain: &Field, alpha: f64) -> (Field, FluxTallies) {
        let n = self.grid.len();
        let areas = self.grid.areas();
        let results: Vec<(Vec<f64>, f64, f64)> = self
            .comps
            .par_iter()
            .enumerate()
            .map(|(i, comp)| {
                let mut acc = vec![0.0; n];
                let (fin, fout) =
                    sweep_component(comp, &inflow.values[i], nu.component(i), gain.component(i), alpha, &mut acc);
                for (a, area) in acc.iter_mut().zip(areas) {
                    *a = comp.delta * *a / area;
                }
                (acc, fin, fout)
            })
            .collect();
        let mut data = Vec::with_capacity(n * self.p());
        let mut tallies = FluxTallies::default();
        for (vals, fin, fout) in results {
            data.extend_from_slice(&vals);
            tallies.inflow.push(fin);
            tallies.outflow.push(fout);
        }
        (Field::from_data(self.grid.clone(), self.p(), data), tallies)
    }
}

#[inline]
fn phi1(x: f64) -> f64 {
    // (1 − e^{−x}) / x
    if x < 1e-3 {
        1.0 - x * (0.5 - x * (1.0 / 6.0 - x / 24.0))
    } else {
        -(-x).exp_m1() / x
    }
}

#[inline]
fn phi2(x: f64) -> f64 {
    // (x − 1 + e^{−x}) / x²
    if x < 1e-2 {
        0.5 - x * (1.0 / 6.0 - x * (1.0 / 24.0 - x * (1.0 / 120.0 - x / 720.0)))
    } else {
        (x + (-x).exp_m1()) / (x * x)
    }
}

fn sweep_component(
    comp: &ComponentTracks,
    inflow: &[f64],
    nu: &[f64],
    gain: &[f64],
    alpha: f64,
    acc: &mut [f64],
) -> (f64, f64) {
    let inv_speed = 1.0 / comp.speed;
    let mut fin = 0.0;
    let mut fout = 0.0;
    for (t, &psi0) in comp.tracks.iter().zip(inflow) {
        let mut psi = psi0;
        fin += psi0;
        for s in t.start as usize..t.end as usize {
            let c = comp.seg_cell[s] as usize;
            let len = comp.seg_len[s];
            let tau = len * inv_speed;
            let x = (alpha + nu[c]) * tau;
            let q = gain[c];
            let e1 = phi1(x);
            let mean = psi * e1 + q * tau * phi2(x);
            psi = psi * (-x).exp() + q * tau * e1;
            acc[c] += len * mean;
        }
        fout += psi;
    }
    (comp.speed * comp.delta * fin, comp.speed * comp.delta * fout)
}

fn build_component(grid: &Grid, v: Vec2, target_spacing: f64) -> ComponentTracks {
    let domain = grid.domain();
    let speed = v.norm();
    let u = v / speed;
    let w = Vec2::new(-u.y, u.x);
    let t_min = -domain.support_value(-w);
    let t_max = domain.support_value(w);
    let count = ((t_max - t_min) / target_spacing).ceil().max(1.0) as usize;
    let delta = (t_max - t_min) / count as f64;
    let along = u.dot(&domain.center());
    let grazing = crate::geometry::GRAZING_RTOL * domain.diameter();

    let mut tracks = Vec::with_capacity(count);
    let mut seg_cell: Vec<u32> = Vec::new();
    let mut seg_len: Vec<f64> = Vec::new();
    for k in 0..count {
        let t = t_min + (k as f64 + 0.5) * delta;
        let p = w * t + u * along;
        let Some((s0, s1)) = domain.chord(p, u) else { continue };
        if s1 - s0 < grazing {
            continue;
        }
        let entry = p + u * s0;
        let start = seg_len.len() as u32;
        walk(grid, entry, u, s1 - s0, &mut seg_cell, &mut seg_len);
        tracks.push(Track { entry_s: domain.arclength_of(entry), start, end: seg_len.len() as u32 });
    }

    // rescale so that every cell has track area exactly A_c
    let mut covered = vec![0.0; grid.len()];
    for (&c, &l) in seg_cell.iter().zip(&seg_len) {
        covered[c as usize] += delta * l;
    }
    let areas = grid.areas();
    for (&c, l) in seg_cell.iter().zip(seg_len.iter_mut()) {
        *l *= areas[c as usize] / covered[c as usize];
    }
    let uncovered = covered.iter().filter(|&&a| a == 0.0).count();
    if uncovered > 0 {
        log::warn!("{uncovered} cell(s) not crossed by any track for velocity ({}, {})", v.x, v.y);
    }
    ComponentTracks { speed, delta, tracks, seg_cell, seg_len, uncovered }
}

/// Lattice walk from `entry` along the unit direction `u` for length `total`,
/// appending (owner, length) segments and merging runs of the same owner.
fn walk(grid: &Grid, entry: Vec2, u: Vec2, total: f64, cells: &mut Vec<u32>, lens: &mut Vec<f64>) {
    let h = grid.h();
    let (nx, ny) = grid.dims();
    let g = (entry - grid.origin()) / h;
    let mut ix = (g.x.floor() as isize).clamp(0, nx as isize - 1);
    let mut iy = (g.y.floor() as isize).clamp(0, ny as isize - 1);
    let step_x: isize = if u.x > 0.0 { 1 } else { -1 };
    let step_y: isize = if u.y > 0.0 { 1 } else { -1 };
    let next_bound = |i: isize, step: isize| (i + if step > 0 { 1 } else { 0 }) as f64;
    let mut t_max_x = if u.x != 0.0 { (next_bound(ix, step_x) - g.x) * h / u.x } else { f64::INFINITY };
    let mut t_max_y = if u.y != 0.0 { (next_bound(iy, step_y) - g.y) * h / u.y } else { f64::INFINITY };
    let dt_x = if u.x != 0.0 { h / u.x.abs() } else { f64::INFINITY };
    let dt_y = if u.y != 0.0 { h / u.y.abs() } else { f64::INFINITY };
    t_max_x = t_max_x.max(0.0);
    t_max_y = t_max_y.max(0.0);
    let mut t = 0.0;
    let first = lens.len();
    while t < total {
        let t_next = t_max_x.min(t_max_y).min(total);
        let len = t_next - t;
        if len > 0.0 {
            let owner = grid.owner(ix as usize, iy as usize) as u32;
            if lens.len() > first && *cells.last().unwrap() == owner {
                *lens.last_mut().unwrap() += len;
            } else {
                cells.push(owner);
                lens.push(len);
            }
        }
        t = t_next;
        if t >= total {
            break;
        }
        if t_max_x <= t_max_y {
            ix += step_x;
            t_max_x += dt_x;
        } else {
            iy += step_y;
            t_max_y += dt_y;
        }
        ix = ix.clamp(0, nx as isize - 1);
        iy = iy.clamp(0, ny as isize - 1);
    }
}
