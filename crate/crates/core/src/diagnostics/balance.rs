use serde::Serialize;

use crate::fields::{sample_values, BoundaryData, Field, Grid};
use crate::geometry::Side;
use crate::model::VelocityModel;
use crate::solver::FluxTallies;
use crate::Vec2;

/// Mass, energy and boundary fluxes of a field.
#[derive(Clone, Debug, Serialize)]
pub struct MassEnergyFlux {
    pub mass: f64,
    pub component_mass: Vec<f64>,
    /// `Σ_i |v_i|² ∫ F_i`.
    pub energy: f64,
    pub inflow: Vec<f64>,
    pub outflow: Vec<f64>,
    /// Whether the fluxes are the sweep tallies (otherwise boundary quadrature).
    pub from_tallies: bool,
    /// `|inflow − outflow − α·mass|`.
    pub balance_defect: f64,
    pub slab: SlabIdentity,
}

impl MassEnergyFlux {
    pub fn total_inflow(&self) -> f64 {
        self.inflow.iter().sum()
    }

    pub fn total_outflow(&self) -> f64 {
        self.outflow.iter().sum()
    }

    /// Balance defect relative to the inflow (absolute if the inflow vanishes).
    pub fn relative_defect(&self) -> f64 {
        let s = self.total_inflow();
        if s > 0.0 {
            self.balance_defect / s
        } else {
            self.balance_defect
        }
    }
}

/// Both sides of the slab-integrated momentum identity in a rotated frame
/// `(e_x, e_y)` with `v_i = ξ_i e_x + ζ_i e_y`:
/// `Σ ξ_i² ∫F_i = −Σ ξ_i ∮ (v_i·n_out) F_i (x₀⁺ − x) dσ − α Σ ξ_i ∫ F_i (x₀⁺ − x) dz`,
/// and the same with `ζ` and `y`.
#[derive(Clone, Debug, Serialize)]
pub struct SlabIdentity {
    /// Angle of `e_x` from the first coordinate axis.
    pub angle: f64,
    pub x_range: [f64; 2],
    pub y_range: [f64; 2],
    pub lhs: [f64; 2],
    pub rhs: [f64; 2],
}

impl SlabIdentity {
    pub fn relative_defect(&self) -> f64 {
        (0..2)
            .map(|a| {
                let scale = self.lhs[a].abs().max(self.rhs[a].abs());
                if scale > 0.0 {
                    (self.lhs[a] - self.rhs[a]).abs() / scale
                } else {
                    0.0
                }
            })
            .fold(0.0, f64::max)
    }
}

/// Frame angle in `[0, π/2)` maximizing the smallest angle between either
/// axis and any velocity line.
pub fn slab_frame_angle(model: &VelocityModel) -> f64 {
    let dirs: Vec<f64> = model.velocities().iter().map(|v| v.y.atan2(v.x)).collect();
    let half = std::f64::consts::FRAC_PI_2;
    let clearance = |theta: f64| {
        dirs.iter()
            .map(|d| {
                // distance of d to the lines at theta and theta + π/2, modulo π/2
                let r = (d - theta).rem_euclid(half);
                r.min(half - r)
            })
            .fold(f64::INFINITY, f64::min)
    };
    let steps = 3600;
    (0..steps)
        .map(|s| s as f64 * half / steps as f64)
        .fold((0.0, f64::NEG_INFINITY), |best, t| {
            let c = clearance(t);
            if c > best.1 {
                (t, c)
            } else {
                best
            }
        })
        .0
}

/// Boundary point, quadrature weight and trace value.
type TraceSample = (Vec2, f64, f64);

/// Boundary values along `∂Ω_i^±`: inflow data and the trace of the field.
fn boundary_trace(
    grid: &Grid,
    field: &Field,
    boundary: &BoundaryData,
    v: Vec2,
    i: usize,
    nodes: usize,
) -> (Vec<TraceSample>, Vec<TraceSample>) {
    let d = grid.domain();
    let fin = d
        .boundary_quadrature(v, Side::Inflow, nodes)
        .into_iter()
        .map(|n| (n.z, n.weight, boundary.eval(i, n.s)))
        .collect();
    let fout = d
        .boundary_quadrature(v, Side::Outflow, nodes)
        .into_iter()
        .map(|n| (n.z, n.weight, sample_values(grid, field.component(i), n.z).0))
        .collect();
    (fin, fout)
}

/// Mass, energy, fluxes and the slab identity. `tallies` (from the sweep
/// that produced `field`) replace the boundary quadrature for the fluxes.
pub fn mass_energy_flux(
    grid: &Grid,
    model: &VelocityModel,
    field: &Field,
    boundary: &BoundaryData,
    alpha: f64,
    tallies: Option<&FluxTallies>,
    nodes: usize,
) -> MassEnergyFlux {
    let p = model.p();
    let component_mass: Vec<f64> = (0..p).map(|i| field.component_mass(i)).collect();
    let mass: f64 = component_mass.iter().sum();
    let energy = (0..p).map(|i| model.velocity(i).norm_squared() * component_mass[i]).sum();
    let traces: Vec<_> =
        (0..p).map(|i| boundary_trace(grid, field, boundary, model.velocity(i), i, nodes)).collect();
    let (inflow, outflow) = match tallies {
        Some(t) => (t.inflow.clone(), t.outflow.clone()),
        None => traces
            .iter()
            .map(|(fin, fout)| {
                (
                    fin.iter().map(|(_, w, f)| w * f).sum::<f64>(),
                    fout.iter().map(|(_, w, f)| w * f).sum::<f64>(),
                )
            })
            .unzip(),
    };
    let balance_defect =
        (inflow.iter().sum::<f64>() - outflow.iter().sum::<f64>() - alpha * mass).abs();
    let slab = slab_identity(grid, model, field, alpha, &traces);
    MassEnergyFlux { mass, component_mass, energy, inflow, outflow, from_tallies: tallies.is_some(), balance_defect, slab }
}

#[allow(clippy::type_complexity)]
fn slab_identity(
    grid: &Grid,
    model: &VelocityModel,
    field: &Field,
    alpha: f64,
    traces: &[(Vec<(Vec2, f64, f64)>, Vec<(Vec2, f64, f64)>)],
) -> SlabIdentity {
    let angle = slab_frame_angle(model);
    let ex = Vec2::new(angle.cos(), angle.sin());
    let ey = Vec2::new(-angle.sin(), angle.cos());
    let d = grid.domain();
    let areas = grid.areas();
    let mut lhs = [0.0; 2];
    let mut rhs = [0.0; 2];
    let mut x_range = [0.0; 2];
    let mut y_range = [0.0; 2];
    for (a, e) in [ex, ey].into_iter().enumerate() {
        let top = d.support_value(e);
        let bottom = -d.support_value(-e);
        if a == 0 {
            x_range = [bottom, top];
        } else {
            y_range = [bottom, top];
        }
        for (i, (fin, fout)) in traces.iter().enumerate() {
            let xi = model.velocity(i).dot(&e);
            lhs[a] += xi * xi * field.component_mass(i);
            // v·n_out is −|v·n| on the inflow side and +|v·n| on the outflow side
            let inflow: f64 = fin.iter().map(|(z, w, f)| w * f * (top - z.dot(&e))).sum();
            let outflow: f64 = fout.iter().map(|(z, w, f)| w * f * (top - z.dot(&e))).sum();
            let damping: f64 = field
                .component(i)
                .iter()
                .enumerate()
                .map(|(c, f)| f * areas[c] * (top - grid.center(c).dot(&e)))
                .sum();
            rhs[a] += -xi * (outflow - inflow) - alpha * xi * damping;
        }
    }
    SlabIdentity { angle, x_range, y_range, lhs, rhs }
}
