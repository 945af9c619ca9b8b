use std::path::Path;

use serde::{Deserialize, Serialize};

use super::mollify::bump;
use crate::error::{DvmError, Result};
use crate::geometry::{ConvexDomain, Side};
use crate::model::VelocityModel;
use crate::Vec2;

/// Default number of arclength samples per component.
pub const DEFAULT_BOUNDARY_NODES: usize = 2048;

/// Named inflow profiles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "lowercase")]
pub enum BoundaryProfile {
    /// Same value for every component, or one value per component.
    Constant { values: Vec<f64> },
    /// `exp(a + b·v_i + c|v_i|²)`, constant along the boundary.
    Maxwellian { a: f64, b: [f64; 2], c: f64 },
    /// `high` on the arclength fractions `[start, end)`, `low` elsewhere.
    Step { low: f64, high: f64, start: f64, end: f64 },
    /// Samples read from a CSV file with columns `component,s,value`
    /// (1-based component, absolute arclength).
    Csv { path: String },
}

/// Inflow traces `f_bi` on the full boundary, stored as periodic samples at
/// arclengths `s_k = k L / N`. Only the part on `∂Ω_i^+` enters the
/// solver.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryData {
    perimeter: f64,
    values: Vec<Vec<f64>>,
}

impl BoundaryData {
    pub fn from_samples(perimeter: f64, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.is_empty() || values.iter().any(|v| v.is_empty()) {
            return Err(DvmError::Precondition("boundary data needs samples".into()));
        }
        let n = values[0].len();
        if values.iter().any(|v| v.len() != n) {
            return Err(DvmError::Precondition("components have different sample counts".into()));
        }
        for (i, v) in values.iter().enumerate() {
            if let Some(x) = v.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
                return Err(DvmError::Domain(format!(
                    "boundary value {x} of component {} is not a finite nonnegative number",
                    i + 1
                )));
            }
        }
        Ok(Self { perimeter, values })
    }

    pub fn from_fn(
        domain: &ConvexDomain,
        p: usize,
        nodes: usize,
        f: impl Fn(usize, f64) -> f64,
    ) -> Result<Self> {
        let l = domain.perimeter();
        let values =
            (0..p).map(|i| (0..nodes).map(|k| f(i, k as f64 * l / nodes as f64)).collect()).collect();
        Self::from_samples(l, values)
    }

    pub fn constant(domain: &ConvexDomain, values: &[f64]) -> Result<Self> {
        Self::from_fn(domain, values.len(), DEFAULT_BOUNDARY_NODES, |i, _| values[i])
    }

    pub fn zero(domain: &ConvexDomain, p: usize) -> Self {
        Self::constant(domain, &vec![0.0; p]).expect("zeros are valid")
    }

    /// `exp(a + b·v_i + c|v_i|²)` for each velocity.
    pub fn maxwellian_values(model: &VelocityModel, a: f64, b: Vec2, c: f64) -> Vec<f64> {
        model.velocities().iter().map(|v| (a + b.dot(v) + c * v.norm_squared()).exp()).collect()
    }

    pub fn from_profile(
        profile: &BoundaryProfile,
        domain: &ConvexDomain,
        model: &VelocityModel,
        nodes: usize,
    ) -> Result<Self> {
        let p = model.p();
        match profile {
            BoundaryProfile::Constant { values } => {
                let vals = match values.len() {
                    1 => vec![values[0]; p],
                    n if n == p => values.clone(),
                    n => {
                        return Err(DvmError::Parse(format!(
                            "constant profile has {n} values for {p} components"
                        )))
                    }
                };
                Self::from_fn(domain, p, nodes, |i, _| vals[i])
            }
            BoundaryProfile::Maxwellian { a, b, c } => {
                let vals = Self::maxwellian_values(model, *a, Vec2::new(b[0], b[1]), *c);
                Self::from_fn(domain, p, nodes, |i, _| vals[i])
            }
            BoundaryProfile::Step { low, high, start, end } => {
                let l = domain.perimeter();
                Self::from_fn(domain, p, nodes, |_, s| {
                    let u = s / l;
                    if u >= *start && u < *end {
                        *high
                    } else {
                        *low
                    }
                })
            }
            BoundaryProfile::Csv { path } => Self::read_csv(Path::new(path), domain, p, nodes),
        }
    }

    /// Reads `component,s,value` rows and resamples each component onto the
    /// periodic node set by linear interpolation.
    pub fn read_csv(path: &Path, domain: &ConvexDomain, p: usize, nodes: usize) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path)?;
        let mut raw: Vec<Vec<(f64, f64)>> = vec![vec![]; p];
        for rec in rdr.records() {
            let rec = rec?;
            let get = |k: usize| -> Result<f64> {
                rec.get(k)
                    .ok_or_else(|| DvmError::Parse(format!("missing column {k}")))?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| DvmError::Parse(e.to_string()))
            };
            let comp = get(0)? as usize;
            if comp == 0 || comp > p {
                return Err(DvmError::Parse(format!("component {comp} out of range 1..={p}")));
            }
            raw[comp - 1].push((get(1)?, get(2)?));
        }
        let l = domain.perimeter();
        let mut values = Vec::with_capacity(p);
        for (i, mut pts) in raw.into_iter().enumerate() {
            if pts.is_empty() {
                return Err(DvmError::Parse(format!("no samples for component {}", i + 1)));
            }
            for pt in &mut pts {
                pt.0 = pt.0.rem_euclid(l);
            }
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            values.push(
                (0..nodes).map(|k| periodic_interp(&pts, k as f64 * l / nodes as f64, l)).collect(),
            );
        }
        Self::from_samples(l, values)
    }

    pub fn p(&self) -> usize {
        self.values.len()
    }

    pub fn nodes(&self) -> usize {
        self.values[0].len()
    }

    pub fn perimeter(&self) -> f64 {
        self.perimeter
    }

    pub fn samples(&self, i: usize) -> &[f64] {
        &self.values[i]
    }

    /// Value of component `i` at arclength `s` (periodic linear interpolation).
    pub fn eval(&self, i: usize, s: f64) -> f64 {
        let v = &self.values[i];
        let n = v.len();
        let x = s.rem_euclid(self.perimeter) / self.perimeter * n as f64;
        let k = (x.floor() as usize).min(n - 1);
        let t = x - k as f64;
        v[k] * (1.0 - t) + v[(k + 1) % n] * t
    }

    /// Value of component `i` at a boundary point.
    pub fn eval_at(&self, domain: &ConvexDomain, i: usize, z: Vec2) -> f64 {
        self.eval(i, domain.arclength_of(z))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().flatten().copied().fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().flatten().all(|&x| x == 0.0)
    }

    /// `min(f_b, k/2)` followed by periodic convolution with a bump of total
    /// support `fraction · L` (default fraction `1/k`).
    pub fn truncate_and_mollify(&self, k: f64, support_fraction: Option<f64>) -> Result<Self> {
        if !(k > 1.0) {
            return Err(DvmError::Precondition(format!("truncation level k = {k} must exceed 1")));
        }
        let cap = 0.5 * k;
        let frac = support_fraction.unwrap_or(1.0 / k);
        let n = self.nodes();
        let radius_nodes = 0.5 * frac * n as f64;
        let r = radius_nodes.floor() as isize;
        let mut kernel: Vec<(isize, f64)> = (-r..=r)
            .map(|d| (d, if d == 0 { bump(0.0) } else { bump(d as f64 / radius_nodes) }))
            .filter(|e| e.1 > 0.0)
            .collect();
        let total: f64 = kernel.iter().map(|e| e.1).sum();
        for e in &mut kernel {
            e.1 /= total;
        }
        let values = self
            .values
            .iter()
            .map(|v| {
                let capped: Vec<f64> = v.iter().map(|&x| x.min(cap)).collect();
                (0..n)
                    .map(|k| {
                        let s: f64 = kernel
                            .iter()
                            .map(|&(d, w)| w * capped[(k as isize + d).rem_euclid(n as isize) as usize])
                            .sum();
                        s.min(cap)
                    })
                    .collect()
            })
            .collect();
        Self::from_samples(self.perimeter, values)
    }

    /// `∫_{∂Ω_i^+} (v_i·n) f_bi dσ` by midpoint quadrature.
    pub fn inflow_flux(&self, domain: &ConvexDomain, v: Vec2, i: usize, nodes: usize) -> f64 {
        domain
            .boundary_quadrature(v, Side::Inflow, nodes)
            .iter()
            .map(|n| n.weight * self.eval(i, n.s))
            .sum()
    }

    /// `∫_{∂Ω_i^+} (v_i·n) f_bi ln f_bi dσ` with `0 ln 0 = 0`.
    pub fn inflow_entropy_flux(&self, domain: &ConvexDomain, v: Vec2, i: usize, nodes: usize) -> f64 {
        domain
            .boundary_quadrature(v, Side::Inflow, nodes)
            .iter()
            .map(|n| n.weight * xlnx(self.eval(i, n.s)))
            .sum()
    }
}

/// `x ln x` with `0 ln 0 = 0`.
pub fn xlnx(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}

fn periodic_interp(pts: &[(f64, f64)], s: f64, l: f64) -> f64 {
    let n = pts.len();
    if n == 1 {
        return pts[0].1;
    }
    let k = pts.partition_point(|p| p.0 <= s);
    let (a, b) = if k == 0 {
        ((pts[n - 1].0 - l, pts[n - 1].1), pts[0])
    } else if k == n {
        (pts[n - 1], (pts[0].0 + l, pts[0].1))
    } else {
        (pts[k - 1], pts[k])
    };
    if b.0 == a.0 {
        return a.1;
    }
    a.1 + (b.1 - a.1) * (s - a.0) / (b.0 - a.0)
}
