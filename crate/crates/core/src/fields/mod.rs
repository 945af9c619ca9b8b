//! Densities on the lattice, inflow traces on the boundary, mollification
//! and quadrature along characteristics.

mod boundary;
mod grid;
mod line;
mod mollify;

pub use boundary::{xlnx, BoundaryData, BoundaryProfile, DEFAULT_BOUNDARY_NODES};
pub use grid::{Grid, GridSpec};
pub use line::{line_integral, line_integral_fn, LineSampler};
pub use mollify::{bump, MollifierPlan, MollifierSpec};

use std::sync::Arc;

use crate::Vec2;

/// `p` component grids over the masked cells of a shared [`Grid`].
///
/// Values are stored component-major: `data[i * ncells + c]`.
#[derive(Clone, Debug)]
pub struct Field {
    grid: Arc<Grid>,
    p: usize,
    data: Vec<f64>,
}

impl PartialEq for Field {
    fn eq(&self, other: &Self) -> bool {
        self.p == other.p && self.data == other.data
    }
}

impl Field {
    pub fn zeros(grid: Arc<Grid>, p: usize) -> Self {
        let n = grid.len();
        Self { grid, p, data: vec![0.0; n * p] }
    }

    /// Constant value `values[i]` in component `i`.
    pub fn constant(grid: Arc<Grid>, values: &[f64]) -> Self {
        let n = grid.len();
        let data = values.iter().flat_map(|&v| std::iter::repeat_n(v, n)).collect();
        Self { grid, p: values.len(), data }
    }

    pub fn from_fn(grid: Arc<Grid>, p: usize, f: impl Fn(usize, Vec2) -> f64) -> Self {
        let n = grid.len();
        let mut data = Vec::with_capacity(n * p);
        for i in 0..p {
            for c in 0..n {
                data.push(f(i, grid.center(c)));
            }
        }
        Self { grid, p, data }
    }

    pub fn from_data(grid: Arc<Grid>, p: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), grid.len() * p, "data length does not match grid");
        Self { grid, p, data }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn ncells(&self) -> usize {
        self.grid.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn component(&self, i: usize) -> &[f64] {
        let n = self.grid.len();
        &self.data[i * n..(i + 1) * n]
    }

    #[inline]
    pub fn component_mut(&mut self, i: usize) -> &mut [f64] {
        let n = self.grid.len();
        &mut self.data[i * n..(i + 1) * n]
    }

    #[inline]
    pub fn get(&self, i: usize, c: usize) -> f64 {
        self.data[i * self.grid.len() + c]
    }

    /// Values of all components at cell `c`.
    pub fn state(&self, c: usize, out: &mut [f64]) {
        let n = self.grid.len();
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.data[i * n + c];
        }
    }

    /// `∫ F_i` over the domain.
    pub fn component_mass(&self, i: usize) -> f64 {
        self.component(i).iter().zip(self.grid.areas()).map(|(f, a)| f * a).sum()
    }

    /// `Σ_i ∫ F_i`.
    pub fn mass(&self) -> f64 {
        (0..self.p).map(|i| self.component_mass(i)).sum()
    }

    /// `Σ_i ∫ |F_i|`.
    pub fn l1_norm(&self) -> f64 {
        let a = self.grid.areas();
        (0..self.p)
            .map(|i| self.component(i).iter().zip(a).map(|(f, a)| f.abs() * a).sum::<f64>())
            .sum()
    }

    /// `Σ_i ∫ |F_i − G_i|`.
    pub fn l1_distance(&self, other: &Field) -> f64 {
        assert_eq!(self.data.len(), other.data.len());
        let a = self.grid.areas();
        let n = self.grid.len();
        self.data
            .iter()
            .zip(&other.data)
            .enumerate()
            .map(|(k, (x, y))| (x - y).abs() * a[k % n])
            .sum()
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.data.iter().all(|&x| x >= 0.0)
    }

    /// Bilinear interpolation of component `i` at `z`; see [`sample_values`].
    pub fn sample(&self, i: usize, z: Vec2) -> f64 {
        sample_values(&self.grid, self.component(i), z).0
    }
}

/// Bilinear weights between the four surrounding cell centres, restricted
/// to masked cells and renormalized. When none of the four is masked, the
/// cell owning `z` gets weight one. The flag reports whether all four
/// stencil cells were masked.
pub fn sample_weights(grid: &Grid, z: Vec2) -> ([(usize, f64); 4], usize, bool) {
    let h = grid.h();
    let u = (z - grid.origin()) / h - Vec2::new(0.5, 0.5);
    let (fx, fy) = (u.x.floor(), u.y.floor());
    let (tx, ty) = (u.x - fx, u.y - fy);
    let (ix, iy) = (fx as isize, fy as isize);
    let stencil = [
        (ix, iy, (1.0 - tx) * (1.0 - ty)),
        (ix + 1, iy, tx * (1.0 - ty)),
        (ix, iy + 1, (1.0 - tx) * ty),
        (ix + 1, iy + 1, tx * ty),
    ];
    let mut out = [(0usize, 0.0f64); 4];
    let mut len = 0;
    let mut wsum = 0.0;
    for (x, y, w) in stencil {
        if let Some(c) = grid.masked_index(x, y) {
            if w > 0.0 {
                out[len] = (c, w);
                len += 1;
                wsum += w;
            }
        }
    }
    let full = len == 4 || stencil.iter().all(|&(x, y, w)| w == 0.0 || grid.masked_index(x, y).is_some());
    if wsum > 0.0 {
        for o in out.iter_mut().take(len) {
            o.1 /= wsum;
        }
        (out, len, full)
    } else {
        out[0] = (grid.owner_of(z), 1.0);
        (out, 1, false)
    }
}

/// Bilinear interpolation with the conventions of [`sample_weights`].
pub fn sample_values(grid: &Grid, values: &[f64], z: Vec2) -> (f64, bool) {
    let (w, len, full) = sample_weights(grid, z);
    let v = w[..len].iter().map(|&(c, w)| w * values[c]).sum();
    (v, full)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ConvexDomain;

    fn grid() -> Arc<Grid> {
        Arc::new(Grid::new(&ConvexDomain::unit_disk(), 32))
    }

    #[test]
    fn constant_mass_is_area() {
        let g = grid();
        let f = Field::constant(g.clone(), &[1.0, 2.0]);
        assert!((f.mass() - 3.0 * g.total_area()).abs() < 1e-12);
        assert_eq!(f.l1_distance(&f), 0.0);
    }

    #[test]
    fn bilinear_reproduces_linear_in_interior() {
        let g = grid();
        let f = Field::from_fn(g.clone(), 1, |_, z| 2.0 * z.x - 0.5 * z.y + 1.0);
        for z in [Vec2::new(0.1, 0.2), Vec2::new(-0.33, 0.41), Vec2::new(0.5, -0.5)] {
            let (v, full) = sample_values(&g, f.component(0), z);
            assert!(full);
            assert!((v - (2.0 * z.x - 0.5 * z.y + 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn sampling_constant_is_exact_everywhere() {
        let g = grid();
        let f = Field::constant(g.clone(), &[0.7]);
        for k in 0..200 {
            let t = k as f64 * 0.0314;
            let z = Vec2::new(t.cos(), t.sin()) * 0.9999;
            assert!((f.sample(0, z) - 0.7).abs() < 1e-15);
        }
    }
}
