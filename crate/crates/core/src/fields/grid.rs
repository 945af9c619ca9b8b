use serde::{Deserialize, Serialize};

use crate::geometry::ConvexDomain;
use crate::Vec2;

pub(crate) const NONE: u32 = u32::MAX;
const AREA_SUBSAMPLES: usize = 32;

/// Cell-centred uniform lattice over the bounding box of a domain.
///
/// Cells whose centres lie inside the domain carry values ("masked"
/// cells). Every other lattice cell is owned by its nearest masked cell,
/// and the area `A_c` of a masked cell is the measure of the domain inside
/// the lattice cells it owns. The areas therefore partition the domain.
#[derive(Clone, Debug)]
pub struct Grid {
    domain: ConvexDomain,
    n: usize,
    h: f64,
    nx: usize,
    ny: usize,
    origin: Vec2,
    index: Vec<u32>,
    cells: Vec<(u32, u32)>,
    owner: Vec<u32>,
    area: Vec<f64>,
}

/// Serializable grid description: the domain and the resolution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub domain: crate::geometry::DomainSpec,
    /// Cells across the larger extent of the domain.
    pub n: usize,
}

impl Grid {
    /// `n` cells across the larger extent of the bounding box.
    pub fn new(domain: &ConvexDomain, n: usize) -> Self {
        assert!(n >= 2, "grid needs at least two cells across");
        let (a, b) = domain.semi_axes();
        let h = 2.0 * a.max(b) / n as f64;
        let nx = ((2.0 * a / h) - 1e-9).ceil().max(1.0) as usize;
        let ny = ((2.0 * b / h) - 1e-9).ceil().max(1.0) as usize;
        let origin = domain.center() - Vec2::new(nx as f64 * h, ny as f64 * h) * 0.5;
        let mut g = Self {
            domain: domain.clone(),
            n,
            h,
            nx,
            ny,
            origin,
            index: vec![NONE; nx * ny],
            cells: vec![],
            owner: vec![NONE; nx * ny],
            area: vec![],
        };
        for iy in 0..ny {
            for ix in 0..nx {
                if domain.phi(g.lattice_center(ix, iy)) < 0.0 {
                    g.index[iy * nx + ix] = g.cells.len() as u32;
                    g.cells.push((ix as u32, iy as u32));
                }
            }
        }
        assert!(!g.cells.is_empty(), "grid too coarse: no cell centre inside the domain");
        for iy in 0..ny {
            for ix in 0..nx {
                let l = iy * nx + ix;
                g.owner[l] = if g.index[l] != NONE { g.index[l] } else { g.nearest_masked(ix, iy) };
            }
        }
        let mut area = vec![0.0; g.cells.len()];
        for iy in 0..ny {
            for ix in 0..nx {
                let a = g.lattice_cell_area(ix, iy);
                if a > 0.0 {
                    area[g.owner[iy * nx + ix] as usize] += a;
                }
            }
        }
        g.area = area;
        g
    }

    fn nearest_masked(&self, ix: usize, iy: usize) -> u32 {
        let c = self.lattice_center(ix, iy);
        let scan = |r: isize, ring_only: bool| {
            let mut best = (f64::INFINITY, NONE);
            for dy in -r..=r {
                for dx in -r..=r {
                    if ring_only && dx.abs() != r && dy.abs() != r {
                        continue;
                    }
                    let (jx, jy) = (ix as isize + dx, iy as isize + dy);
                    if let Some(k) = self.masked_index(jx, jy) {
                        let d = (self.lattice_center(jx as usize, jy as usize) - c).norm_squared();
                        if d < best.0 {
                            best = (d, k as u32);
                        }
                    }
                }
            }
            best
        };
        for r in 1..=(self.nx.max(self.ny) as isize) {
            let (d, _) = scan(r, true);
            if d.is_finite() {
                // any closer cell lies within this Chebyshev radius
                let reach = (d.sqrt() / self.h).ceil() as isize;
                return scan(reach.max(r), false).1;
            }
        }
        unreachable!("grid has masked cells")
    }

    fn lattice_cell_area(&self, ix: usize, iy: usize) -> f64 {
        let lo = self.origin + Vec2::new(ix as f64 * self.h, iy as f64 * self.h);
        let corners = [
            lo,
            lo + Vec2::new(self.h, 0.0),
            lo + Vec2::new(0.0, self.h),
            lo + Vec2::new(self.h, self.h),
        ];
        let inside = corners.iter().filter(|&&c| self.domain.phi(c) < 0.0).count();
        if inside == 4 {
            return self.h * self.h;
        }
        // skip cells that cannot touch the domain
        let c = lo + Vec2::new(0.5 * self.h, 0.5 * self.h);
        let sp = self.domain.support_point(c - self.domain.center());
        if inside == 0 && (c - self.domain.center()).norm() - (sp - self.domain.center()).norm() > self.h {
            return 0.0;
        }
        let m = AREA_SUBSAMPLES;
        let d = self.h / m as f64;
        let mut count = 0usize;
        for a in 0..m {
            for b in 0..m {
                let z = lo + Vec2::new((a as f64 + 0.5) * d, (b as f64 + 0.5) * d);
                if self.domain.phi(z) < 0.0 {
                    count += 1;
                }
            }
        }
        count as f64 * d * d
    }

    pub fn spec(&self) -> GridSpec {
        GridSpec { domain: self.domain.spec(), n: self.n }
    }

    pub fn domain(&self) -> &ConvexDomain {
        &self.domain
    }

    pub fn resolution(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn origin(&self) -> Vec2 {
        self.origin
    }

    /// Number of masked cells.
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    #[inline]
    pub fn lattice_center(&self, ix: usize, iy: usize) -> Vec2 {
        self.origin + Vec2::new((ix as f64 + 0.5) * self.h, (iy as f64 + 0.5) * self.h)
    }

    /// Lattice coordinates of the masked cell `c`.
    #[inline]
    pub fn cell_coords(&self, c: usize) -> (usize, usize) {
        let (x, y) = self.cells[c];
        (x as usize, y as usize)
    }

    #[inline]
    pub fn center(&self, c: usize) -> Vec2 {
        let (x, y) = self.cell_coords(c);
        self.lattice_center(x, y)
    }

    pub fn centers(&self) -> impl Iterator<Item = Vec2> + '_ {
        (0..self.len()).map(|c| self.center(c))
    }

    /// Masked index of a lattice cell, if its centre is inside.
    #[inline]
    pub fn masked_index(&self, ix: isize, iy: isize) -> Option<usize> {
        if ix < 0 || iy < 0 || ix >= self.nx as isize || iy >= self.ny as isize {
            return None;
        }
        let k = self.index[iy as usize * self.nx + ix as usize];
        (k != NONE).then_some(k as usize)
    }

    /// Masked cell owning the lattice cell `(ix, iy)`.
    #[inline]
    pub fn owner(&self, ix: usize, iy: usize) -> usize {
        self.owner[iy * self.nx + ix] as usize
    }

    /// Lattice cell containing `z`, clamped to the lattice.
    #[inline]
    pub fn locate(&self, z: Vec2) -> (usize, usize) {
        let u = (z - self.origin) / self.h;
        let ix = (u.x.floor().max(0.0) as usize).min(self.nx - 1);
        let iy = (u.y.floor().max(0.0) as usize).min(self.ny - 1);
        (ix, iy)
    }

    /// Masked cell that owns the point `z`.
    pub fn owner_of(&self, z: Vec2) -> usize {
        let (ix, iy) = self.locate(z);
        self.owner(ix, iy)
    }

    /// Areas `A_c` of the masked cells.
    pub fn areas(&self) -> &[f64] {
        &self.area
    }

    pub fn total_area(&self) -> f64 {
        self.area.iter().sum()
    }
}
