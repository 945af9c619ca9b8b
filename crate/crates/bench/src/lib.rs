//! Fixtures shared by the benchmarks.

use std::sync::Arc;

use planar_dvm::{BoundaryData, CollisionRule, ConvexDomain, Field, Grid, Vec2, VelocityModel};

pub fn shifted_broadwell() -> VelocityModel {
    VelocityModel::new(
        vec![Vec2::new(3.0, 2.0), Vec2::new(1.0, 2.0), Vec2::new(2.0, 3.0), Vec2::new(2.0, 1.0)],
        vec![CollisionRule::new(0, 1, 2, 3, 1.0)],
        None,
    )
    .expect("valid model")
}

pub fn disk_grid(n: usize) -> Arc<Grid> {
    Arc::new(Grid::new(&ConvexDomain::unit_disk(), n))
}

/// Smooth positive field with distinct components.
pub fn smooth_field(grid: Arc<Grid>, p: usize) -> Field {
    Field::from_fn(grid, p, |i, z| 1.0 + 0.3 * ((i + 1) as f64 * z.x).sin() * z.y.cos())
}

pub fn maxwellian_boundary(model: &VelocityModel) -> BoundaryData {
    let values = BoundaryData::maxwellian_values(model, 0.0, Vec2::new(0.1, -0.2), 0.05);
    BoundaryData::constant(&ConvexDomain::unit_disk(), &values).expect("positive values")
}
