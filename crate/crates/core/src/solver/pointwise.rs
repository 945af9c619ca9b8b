use crate::fields::{sample_values, BoundaryData, Grid, LineSampler};
use crate::geometry::CharacteristicSegment;
use crate::Vec2;

/// The backward piece of the characteristic through `z`: from the inflow
/// point to `z` itself.
pub fn backward_segment(grid: &Grid, z: Vec2, v: Vec2) -> crate::Result<CharacteristicSegment> {
    let mut seg = grid.domain().trace(z, v)?;
    seg.s_minus = 0.0;
    seg.z_minus = z;
    Ok(seg)
}

/// Exponential form at a single point, with every line integral evaluated
/// by [`LineSampler`] on bilinearly sampled `ν` and gain:
///
/// `f_b(z⁺) e^{−α s⁺ − ∫₀^{s⁺} ν} + ∫₀^{s⁺} q(s) e^{α(s − s⁺) − ∫_s^{s⁺} ν} ds`.
///
/// Grazing characteristics return the boundary value alone.
#[allow(clippy::too_many_arguments)]
pub fn exponential_form_at(
    grid: &Grid,
    boundary: &BoundaryData,
    i: usize,
    v: Vec2,
    nu: &[f64],
    gain: &[f64],
    alpha: f64,
    z: Vec2,
    h_s: f64,
) -> crate::Result<f64> {
    let seg = backward_segment(grid, z, v)?;
    let fb = boundary.eval_at(grid.domain(), i, seg.z_plus);
    if seg.grazing {
        return Ok(fb);
    }
    let s_end = seg.s_plus;
    let nus = LineSampler::from_fn(|p| sample_values(grid, nu, p).0, &seg, h_s);
    let qs = LineSampler::from_fn(|p| sample_values(grid, gain, p).0, &seg, h_s);
    let cum = nus.cumulative();
    let total_nu = *cum.last().unwrap();
    let dt = nus.spacing();
    let integrand: Vec<f64> = qs
        .nodes()
        .iter()
        .zip(&cum)
        .enumerate()
        .map(|(k, (q, n))| q * (alpha * (k as f64 * dt - s_end) - (total_nu - n)).exp())
        .collect();
    let source: f64 = integrand.windows(2).map(|w| 0.5 * (w[0] + w[1]) * dt).sum();
    Ok(fb * (-alpha * s_end - total_nu).exp() + source)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ConvexDomain;

    #[test]
    fn closed_forms() {
        let g = Grid::new(&ConvexDomain::unit_disk(), 32);
        let b = BoundaryData::from_fn(g.domain(), 1, 1024, |_, s| 1.0 + 0.5 * s.cos()).unwrap();
        let v = Vec2::new(1.0, 0.0);
        let n = g.len();
        let fb = b.eval_at(g.domain(), 0, Vec2::new(-1.0, 0.0));
        let zero = vec![0.0; n];
        let pure = exponential_form_at(&g, &b, 0, v, &zero, &zero, 0.0, Vec2::zeros(), 0.01).unwrap();
        assert!((pure - fb).abs() < 1e-12);
        let ones = vec![1.0; n];
        let att = exponential_form_at(&g, &b, 0, v, &ones, &zero, 0.0, Vec2::zeros(), 0.01).unwrap();
        assert!((att - fb * (-1.0f64).exp()).abs() < 1e-12);
        let gains = vec![0.4; n];
        let c = 2.0;
        let nus = vec![c; n];
        let z = Vec2::new(0.3, 0.2);
        let s = g.domain().trace(z, v).unwrap().s_plus;
        let fbz = b.eval_at(g.domain(), 0, z - v * s);
        let exact = fbz * (-c * s).exp() + (0.4 / c) * (1.0 - (-c * s).exp());
        let coarse = exponential_form_at(&g, &b, 0, v, &nus, &gains, 0.0, z, 0.02).unwrap();
        let fine = exponential_form_at(&g, &b, 0, v, &nus, &gains, 0.0, z, 0.01).unwrap();
        assert!((fine - exact).abs() < (coarse - exact).abs() || (fine - exact).abs() < 1e-12);
        assert!((fine - exact).abs() < 1e-4);
    }
}
