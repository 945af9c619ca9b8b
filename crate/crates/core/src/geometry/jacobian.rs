use nalgebra::Matrix2;

use super::ConvexDomain;
use crate::error::{DvmError, Result};
use crate::Vec2;

/// Maximum `|det − 1|` of the map
/// `(s, σ) ↦ Z = z_j^+(z_i^+(z) + s v_i) + σ v_j`, written in the
/// `(v_i, v_j)` basis and differentiated by central differences on a
/// `samples × samples` interior grid of `(s, σ)` fractions.
pub fn change_of_variables_deviation(
    domain: &ConvexDomain,
    vi: Vec2,
    vj: Vec2,
    z: Vec2,
    samples: usize,
) -> Result<f64> {
    let basis = Matrix2::new(vi.x, vj.x, vi.y, vj.y);
    let det = basis.determinant();
    if det.abs() <= 1e-12 * vi.norm() * vj.norm() {
        return Err(DvmError::Precondition("v_i and v_j must not be parallel".into()));
    }
    let inv = basis.try_inverse().expect("nonsingular");
    let zi_plus = domain.trace(z, vi)?.z_plus;
    let total_s = domain.trace(zi_plus, vi)?.s_minus;

    // coordinates of Z − z in the (v_i, v_j) basis
    let map = |s: f64, sigma: f64| -> Result<Vec2> {
        let y = zi_plus + vi * s;
        let zj_plus = domain.trace(y, vj)?.z_plus;
        Ok(inv * (zj_plus + vj * sigma - z))
    };

    let mut worst: f64 = 0.0;
    for a in 0..samples {
        let s = total_s * (a as f64 + 0.5) / samples as f64;
        let y = zi_plus + vi * s;
        let seg = domain.trace(y, vj)?;
        let total_sigma = seg.duration();
        let hs = 1e-4 * total_s;
        for b in 0..samples {
            let sigma = total_sigma * (b as f64 + 0.5) / samples as f64;
            let hsig = 1e-4 * total_sigma;
            let ds = (map(s + hs, sigma)? - map(s - hs, sigma)?) / (2.0 * hs);
            let dsig = (map(s, sigma + hsig)? - map(s, sigma - hsig)?) / (2.0 * hsig);
            let jac = Matrix2::new(ds.x, dsig.x, ds.y, dsig.y).determinant();
            worst = worst.max((jac - 1.0).abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn broadwell() -> [Vec2; 4] {
        [Vec2::new(3.0, 2.0), Vec2::new(1.0, 2.0), Vec2::new(2.0, 3.0), Vec2::new(2.0, 1.0)]
    }

    #[test]
    fn unit_disk_jacobian_is_one() {
        let d = ConvexDomain::unit_disk();
        let v = broadwell();
        let dev = change_of_variables_deviation(&d, v[0], v[2], Vec2::zeros(), 20).unwrap();
        assert!(dev <= 1e-6, "{dev}");
    }

    #[test]
    fn parallel_pair_rejected() {
        let d = ConvexDomain::unit_disk();
        let v = broadwell();
        assert!(change_of_variables_deviation(&d, v[0], v[0], Vec2::zeros(), 4).is_err());
    }

    #[test]
    fn centre_and_near_boundary_agree() {
        let d = ConvexDomain::ellipse(Vec2::zeros(), 1.5, 1.0).unwrap();
        let v = broadwell();
        let a = change_of_variables_deviation(&d, v[1], v[3], Vec2::zeros(), 10).unwrap();
        let b = change_of_variables_deviation(&d, v[1], v[3], Vec2::new(1.2, 0.3), 10).unwrap();
        assert!(a <= 1e-6 && b <= 1e-6, "{a} {b}");
    }
}
