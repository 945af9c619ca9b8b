use super::{sample_values, Grid};
use crate::geometry::CharacteristicSegment;
use crate::Vec2;

/// Integral over `[s_a, s_b]` (times from the inflow point) of the
/// piecewise-linear interpolant of `g` sampled at nodes `s_k = kΔ`
/// anchored at the inflow point, with `Δ = duration / N` and `N` the
/// smallest count giving spacing `≤ h_s` in length.
///
/// Sharing the node set across subintervals makes the rule additive, and
/// integrating the interpolant exactly makes it exact for constants and
/// linears along the segment.
pub fn line_integral_fn(
    g: impl Fn(Vec2) -> f64,
    seg: &CharacteristicSegment,
    s_a: f64,
    s_b: f64,
    h_s: f64,
) -> f64 {
    let total = seg.duration();
    if total <= 0.0 || s_b <= s_a {
        return 0.0;
    }
    let speed = seg.v.norm();
    let n = ((total * speed / h_s).ceil() as usize).max(1);
    let dt = total / n as f64;
    let s_a = s_a.clamp(0.0, total);
    let s_b = s_b.clamp(0.0, total);
    let ka = ((s_a / dt).floor() as usize).min(n - 1);
    let kb = ((s_b / dt).ceil() as usize).clamp(ka + 1, n);
    let node = |k: usize| g(seg.at(k as f64 * dt));
    let mut acc = 0.0;
    let mut left = node(ka);
    for k in ka..kb {
        let right = node(k + 1);
        let (x0, x1) = (k as f64 * dt, (k + 1) as f64 * dt);
        let (a, b) = (s_a.max(x0), s_b.min(x1));
        if b > a {
            // exact integral of the linear interpolant over [a, b]
            let ta = (a - x0) / dt;
            let tb = (b - x0) / dt;
            let va = left + (right - left) * ta;
            let vb = left + (right - left) * tb;
            acc += 0.5 * (va + vb) * (b - a);
        }
        left = right;
    }
    acc
}

/// [`line_integral_fn`] for a field component sampled bilinearly.
pub fn line_integral(
    grid: &Grid,
    values: &[f64],
    seg: &CharacteristicSegment,
    s_a: f64,
    s_b: f64,
    h_s: f64,
) -> f64 {
    line_integral_fn(|z| sample_values(grid, values, z).0, seg, s_a, s_b, h_s)
}

/// Node samples of a field along one segment, reusable for several
/// integrals over the same characteristic.
pub struct LineSampler {
    dt: f64,
    nodes: Vec<f64>,
}

impl LineSampler {
    pub fn new(grid: &Grid, values: &[f64], seg: &CharacteristicSegment, h_s: f64) -> Self {
        Self::from_fn(|z| sample_values(grid, values, z).0, seg, h_s)
    }

    pub fn from_fn(g: impl Fn(Vec2) -> f64, seg: &CharacteristicSegment, h_s: f64) -> Self {
        let total = seg.duration();
        let n = ((total * seg.v.norm() / h_s).ceil() as usize).max(1);
        let dt = if total > 0.0 { total / n as f64 } else { 0.0 };
        let nodes = (0..=n).map(|k| g(seg.at(k as f64 * dt))).collect();
        Self { dt, nodes }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn spacing(&self) -> f64 {
        self.dt
    }

    /// Cumulative integrals `∫_0^{s_k}` at every node.
    pub fn cumulative(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut acc = 0.0;
        out.push(0.0);
        for w in self.nodes.windows(2) {
            acc += 0.5 * (w[0] + w[1]) * self.dt;
            out.push(acc);
        }
        out
    }

    pub fn integral(&self, s_a: f64, s_b: f64) -> f64 {
        let n = self.nodes.len() - 1;
        if self.dt == 0.0 || s_b <= s_a {
            return 0.0;
        }
        let total = n as f64 * self.dt;
        let (s_a, s_b) = (s_a.clamp(0.0, total), s_b.clamp(0.0, total));
        let ka = ((s_a / self.dt).floor() as usize).min(n - 1);
        let kb = ((s_b / self.dt).ceil() as usize).clamp(ka + 1, n);
        let mut acc = 0.0;
        for k in ka..kb {
            let (x0, x1) = (k as f64 * self.dt, (k + 1) as f64 * self.dt);
            let (a, b) = (s_a.max(x0), s_b.min(x1));
            if b > a {
                let (l, r) = (self.nodes[k], self.nodes[k + 1]);
                let va = l + (r - l) * (a - x0) / self.dt;
                let vb = l + (r - l) * (b - x0) / self.dt;
                acc += 0.5 * (va + vb) * (b - a);
            }
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ConvexDomain;
    use proptest::prelude::*;

    fn seg() -> CharacteristicSegment {
        ConvexDomain::unit_disk().trace(Vec2::new(0.1, -0.2), Vec2::new(2.0, 1.0)).unwrap()
    }

    #[test]
    fn constant_and_linear_exact() {
        let s = seg();
        let total = s.duration();
        let c = line_integral_fn(|_| 3.0, &s, 0.0, total, 0.05);
        assert!((c - 3.0 * total).abs() < 1e-13);
        // g linear in the time parameter along the segment
        let g = |z: Vec2| 1.0 + z.x - 2.0 * z.y;
        let exact = {
            let (a, b) = (g(s.z_plus), g(s.z_minus));
            0.5 * (a + b) * total
        };
        let approx = line_integral_fn(g, &s, 0.0, total, 0.07);
        assert!((approx - exact).abs() < 1e-13);
    }

    #[test]
    fn gaussian_converges_second_order() {
        let s = seg();
        let total = s.duration();
        let mid = s.at(0.5 * total);
        let g = |z: Vec2| (-(z - mid).norm_squared() * 20.0).exp();
        let reference = line_integral_fn(g, &s, 0.0, total, 1e-5);
        let e1 = (line_integral_fn(g, &s, 0.0, total, 0.02) - reference).abs();
        let e2 = (line_integral_fn(g, &s, 0.0, total, 0.01) - reference).abs();
        let ratio = e1 / e2;
        assert!(ratio > 3.5 && ratio < 4.5, "{ratio}");
    }

    #[test]
    fn field_constant_integral() {
        let g = Grid::new(&ConvexDomain::unit_disk(), 32);
        let vals = vec![2.5; g.len()];
        let s = seg();
        let v = line_integral(&g, &vals, &s, 0.0, s.duration(), g.h() / 2.0);
        assert!((v - 2.5 * s.duration()).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn additive(a in 0.0f64..1.0, b in 0.0f64..1.0, c in 0.0f64..1.0) {
            let s = seg();
            let mut x = [a, b, c];
            x.sort_by(|p, q| p.total_cmp(q));
            let t = s.duration();
            let g = |z: Vec2| (3.0 * z.x).sin() + z.y * z.y;
            let i = |p: f64, q: f64| line_integral_fn(g, &s, p * t, q * t, 0.03);
            prop_assert!((i(x[0], x[1]) + i(x[1], x[2]) - i(x[0], x[2])).abs() <= 1e-12);
            let ls = LineSampler::from_fn(g, &s, 0.03);
            prop_assert!((ls.integral(x[0] * t, x[2] * t) - i(x[0], x[2])).abs() <= 1e-12);
        }
    }
}
