//! Strictly convex planar domains, characteristic tracing and boundary
//! quadrature.
//!
//! Every supported domain is a superellipse `|x/a|^q + |y/b|^q = 1` (the disk
//! and the ellipse are `q = 2`). The implicit function is the gauge
//! `φ(z) = ‖((x−c_x)/a, (y−c_y)/b)‖_q − 1`, which is convex and positively
//! homogeneous, so `φ < 0` exactly inside.

mod jacobian;

pub use jacobian::change_of_variables_deviation;

use serde::{Deserialize, Serialize};

use crate::error::{DvmError, Result};
use crate::Vec2;

/// Bisection steps used for every boundary root.
pub const BISECTION_STEPS: usize = 80;
/// Relative chord length below which a characteristic counts as grazing.
pub const GRAZING_RTOL: f64 = 1e-6;
/// Tolerance on `|φ|` accepted for boundary points.
pub const BOUNDARY_TOL: f64 = 1e-9;
const ARCLENGTH_SAMPLES: usize = 16384;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainKind {
    Disk,
    Ellipse,
    Superellipse,
}

/// Serialized form: `{kind, center, semi_axes, exponent}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub kind: DomainKind,
    #[serde(default)]
    pub center: [f64; 2],
    /// `[r, r]` for a disk (a single radius may be given as `[r]`).
    pub semi_axes: Vec<f64>,
    #[serde(default)]
    pub exponent: Option<f64>,
}

impl DomainSpec {
    pub fn unit_disk() -> Self {
        Self { kind: DomainKind::Disk, center: [0.0, 0.0], semi_axes: vec![1.0], exponent: None }
    }

    pub fn build(&self) -> Result<ConvexDomain> {
        let c = Vec2::new(self.center[0], self.center[1]);
        match self.kind {
            DomainKind::Disk => {
                let r = *self
                    .semi_axes
                    .first()
                    .ok_or_else(|| DvmError::Parse("disk needs a radius".into()))?;
                if self.semi_axes.len() == 2 && self.semi_axes[1] != r {
                    return Err(DvmError::Parse("disk semi-axes must be equal".into()));
                }
                ConvexDomain::disk(c, r)
            }
            DomainKind::Ellipse => {
                let [a, b] = two_axes(&self.semi_axes)?;
                ConvexDomain::ellipse(c, a, b)
            }
            DomainKind::Superellipse => {
                let [a, b] = two_axes(&self.semi_axes)?;
                let q = self
                    .exponent
                    .ok_or_else(|| DvmError::Parse("superellipse needs an exponent".into()))?;
                ConvexDomain::superellipse(c, a, b, q)
            }
        }
    }
}

fn two_axes(v: &[f64]) -> Result<[f64; 2]> {
    match v {
        [a, b] => Ok([*a, *b]),
        _ => Err(DvmError::Parse("expected two semi-axes".into())),
    }
}

/// A strictly convex C¹ domain.
#[derive(Clone, Debug)]
pub struct ConvexDomain {
    kind: DomainKind,
    center: Vec2,
    a: f64,
    b: f64,
    q: f64,
    diameter: f64,
    perimeter: f64,
    /// Cumulative arclength at polar angles `θ_k = 2πk/N`, `k = 0..=N`.
    arc: Vec<f64>,
}

impl ConvexDomain {
    pub fn disk(center: Vec2, radius: f64) -> Result<Self> {
        Self::make(DomainKind::Disk, center, radius, radius, 2.0)
    }

    pub fn unit_disk() -> Self {
        Self::disk(Vec2::zeros(), 1.0).expect("unit disk")
    }

    pub fn ellipse(center: Vec2, a: f64, b: f64) -> Result<Self> {
        Self::make(DomainKind::Ellipse, center, a, b, 2.0)
    }

    /// `q ∈ (1, 8]`.
    pub fn superellipse(center: Vec2, a: f64, b: f64, q: f64) -> Result<Self> {
        if !(q > 1.0 && q <= 8.0) {
            return Err(DvmError::Precondition(format!("superellipse exponent {q} not in (1, 8]")));
        }
        Self::make(DomainKind::Superellipse, center, a, b, q)
    }

    fn make(kind: DomainKind, center: Vec2, a: f64, b: f64, q: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(DvmError::Precondition("semi-axes must be positive and finite".into()));
        }
        if !(center.x.is_finite() && center.y.is_finite()) {
            return Err(DvmError::Precondition("center must be finite".into()));
        }
        let mut d = Self { kind, center, a, b, q, diameter: 0.0, perimeter: 0.0, arc: vec![] };
        let n = ARCLENGTH_SAMPLES;
        let mut arc = Vec::with_capacity(n + 1);
        arc.push(0.0);
        let mut prev = d.polar_point(0.0);
        let mut rmax: f64 = 0.0;
        for k in 1..=n {
            let p = d.polar_point(std::f64::consts::TAU * k as f64 / n as f64);
            rmax = rmax.max((p - center).norm());
            arc.push(arc[k - 1] + (p - prev).norm());
            prev = p;
        }
        d.perimeter = arc[n];
        d.arc = arc;
        d.diameter = 2.0 * rmax.max(a).max(b);
        Ok(d)
    }

    pub fn kind(&self) -> DomainKind {
        self.kind
    }

    pub fn center(&self) -> Vec2 {
        self.center
    }

    pub fn semi_axes(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn exponent(&self) -> f64 {
        self.q
    }

    pub fn spec(&self) -> DomainSpec {
        DomainSpec {
            kind: self.kind,
            center: [self.center.x, self.center.y],
            semi_axes: match self.kind {
                DomainKind::Disk => vec![self.a],
                _ => vec![self.a, self.b],
            },
            exponent: (self.kind == DomainKind::Superellipse).then_some(self.q),
        }
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    pub fn perimeter(&self) -> f64 {
        self.perimeter
    }

    /// Area `4ab Γ(1+1/q)² / Γ(1+2/q)`.
    pub fn area(&self) -> f64 {
        let g = |x: f64| gamma_fn(x);
        4.0 * self.a * self.b * g(1.0 + 1.0 / self.q).powi(2) / g(1.0 + 2.0 / self.q)
    }

    /// Radius of a circle about the centre containing the domain.
    pub fn bounding_radius(&self) -> f64 {
        self.a.hypot(self.b)
    }

    #[inline]
    fn gauge(&self, d: Vec2) -> f64 {
        let (u, w) = ((d.x / self.a).abs(), (d.y / self.b).abs());
        if self.q == 2.0 {
            u.hypot(w)
        } else {
            let m = u.max(w);
            if m == 0.0 {
                return 0.0;
            }
            m * ((u / m).powf(self.q) + (w / m).powf(self.q)).powf(1.0 / self.q)
        }
    }

    /// Implicit function: negative inside, zero on the boundary.
    #[inline]
    pub fn phi(&self, z: Vec2) -> f64 {
        self.gauge(z - self.center) - 1.0
    }

    pub fn contains(&self, z: Vec2) -> bool {
        self.phi(z) < 0.0
    }

    pub fn grad_phi(&self, z: Vec2) -> Vec2 {
        let d = z - self.center;
        let g = self.gauge(d);
        if g == 0.0 {
            return Vec2::zeros();
        }
        let (u, w) = (d.x / self.a, d.y / self.b);
        let q = self.q;
        let f = |t: f64| t.signum() * (t.abs() / g).powf(q - 1.0);
        Vec2::new(f(u) / self.a, f(w) / self.b)
    }

    /// Polar radius of the boundary in direction θ about the centre.
    pub fn polar_radius(&self, theta: f64) -> f64 {
        let dir = Vec2::new(theta.cos(), theta.sin());
        1.0 / self.gauge(dir)
    }

    fn polar_point(&self, theta: f64) -> Vec2 {
        self.center + Vec2::new(theta.cos(), theta.sin()) * self.polar_radius(theta)
    }

    /// Arclength coordinate (counter-clockwise from polar angle 0) of a
    /// boundary point.
    pub fn arclength_of(&self, z: Vec2) -> f64 {
        let d = z - self.center;
        let theta = d.y.atan2(d.x).rem_euclid(std::f64::consts::TAU);
        let n = ARCLENGTH_SAMPLES as f64;
        let x = theta / std::f64::consts::TAU * n;
        let k = (x.floor() as usize).min(ARCLENGTH_SAMPLES - 1);
        let t = x - k as f64;
        self.arc[k] + t * (self.arc[k + 1] - self.arc[k])
    }

    /// Boundary point at arclength `s` (taken modulo the perimeter).
    pub fn boundary_point(&self, s: f64) -> Vec2 {
        let s = s.rem_euclid(self.perimeter);
        let k = self.arc.partition_point(|&a| a <= s).clamp(1, ARCLENGTH_SAMPLES) - 1;
        let seg = self.arc[k + 1] - self.arc[k];
        let t = if seg > 0.0 { (s - self.arc[k]) / seg } else { 0.0 };
        let theta = std::f64::consts::TAU * (k as f64 + t) / ARCLENGTH_SAMPLES as f64;
        self.polar_point(theta)
    }

    /// Inward unit normal at a boundary point.
    pub fn inward_normal(&self, z: Vec2) -> Result<Vec2> {
        let ph = self.phi(z);
        if ph.abs() > BOUNDARY_TOL {
            return Err(DvmError::Precondition(format!("point is not on the boundary (φ = {ph:e})")));
        }
        let g = self.grad_phi(z);
        let gn = g.norm();
        if !(gn > 0.0) {
            return Err(DvmError::DegenerateGeometry("vanishing gradient on the boundary".into()));
        }
        let mut n = -g / gn;
        let eps = 1e-6 * self.diameter;
        if self.phi(z + n * eps) >= self.phi(z - n * eps) {
            n = -n;
        }
        Ok(n)
    }

    /// Maximizer of `w · Z` over the closed domain.
    pub fn support_point(&self, w: Vec2) -> Vec2 {
        let c = Vec2::new(self.a * w.x, self.b * w.y);
        let qd = self.q / (self.q - 1.0);
        let norm = (c.x.abs().powf(qd) + c.y.abs().powf(qd)).powf(1.0 / qd);
        if norm == 0.0 {
            return self.center;
        }
        let f = |t: f64| t.signum() * (t.abs() / norm).powf(qd - 1.0);
        self.center + Vec2::new(self.a * f(c.x), self.b * f(c.y))
    }

    /// `max_{Z ∈ Ω̄} w · Z`.
    pub fn support_value(&self, w: Vec2) -> f64 {
        w.dot(&self.support_point(w))
    }

    /// Length of the projection of the domain onto the line orthogonal to `v`,
    /// times `|v|`: the inflow measure `∫_{∂Ω^+} |v·n| dσ`.
    pub fn projected_width(&self, v: Vec2) -> f64 {
        let w = Vec2::new(-v.y, v.x);
        self.support_value(w) + self.support_value(-w)
    }

    /// The two boundary points where `v · n = 0`.
    pub fn tangency_points(&self, v: Vec2) -> [Vec2; 2] {
        let w = Vec2::new(-v.y, v.x);
        [self.support_point(w), self.support_point(-w)]
    }

    /// Intersection parameters `s_- < s_+` of the line `p + s v` with the
    /// boundary, or `None` if the line misses the open domain.
    pub fn chord(&self, p: Vec2, v: Vec2) -> Option<(f64, f64)> {
        let vn = v.norm();
        if vn == 0.0 {
            return None;
        }
        // closest approach to the centre, then a bracket of the bounding circle
        let s0 = (self.center - p).dot(&v) / (vn * vn);
        let r = self.bounding_radius() * (1.0 + 1e-12) / vn;
        let f = |s: f64| self.phi(p + v * s);
        let (mut lo, mut hi) = (s0 - r, s0 + r);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let (mut x1, mut x2) = (hi - g * (hi - lo), lo + g * (hi - lo));
        let (mut f1, mut f2) = (f(x1), f(x2));
        let mut best = (s0, f(s0));
        for _ in 0..120 {
            if f1 < best.1 {
                best = (x1, f1);
            }
            if f2 < best.1 {
                best = (x2, f2);
            }
            if best.1 < -1e-3 {
                break;
            }
            if f1 < f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - g * (hi - lo);
                f1 = f(x1);
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + g * (hi - lo);
                f2 = f(x2);
            }
            if hi - lo < 1e-15 * r {
                break;
            }
        }
        let (sm, fm) = best;
        if !(fm < 0.0) {
            return None;
        }
        let a = bisect(&f, sm, s0 - r);
        let b = bisect(&f, sm, s0 + r);
        Some((a, b))
    }

    /// Backward and forward exit times of `z` along `v`.
    pub fn trace(&self, z: Vec2, v: Vec2) -> Result<CharacteristicSegment> {
        let ph = self.phi(z);
        if !(ph <= BOUNDARY_TOL) {
            return Err(DvmError::Domain(format!(
                "point ({}, {}) lies outside the closed domain",
                z.x, z.y
            )));
        }
        let vn = v.norm();
        if !(vn > 0.0) {
            return Err(DvmError::Precondition("zero velocity".into()));
        }
        let reach = (self.bounding_radius() + (z - self.center).norm()) * (1.0 + 1e-12) / vn;
        let f = |s: f64| self.phi(z + v * s);
        let s_minus = bisect(&f, 0.0, reach);
        let s_plus = -bisect(&f, 0.0, -reach);
        Ok(CharacteristicSegment::new(z, v, s_plus, s_minus, self.diameter))
    }

    /// Midpoint nodes in arclength on `∂Ω^+` (sign `+`, where `v·n > 0`) or
    /// `∂Ω^−`, with weights `Δσ |v·n|`.
    pub fn boundary_quadrature(&self, v: Vec2, side: Side, nodes: usize) -> Vec<BoundaryNode> {
        let [t1, t2] = self.tangency_points(v);
        let (s1, s2) = (self.arclength_of(t1), self.arclength_of(t2));
        let target = match side {
            Side::Inflow => self.support_point(-v),
            Side::Outflow => self.support_point(v),
        };
        let st = self.arclength_of(target);
        let l = self.perimeter;
        let ccw = |from: f64, to: f64| (to - from).rem_euclid(l);
        // pick the arc s1→s2 or s2→s1 (counter-clockwise) containing the target
        let (start, len) = if ccw(s1, st) < ccw(s1, s2) { (s1, ccw(s1, s2)) } else { (s2, ccw(s2, s1)) };
        let ds = len / nodes as f64;
        (0..nodes)
            .filter_map(|k| {
                let s = start + (k as f64 + 0.5) * ds;
                let z = self.boundary_point(s);
                let n = self.inward_normal(z).ok()?;
                let vn = v.dot(&n);
                let keep = match side {
                    Side::Inflow => vn > 0.0,
                    Side::Outflow => vn < 0.0,
                };
                keep.then(|| BoundaryNode { s: s.rem_euclid(l), z, normal: n, weight: ds * vn.abs() })
            })
            .collect()
    }
}

/// Bisection for the boundary crossing between an interior point `inside`
/// and an exterior point `outside` on a line.
fn bisect(f: &impl Fn(f64) -> f64, inside: f64, outside: f64) -> f64 {
    let (mut lo, mut hi) = (inside, outside);
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn gamma_fn(x: f64) -> f64 {
    // Lanczos, g = 7
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        return std::f64::consts::PI / ((std::f64::consts::PI * x).sin() * gamma_fn(1.0 - x));
    }
    let x = x - 1.0;
    let mut acc = C[0];
    for (k, c) in C.iter().enumerate().skip(1) {
        acc += c / (x + k as f64);
    }
    let t = x + 7.5;
    (2.0 * std::f64::consts::PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * acc
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Inflow,
    Outflow,
}

#[derive(Clone, Copy, Debug)]
pub struct BoundaryNode {
    /// Arclength coordinate.
    pub s: f64,
    pub z: Vec2,
    pub normal: Vec2,
    pub weight: f64,
}

/// The chord through `z` along `v`: `z_plus = z − s_plus v` on the inflow
/// side, `z_minus = z + s_minus v` on the outflow side.
#[derive(Clone, Copy, Debug)]
pub struct CharacteristicSegment {
    pub z: Vec2,
    pub v: Vec2,
    pub s_plus: f64,
    pub s_minus: f64,
    pub z_plus: Vec2,
    pub z_minus: Vec2,
    pub grazing: bool,
}

impl CharacteristicSegment {
    fn new(z: Vec2, v: Vec2, s_plus: f64, s_minus: f64, diameter: f64) -> Self {
        let length = (s_plus + s_minus) * v.norm();
        Self {
            z,
            v,
            s_plus,
            s_minus,
            z_plus: z - v * s_plus,
            z_minus: z + v * s_minus,
            grazing: length < GRAZING_RTOL * diameter,
        }
    }

    /// Total time `s_plus + s_minus` spent inside the domain.
    pub fn duration(&self) -> f64 {
        self.s_plus + self.s_minus
    }

    /// Point at time `s` measured from the inflow point.
    pub fn at(&self, s: f64) -> Vec2 {
        self.z_plus + self.v * s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn ellipse() -> ConvexDomain {
        ConvexDomain::ellipse(Vec2::zeros(), 2.0, 1.0).unwrap()
    }

    #[test]
    fn trace_unit_disk() {
        let d = ConvexDomain::unit_disk();
        let s = d.trace(Vec2::zeros(), Vec2::new(1.0, 0.0)).unwrap();
        assert_abs_diff_eq!(s.s_plus, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(s.s_minus, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!((s.z_plus - Vec2::new(-1.0, 0.0)).norm(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!((s.z_minus - Vec2::new(1.0, 0.0)).norm(), 0.0, epsilon = 1e-14);
        let s = d.trace(Vec2::new(0.5, 0.0), Vec2::new(1.0, 0.0)).unwrap();
        assert_abs_diff_eq!(s.s_plus, 1.5, epsilon = 1e-14);
        assert_abs_diff_eq!(s.s_minus, 0.5, epsilon = 1e-14);
    }

    #[test]
    fn trace_ellipse_matches_conic_root() {
        let v = Vec2::new(2.0, 1.0) / 5f64.sqrt();
        let s = ellipse().trace(Vec2::zeros(), v).unwrap();
        // (2t/√5)²/4 + (t/√5)² = 1  ⇒  t² · 2/5 = 1
        let t = (5.0f64 / 2.0).sqrt();
        assert_abs_diff_eq!(s.s_plus, t, epsilon = 1e-13);
        assert_abs_diff_eq!(s.s_minus, t, epsilon = 1e-13);
        assert!(ellipse().phi(s.z_plus).abs() <= 1e-12 * ellipse().diameter());
    }

    #[test]
    fn trace_outside_is_domain_error() {
        let d = ConvexDomain::unit_disk();
        assert!(matches!(d.trace(Vec2::new(1.5, 0.0), Vec2::new(1.0, 0.0)), Err(DvmError::Domain(_))));
    }

    #[test]
    fn normals() {
        let d = ConvexDomain::unit_disk();
        assert_abs_diff_eq!((d.inward_normal(Vec2::new(1.0, 0.0)).unwrap() - Vec2::new(-1.0, 0.0)).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!((d.inward_normal(Vec2::new(0.0, -1.0)).unwrap() - Vec2::new(0.0, 1.0)).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!((ellipse().inward_normal(Vec2::new(2.0, 0.0)).unwrap() - Vec2::new(-1.0, 0.0)).norm(), 0.0, epsilon = 1e-15);
        let z = d.boundary_point(0.7);
        assert!((d.inward_normal(z).unwrap().norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn arclength_round_trip_and_perimeter() {
        let d = ConvexDomain::unit_disk();
        assert_abs_diff_eq!(d.perimeter(), std::f64::consts::TAU, epsilon = 1e-6);
        for s in [0.0, 0.3, 2.0, 5.9] {
            assert_abs_diff_eq!(d.arclength_of(d.boundary_point(s)), s, epsilon = 1e-9);
        }
        // Ramanujan's perimeter approximation for the 2×1 ellipse
        let (a, b) = (2.0f64, 1.0f64);
        let h = ((a - b) / (a + b)).powi(2);
        let ram = std::f64::consts::PI * (a + b) * (1.0 + 3.0 * h / (10.0 + (4.0 - 3.0 * h).sqrt()));
        assert_abs_diff_eq!(ellipse().perimeter(), ram, epsilon = 1e-6);
        assert_abs_diff_eq!(ellipse().area(), 2.0 * std::f64::consts::PI, epsilon = 1e-12);
    }

    #[test]
    fn quadrature_projected_widths() {
        let d = ConvexDomain::unit_disk();
        let v = Vec2::new(1.0, 0.0);
        let nodes = d.boundary_quadrature(v, Side::Inflow, 2048);
        assert!(nodes.iter().all(|n| n.z.x < 0.0));
        let w: f64 = nodes.iter().map(|n| n.weight).sum();
        assert_abs_diff_eq!(w, 2.0, epsilon = 1e-5);
        let out: f64 = d.boundary_quadrature(v, Side::Outflow, 2048).iter().map(|n| n.weight).sum();
        assert_abs_diff_eq!(w, out, epsilon = 1e-5);
        let e: f64 = ellipse()
            .boundary_quadrature(Vec2::new(0.0, 1.0), Side::Inflow, 4096)
            .iter()
            .map(|n| n.weight)
            .sum();
        assert_abs_diff_eq!(e, 4.0, epsilon = 1e-5);
        assert_abs_diff_eq!(ellipse().projected_width(Vec2::new(0.0, 1.0)), 4.0, epsilon = 1e-14);
    }

    #[test]
    fn superellipse_rejects_bad_exponent() {
        assert!(ConvexDomain::superellipse(Vec2::zeros(), 1.0, 1.0, 1.0).is_err());
        assert!(ConvexDomain::superellipse(Vec2::zeros(), 1.0, 1.0, 9.0).is_err());
        assert!(ConvexDomain::superellipse(Vec2::zeros(), 1.0, 1.0, 4.0).is_ok());
    }

    #[test]
    fn spec_round_trip() {
        let s = DomainSpec {
            kind: DomainKind::Superellipse,
            center: [0.5, -0.2],
            semi_axes: vec![1.0, 0.7],
            exponent: Some(3.0),
        };
        let json = serde_json::to_string(&s).unwrap();
        let back: DomainSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back.build().unwrap().spec(), s);
    }

    fn domains() -> impl Strategy<Value = ConvexDomain> {
        prop_oneof![
            Just(ConvexDomain::unit_disk()),
            Just(ConvexDomain::ellipse(Vec2::new(0.3, -0.1), 2.0, 1.0).unwrap()),
            (1.2f64..8.0).prop_map(|q| ConvexDomain::superellipse(Vec2::zeros(), 1.3, 0.8, q).unwrap()),
        ]
    }

    proptest! {
        #[test]
        fn retrace_reproduces_chord(d in domains(), r in 0.0f64..0.95, t in 0.0f64..std::f64::consts::TAU, a in 0.0f64..std::f64::consts::TAU) {
            let z = d.center() + Vec2::new(t.cos(), t.sin()) * r * d.polar_radius(t);
            let v = Vec2::new(a.cos(), a.sin()) * 1.7;
            let s = d.trace(z, v).unwrap();
            let back = d.trace(s.z_plus, v).unwrap();
            prop_assert!((back.s_minus - s.duration()).abs() <= 1e-10);
            prop_assert!(d.phi(s.z_plus).abs() <= 1e-12 * d.diameter());
            prop_assert!(d.phi(s.z_minus).abs() <= 1e-12 * d.diameter());
            if !s.grazing {
                prop_assert!(v.dot(&d.inward_normal(s.z_plus).unwrap()) > 0.0);
                prop_assert!(v.dot(&d.inward_normal(s.z_minus).unwrap()) < 0.0);
            }
            let (lo, hi) = d.chord(z, v).unwrap();
            prop_assert!((lo + s.s_plus).abs() <= 1e-10 && (hi - s.s_minus).abs() <= 1e-10);
        }

        #[test]
        fn boundary_midpoints_are_interior(d in domains(), s1 in 0.0f64..1.0, s2 in 0.0f64..1.0) {
            prop_assume!((s1 - s2).abs() > 1e-3 && (s1 - s2).abs() < 0.999);
            let l = d.perimeter();
            let m = 0.5 * (d.boundary_point(s1 * l) + d.boundary_point(s2 * l));
            prop_assert!(d.phi(m) < 0.0);
        }

        #[test]
        fn quadrature_signs_and_balance(d in domains(), a in 0.0f64..std::f64::consts::TAU) {
            let v = Vec2::new(a.cos(), a.sin());
            let inflow = d.boundary_quadrature(v, Side::Inflow, 1024);
            let outflow = d.boundary_quadrature(v, Side::Outflow, 1024);
            for n in &inflow { prop_assert!(v.dot(&n.normal) > 0.0); }
            for n in &outflow { prop_assert!(v.dot(&n.normal) < 0.0); }
            let wi: f64 = inflow.iter().map(|n| n.weight).sum();
            let wo: f64 = outflow.iter().map(|n| n.weight).sum();
            let width = d.projected_width(v);
            prop_assert!((wi - width).abs() <= 2e-3 * width, "{} {}", wi, width);
            prop_assert!((wo - width).abs() <= 2e-3 * width);
        }
    }
}
