use num_traits::Num;

use super::{
    check_genericity, find_positive_direction, is_exact_integer, validate_rules, CollisionRule,
    VelocityModel, CONSERVATION_RTOL,
};
use crate::error::{DvmError, Result};
use crate::Vec2;

/// Points `(A_i, A_j, A_l, A_m)`: `A_l`, `A_m` diametrically opposed on the
/// circle with diameter `[A_i, A_j]`.
pub type CircleQuadruple = [Vec2; 4];

/// Momentum and energy conservation of a quadruple in exact arithmetic for
/// any numeric type (integers, rationals).
pub fn quadruple_conserves<T: Num + Copy>(q: [[T; 2]; 4]) -> (bool, bool) {
    let [a, b, c, d] = q;
    let sq = |p: [T; 2]| p[0] * p[0] + p[1] * p[1];
    let momentum = a[0] + b[0] == c[0] + d[0] && a[1] + b[1] == c[1] + d[1];
    let energy = sq(a) + sq(b) == sq(c) + sq(d);
    (momentum, energy)
}

/// `A_l`, `A_m` are opposite ends of a diameter of the circle with diameter
/// `[A_i, A_j]` (equal midpoints and equal diameters), exactly.
pub fn circle_quadruple_is_thales<T: Num + Copy>(q: [[T; 2]; 4]) -> bool {
    let [a, b, c, d] = q;
    let sq = |x: T, y: T| x * x + y * y;
    a[0] + b[0] == c[0] + d[0]
        && a[1] + b[1] == c[1] + d[1]
        && sq(a[0] - b[0], a[1] - b[1]) == sq(c[0] - d[0], c[1] - d[1])
}

fn certify_or_reject(model: &VelocityModel) -> Result<()> {
    let report = validate_rules(model);
    if let Some(v) = report.violations.first() {
        return Err(DvmError::Physics(format!("rule {} violates {:?}", v.rule, v.kind)));
    }
    let g = check_genericity(model);
    if let Some((a, b)) = g.offending_pair {
        return Err(DvmError::Physics(format!("velocities {} and {} are parallel", a + 1, b + 1)));
    }
    let n0 = model.positive_direction().or_else(|| find_positive_direction(model));
    match n0 {
        Some(n) if model.velocities().iter().all(|v| v.dot(&n) > 0.0) => Ok(()),
        _ => Err(DvmError::Physics("no direction n0 with v_i·n0 > 0 for all i".into())),
    }
}

/// Shifts every base velocity by `c0·n0`. The shift must exceed every base
/// speed and avoid the lines `−v_j + ℝ(v_i − v_j)` on which two shifted
/// velocities become parallel.
pub fn generate_shifted_model(
    base: &[Vec2],
    rules: &[CollisionRule],
    c0: f64,
    n0: Vec2,
) -> Result<VelocityModel> {
    let norm = n0.norm();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(DvmError::Precondition("n0 must be a nonzero vector".into()));
    }
    let n0 = n0 / norm;
    let vmax = base.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if !(c0 > vmax) {
        return Err(DvmError::Precondition(format!(
            "shift c0 = {c0} must exceed max |v_i| = {vmax}"
        )));
    }
    let shift = n0 * c0;
    for i in 0..base.len() {
        for j in 0..base.len() {
            if i == j {
                continue;
            }
            let d = base[i] - base[j];
            let w = shift + base[j];
            if d.norm() == 0.0 {
                continue;
            }
            if w.perp(&d).abs() <= CONSERVATION_RTOL * w.norm().max(1.0) * d.norm() {
                return Err(DvmError::Precondition(format!(
                    "shift lies on the excluded line -v_{} + R(v_{} - v_{}) (pair ({}, {}))",
                    j + 1,
                    i + 1,
                    j + 1,
                    i.min(j) + 1,
                    i.max(j) + 1
                )));
            }
        }
    }
    let velocities: Vec<Vec2> = base
        .iter()
        .map(|v| {
            let s = v + shift;
            // snap integer results so the exact conservation path applies
            Vec2::new(snap(s.x), snap(s.y))
        })
        .collect();
    let model = VelocityModel::new(velocities, rules.to_vec(), Some(n0))?;
    certify_or_reject(&model)?;
    Ok(model)
}

fn snap(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= 1e-12 * x.abs().max(1.0) && is_exact_integer(r) {
        r
    } else {
        x
    }
}

fn same_point(a: Vec2, b: Vec2, scale: f64) -> bool {
    (a - b).norm() <= CONSERVATION_RTOL * scale
}

/// Builds a model from circle quadruples, merging coincident velocities.
pub fn generate_circle_model(
    quadruples: &[CircleQuadruple],
    gammas: &[f64],
    n0: Vec2,
) -> Result<VelocityModel> {
    if quadruples.len() != gammas.len() {
        return Err(DvmError::Precondition(format!(
            "{} quadruples but {} rates",
            quadruples.len(),
            gammas.len()
        )));
    }
    let norm = n0.norm();
    if !(norm > 0.0) {
        return Err(DvmError::Precondition("n0 must be a nonzero vector".into()));
    }
    let n0 = n0 / norm;
    let scale = quadruples
        .iter()
        .flat_map(|q| q.iter().map(|a| a.norm()))
        .fold(1.0, f64::max);
    let mut velocities: Vec<Vec2> = Vec::new();
    let mut rules = Vec::new();
    for (k, (q, &gamma)) in quadruples.iter().zip(gammas).enumerate() {
        let [ai, aj, al, am] = *q;
        let name = k + 1;
        if same_point(ai, aj, scale) {
            return Err(DvmError::Precondition(format!("quadruple {name}: A_i = A_j")));
        }
        if (same_point(al, ai, scale) && same_point(am, aj, scale))
            || (same_point(al, aj, scale) && same_point(am, ai, scale))
        {
            return Err(DvmError::Precondition(format!(
                "quadruple {name}: (A_l, A_m) coincides with (A_i, A_j)"
            )));
        }
        let exact = q.iter().all(|a| is_exact_integer(a.x) && is_exact_integer(a.y));
        let thales = if exact {
            circle_quadruple_is_thales(q.map(|a| [a.x as i64, a.y as i64]))
        } else {
            let mid = (ai + aj) - (al + am);
            let diam = (ai - aj).norm_squared() - (al - am).norm_squared();
            mid.norm() <= CONSERVATION_RTOL * scale && diam.abs() <= CONSERVATION_RTOL * scale * scale
        };
        if !thales {
            return Err(DvmError::Precondition(format!(
                "quadruple {name}: A_l, A_m are not diametrically opposed on the circle of diameter [A_i, A_j]"
            )));
        }
        if let Some(a) = q.iter().find(|a| !(a.dot(&n0) > 0.0)) {
            return Err(DvmError::Precondition(format!(
                "quadruple {name}: point ({}, {}) is not in the half-plane n0·x > 0",
                a.x, a.y
            )));
        }
        let mut idx = [0usize; 4];
        for (slot, a) in idx.iter_mut().zip(q.iter()) {
            *slot = match velocities.iter().position(|v| same_point(*v, *a, scale)) {
                Some(p) => p,
                None => {
                    velocities.push(*a);
                    velocities.len() - 1
                }
            };
        }
        rules.push(CollisionRule::new(idx[0], idx[1], idx[2], idx[3], gamma));
    }
    let model = VelocityModel::new(velocities, rules, Some(n0))?;
    certify_or_reject(&model)?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::check_normality;
    use num_rational::Ratio;

    fn classical() -> Vec<Vec2> {
        vec![Vec2::new(1.0, 0.0), Vec2::new(-1.0, 0.0), Vec2::new(0.0, 1.0), Vec2::new(0.0, -1.0)]
    }

    #[test]
    fn classical_broadwell_shift_gives_shifted_model() {
        let n0 = Vec2::new(1.0, 1.0);
        let m = generate_shifted_model(
            &classical(),
            &[CollisionRule::new(0, 1, 2, 3, 1.0)],
            8f64.sqrt(),
            n0,
        )
        .unwrap();
        assert_eq!(
            m.velocities(),
            &[Vec2::new(3.0, 2.0), Vec2::new(1.0, 2.0), Vec2::new(2.0, 3.0), Vec2::new(2.0, 1.0)]
        );
        assert!(check_normality(&m).unwrap().normal);
    }

    #[test]
    fn small_shift_is_rejected() {
        let err = generate_shifted_model(&classical(), &[], 1.0, Vec2::new(1.0, 1.0)).unwrap_err();
        assert!(matches!(err, DvmError::Precondition(_)));
    }

    #[test]
    fn shift_on_excluded_line_is_rejected() {
        // c0·n0 = (3,-4) lies on -v_3 + R(v_1 - v_3) = (0,-1) + t(1,-1) at t = 3
        let err =
            generate_shifted_model(&classical(), &[], 5.0, Vec2::new(0.6, -0.8)).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("pair (1, 3)"), "{msg}");
    }

    #[test]
    fn circle_construction_reproduces_shifted_broadwell() {
        let q = [Vec2::new(3.0, 2.0), Vec2::new(1.0, 2.0), Vec2::new(2.0, 3.0), Vec2::new(2.0, 1.0)];
        let m = generate_circle_model(&[q], &[1.0], Vec2::new(1.0, 1.0)).unwrap();
        assert_eq!(m.velocities(), &q);
        assert_eq!(m.rules().len(), 1);
    }

    #[test]
    fn degenerate_opposed_pair_is_rejected() {
        let q = [Vec2::new(3.0, 2.0), Vec2::new(1.0, 2.0), Vec2::new(3.0, 2.0), Vec2::new(1.0, 2.0)];
        let err = generate_circle_model(&[q], &[1.0], Vec2::new(1.0, 1.0)).unwrap_err();
        assert!(err.to_string().contains("quadruple 1"));
    }

    #[test]
    fn shared_velocity_quadruples_merge() {
        let q1 = [Vec2::new(3.0, 2.0), Vec2::new(1.0, 2.0), Vec2::new(2.0, 3.0), Vec2::new(2.0, 1.0)];
        // second circle through (2,1): diameter [(2,1),(4,5)], centre (3,3)
        let q2 = [Vec2::new(2.0, 1.0), Vec2::new(4.0, 5.0), Vec2::new(4.0, 1.0), Vec2::new(2.0, 5.0)];
        for q in [q1, q2] {
            let (p, e) = quadruple_conserves(q.map(|a| [a.x as i64, a.y as i64]));
            assert!(p && e);
        }
        let m = generate_circle_model(&[q1, q2], &[1.0, 0.5], Vec2::new(1.0, 1.0)).unwrap();
        assert_eq!(m.p(), 7);
        assert_eq!(m.rules().len(), 2);
    }

    #[test]
    fn rational_circle_quadruple_conserves_exactly() {
        let r = |n: i64, d: i64| Ratio::new(n, d);
        // circle centre (2,2), radius 1: (13/5, 14/5) and (7/5, 6/5) opposed
        let q = [
            [r(3, 1), r(2, 1)],
            [r(1, 1), r(2, 1)],
            [r(13, 5), r(14, 5)],
            [r(7, 5), r(6, 5)],
        ];
        assert!(circle_quadruple_is_thales(q));
        assert_eq!(quadruple_conserves(q), (true, true));
    }

    #[test]
    fn off_circle_point_is_rejected() {
        let q = [Vec2::new(3.0, 2.0), Vec2::new(1.0, 2.0), Vec2::new(2.0, 3.5), Vec2::new(2.0, 0.5)];
        assert!(generate_circle_model(&[q], &[1.0], Vec2::new(1.0, 1.0)).is_err());
    }
}
