//! Coplanar discrete velocity models.
//!
//! A model is a finite list of planar velocities together with collision
//! rules `(i, j; l, m)` carrying a non-negative rate. Rules are stored once
//! per symmetry class (the lexicographically smallest of the eight index
//! images) and expanded into a flat table of ordered tuples when the model
//! is built, so the collision operator can be evaluated as a single pass.
//!
//! Indices are 0-based throughout the Rust API. Model files and printed
//! reports use 1-based indices.

mod generate;
mod normality;

pub use generate::{
    circle_quadruple_is_thales, generate_circle_model, generate_shifted_model, quadruple_conserves,
    CircleQuadruple,
};
pub use normality::{check_normality, NormalityCertificate};

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{DvmError, Result};
use crate::Vec2;

/// Relative tolerance used for conservation checks on non-integer velocities.
pub const CONSERVATION_RTOL: f64 = 1e-12;

/// A single collision class `(i, j; l, m)` with rate `gamma`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollisionRule {
    pub i: usize,
    pub j: usize,
    pub l: usize,
    pub m: usize,
    pub gamma: f64,
}

impl CollisionRule {
    pub fn new(i: usize, j: usize, l: usize, m: usize, gamma: f64) -> Self {
        Self { i, j, l, m, gamma }
    }

    /// All index images under `Γ_ij^lm = Γ_ji^lm = Γ_lm^ij`, duplicates removed.
    pub fn orbit(&self) -> Vec<[usize; 4]> {
        let (i, j, l, m) = (self.i, self.j, self.l, self.m);
        let mut images = vec![
            [i, j, l, m],
            [j, i, l, m],
            [i, j, m, l],
            [j, i, m, l],
            [l, m, i, j],
            [m, l, i, j],
            [l, m, j, i],
            [m, l, j, i],
        ];
        images.sort_unstable();
        images.dedup();
        images
    }

    pub fn canonical_key(&self) -> [usize; 4] {
        self.orbit()[0]
    }

    pub fn canonicalized(&self) -> Self {
        let [i, j, l, m] = self.canonical_key();
        Self { i, j, l, m, gamma: self.gamma }
    }

    pub fn is_self_coupling(&self) -> bool {
        self.i == self.j || self.l == self.m
    }
}

impl fmt::Display for CollisionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({},{};{},{}) γ={}",
            self.i + 1,
            self.j + 1,
            self.l + 1,
            self.m + 1,
            self.gamma
        )
    }
}

/// One ordered term `Γ_ij^lm` of the expanded collision sum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CollisionTerm {
    pub j: usize,
    pub l: usize,
    pub m: usize,
    pub weight: f64,
}

/// Rules expanded over their symmetry orbits and grouped by the first index.
///
/// Each distinct ordered tuple in the orbit of a rule with rate `gamma`
/// carries `gamma / 2`, so that for a rule with `l != m` the pair of
/// tuples `(i,j,l,m)`, `(i,j,m,l)` adds up to `gamma (f_l f_m - f_i f_j)`.
#[derive(Clone, Debug, Default)]
pub struct CollisionTable {
    offsets: Vec<usize>,
    terms: Vec<CollisionTerm>,
    max_weight: f64,
}

impl CollisionTable {
    fn build(p: usize, rules: &[CollisionRule]) -> Self {
        let mut acc: BTreeMap<[usize; 4], f64> = BTreeMap::new();
        let mut seen: BTreeMap<[usize; 4], ()> = BTreeMap::new();
        for rule in rules {
            if rule.gamma <= 0.0 {
                continue;
            }
            // inconsistent duplicates are reported by validate_rules; only the
            // first occurrence of a class contributes here
            if seen.insert(rule.canonical_key(), ()).is_some() {
                continue;
            }
            for t in rule.orbit() {
                *acc.entry(t).or_insert(0.0) += 0.5 * rule.gamma;
            }
        }
        let mut offsets = vec![0usize; p + 1];
        let mut terms = Vec::with_capacity(acc.len());
        let mut max_weight: f64 = 0.0;
        for i in 0..p {
            offsets[i] = terms.len();
            for (&[ti, j, l, m], &w) in acc.range([i, 0, 0, 0]..[i + 1, 0, 0, 0]) {
                debug_assert_eq!(ti, i);
                max_weight = max_weight.max(w);
                terms.push(CollisionTerm { j, l, m, weight: w });
            }
        }
        offsets[p] = terms.len();
        Self { offsets, terms, max_weight }
    }

    /// Terms `Γ_ij^lm` with first index `i`.
    #[inline]
    pub fn terms_for(&self, i: usize) -> &[CollisionTerm] {
        &self.terms[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Largest single ordered coefficient.
    pub fn max_weight(&self) -> f64 {
        self.max_weight
    }

    /// Iterator over `(i, term)` for all expanded terms.
    pub fn iter(&self) -> impl Iterator<Item = (usize, &CollisionTerm)> + '_ {
        (0..self.offsets.len() - 1)
            .flat_map(move |i| self.terms_for(i).iter().map(move |t| (i, t)))
    }
}

/// Discrete velocity model: velocities, canonical rules and an optional
/// positive direction `n0` with `v_i · n0 > 0` for every velocity.
#[derive(Clone, Debug)]
pub struct VelocityModel {
    velocities: Vec<Vec2>,
    rules: Vec<CollisionRule>,
    positive_direction: Option<Vec2>,
    table: CollisionTable,
}

impl VelocityModel {
    /// Builds a model after structural checks only (non-empty, finite,
    /// indices in range). Physics checks live in [`validate_rules`],
    /// [`check_genericity`], [`find_positive_direction`] and
    /// [`check_normality`].
    pub fn new(
        velocities: Vec<Vec2>,
        rules: Vec<CollisionRule>,
        positive_direction: Option<Vec2>,
    ) -> Result<Self> {
        if velocities.is_empty() {
            return Err(DvmError::Structural("model has no velocities".into()));
        }
        let p = velocities.len();
        for (k, v) in velocities.iter().enumerate() {
            if !v.x.is_finite() || !v.y.is_finite() {
                return Err(DvmError::Structural(format!("velocity {} is not finite", k + 1)));
            }
        }
        let mut canonical: Vec<CollisionRule> = Vec::with_capacity(rules.len());
        for (k, r) in rules.iter().enumerate() {
            for idx in [r.i, r.j, r.l, r.m] {
                if idx >= p {
                    return Err(DvmError::Structural(format!(
                        "rule {} references velocity {} but the model has {} velocities",
                        k + 1,
                        idx + 1,
                        p
                    )));
                }
            }
            if !r.gamma.is_finite() {
                return Err(DvmError::Structural(format!("rule {} has non-finite gamma", k + 1)));
            }
            let c = r.canonicalized();
            // identical duplicates collapse; conflicting ones are kept so the
            // validation report can name them
            if !canonical
                .iter()
                .any(|o| o.canonical_key() == c.canonical_key() && o.gamma == c.gamma)
            {
                canonical.push(c);
            }
        }
        let positive_direction = match positive_direction {
            Some(n) => {
                let norm = n.norm();
                if !(norm > 0.0) || !norm.is_finite() {
                    return Err(DvmError::Structural("n0 must be a nonzero finite vector".into()));
                }
                Some(n / norm)
            }
            None => None,
        };
        let table = CollisionTable::build(p, &canonical);
        Ok(Self { velocities, rules: canonical, positive_direction, table })
    }

    pub fn p(&self) -> usize {
        self.velocities.len()
    }

    pub fn velocities(&self) -> &[Vec2] {
        &self.velocities
    }

    #[inline]
    pub fn velocity(&self, i: usize) -> Vec2 {
        self.velocities[i]
    }

    pub fn rules(&self) -> &[CollisionRule] {
        &self.rules
    }

    pub fn positive_direction(&self) -> Option<Vec2> {
        self.positive_direction
    }

    pub fn with_positive_direction(mut self, n0: Option<Vec2>) -> Self {
        self.positive_direction = n0.map(|n| n / n.norm());
        self
    }

    pub fn table(&self) -> &CollisionTable {
        &self.table
    }

    /// True when every velocity component is an integer small enough for
    /// exact `f64` arithmetic in the conservation checks.
    pub fn has_integer_velocities(&self) -> bool {
        self.velocities
            .iter()
            .all(|v| is_exact_integer(v.x) && is_exact_integer(v.y))
    }

    pub fn max_speed(&self) -> f64 {
        self.velocities.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

pub(crate) fn is_exact_integer(x: f64) -> bool {
    x.fract() == 0.0 && x.abs() < (1u64 << 24) as f64
}

/// What went wrong with a rule.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum ViolationKind {
    NegativeGamma,
    /// Another stored rule of the same symmetry class carries a different rate.
    SymmetryInconsistent { other: usize },
    Momentum { defect: [f64; 2] },
    Energy { defect: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RuleViolation {
    pub rule_index: usize,
    pub rule: CollisionRule,
    pub kind: ViolationKind,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<RuleViolation>,
    /// Rules coupling a velocity with itself (`i == j` or `l == m`). They
    /// are accepted when the conservation laws hold but are flagged.
    pub self_coupling: Vec<usize>,
    pub exact_arithmetic: bool,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks non-negativity, symmetry consistency and the momentum and energy
/// conservation laws for every stored rule.
pub fn validate_rules(model: &VelocityModel) -> ValidationReport {
    let exact = model.has_integer_velocities();
    let vmax = model.max_speed().max(f64::MIN_POSITIVE);
    let mut report = ValidationReport { exact_arithmetic: exact, ..Default::default() };
    let rules = model.rules();
    for (k, r) in rules.iter().enumerate() {
        if r.gamma < 0.0 {
            report.violations.push(RuleViolation {
                rule_index: k,
                rule: *r,
                kind: ViolationKind::NegativeGamma,
            });
        }
        if let Some(other) = rules
            .iter()
            .enumerate()
            .find(|(o, x)| *o != k && x.canonical_key() == r.canonical_key() && x.gamma != r.gamma)
            .map(|(o, _)| o)
        {
            report.violations.push(RuleViolation {
                rule_index: k,
                rule: *r,
                kind: ViolationKind::SymmetryInconsistent { other },
            });
        }
        if r.is_self_coupling() {
            report.self_coupling.push(k);
        }
        let (vi, vj, vl, vm) =
            (model.velocity(r.i), model.velocity(r.j), model.velocity(r.l), model.velocity(r.m));
        let dp = vi + vj - vl - vm;
        let de = vi.norm_squared() + vj.norm_squared() - vl.norm_squared() - vm.norm_squared();
        let (p_ok, e_ok) = if exact {
            (dp.x == 0.0 && dp.y == 0.0, de == 0.0)
        } else {
            (
                dp.norm() <= CONSERVATION_RTOL * vmax,
                de.abs() <= CONSERVATION_RTOL * vmax * vmax,
            )
        };
        if !p_ok {
            report.violations.push(RuleViolation {
                rule_index: k,
                rule: *r,
                kind: ViolationKind::Momentum { defect: [dp.x, dp.y] },
            });
        }
        if !e_ok {
            report.violations.push(RuleViolation {
                rule_index: k,
                rule: *r,
                kind: ViolationKind::Energy { defect: de },
            });
        }
    }
    report
}

/// Outcome of the pairwise non-parallelism check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GenericityResult {
    pub generic: bool,
    /// First parallel pair found (0-based), if any.
    pub offending_pair: Option<(usize, usize)>,
}

/// True iff no two velocities are parallel (all cross products nonzero).
pub fn check_genericity(model: &VelocityModel) -> GenericityResult {
    let exact = model.has_integer_velocities();
    let vs = model.velocities();
    for a in 0..vs.len() {
        for b in a + 1..vs.len() {
            let cross = vs[a].perp(&vs[b]);
            let parallel = if exact {
                cross == 0.0
            } else {
                cross.abs() <= CONSERVATION_RTOL * vs[a].norm() * vs[b].norm()
            };
            if parallel {
                return GenericityResult { generic: false, offending_pair: Some((a, b)) };
            }
        }
    }
    GenericityResult { generic: true, offending_pair: None }
}

/// Finds a unit `n0` with `v_i · n0 > 0` for every velocity, or `None` when
/// the open half-planes `{n : v_i · n > 0}` have empty intersection.
///
/// The admissible directions form the arc `(θ_max - π/2, θ_min + π/2)`
/// where `[θ_min, θ_max]` is the smallest arc containing all velocity
/// angles; it is nonempty iff that arc is shorter than π. The bisector of
/// the velocity arc is returned.
pub fn find_positive_direction(model: &VelocityModel) -> Option<Vec2> {
    let vs = model.velocities();
    if vs.iter().any(|v| v.norm() == 0.0) {
        return None;
    }
    let mut angles: Vec<f64> = vs.iter().map(|v| v.y.atan2(v.x)).collect();
    angles.sort_by(|a, b| a.total_cmp(b));
    let n = angles.len();
    let two_pi = std::f64::consts::TAU;
    // largest cyclic gap between consecutive angles
    let mut best_gap = angles[0] + two_pi - angles[n - 1];
    let mut start = angles[0];
    for k in 1..n {
        let gap = angles[k] - angles[k - 1];
        if gap > best_gap {
            best_gap = gap;
            start = angles[k];
        }
    }
    if best_gap <= std::f64::consts::PI {
        return None;
    }
    let span = two_pi - best_gap;
    let mid = start + 0.5 * span;
    let n0 = Vec2::new(mid.cos(), mid.sin());
    let ok = vs.iter().all(|v| v.dot(&n0) > CONSERVATION_RTOL * v.norm());
    ok.then_some(n0)
}

/// Everything [`certify`] computes about a model.
#[derive(Clone, Debug, Serialize)]
pub struct ModelCertificate {
    pub validation: ValidationReport,
    pub genericity: GenericityResult,
    pub positive_direction: Option<[f64; 2]>,
    pub normality: Option<NormalityCertificate>,
}

impl ModelCertificate {
    /// Rules valid, generic, a positive direction exists and the model is normal.
    pub fn all_pass(&self) -> bool {
        self.validation.is_valid()
            && self.genericity.generic
            && self.positive_direction.is_some()
            && self.normality.as_ref().is_some_and(|n| n.normal)
    }
}

pub fn certify(model: &VelocityModel) -> ModelCertificate {
    let validation = validate_rules(model);
    let genericity = check_genericity(model);
    let positive_direction = find_positive_direction(model).map(|n| [n.x, n.y]);
    let normality = if validation.is_valid() { check_normality(model).ok() } else { None };
    ModelCertificate { validation, genericity, positive_direction, normality }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn shifted_broadwell() -> VelocityModel {
        VelocityModel::new(
            vec![Vec2::new(3.0, 2.0), Vec2::new(1.0, 2.0), Vec2::new(2.0, 3.0), Vec2::new(2.0, 1.0)],
            vec![CollisionRule::new(0, 1, 2, 3, 1.0)],
            None,
        )
        .unwrap()
    }

    #[test]
    fn shifted_broadwell_rule_is_valid() {
        let m = shifted_broadwell();
        let r = validate_rules(&m);
        assert!(r.is_valid(), "{:?}", r);
        assert!(r.exact_arithmetic);
        assert!(r.self_coupling.is_empty());
    }

    #[test]
    fn identity_collision_is_valid() {
        let m = VelocityModel::new(
            vec![Vec2::new(0.3, 1.7), Vec2::new(-2.1, 0.4)],
            vec![CollisionRule::new(0, 1, 0, 1, 0.7)],
            None,
        )
        .unwrap();
        assert!(validate_rules(&m).is_valid());
    }

    #[test]
    fn momentum_mismatch_is_reported() {
        let m = VelocityModel::new(
            vec![Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0), Vec2::new(1.0, 1.0), Vec2::new(0.0, 1.0)],
            vec![CollisionRule::new(0, 1, 2, 3, 1.0)],
            None,
        )
        .unwrap();
        let r = validate_rules(&m);
        assert!(!r.is_valid());
        assert!(r.violations.iter().any(|v| matches!(
            v.kind,
            ViolationKind::Momentum { defect } if defect == [0.0, -1.0]
        )));
    }

    #[test]
    fn out_of_range_index_is_structural() {
        let err = VelocityModel::new(
            vec![Vec2::new(1.0, 0.0)],
            vec![CollisionRule::new(0, 0, 0, 1, 1.0)],
            None,
        )
        .unwrap_err();
        assert!(matches!(err, DvmError::Structural(_)));
    }

    #[test]
    fn negative_gamma_and_inconsistent_duplicates() {
        let base = shifted_broadwell();
        let m = VelocityModel::new(
            base.velocities().to_vec(),
            vec![CollisionRule::new(0, 1, 2, 3, 1.0), CollisionRule::new(2, 3, 1, 0, 2.0)],
            None,
        )
        .unwrap();
        let r = validate_rules(&m);
        assert!(r
            .violations
            .iter()
            .any(|v| matches!(v.kind, ViolationKind::SymmetryInconsistent { .. })));
        let m = VelocityModel::new(
            base.velocities().to_vec(),
            vec![CollisionRule::new(0, 1, 2, 3, -1.0)],
            None,
        )
        .unwrap();
        assert!(validate_rules(&m)
            .violations
            .iter()
            .any(|v| v.kind == ViolationKind::NegativeGamma));
    }

    #[test]
    fn canonicalization_merges_equivalent_rules() {
        let base = shifted_broadwell();
        let m = VelocityModel::new(
            base.velocities().to_vec(),
            vec![CollisionRule::new(3, 2, 1, 0, 1.0), CollisionRule::new(1, 0, 2, 3, 1.0)],
            None,
        )
        .unwrap();
        assert_eq!(m.rules().len(), 1);
        assert_eq!(m.rules()[0].canonical_key(), [0, 1, 2, 3]);
        // eight distinct ordered tuples, two per first index
        assert_eq!(m.table().len(), 8);
        for i in 0..4 {
            assert_eq!(m.table().terms_for(i).len(), 2);
        }
    }

    #[test]
    fn genericity_examples() {
        assert_eq!(
            check_genericity(&shifted_broadwell()),
            GenericityResult { generic: true, offending_pair: None }
        );
        let classical = VelocityModel::new(
            vec![Vec2::new(1.0, 0.0), Vec2::new(-1.0, 0.0), Vec2::new(0.0, 1.0), Vec2::new(0.0, -1.0)],
            vec![CollisionRule::new(0, 1, 2, 3, 1.0)],
            None,
        )
        .unwrap();
        assert_eq!(check_genericity(&classical).offending_pair, Some((0, 1)));
        let single = VelocityModel::new(vec![Vec2::new(1.0, 0.0)], vec![], None).unwrap();
        assert!(check_genericity(&single).generic);
    }

    #[test]
    fn shifted_broadwell_cross_products_by_hand() {
        // hand oracle: all six cross products of (3,2),(1,2),(2,3),(2,1)
        let expected = [4.0, 5.0, -1.0, -1.0, -3.0, -4.0];
        let vs = shifted_broadwell().velocities().to_vec();
        let mut got = vec![];
        for a in 0..4 {
            for b in a + 1..4 {
                got.push(vs[a].perp(&vs[b]));
            }
        }
        assert_eq!(got, expected);
    }

    #[test]
    fn positive_direction_examples() {
        let n0 = find_positive_direction(&shifted_broadwell()).unwrap();
        let diag = Vec2::new(1.0, 1.0) / 2f64.sqrt();
        assert!((n0 - diag).norm() < 1e-12, "{n0:?}");
        let dots: Vec<f64> = shifted_broadwell().velocities().iter().map(|v| v.dot(&diag)).collect();
        let s2 = 2f64.sqrt();
        for (d, e) in dots.iter().zip([5.0 / s2, 3.0 / s2, 5.0 / s2, 3.0 / s2]) {
            assert!((d - e).abs() < 1e-14);
        }

        let anti = VelocityModel::new(vec![Vec2::new(0.3, 0.8), Vec2::new(-0.3, -0.8)], vec![], None)
            .unwrap();
        assert!(find_positive_direction(&anti).is_none());

        let single = VelocityModel::new(vec![Vec2::new(1.0, 0.0)], vec![], None).unwrap();
        assert_eq!(find_positive_direction(&single), Some(Vec2::new(1.0, 0.0)));
    }

    #[test]
    fn positive_direction_agrees_with_sampling_oracle() {
        // 360-point sampling: the cone is nonempty iff some sampled direction
        // (or the returned one) has all dot products positive
        let cases: Vec<Vec<Vec2>> = vec![
            vec![Vec2::new(1.0, 0.2), Vec2::new(0.1, 1.0), Vec2::new(-0.5, 1.0)],
            vec![Vec2::new(1.0, 0.0), Vec2::new(-1.0, 0.1), Vec2::new(0.0, -1.0)],
            vec![Vec2::new(2.0, 1.0), Vec2::new(-1.0, 2.0)],
            vec![Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0), Vec2::new(-1.0, -0.01)],
        ];
        for vs in cases {
            let m = VelocityModel::new(vs.clone(), vec![], None).unwrap();
            let sampled = (0..360).any(|k| {
                let t = (k as f64).to_radians();
                let n = Vec2::new(t.cos(), t.sin());
                vs.iter().all(|v| v.dot(&n) > 0.0)
            });
            match find_positive_direction(&m) {
                Some(n0) => assert!(vs.iter().all(|v| v.dot(&n0) > 0.0)),
                None => assert!(!sampled, "{vs:?}"),
            }
            if sampled {
                assert!(find_positive_direction(&m).is_some());
            }
        }
    }
}
