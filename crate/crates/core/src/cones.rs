//! Tangent cone estimators.
//!
//! Numeric membership is a residual over the scale ladder
//! `t_k = t0 * rho^k`, `k = 0..levels`:
//! `r_k = dist(x + t_k v, S) / t_k` with `|v| = 1`.
//!
//! * contingent: `min_k r_k`
//! * adjacent: `max_{k >= levels/2} r_k`
//! * Clarke: the adjacent residual maximised over base points near `x`
//!   (projections onto `S` of small ball samples, `x` itself included)
//! * Dubovitskiy: 0 if every sampled `x + a(v + e)` is interior, else 1
//!
//! A liminf attained only below `t0 * rho^(levels-1)` is missed; this is
//! the accepted false-accept risk of a finite ladder.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::geometry::{Membership, ProjectionConfig, SetExpr, SetNode};
use crate::linalg::{add, axpy, dot, norm, normalized, scale, Polyhedron};
use crate::rng;

const CLARKE_TAG: u64 = 0xC1A4;
const DUB_TAG: u64 = 0xD0B1;
const GRID_TAG: u64 = 0x6121D;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConeKind {
    Contingent,
    Adjacent,
    Clarke,
    Dubovitskiy,
}

impl ConeKind {
    pub const ALL: [ConeKind; 4] = [
        ConeKind::Contingent,
        ConeKind::Adjacent,
        ConeKind::Clarke,
        ConeKind::Dubovitskiy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ConeKind::Contingent => "contingent",
            ConeKind::Adjacent => "adjacent",
            ConeKind::Clarke => "clarke",
            ConeKind::Dubovitskiy => "dubovitskiy",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Member {
    Yes,
    No,
    Marginal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeConfig {
    pub t0: f64,
    pub rho: f64,
    pub levels: usize,
    pub eps_cone: f64,
    /// Membership tolerance used for snapping and interior tests.
    pub tol: f64,
    pub projection: ProjectionConfig,
    pub clarke_bases: usize,
    pub dub_alpha: f64,
    pub dub_eps: f64,
    pub dub_a_samples: usize,
    pub dub_e_samples: usize,
    pub seed: u64,
}

impl Default for ConeConfig {
    fn default() -> Self {
        Self {
            t0: 1e-2,
            rho: 0.5,
            levels: 20,
            eps_cone: 1e-3,
            tol: 1e-7,
            projection: ProjectionConfig {
                starts: 2,
                ..ProjectionConfig::default()
            },
            clarke_bases: 8,
            dub_alpha: 1e-2,
            dub_eps: 1e-2,
            dub_a_samples: 10,
            dub_e_samples: 10,
            seed: 0,
        }
    }
}

impl ConeConfig {
    pub fn scales(&self) -> Vec<f64> {
        (0..self.levels)
            .map(|k| self.t0 * self.rho.powi(k as i32))
            .collect()
    }

    pub fn classify(&self, residual: f64) -> Member {
        if residual <= self.eps_cone {
            Member::Yes
        } else if residual > 2.0 * self.eps_cone {
            Member::No
        } else {
            Member::Marginal
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeVerdict {
    pub member: Member,
    pub residual: f64,
    pub witness_scales: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

impl ConeVerdict {
    fn yes_trivial() -> Self {
        Self {
            member: Member::Yes,
            residual: 0.0,
            witness_scales: Vec::new(),
            diagnostic: None,
        }
    }

    fn marginal(msg: String) -> Self {
        Self {
            member: Member::Marginal,
            residual: f64::NAN,
            witness_scales: Vec::new(),
            diagnostic: Some(msg),
        }
    }

    pub fn is_yes(&self) -> bool {
        self.member == Member::Yes
    }
}

/// Moves `x` onto `s` when it sits in the tolerance band but outside.
pub fn snap(s: &SetExpr, x: &[f64], cfg: &ConeConfig) -> Option<Vec<f64>> {
    if s.contains(x) {
        return Some(x.to_vec());
    }
    let r = s.project(x, &cfg.projection).ok()?;
    if r.distance > 10.0 * cfg.tol {
        return None;
    }
    r.nearest.into_iter().next()
}

/// `r_k` for every scale of the ladder.
pub fn ladder_residuals(
    s: &SetExpr,
    x: &[f64],
    unit_v: &[f64],
    cfg: &ConeConfig,
) -> Result<Vec<f64>, String> {
    cfg.scales()
        .into_iter()
        .map(|t| {
            let p = axpy(x, t, unit_v);
            s.distance(&p, &cfg.projection)
                .map(|d| d / t)
                .ok_or_else(|| format!("projection failed at scale {:e}", t))
        })
        .collect()
}

fn min_with_scales(r: &[f64], scales: &[f64]) -> (f64, Vec<f64>) {
    let m = r.iter().cloned().fold(f64::INFINITY, f64::min);
    let w = r
        .iter()
        .zip(scales)
        .filter(|(v, _)| **v <= m + 1e-12)
        .map(|(_, t)| *t)
        .collect();
    (m, w)
}

fn max_tail(r: &[f64], scales: &[f64]) -> (f64, Vec<f64>) {
    let start = r.len() / 2;
    let tail = &r[start..];
    let m = tail.iter().cloned().fold(0.0, f64::max);
    let w = tail
        .iter()
        .zip(&scales[start..])
        .filter(|(v, _)| **v >= m - 1e-12)
        .map(|(_, t)| *t)
        .collect();
    (m, w)
}

/// Contingent and adjacent verdicts from one ladder evaluation.
pub fn contingent_and_adjacent(
    s: &SetExpr,
    x: &[f64],
    v: &[f64],
    cfg: &ConeConfig,
) -> (ConeVerdict, ConeVerdict) {
    let Some(u) = normalized(v) else {
        return (ConeVerdict::yes_trivial(), ConeVerdict::yes_trivial());
    };
    let Some(base) = snap(s, x, cfg) else {
        let m = ConeVerdict::marginal("base point is not on the set".into());
        return (m.clone(), m);
    };
    match ladder_residuals(s, &base, &u, cfg) {
        Ok(r) => {
            let scales = cfg.scales();
            let (cm, cw) = min_with_scales(&r, &scales);
            let (am, aw) = max_tail(&r, &scales);
            (
                ConeVerdict {
                    member: cfg.classify(cm),
                    residual: cm,
                    witness_scales: cw,
                    diagnostic: None,
                },
                ConeVerdict {
                    member: cfg.classify(am),
                    residual: am,
                    witness_scales: aw,
                    diagnostic: None,
                },
            )
        }
        Err(e) => {
            let m = ConeVerdict::marginal(e);
            (m.clone(), m)
        }
    }
}

/// Numeric membership of `v` in the cone of the given kind to `s` at `x`.
pub fn cone_membership_numeric(
    s: &SetExpr,
    x: &[f64],
    v: &[f64],
    kind: ConeKind,
    cfg: &ConeConfig,
) -> ConeVerdict {
    let Some(u) = normalized(v) else {
        return ConeVerdict::yes_trivial();
    };
    let Some(base) = snap(s, x, cfg) else {
        return ConeVerdict::marginal("base point is not on the set".into());
    };
    match kind {
        ConeKind::Contingent => contingent_and_adjacent(s, &base, &u, cfg).0,
        ConeKind::Adjacent => contingent_and_adjacent(s, &base, &u, cfg).1,
        ConeKind::Clarke => clarke(s, &base, &u, cfg),
        ConeKind::Dubovitskiy => dubovitskiy(s, &base, &u, cfg),
    }
}

fn clarke(s: &SetExpr, x: &[f64], u: &[f64], cfg: &ConeConfig) -> ConeVerdict {
    let mut worst = contingent_and_adjacent(s, x, u, cfg).1;
    if worst.member == Member::Marginal && worst.residual.is_nan() {
        return worst;
    }
    let scales = cfg.scales();
    let mut rng = rng::stream(cfg.seed, CLARKE_TAG);
    let n = x.len();
    for i in 0..cfg.clarke_bases {
        // perturbation radii walk down the upper half of the ladder
        let k = (cfg.levels / 2 + i) % cfg.levels.max(1);
        let radius = scales[k] * 0.5;
        let e = rng::uniform_in_ball(&mut rng, n);
        let p = axpy(x, radius, &e);
        let base = if s.contains(&p) {
            p
        } else {
            match s.project(&p, &cfg.projection) {
                Ok(r) => r.nearest[0].clone(),
                Err(_) => continue,
            }
        };
        let v = contingent_and_adjacent(s, &base, u, cfg).1;
        if v.residual.is_nan() {
            continue;
        }
        if v.residual > worst.residual {
            worst = v;
        }
    }
    worst.member = cfg.classify(worst.residual);
    worst
}

fn dubovitskiy(s: &SetExpr, x: &[f64], u: &[f64], cfg: &ConeConfig) -> ConeVerdict {
    let n = x.len();
    let mut rng = rng::stream(cfg.seed, DUB_TAG);
    let mut perturb: Vec<Vec<f64>> = vec![vec![0.0; n]];
    while perturb.len() < cfg.dub_e_samples.max(1) {
        perturb.push(scale(&rng::uniform_in_ball(&mut rng, n), cfg.dub_eps));
    }
    let a_count = cfg.dub_a_samples.max(1);
    for i in 0..a_count {
        let a = cfg.dub_alpha * (i + 1) as f64 / a_count as f64;
        for e in &perturb {
            let p = axpy(x, a, &add(u, e));
            if s.classify(&p, cfg.tol) != Membership::Inside {
                return ConeVerdict {
                    member: Member::No,
                    residual: 1.0,
                    witness_scales: vec![a],
                    diagnostic: None,
                };
            }
        }
    }
    ConeVerdict {
        member: Member::Yes,
        residual: 0.0,
        witness_scales: Vec::new(),
        diagnostic: None,
    }
}

/// `{v : a_i·v <= 0, e_j·v = 0}`
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct PolyCone {
    pub ineq: Vec<Vec<f64>>,
    pub eq: Vec<Vec<f64>>,
}

impl PolyCone {
    pub fn whole() -> Self {
        Self::default()
    }

    pub fn contains(&self, v: &[f64], tol: f64) -> bool {
        let nv = norm(v);
        self.ineq.iter().all(|a| dot(a, v) <= tol * norm(a) * nv)
            && self
                .eq
                .iter()
                .all(|a| dot(a, v).abs() <= tol * norm(a) * nv)
    }

    fn meet(&self, other: &PolyCone) -> PolyCone {
        let mut out = self.clone();
        out.ineq.extend(other.ineq.iter().cloned());
        out.eq.extend(other.eq.iter().cloned());
        out
    }

    /// Slater-type qualification: some `v` has `a_i·v < 0` for all rows
    /// and `e_j·v = 0`, with independent equality rows.
    fn qualified(&self, dim: usize) -> bool {
        if crate::linalg::independent_rows(&self.eq).len() != self.eq.len() {
            return false;
        }
        let mut p = Polyhedron::new(dim);
        for a in &self.ineq {
            p.ineq.push((a.clone(), -1.0));
        }
        for e in &self.eq {
            p.eq.push((e.clone(), 0.0));
        }
        !p.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActiveConstraint {
    /// Index of the leaf in tree order.
    pub leaf: usize,
    pub gradient: Vec<f64>,
}

/// A closed-form cone: the union of its polyhedral pieces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalyticCone {
    pub pieces: Vec<PolyCone>,
    pub provenance: Vec<ActiveConstraint>,
}

impl AnalyticCone {
    pub fn contains(&self, v: &[f64], tol: f64) -> bool {
        norm(v) == 0.0 || self.pieces.iter().any(|p| p.contains(v, tol))
    }

    pub fn is_whole(&self) -> bool {
        self.pieces
            .iter()
            .any(|p| p.ineq.is_empty() && p.eq.is_empty())
    }
}

enum LocalCone {
    Excluded,
    Pieces(Vec<PolyCone>),
}

/// Closed-form cone from active gradients, or `None` when unavailable
/// (vanishing gradient, or an intersection without strict feasibility).
pub fn cone_analytic(s: &SetExpr, x: &[f64], tol: f64) -> Option<AnalyticCone> {
    let mut provenance = Vec::new();
    let mut counter = 0usize;
    match local_cone(s, x, tol, &mut counter, &mut provenance)? {
        LocalCone::Excluded => None,
        LocalCone::Pieces(pieces) => Some(AnalyticCone { pieces, provenance }),
    }
}

fn local_cone(
    s: &SetExpr,
    x: &[f64],
    tol: f64,
    counter: &mut usize,
    prov: &mut Vec<ActiveConstraint>,
) -> Option<LocalCone> {
    match s.node() {
        SetNode::Sublevel(f) => {
            let leaf = *counter;
            *counter += 1;
            let g = f.eval(x).ok()?;
            if g < -tol {
                Some(LocalCone::Pieces(vec![PolyCone::whole()]))
            } else if g > tol {
                Some(LocalCone::Excluded)
            } else {
                let grad = f.grad(x).ok()?;
                if norm(&grad) < 1e-12 {
                    return None;
                }
                prov.push(ActiveConstraint {
                    leaf,
                    gradient: grad.clone(),
                });
                Some(LocalCone::Pieces(vec![PolyCone {
                    ineq: vec![grad],
                    eq: Vec::new(),
                }]))
            }
        }
        SetNode::Intersection(children) => {
            let mut acc = vec![PolyCone::whole()];
            let mut excluded = false;
            for c in children {
                match local_cone(c, x, tol, counter, prov)? {
                    LocalCone::Excluded => excluded = true,
                    LocalCone::Pieces(ps) => {
                        let mut next = Vec::new();
                        for a in &acc {
                            for p in &ps {
                                next.push(a.meet(p));
                            }
                        }
                        acc = next;
                    }
                }
            }
            if excluded {
                return Some(LocalCone::Excluded);
            }
            if acc.iter().all(|p| p.qualified(s.dim())) {
                Some(LocalCone::Pieces(acc))
            } else {
                None
            }
        }
        SetNode::Union(children) => {
            let mut pieces = Vec::new();
            for c in children {
                if let LocalCone::Pieces(ps) = local_cone(c, x, tol, counter, prov)? {
                    pieces.extend(ps);
                }
            }
            if pieces.is_empty() {
                Some(LocalCone::Excluded)
            } else {
                Some(LocalCone::Pieces(pieces))
            }
        }
    }
}

/// Linearised cone per DNF conjunct containing `x` (equalities kept as
/// equalities), with gradients required nonzero.
fn linearised_cone(s: &SetExpr, x: &[f64], tol: f64) -> Option<AnalyticCone> {
    let mut pieces = Vec::new();
    for conj in s.conjuncts() {
        let Some(viol) = conj.violation(x) else {
            continue;
        };
        if viol > tol {
            continue;
        }
        let mut piece = PolyCone::whole();
        for f in &conj.ineqs {
            let g = f.eval(x).ok()?;
            if g >= -tol {
                let grad = f.grad(x).ok()?;
                if norm(&grad) < 1e-12 {
                    return None;
                }
                piece.ineq.push(grad);
            }
        }
        for f in &conj.eqs {
            let grad = f.grad(x).ok()?;
            if norm(&grad) < 1e-12 {
                return None;
            }
            piece.eq.push(grad);
        }
        if !piece.qualified(s.dim()) {
            return None;
        }
        pieces.push(piece);
    }
    if pieces.is_empty() {
        None
    } else {
        Some(AnalyticCone {
            pieces,
            provenance: Vec::new(),
        })
    }
}

/// Closed-form cone when available, else a linearised cone that agrees
/// with the numeric contingent estimator on at least 99% of a coarse grid
/// (24 directions in 2-D, plus the boundary rays of each piece).
pub fn certified_cone(s: &SetExpr, x: &[f64], cfg: &ConeConfig) -> Option<AnalyticCone> {
    if let Some(c) = cone_analytic(s, x, cfg.tol) {
        return Some(c);
    }
    let cone = linearised_cone(s, x, cfg.tol)?;
    let n = x.len();
    let mut dirs = direction_grid(n, 24, cfg.seed);
    if n == 2 {
        for p in &cone.pieces {
            for a in p.ineq.iter().chain(&p.eq) {
                for r in [vec![-a[1], a[0]], vec![a[1], -a[0]]] {
                    if p.contains(&r, 1e-9) {
                        dirs.push(normalized(&r)?);
                    }
                }
            }
        }
    }
    let agree = dirs
        .iter()
        .filter(|v| {
            let num = contingent_and_adjacent(s, x, v, cfg).0;
            num.is_yes() == cone.contains(v, 1e-9)
        })
        .count();
    if agree as f64 >= 0.99 * dirs.len() as f64 {
        Some(cone)
    } else {
        None
    }
}

/// Unit directions: `count` equally spaced angles in 2-D (starting at
/// angle 0), seeded sphere samples otherwise.
pub fn direction_grid(dim: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    match dim {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..count)
            .map(|k| {
                let th = 2.0 * PI * k as f64 / count as f64;
                vec![th.cos(), th.sin()]
            })
            .collect(),
        _ => {
            let mut rng = rng::stream(seed, GRID_TAG);
            (0..count)
                .map(|_| rng::uniform_on_sphere(&mut rng, dim))
                .collect()
        }
    }
}

/// Default grid: 360 directions in 2-D, 500 sphere samples above.
pub fn default_grid(dim: usize, seed: u64) -> Vec<Vec<f64>> {
    direction_grid(dim, if dim == 2 { 360 } else { 500 }, seed)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum InclusionVerdict {
    Holds,
    Fails { witness: Vec<f64>, residual: f64 },
    Inconclusive { witness: Vec<f64>, residual: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InclusionReport {
    pub verdict: InclusionVerdict,
    /// Largest residual over tested vectors.
    pub max_residual: f64,
    /// Vectors where the closed-form cone disagrees with the estimator.
    pub analytic_disagreements: Vec<Vec<f64>>,
}

/// Vertices, pairwise midpoints and the barycentre of a polytope.
pub fn polytope_probes(vertices: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = vertices.to_vec();
    for i in 0..vertices.len() {
        for j in (i + 1)..vertices.len() {
            out.push(scale(&add(&vertices[i], &vertices[j]), 0.5));
        }
    }
    if vertices.len() > 2 {
        let mut c = vec![0.0; vertices[0].len()];
        for v in vertices {
            c = add(&c, v);
        }
        out.push(scale(&c, 1.0 / vertices.len() as f64));
    }
    out
}

/// Tests `conv(vertices) ⊂ cone(s, x)` on vertices, midpoints and barycentre.
pub fn cone_of_set_inclusion(
    vertices: &[Vec<f64>],
    s: &SetExpr,
    x: &[f64],
    kind: ConeKind,
    cfg: &ConeConfig,
) -> InclusionReport {
    let analytic = cone_analytic(s, x, cfg.tol);
    let mut max_residual: f64 = 0.0;
    let mut fail: Option<(Vec<f64>, f64)> = None;
    let mut marginal: Option<(Vec<f64>, f64)> = None;
    let mut disagreements = Vec::new();
    for v in polytope_probes(vertices) {
        let verdict = cone_membership_numeric(s, x, &v, kind, cfg);
        let r = verdict.residual;
        if r.is_finite() {
            max_residual = max_residual.max(r);
        }
        if let Some(a) = &analytic {
            if verdict.member != Member::Marginal
                && a.contains(&v, 1e-9) != (verdict.member == Member::Yes)
            {
                disagreements.push(v.clone());
            }
        }
        match verdict.member {
            Member::Yes => {}
            Member::No => {
                if fail.as_ref().is_none_or(|(_, fr)| r > *fr) {
                    fail = Some((v, r));
                }
            }
            Member::Marginal => {
                if marginal.is_none() {
                    marginal = Some((v, r));
                }
            }
        }
    }
    let verdict = if let Some((witness, residual)) = fail {
        InclusionVerdict::Fails { witness, residual }
    } else if let Some((witness, residual)) = marginal {
        InclusionVerdict::Inconclusive { witness, residual }
    } else {
        InclusionVerdict::Holds
    };
    InclusionReport {
        verdict,
        max_residual,
        analytic_disagreements: disagreements,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub directions: usize,
    pub agreement_contingent: f64,
    pub agreement_adjacent: f64,
    pub disagreeing_contingent: Vec<Vec<f64>>,
    pub disagreeing_adjacent: Vec<Vec<f64>>,
}

/// Compares `T_{K1}(x) ∩ T_{K2}(x)` with `T_{K1∩K2}(x)` (and likewise for
/// adjacent cones) direction by direction.
pub fn cone_intersection_lemma_test(
    k1: &SetExpr,
    k2: &SetExpr,
    x: &[f64],
    grid: &[Vec<f64>],
    cfg: &ConeConfig,
) -> LemmaReport {
    let both = k1.and(k2);
    let mut dc = Vec::new();
    let mut da = Vec::new();
    for v in grid {
        let (c1, a1) = contingent_and_adjacent(k1, x, v, cfg);
        let (c2, a2) = contingent_and_adjacent(k2, x, v, cfg);
        let (c12, a12) = contingent_and_adjacent(&both, x, v, cfg);
        if (c1.is_yes() && c2.is_yes()) != c12.is_yes() {
            dc.push(v.clone());
        }
        if (a1.is_yes() && a2.is_yes()) != a12.is_yes() {
            da.push(v.clone());
        }
    }
    let n = grid.len().max(1) as f64;
    LemmaReport {
        directions: grid.len(),
        agreement_contingent: 1.0 - dc.len() as f64 / n,
        agreement_adjacent: 1.0 - da.len() as f64 / n,
        disagreeing_contingent: dc,
        disagreeing_adjacent: da,
    }
}

/// Fraction of `grid` where the numeric contingent verdict matches `cone`.
pub fn analytic_agreement(
    s: &SetExpr,
    x: &[f64],
    cone: &AnalyticCone,
    grid: &[Vec<f64>],
    cfg: &ConeConfig,
) -> f64 {
    let agree = grid
        .iter()
        .filter(|v| contingent_and_adjacent(s, x, v, cfg).0.is_yes() == cone.contains(v, 1e-9))
        .count();
    agree as f64 / grid.len().max(1) as f64
}

/// Fraction of `grid` where contingent and adjacent verdicts coincide.
pub fn derivability_agreement(s: &SetExpr, x: &[f64], grid: &[Vec<f64>], cfg: &ConeConfig) -> f64 {
    let agree = grid
        .iter()
        .filter(|v| {
            let (c, a) = contingent_and_adjacent(s, x, v, cfg);
            c.member == a.member
        })
        .count();
    agree as f64 / grid.len().max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k1() -> SetExpr {
        SetExpr::intersection(vec![
            SetExpr::sublevel(2, "x1").unwrap(),
            SetExpr::sublevel(2, "-x2").unwrap(),
        ])
        .unwrap()
    }

    fn c2() -> SetExpr {
        SetExpr::union(vec![
            SetExpr::sublevel(2, "x1").unwrap(),
            SetExpr::sublevel(2, "x2 + x1^2/2").unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn quadrant_contingent_cone() {
        let cfg = ConeConfig::default();
        let o = [0.0, 0.0];
        let yes = cone_membership_numeric(&k1(), &o, &[-1.0, 1.0], ConeKind::Contingent, &cfg);
        assert_eq!(yes.member, Member::Yes);
        let no = cone_membership_numeric(&k1(), &o, &[1.0, 0.0], ConeKind::Contingent, &cfg);
        assert_eq!(no.member, Member::No);
        assert!((no.residual - 1.0).abs() < 1e-12);
        let zero = cone_membership_numeric(&k1(), &o, &[0.0, 0.0], ConeKind::Clarke, &cfg);
        assert_eq!(zero.member, Member::Yes);
    }

    #[test]
    fn analytic_cone_of_curved_union() {
        let y1 = 0.3;
        let y = [y1, -y1 * y1 / 2.0];
        let cone = cone_analytic(&c2(), &y, 1e-7).unwrap();
        assert_eq!(cone.pieces.len(), 1);
        // {v : v2 <= -y1 v1}
        assert!(cone.contains(&[1.0, -0.3], 1e-9));
        assert!(cone.contains(&[-1.0, 0.2], 1e-9));
        assert!(!cone.contains(&[1.0, -0.2], 1e-9));
    }

    #[test]
    fn degenerate_intersection_falls_back() {
        let line = SetExpr::intersection(vec![
            SetExpr::sublevel(2, "x2").unwrap(),
            SetExpr::sublevel(2, "-x2").unwrap(),
        ])
        .unwrap();
        let z = [0.5, 0.0];
        assert!(cone_analytic(&line, &z, 1e-7).is_none());
        let cone = certified_cone(&line, &z, &ConeConfig::default()).unwrap();
        assert!(cone.contains(&[1.0, 0.0], 1e-9));
        assert!(cone.contains(&[-1.0, 0.0], 1e-9));
        assert!(!cone.contains(&[1.0, 0.1], 1e-9));
    }

    #[test]
    fn half_space_cone() {
        let s = SetExpr::sublevel(2, "x1").unwrap();
        let c = cone_analytic(&s, &[0.0, 0.7], 1e-7).unwrap();
        assert_eq!(c.pieces[0].ineq, vec![vec![1.0, 0.0]]);
    }

    #[test]
    fn inclusion_examples() {
        let cfg = ConeConfig::default();
        let ok = cone_of_set_inclusion(
            &[vec![1.0, 0.0]],
            &k1(),
            &[-0.5, 0.0],
            ConeKind::Contingent,
            &cfg,
        );
        assert_eq!(ok.verdict, InclusionVerdict::Holds);
        let bad = cone_of_set_inclusion(
            &[vec![1.0, 0.0]],
            &k1(),
            &[0.0, 0.0],
            ConeKind::Contingent,
            &cfg,
        );
        match bad.verdict {
            InclusionVerdict::Fails { witness, .. } => assert_eq!(witness, vec![1.0, 0.0]),
            other => panic!("{:?}", other),
        }
        let zero = cone_of_set_inclusion(
            &[vec![0.0, 0.0]],
            &k1(),
            &[0.0, 0.0],
            ConeKind::Contingent,
            &cfg,
        );
        assert_eq!(zero.verdict, InclusionVerdict::Holds);
    }

    #[test]
    fn dubovitskiy_is_interior_of_quadrant_cone() {
        let cfg = ConeConfig::default();
        let o = [0.0, 0.0];
        let inside = cone_membership_numeric(&k1(), &o, &[-1.0, 1.0], ConeKind::Dubovitskiy, &cfg);
        assert_eq!(inside.member, Member::Yes);
        let edge = cone_membership_numeric(&k1(), &o, &[-1.0, 0.0], ConeKind::Dubovitskiy, &cfg);
        assert_eq!(edge.member, Member::No);
    }

    #[test]
    fn grid_shape() {
        let g = direction_grid(2, 360, 0);
        assert_eq!(g.len(), 360);
        assert!((g[90][1] - 1.0).abs() < 1e-15);
        assert_eq!(default_grid(3, 1).len(), 500);
    }
}
