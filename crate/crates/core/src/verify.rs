//! Checkers for the tangency condition, the critical set, the three
//! structural assumptions and the approachability heuristic, plus the
//! workflow that folds them into one verdict.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::cones::{
    certified_cone, cone_intersection_lemma_test, cone_membership_numeric, cone_of_set_inclusion,
    contingent_and_adjacent, default_grid, derivability_agreement, direction_grid, polytope_probes,
    AnalyticCone, ConeConfig, ConeKind, InclusionVerdict, Member, PolyCone,
};
use crate::dynamics::{
    check_continuity, check_guard_coverage, check_one_sided_lipschitz, ContinuityReport,
    LipschitzEstimate, PolytopeMap,
};
use crate::geometry::{
    sample_boundary, sample_region, sample_relative_set, BoxRegion, Membership, ProjectionConfig,
    Region, RelativeMode, SetExpr,
};
use crate::linalg::{dist, dot, norm, scale, sub, Polyhedron};
use crate::rng;
use crate::simulate::{
    estimate_fphi, integrate, summarize, EmpiricalReport, Ladder, RunSummary, Selection, SimConfig,
    Violation,
};

const NAGUMO_TAG: u64 = 0x9A6;
const CRIT_TAG: u64 = 0xC217;
const DAGGER_TAG: u64 = 0xDA6;
const PR_TAG: u64 = 0x9B;
const EMP_TAG: u64 = 0xE39;

/// The constrained inclusion `x' ∈ F(x), x ∈ C` with candidate set `K`,
/// studied inside a sampling box.
#[derive(Clone, Debug, PartialEq)]
pub struct System {
    pub f: PolytopeMap,
    pub c: SetExpr,
    pub k: SetExpr,
    pub bx: BoxRegion,
}

impl System {
    pub fn new(f: PolytopeMap, c: SetExpr, k: SetExpr, bx: BoxRegion) -> Result<Self, String> {
        let n = f.dim;
        if c.dim() != n || k.dim() != n || bx.dim() != n {
            return Err(format!(
                "dimensions disagree: F {}, C {}, K {}, box {}",
                n,
                c.dim(),
                k.dim(),
                bx.dim()
            ));
        }
        Ok(Self { f, c, k, bx })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyConfig {
    pub tol: f64,
    pub eps_cone: f64,
    pub margin: f64,
    pub seed: u64,
    pub violation_tol: f64,
    pub h: f64,
    pub horizon: f64,
    pub nagumo_samples: usize,
    pub critical_candidates: usize,
    pub critical_radii: Vec<f64>,
    pub critical_budget: usize,
    pub dagger_scales: Vec<f64>,
    pub dagger_alphas: Vec<f64>,
    pub dagger_samples: usize,
    pub c_max: f64,
    pub pr_radii: Vec<f64>,
    pub pr_grid: usize,
    pub pr_threshold: f64,
    /// Ladder depth for the cone of `∂K ∩ ∂C`. Tangential meets are
    /// numerically thick (about the square root of the feasibility
    /// tolerance), so finer scales would see the band instead of the set.
    pub meet_levels: usize,
    pub lipschitz_samples: usize,
    pub continuity_samples: usize,
    pub continuity_ratio: f64,
    pub coverage_samples: usize,
    pub empirical_starts: usize,
    /// Extra initial points for the simulations.
    pub starts: Vec<Vec<f64>>,
    /// Empty means one vertex selection per vertex.
    pub selections: Vec<Selection>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            eps_cone: 1e-3,
            margin: 1e-3,
            seed: 0,
            violation_tol: 1e-4,
            h: 1e-3,
            horizon: 0.5,
            nagumo_samples: 40,
            critical_candidates: 20,
            critical_radii: vec![1e-1, 1e-2, 1e-3, 1e-4],
            critical_budget: 10_000,
            dagger_scales: vec![0.1, 0.05, 0.02, 0.01, 0.005, 0.002, 0.001],
            dagger_alphas: vec![0.0, 0.25, 0.5, 0.75],
            dagger_samples: 12,
            c_max: 100.0,
            pr_radii: vec![1e-1, 1e-2, 1e-3, 1e-4],
            pr_grid: 72,
            pr_threshold: 0.05,
            meet_levels: 8,
            lipschitz_samples: 2000,
            continuity_samples: 200,
            continuity_ratio: 1e3,
            coverage_samples: 1000,
            empirical_starts: 8,
            starts: Vec::new(),
            selections: Vec::new(),
        }
    }
}

impl VerifyConfig {
    pub fn cone(&self) -> ConeConfig {
        ConeConfig {
            eps_cone: self.eps_cone,
            tol: self.tol,
            seed: self.seed,
            projection: ProjectionConfig {
                tol: self.tol,
                starts: 2,
                seed: self.seed,
                ..ProjectionConfig::default()
            },
            ..ConeConfig::default()
        }
    }

    pub fn sim(&self) -> SimConfig {
        SimConfig {
            tol: self.tol,
            margin: self.margin,
            projection: ProjectionConfig {
                tol: self.tol,
                starts: 4,
                seed: self.seed,
                ..ProjectionConfig::default()
            },
            ..SimConfig::default()
        }
    }

    fn projection(&self, starts: usize) -> ProjectionConfig {
        ProjectionConfig {
            tol: self.tol,
            starts,
            seed: self.seed,
            ..ProjectionConfig::default()
        }
    }
}

/// Outcome of a single check. Failures carry a replayable witness.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Check {
    Holds,
    Fails {
        x: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        v: Option<Vec<f64>>,
        detail: String,
    },
    Inconclusive {
        reason: String,
        witnesses: Vec<Vec<f64>>,
    },
}

impl Check {
    pub fn holds(&self) -> bool {
        matches!(self, Check::Holds)
    }

    pub fn fails(&self) -> bool {
        matches!(self, Check::Fails { .. })
    }

    pub fn label(&self) -> &'static str {
        match self {
            Check::Holds => "holds",
            Check::Fails { .. } => "fails",
            Check::Inconclusive { .. } => "inconclusive",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StandingReport {
    pub note: String,
    pub uncovered: Vec<Vec<f64>>,
    pub lipschitz: LipschitzEstimate,
    pub continuity: ContinuityReport,
    pub warnings: Vec<String>,
}

/// Guard coverage, one-sided Lipschitz estimate and continuity on the box.
/// Advisory only: problems become warnings.
pub fn check_standing(sys: &System, cfg: &VerifyConfig) -> StandingReport {
    let mut warnings = Vec::new();
    let mut uncovered = check_guard_coverage(&sys.f, &sys.bx, cfg.coverage_samples, cfg.seed);
    if !uncovered.is_empty() {
        warnings.push(format!(
            "{} of {} box samples are not covered by any guard",
            uncovered.len(),
            cfg.coverage_samples
        ));
        uncovered.truncate(5);
    }
    let lipschitz =
        match check_one_sided_lipschitz(&sys.f, &sys.bx, cfg.lipschitz_samples, cfg.seed) {
            Ok(l) => l,
            Err(e) => {
                warnings.push(format!("one-sided Lipschitz estimate failed: {}", e));
                LipschitzEstimate {
                    k_hat: f64::NAN,
                    k_two_sided: f64::NAN,
                    worst_pair: None,
                    samples: 0,
                }
            }
        };
    let continuity = match check_continuity(
        &sys.f,
        &sys.bx,
        cfg.continuity_samples,
        cfg.continuity_ratio,
        cfg.seed,
    ) {
        Ok(c) => c,
        Err(e) => {
            warnings.push(format!("continuity check failed: {}", e));
            ContinuityReport {
                samples: 0,
                ratio_threshold: cfg.continuity_ratio,
                witnesses: Vec::new(),
            }
        }
    };
    if !continuity.witnesses.is_empty() {
        warnings.push(format!(
            "F looks discontinuous near {} point(s)",
            continuity.witnesses.len()
        ));
    }
    StandingReport {
        note: format!(
            "one-sided Lipschitz and continuity are estimated on the box [{:?}, {:?}] only",
            sys.bx.lo, sys.bx.hi
        ),
        uncovered,
        lipschitz,
        continuity,
        warnings,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NagumoReport {
    pub check: Check,
    pub samples: usize,
    pub max_residual: f64,
}

/// `F(x) ⊂ T_K(x)` at samples of `∂K ∩ int(C)`.
pub fn nagumo_check(sys: &System, count: usize, cfg: &VerifyConfig) -> NagumoReport {
    let pts = sample_relative_set(
        &Region::BoundaryOf(sys.k.clone()),
        &Region::Set(sys.c.clone()),
        RelativeMode::AIntB,
        &sys.bx,
        count,
        cfg.tol,
        cfg.margin,
        cfg.seed ^ NAGUMO_TAG,
    );
    if pts.is_empty() {
        return NagumoReport {
            check: Check::Inconclusive {
                reason: "∂K∩int(C) not found in box".into(),
                witnesses: Vec::new(),
            },
            samples: 0,
            max_residual: 0.0,
        };
    }
    let cc = cfg.cone();
    let mut worst: Option<(Vec<f64>, Vec<f64>, f64)> = None;
    let mut unsure: Vec<Vec<f64>> = Vec::new();
    let mut max_residual: f64 = 0.0;
    for p in &pts {
        let verts = match sys.f.evaluate(p) {
            Ok(v) => v,
            Err(_) => {
                unsure.push(p.clone());
                continue;
            }
        };
        let rep = cone_of_set_inclusion(&verts, &sys.k, p, ConeKind::Contingent, &cc);
        max_residual = max_residual.max(rep.max_residual);
        match rep.verdict {
            InclusionVerdict::Holds => {}
            InclusionVerdict::Fails { witness, residual } => {
                if worst.as_ref().is_none_or(|w| residual > w.2) {
                    worst = Some((p.clone(), witness, residual));
                }
            }
            InclusionVerdict::Inconclusive { .. } => unsure.push(p.clone()),
        }
    }
    let check = if let Some((x, v, r)) = worst {
        Check::Fails {
            x,
            v: Some(v),
            detail: format!("contingent residual {:.3e}", r),
        }
    } else if !unsure.is_empty() {
        Check::Inconclusive {
            reason: "marginal cone verdicts on ∂K∩int(C)".into(),
            witnesses: unsure,
        }
    } else {
        Check::Holds
    };
    NagumoReport {
        check,
        samples: pts.len(),
        max_residual,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalSetEstimate {
    pub points: Vec<Vec<f64>>,
    pub radii_tested: Vec<f64>,
    /// For each point, one point of `C \ K` per radius.
    pub witnesses: Vec<Vec<Vec<f64>>>,
    pub candidates: usize,
}

/// Points of `∂K ∩ ∂C` whose every tested ball meets `C \ K`.
pub fn estimate_critical_set(
    sys: &System,
    count: usize,
    radii: &[f64],
    budget: usize,
    cfg: &VerifyConfig,
) -> CriticalSetEstimate {
    let cands = sample_relative_set(
        &Region::BoundaryOf(sys.k.clone()),
        &Region::BoundaryOf(sys.c.clone()),
        RelativeMode::BoundaryMeet,
        &sys.bx,
        count,
        cfg.tol,
        cfg.margin,
        cfg.seed ^ CRIT_TAG,
    );
    let mut rng = rng::stream(cfg.seed, CRIT_TAG);
    let n = sys.f.dim;
    let mut points: Vec<Vec<f64>> = Vec::new();
    let mut witnesses = Vec::new();
    for x in &cands {
        if points.iter().any(|p| dist(p, x) <= 10.0 * cfg.tol) {
            continue;
        }
        let mut found = Vec::new();
        for &r in radii {
            let mut hit = None;
            for _ in 0..budget {
                let w: Vec<f64> = x
                    .iter()
                    .zip(rng::uniform_in_ball(&mut rng, n))
                    .map(|(a, b)| a + r * b)
                    .collect();
                if sys.c.classify(&w, cfg.tol) != Membership::Outside
                    && sys.k.classify(&w, cfg.tol) == Membership::Outside
                {
                    hit = Some(w);
                    break;
                }
            }
            match hit {
                Some(w) => found.push(w),
                None => break,
            }
        }
        if found.len() == radii.len() {
            points.push(x.clone());
            witnesses.push(found);
        }
    }
    CriticalSetEstimate {
        points,
        radii_tested: radii.to_vec(),
        witnesses,
        candidates: cands.len(),
    }
}

/// `F(x) ⊂ T_K(x)` at every critical point.
pub fn check_assumption1(sys: &System, points: &[Vec<f64>], cfg: &VerifyConfig) -> Check {
    let cc = cfg.cone();
    let mut unsure = Vec::new();
    for p in points {
        let Ok(verts) = sys.f.evaluate(p) else {
            unsure.push(p.clone());
            continue;
        };
        match cone_of_set_inclusion(&verts, &sys.k, p, ConeKind::Contingent, &cc).verdict {
            InclusionVerdict::Holds => {}
            InclusionVerdict::Fails { witness, residual } => {
                return Check::Fails {
                    x: p.clone(),
                    v: Some(witness),
                    detail: format!("F(x) ⊄ T_K(x): contingent residual {:.3e}", residual),
                }
            }
            InclusionVerdict::Inconclusive { .. } => unsure.push(p.clone()),
        }
    }
    if unsure.is_empty() {
        Check::Holds
    } else {
        Check::Inconclusive {
            reason: "marginal cone verdicts at critical points".into(),
            witnesses: unsure,
        }
    }
}

/// No sampled element of `F(x)` is contingent to `∂K ∩ ∂C` at a critical
/// point.
pub fn check_assumption2(sys: &System, points: &[Vec<f64>], cfg: &VerifyConfig) -> Check {
    let meet = sys.k.boundary().and(&sys.c.boundary());
    let mut cc = cfg.cone();
    cc.projection.starts = 4;
    cc.levels = cfg.meet_levels;
    let mut unsure = Vec::new();
    for p in points {
        let Ok(verts) = sys.f.evaluate(p) else {
            unsure.push(p.clone());
            continue;
        };
        for v in polytope_probes(&verts) {
            let verdict = cone_membership_numeric(&meet, p, &v, ConeKind::Contingent, &cc);
            match verdict.member {
                Member::Yes => {
                    return Check::Fails {
                        x: p.clone(),
                        v: Some(v),
                        detail: format!(
                            "F(x) meets T_(∂K∩∂C)(x): contingent residual {:.3e}",
                            verdict.residual
                        ),
                    }
                }
                Member::No => {}
                Member::Marginal => unsure.push(p.clone()),
            }
        }
    }
    if unsure.is_empty() {
        Check::Holds
    } else {
        Check::Inconclusive {
            reason: "marginal or failed projections onto ∂K∩∂C".into(),
            witnesses: unsure,
        }
    }
}

fn min_norm_sq(a: &PolyCone, b: &PolyCone, u: &[f64]) -> Option<f64> {
    let n = u.len();
    let mut p = Polyhedron::new(n);
    for r in &a.ineq {
        p.ineq.push((r.clone(), 0.0));
    }
    for r in &a.eq {
        p.eq.push((r.clone(), 0.0));
    }
    for r in &b.ineq {
        p.ineq.push((r.clone(), dot(r, u)));
    }
    for r in &b.eq {
        p.eq.push((r.clone(), dot(r, u)));
    }
    let half = scale(u, 0.5);
    let v = p.project(&half)?;
    let e = dist(&v, &half);
    Some(2.0 * e * e + 0.5 * dot(u, u))
}

/// `min |(v1, v2)|²` over `v1 ∈ a`, `v2 ∈ b`, `v1 - v2 = u`.
fn min_norm_sq_cones(a: &AnalyticCone, b: &AnalyticCone, u: &[f64]) -> Option<f64> {
    let mut best: Option<f64> = None;
    for pa in &a.pieces {
        for pb in &b.pieces {
            if let Some(v) = min_norm_sq(pa, pb, u) {
                best = Some(best.map_or(v, |w: f64| w.min(v)));
            }
        }
    }
    best
}

/// Smallest `c` with `x2 - x1 ∈ v1 - v2 + α|x2 - x1|B` for some
/// `v1 ∈ dk_cone`, `v2 ∈ c_cone`, `|(v1, v2)| <= c|x2 - x1|`. `None` when
/// no such pair of vectors exists.
pub fn min_c_for_cones(
    dk_cone: &AnalyticCone,
    c_cone: &AnalyticCone,
    d: &[f64],
    alpha: f64,
    seed: u64,
) -> Option<f64> {
    let nd = norm(d);
    if nd == 0.0 {
        return None;
    }
    if alpha <= 0.0 {
        return min_norm_sq_cones(dk_cone, c_cone, d).map(|s| s.sqrt() / nd);
    }
    // The objective is convex in the slack and vanishes only at slack d,
    // which lies outside the ball, so the minimum sits on the sphere.
    let r = alpha * nd;
    let n = d.len();
    let eval = |w: &[f64]| -> Option<f64> { min_norm_sq_cones(dk_cone, c_cone, &sub(d, w)) };
    let mut best: Option<f64> = eval(&vec![0.0; n]);
    let consider = |v: Option<f64>, best: &mut Option<f64>| {
        if let Some(v) = v {
            *best = Some(best.map_or(v, |b: f64| b.min(v)));
        }
    };
    if n == 2 {
        let count = 180;
        let step = 2.0 * core::f64::consts::PI / count as f64;
        let at = |th: f64| [r * th.cos(), r * th.sin()];
        let mut best_th = None;
        let mut best_v = f64::INFINITY;
        for i in 0..count {
            let th = i as f64 * step;
            if let Some(v) = eval(&at(th)) {
                if v < best_v {
                    best_v = v;
                    best_th = Some(th);
                }
            }
        }
        consider(best_th.map(|_| best_v), &mut best);
        if let Some(mut th) = best_th {
            let mut h = step;
            for _ in 0..40 {
                h *= 0.5;
                for cand in [th - h, th + h] {
                    if let Some(v) = eval(&at(cand)) {
                        if v < best_v {
                            best_v = v;
                            th = cand;
                        }
                    }
                }
            }
            consider(Some(best_v), &mut best);
        }
    } else {
        let mut g = rng::stream(seed, DAGGER_TAG);
        for _ in 0..500 {
            let w = scale(&rng::uniform_on_sphere(&mut g, n), r);
            consider(eval(&w), &mut best);
        }
    }
    best.map(|s| s.sqrt() / nd)
}

/// Minimal `c` for one pair `x1 ∈ ∂K \ C`, `x2 ∈ ∂C \ ∂K`, using
/// closed-form or certified cones. `Err` when a cone is unavailable.
pub fn pair_min_c(
    sys: &System,
    x1: &[f64],
    x2: &[f64],
    alpha: f64,
    cfg: &VerifyConfig,
) -> Result<Option<f64>, String> {
    let cc = cfg.cone();
    let a = certified_cone(&sys.k.boundary(), x1, &cc)
        .ok_or_else(|| format!("T_∂K unavailable at {:?}", x1))?;
    let b =
        certified_cone(&sys.c, x2, &cc).ok_or_else(|| format!("T_C unavailable at {:?}", x2))?;
    Ok(min_c_for_cones(&a, &b, &sub(x2, x1), alpha, cfg.seed))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DaggerRow {
    pub scale: f64,
    pub pairs: usize,
    pub unavailable: usize,
    /// Largest minimal c over the pairs; `None` without usable pairs or
    /// when some pair admits no vectors at all.
    pub max_c: Option<f64>,
    pub infeasible: usize,
    pub worst_pair: Option<(Vec<f64>, Vec<f64>)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DaggerTable {
    pub point: Vec<f64>,
    pub alpha: f64,
    pub rows: Vec<DaggerRow>,
    pub bounded: bool,
}

/// Trend rule: the largest c over the last third of the scales is at most
/// twice the largest c over the first third, and nothing exceeds `c_max`.
pub fn dagger_bounded(rows: &[DaggerRow], c_max: f64) -> bool {
    if rows.iter().any(|r| r.infeasible > 0) {
        return false;
    }
    let vals: Vec<f64> = rows.iter().filter_map(|r| r.max_c).collect();
    if vals.is_empty() {
        return true;
    }
    if vals.iter().any(|&c| c > c_max) {
        return false;
    }
    let third = (vals.len() / 3).max(1);
    let first = vals[..third].iter().cloned().fold(0.0, f64::max);
    let last = vals[vals.len() - third..]
        .iter()
        .cloned()
        .fold(0.0, f64::max);
    last <= 2.0 * first.max(1e-12)
}

struct PairPoint {
    x: Vec<f64>,
    cone: Option<AnalyticCone>,
}

/// Samples `(∂K \ C) × (∂C \ ∂K)` pairs inside `ball(p, s)`: random pairs
/// plus nearest-point pairs in both directions.
fn sample_dagger_pairs(
    sys: &System,
    p: &[f64],
    s: f64,
    cfg: &VerifyConfig,
    salt: u64,
) -> (Vec<PairPoint>, Vec<PairPoint>, Vec<(usize, usize)>) {
    let bx = BoxRegion::around(p, s);
    let m = cfg.dagger_samples;
    let seed = cfg.seed ^ DAGGER_TAG ^ salt;
    let in_ball = |q: &[f64]| dist(q, p) <= s;
    let is_x1 = |q: &[f64]| {
        sys.k.classify(q, cfg.tol) == Membership::Boundary
            && sys.c.classify(q, cfg.tol) == Membership::Outside
    };
    let is_x2 = |q: &[f64]| {
        sys.c.classify(q, cfg.tol) == Membership::Boundary
            && sys.k.classify(q, cfg.tol) != Membership::Boundary
    };
    let mut xs1: Vec<Vec<f64>> = sample_region(
        &Region::BoundaryOf(sys.k.clone()),
        &bx,
        4 * m,
        cfg.tol,
        seed,
    )
    .into_iter()
    .filter(|q| in_ball(q) && is_x1(q))
    .take(m)
    .collect();
    let mut xs2: Vec<Vec<f64>> = sample_boundary(&sys.c, &bx, 4 * m, cfg.tol, seed ^ 1)
        .into_iter()
        .filter(|q| in_ball(q) && is_x2(q))
        .take(m)
        .collect();
    let (n1, n2) = (xs1.len(), xs2.len());
    let mut pairs = Vec::new();
    if n1 > 0 && n2 > 0 {
        for i in 0..(2 * m).min(n1 * n2) {
            pairs.push((i % n1, (i * 7 + 3) % n2));
        }
    }
    let pc = cfg.projection(4);
    let dc = sys.c.boundary();
    let dk = sys.k.boundary();
    for i in 0..n1 {
        if let Ok(r) = dc.project(&xs1[i], &pc) {
            for q in r.nearest {
                if in_ball(&q) && is_x2(&q) {
                    xs2.push(q);
                    pairs.push((i, xs2.len() - 1));
                }
            }
        }
    }
    for j in 0..n2 {
        if let Ok(r) = dk.project(&xs2[j], &pc) {
            for q in r.nearest {
                if in_ball(&q) && is_x1(&q) {
                    xs1.push(q);
                    pairs.push((xs1.len() - 1, j));
                }
            }
        }
    }
    let cc = cfg.cone();
    let dkb = sys.k.boundary();
    let a = xs1
        .into_iter()
        .map(|x| PairPoint {
            cone: certified_cone(&dkb, &x, &cc),
            x,
        })
        .collect();
    let b = xs2
        .into_iter()
        .map(|x| PairPoint {
            cone: certified_cone(&sys.c, &x, &cc),
            x,
        })
        .collect();
    (a, b, pairs)
}

fn dagger_tables(sys: &System, p: &[f64], cfg: &VerifyConfig, salt: u64) -> Vec<DaggerTable> {
    let sampled: Vec<(f64, Vec<PairPoint>, Vec<PairPoint>, Vec<(usize, usize)>)> = cfg
        .dagger_scales
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let (a, b, pairs) = sample_dagger_pairs(sys, p, s, cfg, salt ^ ((i as u64) << 8));
            (s, a, b, pairs)
        })
        .collect();
    let mut tables = Vec::new();
    for &alpha in &cfg.dagger_alphas {
        let mut rows = Vec::new();
        for (s, a, b, pairs) in &sampled {
            let mut row = DaggerRow {
                scale: *s,
                pairs: pairs.len(),
                unavailable: 0,
                max_c: None,
                infeasible: 0,
                worst_pair: None,
            };
            for &(i, j) in pairs {
                let (Some(ca), Some(cb)) = (&a[i].cone, &b[j].cone) else {
                    row.unavailable += 1;
                    continue;
                };
                let d = sub(&b[j].x, &a[i].x);
                match min_c_for_cones(ca, cb, &d, alpha, cfg.seed) {
                    Some(c) => {
                        if row.max_c.is_none_or(|m| c > m) {
                            row.max_c = Some(c);
                            row.worst_pair = Some((a[i].x.clone(), b[j].x.clone()));
                        }
                    }
                    None => row.infeasible += 1,
                }
            }
            rows.push(row);
        }
        let bounded = dagger_bounded(&rows, cfg.c_max);
        tables.push(DaggerTable {
            point: p.to_vec(),
            alpha,
            rows,
            bounded,
        });
        if bounded {
            break;
        }
    }
    tables
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Assumption3Report {
    pub check: Check,
    /// Contingent/adjacent agreement on `∂K`, per critical point.
    pub derivability_k: Vec<f64>,
    /// Contingent/adjacent agreement on `C`, per critical point.
    pub derivability_c: Vec<f64>,
    /// Agreement of `T_∂K ∩ T_C` with `T_(∂K∩C)`, per critical point.
    pub lemma_agreement: Vec<f64>,
    pub dagger: Vec<DaggerTable>,
    /// Smallest α with a bounded table at every point.
    pub alpha: Option<f64>,
}

/// Derivability of `∂K` and `C` and the transversality bound at every
/// critical point.
pub fn check_assumption3(
    sys: &System,
    points: &[Vec<f64>],
    cfg: &VerifyConfig,
) -> Assumption3Report {
    let cc = cfg.cone();
    let grid = default_grid(sys.f.dim, cfg.seed);
    let dk = sys.k.boundary();
    let mut rep = Assumption3Report {
        check: Check::Holds,
        derivability_k: Vec::new(),
        derivability_c: Vec::new(),
        lemma_agreement: Vec::new(),
        dagger: Vec::new(),
        alpha: None,
    };
    let mut fail: Option<(Vec<f64>, String)> = None;
    let mut unsure: Vec<(Vec<f64>, String)> = Vec::new();
    let mut alpha_needed: f64 = 0.0;
    for (idx, p) in points.iter().enumerate() {
        let ak = derivability_agreement(&dk, p, &grid, &cc);
        let ac = derivability_agreement(&sys.c, p, &grid, &cc);
        rep.derivability_k.push(ak);
        rep.derivability_c.push(ac);
        rep.lemma_agreement
            .push(cone_intersection_lemma_test(&sys.c, &dk, p, &grid, &cc).agreement_contingent);
        if fail.is_none() && ak < 0.99 {
            fail = Some((
                p.clone(),
                format!("T_∂K and its adjacent cone differ (agreement {:.3})", ak),
            ));
        }
        if fail.is_none() && ac < 0.99 {
            fail = Some((
                p.clone(),
                format!("T_C and its adjacent cone differ (agreement {:.3})", ac),
            ));
        }
        let tables = dagger_tables(sys, p, cfg, idx as u64);
        match tables.iter().find(|t| t.bounded) {
            Some(t) => alpha_needed = alpha_needed.max(t.alpha),
            None => {
                let all_unavailable = tables.iter().all(|t| {
                    t.rows
                        .iter()
                        .all(|r| r.pairs == 0 || r.unavailable == r.pairs)
                });
                if all_unavailable {
                    unsure.push((p.clone(), "cones unavailable at sampled pairs".into()));
                } else if fail.is_none() {
                    let last = tables.last().unwrap();
                    let worst = last.rows.iter().filter_map(|r| r.max_c).fold(0.0, f64::max);
                    fail = Some((
                        p.clone(),
                        format!(
                            "transversality constant diverges as the scale shrinks (c up to {:.3e}, α up to {})",
                            worst, last.alpha
                        ),
                    ));
                }
            }
        }
        rep.dagger.extend(tables);
    }
    rep.check = if let Some((x, detail)) = fail {
        Check::Fails { x, v: None, detail }
    } else if !unsure.is_empty() {
        Check::Inconclusive {
            reason: unsure[0].1.clone(),
            witnesses: unsure.into_iter().map(|(x, _)| x).collect(),
        }
    } else {
        rep.alpha = Some(alpha_needed);
        Check::Holds
    };
    rep
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrStatus {
    Plausible,
    Implausible,
    Skipped,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrReport {
    pub status: PrStatus,
    /// Per critical point: `∂K ∩ int(C)` was found at every radius.
    pub approachable: Vec<bool>,
    /// Per critical point and radius: fraction of grid directions where
    /// the contingent cone of `K` at nearby points differs from the one at
    /// the critical point.
    pub fractions: Vec<Vec<f64>>,
    pub detail: String,
}

fn contingent_profile(s: &SetExpr, x: &[f64], grid: &[Vec<f64>], cc: &ConeConfig) -> Vec<bool> {
    grid.iter()
        .map(|v| contingent_and_adjacent(s, x, v, cc).0.is_yes())
        .collect()
}

/// Approachability of critical points from `∂K ∩ int(C)` and a continuity
/// proxy for the contingent cone of `K` along the radius ladder.
pub fn check_pr_heuristic(sys: &System, points: &[Vec<f64>], cfg: &VerifyConfig) -> PrReport {
    if points.is_empty() {
        return PrReport {
            status: PrStatus::Skipped,
            approachable: Vec::new(),
            fractions: Vec::new(),
            detail: "no critical points".into(),
        };
    }
    let cc = cfg.cone();
    let grid = direction_grid(sys.f.dim, cfg.pr_grid, cfg.seed);
    let mut approachable = Vec::new();
    let mut fractions = Vec::new();
    let mut ok = true;
    let mut detail = String::new();
    for (idx, p) in points.iter().enumerate() {
        let base = contingent_profile(&sys.k, p, &grid, &cc);
        let mut reach = true;
        let mut fr = Vec::new();
        for (ri, &r) in cfg.pr_radii.iter().enumerate() {
            let salt = cfg.seed ^ PR_TAG ^ ((idx as u64) << 16) ^ ri as u64;
            let bx = BoxRegion::around(p, r);
            let near_int: Vec<Vec<f64>> = sample_relative_set(
                &Region::BoundaryOf(sys.k.clone()),
                &Region::Set(sys.c.clone()),
                RelativeMode::AIntB,
                &bx,
                3,
                cfg.tol,
                cfg.margin.min(r / 10.0),
                salt,
            )
            .into_iter()
            .filter(|q| dist(q, p) <= r)
            .collect();
            if near_int.is_empty() {
                reach = false;
            }
            let near: Vec<Vec<f64>> = sample_boundary(&sys.k, &bx, 6, cfg.tol, salt)
                .into_iter()
                .filter(|q| dist(q, p) <= r && dist(q, p) > 10.0 * cfg.tol)
                .collect();
            let worst = near
                .iter()
                .map(|q| {
                    let prof = contingent_profile(&sys.k, q, &grid, &cc);
                    let diff = prof.iter().zip(&base).filter(|(a, b)| a != b).count();
                    diff as f64 / grid.len().max(1) as f64
                })
                .fold(0.0, f64::max);
            fr.push(worst);
        }
        let mut reasons = Vec::new();
        if !reach {
            reasons.push(format!(
                "∂K∩int(C) does not approach {:?} at every radius",
                p
            ));
        }
        if fr.last().is_some_and(|&f| f > cfg.pr_threshold) {
            reasons.push(format!(
                "contingent cone of K jumps at {:?}: {:.3} of directions differ at radius {:e}",
                p,
                fr.last().unwrap(),
                cfg.pr_radii.last().unwrap()
            ));
        }
        if !reasons.is_empty() {
            ok = false;
            detail = reasons.join("; ");
        }
        approachable.push(reach);
        fractions.push(fr);
    }
    PrReport {
        status: if ok {
            PrStatus::Plausible
        } else {
            PrStatus::Implausible
        },
        approachable,
        fractions,
        detail: if ok {
            "heuristic only; not a proof".into()
        } else {
            detail
        },
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FphiCheck {
    pub x0: Vec<f64>,
    pub selection: String,
    pub centers: Vec<Vec<f64>>,
    /// Per center: contingent to `∂K ∩ C` at the start.
    pub in_boundary_meet_c: Vec<bool>,
    /// Per center: contingent to `∂K \ int(C)` at the start.
    pub in_boundary_minus_int_c: Vec<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StarConsistency {
    /// Runs with the star property throughout and yet a violation.
    pub inconsistent: Vec<RunSummary>,
    pub checked: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictKind {
    Invariant,
    NotInvariant,
    Inapplicable,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinalVerdict {
    pub kind: VerdictKind,
    pub summary: String,
    pub empirical_violation: bool,
    pub exit_code: i32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub a1: Check,
    pub a2: Check,
    pub a3: Assumption3Report,
    pub pr_heuristic: PrReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerdictReport {
    pub standing: StandingReport,
    pub nagumo: NagumoReport,
    pub critical_set: CriticalSetEstimate,
    pub assumptions: AssumptionReport,
    pub empirical: EmpiricalReport,
    pub star_consistency: StarConsistency,
    pub fphi: Vec<FphiCheck>,
    pub verdict: FinalVerdict,
}

/// Initial points: critical points, explicit starts and samples of
/// `∂K ∩ C`.
pub fn simulation_starts(sys: &System, critical: &[Vec<f64>], cfg: &VerifyConfig) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = critical.to_vec();
    out.extend(cfg.starts.iter().cloned());
    let bd = sample_region(
        &Region::BoundaryOf(sys.k.clone()),
        &sys.bx,
        4 * cfg.empirical_starts,
        cfg.tol,
        cfg.seed ^ EMP_TAG,
    );
    out.extend(
        bd.into_iter()
            .filter(|q| sys.c.classify(q, cfg.tol) != Membership::Outside)
            .take(cfg.empirical_starts),
    );
    out
}

/// The configured selections, or one vertex selection per vertex.
pub fn selections(sys: &System, cfg: &VerifyConfig) -> Vec<Selection> {
    if cfg.selections.is_empty() {
        (0..sys.f.max_vertices()).map(Selection::Vertex).collect()
    } else {
        cfg.selections.clone()
    }
}

fn fmt_point(x: &[f64]) -> String {
    let parts: Vec<String> = x
        .iter()
        .map(|v| {
            let v = if v.abs() < 5e-7 { 0.0 } else { *v };
            format!("{:.3}", v)
        })
        .collect();
    format!("({})", parts.join(", "))
}

/// Simulates every selection from every start and, for violations
/// starting at critical points, estimates the initial-speed set.
pub fn empirical_section(
    sys: &System,
    pts: &[Vec<f64>],
    cfg: &VerifyConfig,
) -> (EmpiricalReport, Vec<FphiCheck>) {
    let sim = cfg.sim();
    let sels = selections(sys, cfg);
    let starts = simulation_starts(sys, pts, cfg);
    let mut empirical = EmpiricalReport {
        violation_tol: cfg.violation_tol,
        runs: Vec::new(),
        violations: Vec::new(),
    };
    let mut fphi = Vec::new();
    // Both targets are meets of boundaries; see `meet_levels`.
    let cc = ConeConfig {
        levels: cfg.meet_levels,
        ..cfg.cone()
    };
    let dk = sys.k.boundary();
    let dk_c = dk.and(&sys.c);
    let dk_not_int_c = dk.and(&sys.c.dual());
    for (si, x0) in starts.iter().enumerate() {
        for sel in &sels {
            match integrate(&sys.f, &sys.c, &sys.k, x0, sel, cfg.h, cfg.horizon, &sim) {
                Ok(traj) => {
                    let s = summarize(x0, sel, &traj, cfg.violation_tol);
                    if let Some(t) = s.first_exit_time {
                        empirical.violations.push(Violation {
                            x0: x0.clone(),
                            selection: s.selection.clone(),
                            first_exit_time: t,
                            max_dist_kc: s.max_dist_kc,
                        });
                        if si < pts.len() {
                            if let Ok(centers) = estimate_fphi(&traj, &Ladder::default()) {
                                let member = |set: &SetExpr, v: &[f64]| {
                                    cone_membership_numeric(set, x0, v, ConeKind::Contingent, &cc)
                                        .is_yes()
                                };
                                fphi.push(FphiCheck {
                                    x0: x0.clone(),
                                    selection: s.selection.clone(),
                                    in_boundary_meet_c: centers
                                        .iter()
                                        .map(|v| member(&dk_c, v))
                                        .collect(),
                                    in_boundary_minus_int_c: centers
                                        .iter()
                                        .map(|v| member(&dk_not_int_c, v))
                                        .collect(),
                                    centers,
                                });
                            }
                        }
                    }
                    empirical.runs.push(s);
                }
                Err(e) => empirical.runs.push(RunSummary {
                    x0: x0.clone(),
                    selection: sel.describe(),
                    end_reason: None,
                    end_time: 0.0,
                    max_dist_k: 0.0,
                    max_dist_kc: 0.0,
                    first_exit_time: None,
                    star_ok_throughout: false,
                    error: Some(e.to_string()),
                }),
            }
        }
    }
    (empirical, fphi)
}

/// Runs that keep the star property and still leave `K`, counted only
/// when the tangency condition holds.
pub fn star_consistency(
    nagumo: &NagumoReport,
    empirical: &EmpiricalReport,
    cfg: &VerifyConfig,
) -> StarConsistency {
    StarConsistency {
        inconsistent: if nagumo.check.holds() {
            empirical
                .runs
                .iter()
                .filter(|r| r.star_ok_throughout && r.max_dist_k > cfg.violation_tol)
                .cloned()
                .collect()
        } else {
            Vec::new()
        },
        checked: empirical.runs.len(),
    }
}

/// Runs every check in order and folds them into a verdict.
pub fn theorem_verdict(sys: &System, cfg: &VerifyConfig) -> VerdictReport {
    let standing = check_standing(sys, cfg);
    let nagumo = nagumo_check(sys, cfg.nagumo_samples, cfg);
    let critical = estimate_critical_set(
        sys,
        cfg.critical_candidates,
        &cfg.critical_radii,
        cfg.critical_budget,
        cfg,
    );
    let pts = &critical.points;
    let a1 = check_assumption1(sys, pts, cfg);
    let a2 = check_assumption2(sys, pts, cfg);
    let a3 = check_assumption3(sys, pts, cfg);
    let pr = check_pr_heuristic(sys, pts, cfg);

    let (empirical, fphi) = empirical_section(sys, pts, cfg);
    let star_consistency = star_consistency(&nagumo, &empirical, cfg);

    let violation = !empirical.violations.is_empty();
    let emp_text = match empirical.violations.first() {
        Some(v) => format!("empirical: violation from {}", fmt_point(&v.x0)),
        None => "empirical: no violation".to_string(),
    };
    let failing: Vec<&str> = [
        ("Assumption 1", &a1),
        ("Assumption 2", &a2),
        ("Assumption 3", &a3.check),
    ]
    .iter()
    .filter(|(_, c)| c.fails())
    .map(|(n, _)| *n)
    .collect();
    let unsure = !a1.holds() && !a1.fails()
        || !a2.holds() && !a2.fails()
        || !a3.check.holds() && !a3.check.fails();
    let (kind, head) = match &nagumo.check {
        Check::Fails { x, v, .. } => (
            VerdictKind::NotInvariant,
            format!(
                "not invariant (tangency condition fails at {} with v = {})",
                fmt_point(x),
                v.as_deref().map(fmt_point).unwrap_or_default()
            ),
        ),
        Check::Inconclusive { reason, .. } => (
            VerdictKind::Inconclusive,
            format!("inconclusive ({})", reason),
        ),
        Check::Holds if !failing.is_empty() => (
            VerdictKind::Inapplicable,
            format!("theorem inapplicable ({} fails)", failing.join(", ")),
        ),
        Check::Holds if unsure => (
            VerdictKind::Inconclusive,
            "inconclusive (an assumption check was inconclusive)".to_string(),
        ),
        Check::Holds => (VerdictKind::Invariant, "invariant".to_string()),
    };
    let mut summary = format!("{}; {}", head, emp_text);
    if kind == VerdictKind::Invariant && violation {
        summary.push_str(" (simulation disagrees with the checks)");
    }
    let exit_code = if violation || kind == VerdictKind::NotInvariant {
        1
    } else if kind == VerdictKind::Invariant {
        0
    } else {
        2
    };
    VerdictReport {
        standing,
        nagumo,
        critical_set: critical,
        assumptions: AssumptionReport {
            a1,
            a2,
            a3,
            pr_heuristic: pr,
        },
        empirical,
        star_consistency,
        fphi,
        verdict: FinalVerdict {
            kind,
            summary,
            empirical_violation: violation,
            exit_code,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::norm;

    fn example1() -> System {
        System::new(
            PolytopeMap::single(2, &[&["1", "0"]]).unwrap(),
            SetExpr::sublevel(2, "x2 - x1^2").unwrap(),
            SetExpr::intersection(vec![
                SetExpr::sublevel(2, "x1").unwrap(),
                SetExpr::sublevel(2, "-x2").unwrap(),
            ])
            .unwrap(),
            BoxRegion::cube(2, 1.0),
        )
        .unwrap()
    }

    #[test]
    fn nagumo_fails_for_outward_field() {
        let sys = System::new(
            PolytopeMap::single(2, &[&["0", "-1"]]).unwrap(),
            SetExpr::sublevel(2, "x1^2 + x2^2 - 100").unwrap(),
            SetExpr::sublevel(2, "-x2").unwrap(),
            BoxRegion::cube(2, 1.0),
        )
        .unwrap();
        let rep = nagumo_check(&sys, 10, &VerifyConfig::default());
        match rep.check {
            Check::Fails { v, .. } => assert_eq!(v.unwrap(), vec![0.0, -1.0]),
            other => panic!("{:?}", other),
        }
    }

    #[test]
    fn example1_critical_set_and_a1() {
        let sys = example1();
        let cfg = VerifyConfig::default();
        let crit = estimate_critical_set(&sys, 20, &cfg.critical_radii, 10_000, &cfg);
        assert_eq!(crit.points.len(), 1);
        assert!(norm(&crit.points[0]) < 1e-3);
        for (w, r) in crit.witnesses[0].iter().zip(&crit.radii_tested) {
            assert!(dist(w, &crit.points[0]) <= *r);
            assert_eq!(sys.k.classify(w, cfg.tol), Membership::Outside);
        }
        match check_assumption1(&sys, &crit.points, &cfg) {
            Check::Fails { v, .. } => assert_eq!(v.unwrap(), vec![1.0, 0.0]),
            other => panic!("{:?}", other),
        }
        assert!(check_assumption2(&sys, &crit.points, &cfg).holds());
    }

    #[test]
    fn zero_in_f_breaks_assumption2() {
        let mut sys = example1();
        sys.f = PolytopeMap::single(2, &[&["1", "0"], &["-1", "0"]]).unwrap();
        let a2 = check_assumption2(&sys, &[vec![0.0, 0.0]], &VerifyConfig::default());
        assert!(a2.fails());
    }

    #[test]
    fn nested_disks_have_no_critical_points() {
        let sys = System::new(
            PolytopeMap::single(2, &[&["0 - x2", "x1"]]).unwrap(),
            SetExpr::sublevel(2, "x1^2 + x2^2 - 4").unwrap(),
            SetExpr::sublevel(2, "x1^2 + x2^2 - 1").unwrap(),
            BoxRegion::cube(2, 2.5),
        )
        .unwrap();
        let cfg = VerifyConfig::default();
        let crit = estimate_critical_set(&sys, 20, &cfg.critical_radii, 1000, &cfg);
        assert!(crit.points.is_empty());
        assert_eq!(
            check_pr_heuristic(&sys, &crit.points, &cfg).status,
            PrStatus::Skipped
        );
    }

    #[test]
    fn min_c_for_perpendicular_half_planes() {
        // T_∂K = {v1 = 0}, T_C = {v2 <= 0}, x1 = (0, a), x2 = (b, 0)
        let a = AnalyticCone {
            pieces: vec![PolyCone {
                ineq: Vec::new(),
                eq: vec![vec![1.0, 0.0]],
            }],
            provenance: Vec::new(),
        };
        let b = AnalyticCone {
            pieces: vec![PolyCone {
                ineq: vec![vec![0.0, 1.0]],
                eq: Vec::new(),
            }],
            provenance: Vec::new(),
        };
        let c = min_c_for_cones(&a, &b, &[0.3, -0.2], 0.0, 0).unwrap();
        assert!((c - 1.0).abs() < 1e-12);
        let c5 = min_c_for_cones(&a, &b, &[0.3, -0.2], 0.5, 0).unwrap();
        assert!(c5 <= c && (c5 - 0.5).abs() < 1e-6);
    }

    #[test]
    fn bounded_trend_rule() {
        let row = |c: f64| DaggerRow {
            scale: 0.0,
            pairs: 1,
            unavailable: 0,
            max_c: Some(c),
            infeasible: 0,
            worst_pair: None,
        };
        let flat: Vec<DaggerRow> = [1.2, 1.1, 1.3, 1.0, 1.1, 1.05]
            .iter()
            .map(|&c| row(c))
            .collect();
        assert!(dagger_bounded(&flat, 100.0));
        let grow: Vec<DaggerRow> = [2.0, 4.0, 8.0, 16.0, 32.0, 64.0]
            .iter()
            .map(|&c| row(c))
            .collect();
        assert!(!dagger_bounded(&grow, 100.0));
    }
}
