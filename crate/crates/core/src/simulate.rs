//! Fixed-step RK4 integration of explicit selections of `F`, with exit
//! detection on `C` and per-sample invariance monitors.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::dynamics::{DynamicsError, PolytopeMap};
use crate::expr::{EvalError, Expr};
use crate::geometry::{certify_interior, Membership, ProjectionConfig, ProjectionResult, SetExpr};
use crate::linalg::{axpy, dist, norm, scale, sub};

/// How a single vector is picked from `F(x)`.
#[derive(Clone, Debug, PartialEq)]
pub enum Selection {
    /// The j-th vertex (zero-based, clamped to the last vertex).
    Vertex(usize),
    /// Convex weights over the vertices; negative weights are clipped and
    /// the rest normalised. All-zero weights give the barycentre.
    ConvexWeights(Vec<Expr>),
    /// Closed-form solution `φ(t)`, one time-mode expression per component.
    Analytic(Vec<Expr>),
}

impl Selection {
    pub fn describe(&self) -> String {
        match self {
            Selection::Vertex(j) => alloc::format!("vertex:{}", j),
            Selection::ConvexWeights(w) => {
                let parts: Vec<String> = w.iter().map(|e| e.to_string()).collect();
                alloc::format!("weights:[{}]", parts.join(", "))
            }
            Selection::Analytic(p) => {
                let parts: Vec<String> = p.iter().map(|e| e.to_time_string()).collect();
                alloc::format!("analytic:[{}]", parts.join(", "))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SimError {
    StartOutsideC(Vec<f64>),
    Dynamics(DynamicsError),
    BadStep,
    Shape(String),
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimError::StartOutsideC(x) => write!(f, "initial point {:?} is outside C", x),
            SimError::Dynamics(e) => write!(f, "{}", e),
            SimError::BadStep => f.write_str("step and horizon must be positive and finite"),
            SimError::Shape(s) => f.write_str(s),
        }
    }
}

impl From<DynamicsError> for SimError {
    fn from(e: DynamicsError) -> Self {
        SimError::Dynamics(e)
    }
}

impl From<EvalError> for SimError {
    fn from(e: EvalError) -> Self {
        SimError::Dynamics(DynamicsError::Eval(e))
    }
}

/// The selected vector at `x`.
pub fn select(f: &PolytopeMap, sel: &Selection, x: &[f64]) -> Result<Vec<f64>, SimError> {
    let verts = f.evaluate(x)?;
    match sel {
        Selection::Vertex(j) => Ok(verts[(*j).min(verts.len() - 1)].clone()),
        Selection::ConvexWeights(ws) => {
            let mut w = Vec::with_capacity(verts.len());
            for i in 0..verts.len() {
                let wi = match ws.get(i) {
                    Some(e) => e.eval(x)?.max(0.0),
                    None => 0.0,
                };
                w.push(wi);
            }
            let total: f64 = w.iter().sum();
            if total <= 0.0 {
                w.iter_mut().for_each(|v| *v = 1.0);
            }
            let total: f64 = w.iter().sum();
            let mut out = alloc::vec![0.0; f.dim];
            for (wi, v) in w.iter().zip(&verts) {
                out = axpy(&out, wi / total, v);
            }
            Ok(out)
        }
        Selection::Analytic(_) => Err(SimError::Shape(
            "an analytic solution is not a selection of F(x)".into(),
        )),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndReason {
    Horizon,
    LeftC,
    BlowUp,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Monitor {
    /// `None` when the projection failed.
    pub dist_k: Option<f64>,
    pub dist_kc: Option<f64>,
    pub proj_dk: Option<ProjectionResult>,
    pub star_ok: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub derivs: Vec<Vec<f64>>,
    pub end_reason: EndReason,
    pub monitors: Vec<Monitor>,
}

impl Trajectory {
    pub fn duration(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    /// Linear interpolation of the state at time `t`.
    pub fn state_at(&self, t: f64) -> Option<Vec<f64>> {
        if self.times.is_empty() || t < 0.0 || t > self.duration() {
            return None;
        }
        let i = self.times.partition_point(|&s| s <= t);
        if i == 0 {
            return Some(self.states[0].clone());
        }
        if i >= self.times.len() {
            return self.states.last().cloned();
        }
        let (t0, t1) = (self.times[i - 1], self.times[i]);
        let w = if t1 > t0 { (t - t0) / (t1 - t0) } else { 0.0 };
        let d = sub(&self.states[i], &self.states[i - 1]);
        Some(axpy(&self.states[i - 1], w, &d))
    }

    /// Largest deviation from a reference solution over the grid.
    pub fn max_deviation(&self, reference: &[Expr]) -> Result<f64, EvalError> {
        let mut worst = 0.0_f64;
        for (t, x) in self.times.iter().zip(&self.states) {
            let r = reference
                .iter()
                .map(|e| e.eval(&[*t]))
                .collect::<Result<Vec<_>, _>>()?;
            worst = worst.max(dist(&r, x));
        }
        Ok(worst)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub tol: f64,
    /// Interior margin for the star property.
    pub margin: f64,
    pub blow_up: f64,
    pub projection: ProjectionConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            margin: 1e-3,
            blow_up: 1e6,
            projection: ProjectionConfig {
                starts: 4,
                ..ProjectionConfig::default()
            },
        }
    }
}

struct Monitors {
    k: SetExpr,
    kc: SetExpr,
    dk: SetExpr,
    c: SetExpr,
}

impl Monitors {
    fn new(c: &SetExpr, k: &SetExpr) -> Self {
        Self {
            k: k.clone(),
            kc: k.and(c),
            dk: k.boundary(),
            c: c.clone(),
        }
    }

    fn at(&self, x: &[f64], cfg: &SimConfig) -> Monitor {
        let p = &cfg.projection;
        let proj = self.dk.project(x, p).ok();
        let star_ok = proj.as_ref().is_some_and(|r| {
            r.nearest
                .iter()
                .any(|q| certify_interior(&self.c, q, cfg.margin, cfg.tol))
        });
        Monitor {
            dist_k: self.k.distance(x, p),
            dist_kc: self.kc.distance(x, p),
            proj_dk: proj,
            star_ok,
        }
    }
}

fn rk4(f: &PolytopeMap, sel: &Selection, x: &[f64], h: f64) -> Result<Vec<f64>, SimError> {
    let k1 = select(f, sel, x)?;
    let k2 = select(f, sel, &axpy(x, h / 2.0, &k1))?;
    let k3 = select(f, sel, &axpy(x, h / 2.0, &k2))?;
    let k4 = select(f, sel, &axpy(x, h, &k3))?;
    let mut out = x.to_vec();
    for i in 0..x.len() {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    Ok(out)
}

fn eval_vec(es: &[Expr], t: f64) -> Result<Vec<f64>, EvalError> {
    es.iter().map(|e| e.eval(&[t])).collect()
}

/// Integrates `x' = sel(x)` (or samples the analytic solution) on the grid
/// `t_i = i h` up to `t_end`, stopping at the first exit from `C`.
#[allow(clippy::too_many_arguments)]
pub fn integrate(
    f: &PolytopeMap,
    c: &SetExpr,
    k: &SetExpr,
    x0: &[f64],
    sel: &Selection,
    h: f64,
    t_end: f64,
    cfg: &SimConfig,
) -> Result<Trajectory, SimError> {
    if !(h > 0.0 && h.is_finite() && t_end >= 0.0 && t_end.is_finite()) {
        return Err(SimError::BadStep);
    }
    if x0.len() != f.dim {
        return Err(SimError::Shape(alloc::format!(
            "initial point has {} components, expected {}",
            x0.len(),
            f.dim
        )));
    }
    if c.classify(x0, cfg.tol) == Membership::Outside {
        return Err(SimError::StartOutsideC(x0.to_vec()));
    }
    let analytic = match sel {
        Selection::Analytic(es) => {
            if es.len() != f.dim {
                return Err(SimError::Shape(
                    "analytic solution has the wrong dimension".into(),
                ));
            }
            let ds: Vec<Expr> = es.iter().map(|e| e.derivative(0)).collect();
            Some((es.clone(), ds))
        }
        _ => None,
    };
    let deriv_at = |t: f64, x: &[f64]| -> Result<Vec<f64>, SimError> {
        match &analytic {
            Some((_, ds)) => Ok(eval_vec(ds, t)?),
            None => select(f, sel, x),
        }
    };
    let advance = |t: f64, x: &[f64], dt: f64| -> Result<Vec<f64>, SimError> {
        match &analytic {
            Some((es, _)) => Ok(eval_vec(es, t + dt)?),
            None => rk4(f, sel, x, dt),
        }
    };

    let mons = Monitors::new(c, k);
    let steps = (t_end / h - 1e-9).ceil().max(0.0) as usize;
    let start = match &analytic {
        Some((es, _)) => eval_vec(es, 0.0)?,
        None => x0.to_vec(),
    };
    let mut traj = Trajectory {
        times: alloc::vec![0.0],
        derivs: alloc::vec![deriv_at(0.0, &start)?],
        monitors: alloc::vec![mons.at(&start, cfg)],
        states: alloc::vec![start],
        end_reason: EndReason::Horizon,
    };
    for i in 0..steps {
        let t = i as f64 * h;
        let dt = (t_end - t).min(h);
        let x = traj.states.last().unwrap().clone();
        let next = advance(t, &x, dt)?;
        if !next.iter().all(|v| v.is_finite()) || norm(&next) > cfg.blow_up {
            traj.end_reason = EndReason::BlowUp;
            break;
        }
        if c.classify(&next, cfg.tol) == Membership::Outside {
            let (mut lo, mut hi) = (0.0, dt);
            let mut last = x.clone();
            while hi - lo > h * 1e-6 {
                let mid = 0.5 * (lo + hi);
                let y = advance(t, &x, mid)?;
                if c.classify(&y, cfg.tol) == Membership::Outside {
                    hi = mid;
                } else {
                    lo = mid;
                    last = y;
                }
            }
            if lo > 0.0 {
                traj.times.push(t + lo);
                traj.derivs.push(deriv_at(t + lo, &last)?);
                traj.monitors.push(mons.at(&last, cfg));
                traj.states.push(last);
            }
            traj.end_reason = EndReason::LeftC;
            break;
        }
        let tn = if i + 1 == steps {
            t_end
        } else {
            (i + 1) as f64 * h
        };
        traj.times.push(tn);
        traj.derivs.push(deriv_at(tn, &next)?);
        traj.monitors.push(mons.at(&next, cfg));
        traj.states.push(next);
    }
    Ok(traj)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ladder {
    pub t0: f64,
    pub rho: f64,
    pub levels: usize,
    pub cluster_eps: f64,
}

impl Default for Ladder {
    fn default() -> Self {
        Self {
            t0: 1e-2,
            rho: 0.5,
            levels: 10,
            cluster_eps: 1e-2,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TooShort {
    pub duration: f64,
    pub t0: f64,
}

impl fmt::Display for TooShort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "trajectory lasts {} but the ladder starts at {}",
            self.duration, self.t0
        )
    }
}

/// Limit points of the difference quotients `(φ(t_k) - φ(0)) / t_k` on the
/// ladder `t_k = t0 ρ^k`, clustered greedily from the finest scale.
pub fn estimate_fphi(traj: &Trajectory, ladder: &Ladder) -> Result<Vec<Vec<f64>>, TooShort> {
    if traj.duration() < ladder.t0 {
        return Err(TooShort {
            duration: traj.duration(),
            t0: ladder.t0,
        });
    }
    let x0 = &traj.states[0];
    // Each cluster is represented by its finest-scale quotient, the best
    // available estimate of the limit.
    let mut clusters: Vec<Vec<f64>> = Vec::new();
    for k in (0..ladder.levels).rev() {
        let t = ladder.t0 * ladder.rho.powi(k as i32);
        let Some(x) = traj.state_at(t) else { continue };
        let q = scale(&sub(&x, x0), 1.0 / t);
        if !clusters.iter().any(|c| dist(c, &q) <= ladder.cluster_eps) {
            clusters.push(q);
        }
    }
    Ok(clusters)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub x0: Vec<f64>,
    pub selection: String,
    pub end_reason: Option<EndReason>,
    pub end_time: f64,
    pub max_dist_k: f64,
    pub max_dist_kc: f64,
    /// `dist_K∩C` first exceeded the violation tolerance here.
    pub first_exit_time: Option<f64>,
    /// The star property held at every sample with `t > 0`.
    pub star_ok_throughout: bool,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub x0: Vec<f64>,
    pub selection: String,
    pub first_exit_time: f64,
    pub max_dist_kc: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalReport {
    pub violation_tol: f64,
    pub runs: Vec<RunSummary>,
    pub violations: Vec<Violation>,
}

impl EmpiricalReport {
    pub fn no_violation(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Summary of one trajectory against a violation tolerance.
pub fn summarize(x0: &[f64], sel: &Selection, traj: &Trajectory, violation_tol: f64) -> RunSummary {
    let mut s = RunSummary {
        x0: x0.to_vec(),
        selection: sel.describe(),
        end_reason: Some(traj.end_reason),
        end_time: traj.duration(),
        max_dist_k: 0.0,
        max_dist_kc: 0.0,
        first_exit_time: None,
        star_ok_throughout: true,
        error: None,
    };
    for (t, m) in traj.times.iter().zip(&traj.monitors) {
        if let Some(d) = m.dist_k {
            s.max_dist_k = s.max_dist_k.max(d);
        }
        if let Some(d) = m.dist_kc {
            s.max_dist_kc = s.max_dist_kc.max(d);
            if d > violation_tol && s.first_exit_time.is_none() {
                s.first_exit_time = Some(*t);
            }
        }
        if *t > 0.0 && !m.star_ok {
            s.star_ok_throughout = false;
        }
    }
    s
}

/// Integrates every `(x0, selection)` pair and collects the runs whose
/// distance to `K ∩ C` exceeds `violation_tol`.
#[allow(clippy::too_many_arguments)]
pub fn empirical_invariance(
    f: &PolytopeMap,
    c: &SetExpr,
    k: &SetExpr,
    runs: &[(Vec<f64>, Selection)],
    h: f64,
    t_end: f64,
    violation_tol: f64,
    cfg: &SimConfig,
) -> EmpiricalReport {
    let mut report = EmpiricalReport {
        violation_tol,
        runs: Vec::new(),
        violations: Vec::new(),
    };
    for (x0, sel) in runs {
        match integrate(f, c, k, x0, sel, h, t_end, cfg) {
            Ok(traj) => {
                let s = summarize(x0, sel, &traj, violation_tol);
                if let Some(t) = s.first_exit_time {
                    report.violations.push(Violation {
                        x0: x0.clone(),
                        selection: s.selection.clone(),
                        first_exit_time: t,
                        max_dist_kc: s.max_dist_kc,
                    });
                }
                report.runs.push(s);
            }
            Err(e) => report.runs.push(RunSummary {
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
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{Guard, Piece};
    use alloc::vec;

    fn example1() -> (PolytopeMap, SetExpr, SetExpr) {
        let f = PolytopeMap::single(2, &[&["1", "0"]]).unwrap();
        let c = SetExpr::sublevel(2, "x2 - x1^2").unwrap();
        let k = SetExpr::intersection(vec![
            SetExpr::sublevel(2, "x1").unwrap(),
            SetExpr::sublevel(2, "-x2").unwrap(),
        ])
        .unwrap();
        (f, c, k)
    }

    fn example2() -> (PolytopeMap, SetExpr, SetExpr) {
        let f = PolytopeMap::new(
            2,
            vec![
                Piece {
                    guard: Guard::parse("x1 <= 0").unwrap(),
                    vertices: vec![vec![Expr::constant(1.0), Expr::constant(0.0)]],
                },
                Piece {
                    guard: Guard::always(),
                    vertices: vec![vec![Expr::constant(1.0), Expr::parse("0 - x1").unwrap()]],
                },
            ],
        )
        .unwrap();
        let c = SetExpr::union(vec![
            SetExpr::sublevel(2, "x1").unwrap(),
            SetExpr::sublevel(2, "x2 + x1^2/2").unwrap(),
        ])
        .unwrap();
        let k = SetExpr::sublevel(2, "-x2").unwrap();
        (f, c, k)
    }

    #[test]
    fn example1_leaves_k_along_axis() {
        let (f, c, k) = example1();
        let tr = integrate(
            &f,
            &c,
            &k,
            &[0.0, 0.0],
            &Selection::Vertex(0),
            1e-3,
            0.5,
            &SimConfig::default(),
        )
        .unwrap();
        assert_eq!(tr.end_reason, EndReason::Horizon);
        assert_eq!(tr.times.len(), 501);
        for (t, (x, m)) in tr.times.iter().zip(tr.states.iter().zip(&tr.monitors)) {
            assert!((x[0] - t).abs() < 1e-12 && x[1] == 0.0);
            assert!((m.dist_k.unwrap() - t).abs() < 1e-6);
        }
        assert!(tr.monitors[1].dist_k.unwrap() > 1e-7);
        assert!(tr.monitors[1..].iter().all(|m| !m.star_ok));
    }

    #[test]
    fn example2_follows_parabola() {
        let (f, c, k) = example2();
        let tr = integrate(
            &f,
            &c,
            &k,
            &[0.0, 0.0],
            &Selection::Vertex(0),
            1e-3,
            0.5,
            &SimConfig::default(),
        )
        .unwrap();
        assert_eq!(tr.end_reason, EndReason::Horizon);
        for (t, (x, m)) in tr.times.iter().zip(tr.states.iter().zip(&tr.monitors)) {
            assert!((x[1] + t * t / 2.0).abs() < 1e-6);
            assert!((m.dist_k.unwrap() - t * t / 2.0).abs() < 1e-6);
        }
        let fphi = estimate_fphi(&tr, &Ladder::default()).unwrap();
        assert_eq!(fphi.len(), 1);
        assert!(dist(&fphi[0], &[1.0, 0.0]) < 1e-2);
    }

    #[test]
    fn exit_from_c_is_located() {
        let f = PolytopeMap::single(2, &[&["1", "0"]]).unwrap();
        let c = SetExpr::sublevel(2, "x1 - 0.25").unwrap();
        let k = c.clone();
        let tr = integrate(
            &f,
            &c,
            &k,
            &[0.0, 0.0],
            &Selection::Vertex(0),
            1e-2,
            1.0,
            &SimConfig::default(),
        )
        .unwrap();
        assert_eq!(tr.end_reason, EndReason::LeftC);
        assert!((tr.duration() - 0.25).abs() < 1e-7);
    }

    #[test]
    fn start_outside_c_is_an_error() {
        let (f, c, k) = example1();
        let r = integrate(
            &f,
            &c,
            &k,
            &[0.0, 1.0],
            &Selection::Vertex(0),
            1e-3,
            0.1,
            &SimConfig::default(),
        );
        assert!(matches!(r, Err(SimError::StartOutsideC(_))));
    }

    #[test]
    fn convex_weights_select_inside_hull() {
        let f = PolytopeMap::single(2, &[&["1", "0"], &["0", "1"]]).unwrap();
        let sel = Selection::ConvexWeights(vec![Expr::parse("x1").unwrap(), Expr::constant(-1.0)]);
        assert_eq!(select(&f, &sel, &[2.0, 0.0]).unwrap(), vec![1.0, 0.0]);
        assert_eq!(select(&f, &sel, &[-2.0, 0.0]).unwrap(), vec![0.5, 0.5]);
        assert_eq!(
            select(&f, &Selection::Vertex(7), &[0.0, 0.0]).unwrap(),
            vec![0.0, 1.0]
        );
    }

    #[test]
    fn stationary_fphi_is_zero() {
        let f = PolytopeMap::single(2, &[&["0", "0"]]).unwrap();
        let c = SetExpr::sublevel(2, "x1^2 + x2^2 - 4").unwrap();
        let tr = integrate(
            &f,
            &c,
            &c,
            &[0.5, 0.5],
            &Selection::Vertex(0),
            1e-3,
            0.05,
            &SimConfig::default(),
        )
        .unwrap();
        let fphi = estimate_fphi(&tr, &Ladder::default()).unwrap();
        assert_eq!(fphi, vec![vec![0.0, 0.0]]);
        let short = Ladder {
            t0: 1.0,
            ..Ladder::default()
        };
        assert!(estimate_fphi(&tr, &short).is_err());
    }

    #[test]
    fn empirical_examples() {
        let (f, c, k) = example2();
        let rep = empirical_invariance(
            &f,
            &c,
            &k,
            &[(vec![0.0, 0.0], Selection::Vertex(0))],
            1e-3,
            0.2,
            1e-4,
            &SimConfig::default(),
        );
        assert_eq!(rep.violations.len(), 1);
        assert!(rep.violations[0].first_exit_time <= 2.0 * (2e-4_f64).sqrt());
        assert!(!rep.runs[0].star_ok_throughout);

        let f = PolytopeMap::single(2, &[&["0 - x1", "0 - x2"]]).unwrap();
        let k = SetExpr::sublevel(2, "x1^2 + x2^2 - 1").unwrap();
        let c = SetExpr::sublevel(2, "x1^2 + x2^2 - 4").unwrap();
        let rep = empirical_invariance(
            &f,
            &c,
            &k,
            &[
                (vec![1.0, 0.0], Selection::Vertex(0)),
                (vec![0.0, -1.0], Selection::Vertex(0)),
            ],
            1e-2,
            1.0,
            1e-4,
            &SimConfig::default(),
        );
        assert!(rep.no_violation());
    }
}
