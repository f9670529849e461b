//! Euclidean projection onto a [`SetExpr`].
//!
//! The set is split into its DNF conjuncts and each conjunct is handled on
//! its own. Affine conjuncts get the exact polyhedral projection. Curved
//! conjuncts solve the KKT system with Newton's method over active-set
//! guesses, starting from `x` and from `starts` random points; when Newton
//! finds nothing from a start, a quadratic-penalty descent with a doubling
//! weight takes over and its result is polished by Newton on the
//! near-active constraints.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use serde::{Deserialize, Serialize};

use super::{Conjunct, ScalarField, SetExpr};
use crate::linalg::{axpy, dist, dot, for_each_subset, norm, solve};
use crate::rng;

const START_TAG: u64 = 0x5052_4f4a;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionConfig {
    /// Minimizers within `tol` of the best are all reported.
    pub tol: f64,
    /// Random restarts for curved conjuncts, drawn in a box of radius
    /// `2 * (distance upper bound)` around the query point.
    pub starts: usize,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            starts: 16,
            max_iter: 60,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProjectionStatus {
    ExactLeaf,
    MultistartNumeric,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionResult {
    pub nearest: Vec<Vec<f64>>,
    pub distance: f64,
    pub status: ProjectionStatus,
}

/// No feasible point was found: the set is empty or every start failed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ProjectionFailure;

impl fmt::Display for ProjectionFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("projection found no feasible point (set empty or all starts failed)")
    }
}

impl SetExpr {
    pub fn project(
        &self,
        x: &[f64],
        cfg: &ProjectionConfig,
    ) -> Result<ProjectionResult, ProjectionFailure> {
        let mut cands: Vec<(f64, Vec<f64>)> = Vec::new();
        let mut numeric = false;
        for conj in self.conjuncts() {
            if conj.contains_exact(x) {
                cands.push((0.0, x.to_vec()));
                continue;
            }
            if let Some(poly) = &conj.polyhedron {
                if let Some(y) = poly.project(x) {
                    cands.push((dist(&y, x), y));
                }
                continue;
            }
            numeric = true;
            curved_candidates(conj, x, cfg, &mut cands);
        }
        let best = cands.iter().map(|(d, _)| *d).fold(f64::INFINITY, f64::min);
        if !best.is_finite() {
            return Err(ProjectionFailure);
        }
        cands.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(core::cmp::Ordering::Equal));
        let mut nearest: Vec<Vec<f64>> = Vec::new();
        for (d, y) in cands {
            if d > best + cfg.tol {
                break;
            }
            if nearest.iter().all(|p| dist(p, &y) > 10.0 * cfg.tol) {
                nearest.push(y);
            }
        }
        Ok(ProjectionResult {
            nearest,
            distance: best,
            status: if numeric {
                ProjectionStatus::MultistartNumeric
            } else {
                ProjectionStatus::ExactLeaf
            },
        })
    }

    /// Distance from `x`, or `None` when projection fails.
    pub fn distance(&self, x: &[f64], cfg: &ProjectionConfig) -> Option<f64> {
        if self.contains(x) {
            return Some(0.0);
        }
        self.project(x, cfg).ok().map(|r| r.distance)
    }
}

fn feas_tol(y: &[f64]) -> f64 {
    1e-10 * (1.0 + norm(y))
}

fn curved_candidates(
    conj: &Conjunct,
    x: &[f64],
    cfg: &ProjectionConfig,
    out: &mut Vec<(f64, Vec<f64>)>,
) {
    let before = out.len();
    newton_from(conj, x, x, cfg, out);
    if out.len() == before {
        penalty_from(conj, x, x, cfg, out);
    }
    let ub = out[before..]
        .iter()
        .map(|(d, _)| *d)
        .fold(f64::INFINITY, f64::min);
    let radius = if ub.is_finite() && ub > 0.0 {
        2.0 * ub
    } else {
        2.0
    };
    let mut rng = rng::stream(cfg.seed, START_TAG);
    let n = x.len();
    let lo: Vec<f64> = x.iter().map(|v| v - radius).collect();
    let hi: Vec<f64> = x.iter().map(|v| v + radius).collect();
    for _ in 0..cfg.starts {
        let y0 = rng::uniform_in_box(&mut rng, &lo, &hi);
        debug_assert_eq!(y0.len(), n);
        let mark = out.len();
        newton_from(conj, x, &y0, cfg, out);
        if out.len() == mark {
            penalty_from(conj, x, &y0, cfg, out);
        }
    }
}

/// Newton-KKT from `y0` over every active-set guess `eqs ∪ S`.
fn newton_from(
    conj: &Conjunct,
    x: &[f64],
    y0: &[f64],
    cfg: &ProjectionConfig,
    out: &mut Vec<(f64, Vec<f64>)>,
) {
    let n = x.len();
    let k = conj.eqs.len();
    if k > n {
        return;
    }
    for_each_subset(conj.ineqs.len(), n - k, |subset| {
        if k + subset.len() == 0 {
            return false;
        }
        let active: Vec<&ScalarField> = conj
            .eqs
            .iter()
            .map(|f| &**f)
            .chain(subset.iter().map(|&i| &*conj.ineqs[i]))
            .collect();
        if let Some((y, mu)) = newton_kkt(x, y0, &active, cfg.max_iter) {
            let ok_mult = mu[k..].iter().all(|&m| m >= -1e-9);
            if ok_mult && conj.violation(&y).is_some_and(|v| v <= feas_tol(&y)) {
                out.push((dist(&y, x), y));
            }
        }
        false
    });
}

/// Solves `y - x + J(y)^T mu = 0`, `g(y) = 0` by damped Newton.
fn newton_kkt(
    x: &[f64],
    y0: &[f64],
    active: &[&ScalarField],
    max_iter: usize,
) -> Option<(Vec<f64>, Vec<f64>)> {
    let n = x.len();
    let m = active.len();
    let size = n + m;
    let mut y = y0.to_vec();

    let residual = |y: &[f64], mu: &[f64]| -> Option<(Vec<f64>, Vec<Vec<f64>>)> {
        let mut grads = Vec::with_capacity(m);
        let mut r = vec![0.0; size];
        for i in 0..n {
            r[i] = y[i] - x[i];
        }
        for (j, f) in active.iter().enumerate() {
            let g = f.grad(y).ok()?;
            for i in 0..n {
                r[i] += mu[j] * g[i];
            }
            r[n + j] = f.eval(y).ok()?;
            grads.push(g);
        }
        Some((r, grads))
    };

    // least-squares multiplier guess
    let mut mu = vec![0.0; m];
    {
        let grads: Option<Vec<Vec<f64>>> = active.iter().map(|f| f.grad(&y).ok()).collect();
        let grads = grads?;
        let mut gm = vec![0.0; m * m];
        let mut rhs = vec![0.0; m];
        let d: Vec<f64> = y.iter().zip(x).map(|(a, b)| a - b).collect();
        for i in 0..m {
            for j in 0..m {
                gm[i * m + j] = dot(&grads[i], &grads[j]);
            }
            rhs[i] = -dot(&grads[i], &d);
        }
        if let Some(sol) = solve(&gm, &rhs) {
            mu = sol;
        }
    }

    let scale = 1.0 + norm(x);
    let (mut r, mut grads) = residual(&y, &mu)?;
    let mut rn = norm(&r);
    for _ in 0..max_iter {
        if rn <= 1e-15 * scale {
            break;
        }
        let mut mat = vec![0.0; size * size];
        for i in 0..n {
            mat[i * size + i] = 1.0;
        }
        for (j, f) in active.iter().enumerate() {
            if mu[j] != 0.0 {
                let h = f.hess(&y).ok()?;
                for a in 0..n {
                    for b in 0..n {
                        mat[a * size + b] += mu[j] * h[a * n + b];
                    }
                }
            }
            for i in 0..n {
                mat[i * size + n + j] = grads[j][i];
                mat[(n + j) * size + i] = grads[j][i];
            }
        }
        let neg: Vec<f64> = r.iter().map(|v| -v).collect();
        let step = solve(&mat, &neg)?;
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let ny = axpy(&y, alpha, &step[..n]);
            let nmu = axpy(&mu, alpha, &step[n..]);
            if let Some((nr, ng)) = residual(&ny, &nmu) {
                let nn = norm(&nr);
                if nn < (1.0 - 1e-4 * alpha) * rn {
                    y = ny;
                    mu = nmu;
                    r = nr;
                    grads = ng;
                    rn = nn;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if rn <= 1e-9 * scale {
        Some((y, mu))
    } else {
        None
    }
}

/// Quadratic-penalty descent with weight doubling from 1 to 1e12, then a
/// Newton polish on the near-active constraints.
fn penalty_from(
    conj: &Conjunct,
    x: &[f64],
    y0: &[f64],
    cfg: &ProjectionConfig,
    out: &mut Vec<(f64, Vec<f64>)>,
) {
    let n = x.len();
    let phi = |y: &[f64], w: f64| -> Option<f64> {
        let mut s = 0.5 * dot(&crate::linalg::sub(y, x), &crate::linalg::sub(y, x));
        for f in &conj.ineqs {
            let g = f.eval(y).ok()?;
            if g > 0.0 {
                s += 0.5 * w * g * g;
            }
        }
        for f in &conj.eqs {
            let g = f.eval(y).ok()?;
            s += 0.5 * w * g * g;
        }
        Some(s)
    };
    let mut y = y0.to_vec();
    let mut w = 1.0;
    while w <= 1e12 {
        for _ in 0..cfg.max_iter {
            let Some(f0) = phi(&y, w) else { return };
            let mut grad: Vec<f64> = y.iter().zip(x).map(|(a, b)| a - b).collect();
            let mut h = vec![0.0; n * n];
            for i in 0..n {
                h[i * n + i] = 1.0;
            }
            let terms = conj
                .ineqs
                .iter()
                .map(|f| (f, false))
                .chain(conj.eqs.iter().map(|f| (f, true)));
            for (f, is_eq) in terms {
                let Ok(g) = f.eval(&y) else { return };
                if !is_eq && g <= 0.0 {
                    continue;
                }
                let Ok(dg) = f.grad(&y) else { return };
                for i in 0..n {
                    grad[i] += w * g * dg[i];
                    for j in 0..n {
                        h[i * n + j] += w * dg[i] * dg[j];
                    }
                }
            }
            let neg: Vec<f64> = grad.iter().map(|v| -v).collect();
            let Some(step) = solve(&h, &neg) else { break };
            let slope = dot(&grad, &step);
            let mut alpha = 1.0;
            let mut moved = false;
            for _ in 0..40 {
                let ny = axpy(&y, alpha, &step);
                if let Some(f1) = phi(&ny, w) {
                    if f1 <= f0 + 1e-4 * alpha * slope {
                        y = ny;
                        moved = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !moved || alpha * norm(&step) < 1e-10 {
                break;
            }
        }
        w *= 2.0;
    }

    // Polish: Newton on subsets of the near-active constraints.
    let near: Vec<usize> = conj
        .ineqs
        .iter()
        .enumerate()
        .filter(|(_, f)| f.eval(&y).is_ok_and(|g| g > -1e-6))
        .map(|(i, _)| i)
        .collect();
    let k = conj.eqs.len();
    let mut polished = false;
    if k <= n {
        for_each_subset(near.len(), n - k, |subset| {
            if k + subset.len() == 0 {
                return false;
            }
            let active: Vec<&ScalarField> = conj
                .eqs
                .iter()
                .map(|f| &**f)
                .chain(subset.iter().map(|&i| &*conj.ineqs[near[i]]))
                .collect();
            if let Some((p, mu)) = newton_kkt(x, &y, &active, cfg.max_iter) {
                if mu[k..].iter().all(|&m| m >= -1e-9)
                    && conj.violation(&p).is_some_and(|v| v <= feas_tol(&p))
                {
                    out.push((dist(&p, x), p));
                    polished = true;
                    return true;
                }
            }
            false
        });
    }
    if !polished && conj.violation(&y).is_some_and(|v| v <= feas_tol(&y)) {
        out.push((dist(&y, x), y));
    }
}
