//! Polytope-valued maps `F(x) = conv{f_1(x), ..., f_m(x)}` selected by
//! guards, and the standing-assumption checks on them.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use serde::{Deserialize, Serialize};

use crate::expr::{guard_to_string, parse_guard, Comparison, EvalError, Expr, ParseError};
use crate::geometry::BoxRegion;
use crate::linalg::{dist, dot, sub};
use crate::rng;

const LIP_TAG: u64 = 0x11F5;
const CONT_TAG: u64 = 0xC0A7;
const COVER_TAG: u64 = 0xC0FE;

#[derive(Clone, Debug, PartialEq)]
pub enum DynamicsError {
    Parse(ParseError),
    Eval(EvalError),
    /// No guard fires at this point.
    Uncovered(Vec<f64>),
    Shape(String),
}

impl fmt::Display for DynamicsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DynamicsError::Parse(e) => write!(f, "{}", e),
            DynamicsError::Eval(e) => write!(f, "{}", e),
            DynamicsError::Uncovered(x) => write!(f, "no guard fires at {:?}", x),
            DynamicsError::Shape(s) => f.write_str(s),
        }
    }
}

impl From<EvalError> for DynamicsError {
    fn from(e: EvalError) -> Self {
        DynamicsError::Eval(e)
    }
}

impl From<ParseError> for DynamicsError {
    fn from(e: ParseError) -> Self {
        DynamicsError::Parse(e)
    }
}

/// Conjunction of comparisons; empty means `true`.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Guard {
    pub comparisons: Vec<Comparison>,
}

impl Guard {
    pub fn always() -> Self {
        Self::default()
    }

    pub fn parse(src: &str) -> Result<Self, ParseError> {
        Ok(Self {
            comparisons: parse_guard(src)?,
        })
    }

    pub fn fires(&self, x: &[f64]) -> Result<bool, EvalError> {
        for c in &self.comparisons {
            let v = c.diff.eval(x)?;
            let ok = if c.strict { v < 0.0 } else { v <= 0.0 };
            if !ok {
                return Ok(false);
            }
        }
        Ok(true)
    }

    fn max_var(&self) -> Option<usize> {
        self.comparisons
            .iter()
            .filter_map(|c| c.diff.max_var())
            .max()
    }
}

impl fmt::Display for Guard {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&guard_to_string(&self.comparisons))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Piece {
    pub guard: Guard,
    /// Each vertex is a vector field given componentwise.
    pub vertices: Vec<Vec<Expr>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolytopeMap {
    pub dim: usize,
    pub pieces: Vec<Piece>,
}

impl PolytopeMap {
    pub fn new(dim: usize, pieces: Vec<Piece>) -> Result<Self, DynamicsError> {
        if pieces.is_empty() {
            return Err(DynamicsError::Shape(
                "the map needs at least one piece".into(),
            ));
        }
        for (i, p) in pieces.iter().enumerate() {
            if p.vertices.is_empty() {
                return Err(DynamicsError::Shape(alloc::format!(
                    "piece {} has no vertices",
                    i
                )));
            }
            for v in &p.vertices {
                if v.len() != dim {
                    return Err(DynamicsError::Shape(alloc::format!(
                        "piece {}: vertex has {} components, expected {}",
                        i,
                        v.len(),
                        dim
                    )));
                }
                if v.iter()
                    .any(|e| e.max_var().is_some_and(|m| m >= dim) || e.has_functions())
                {
                    return Err(DynamicsError::Shape(alloc::format!(
                        "piece {}: vertex uses a variable beyond x{} or a function",
                        i,
                        dim
                    )));
                }
            }
            if p.guard.max_var().is_some_and(|m| m >= dim) {
                return Err(DynamicsError::Shape(alloc::format!(
                    "piece {}: guard uses a variable beyond x{}",
                    i,
                    dim
                )));
            }
        }
        Ok(Self { dim, pieces })
    }

    /// A single unguarded piece from vertex expression strings.
    pub fn single(dim: usize, vertices: &[&[&str]]) -> Result<Self, DynamicsError> {
        let vs = vertices
            .iter()
            .map(|v| {
                v.iter()
                    .map(|s| Expr::parse(s))
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(
            dim,
            vec![Piece {
                guard: Guard::always(),
                vertices: vs,
            }],
        )
    }

    /// Index of the first piece whose guard fires.
    pub fn piece_index(&self, x: &[f64]) -> Result<usize, DynamicsError> {
        for (i, p) in self.pieces.iter().enumerate() {
            if p.guard.fires(x)? {
                return Ok(i);
            }
        }
        Err(DynamicsError::Uncovered(x.to_vec()))
    }

    /// Vertex vectors of `F(x)`.
    pub fn evaluate(&self, x: &[f64]) -> Result<Vec<Vec<f64>>, DynamicsError> {
        let p = &self.pieces[self.piece_index(x)?];
        p.vertices
            .iter()
            .map(|v| v.iter().map(|e| e.eval(x)).collect::<Result<Vec<_>, _>>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(DynamicsError::from)
    }

    pub fn max_vertices(&self) -> usize {
        self.pieces
            .iter()
            .map(|p| p.vertices.len())
            .max()
            .unwrap_or(0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LipschitzEstimate {
    /// Upper-sided constant: smallest k with `s <= max + k|d|^2` over the
    /// sampled pairs.
    pub k_hat: f64,
    /// Constant for the symmetric form `s in [min - k|d|^2, max + k|d|^2]`.
    pub k_two_sided: f64,
    pub worst_pair: Option<(Vec<f64>, Vec<f64>)>,
    pub samples: usize,
}

/// Sampled estimate of the one-sided Lipschitz constant on a box. Each
/// constant is a max over pairs, so more samples never lower it.
pub fn check_one_sided_lipschitz(
    f: &PolytopeMap,
    bx: &BoxRegion,
    sample_count: usize,
    seed: u64,
) -> Result<LipschitzEstimate, DynamicsError> {
    let mut rng = rng::stream(seed, LIP_TAG);
    let mut k_hat = f64::NEG_INFINITY;
    let mut k_two = 0.0_f64;
    let mut worst = None;
    let mut used = 0;
    for _ in 0..sample_count {
        let x1 = rng::uniform_in_box(&mut rng, &bx.lo, &bx.hi);
        let x2 = rng::uniform_in_box(&mut rng, &bx.lo, &bx.hi);
        let d = sub(&x1, &x2);
        let d2 = dot(&d, &d);
        if d2 == 0.0 {
            continue;
        }
        let f1 = f.evaluate(&x1)?;
        let f2 = f.evaluate(&x2)?;
        let (lo, hi) = f2
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), w| {
                let s = dot(&d, w);
                (lo.min(s), hi.max(s))
            });
        used += 1;
        for u in &f1 {
            let s = dot(&d, u);
            let upper = (s - hi) / d2;
            if upper > k_hat {
                k_hat = upper;
                worst = Some((x1.clone(), x2.clone()));
            }
            k_two = k_two.max(upper).max((lo - s) / d2);
        }
    }
    Ok(LipschitzEstimate {
        k_hat: if k_hat.is_finite() { k_hat } else { 0.0 },
        k_two_sided: k_two,
        worst_pair: worst,
        samples: used,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuityWitness {
    pub x: Vec<f64>,
    pub h: f64,
    pub gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuityReport {
    pub samples: usize,
    pub ratio_threshold: f64,
    pub witnesses: Vec<ContinuityWitness>,
}

/// Hausdorff distance between two finite point sets.
pub fn hausdorff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let one = |p: &[Vec<f64>], q: &[Vec<f64>]| {
        p.iter()
            .map(|u| q.iter().map(|w| dist(u, w)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    one(a, b).max(one(b, a))
}

/// Looks for jumps of `F`: each sampled segment is halved 30 times,
/// keeping the half with the larger Hausdorff gap, and a witness is
/// reported when the final gap exceeds `ratio_threshold * |h|`.
pub fn check_continuity(
    f: &PolytopeMap,
    bx: &BoxRegion,
    sample_count: usize,
    ratio_threshold: f64,
    seed: u64,
) -> Result<ContinuityReport, DynamicsError> {
    let mut rng = rng::stream(seed, CONT_TAG);
    let mut witnesses: Vec<ContinuityWitness> = Vec::new();
    let span = bx
        .lo
        .iter()
        .zip(&bx.hi)
        .map(|(a, b)| b - a)
        .fold(0.0, f64::max);
    for _ in 0..sample_count {
        let mut a = rng::uniform_in_box(&mut rng, &bx.lo, &bx.hi);
        let dir = rng::uniform_on_sphere(&mut rng, f.dim);
        let mut b: Vec<f64> = a
            .iter()
            .zip(&dir)
            .map(|(p, d)| p + 0.1 * span * d)
            .collect();
        for (v, (lo, hi)) in b.iter_mut().zip(bx.lo.iter().zip(&bx.hi)) {
            *v = v.clamp(*lo, *hi);
        }
        let mut fa = f.evaluate(&a)?;
        let mut fb = f.evaluate(&b)?;
        for _ in 0..30 {
            let m: Vec<f64> = a.iter().zip(&b).map(|(p, q)| 0.5 * (p + q)).collect();
            let fm = f.evaluate(&m)?;
            if hausdorff(&fa, &fm) >= hausdorff(&fm, &fb) {
                b = m;
                fb = fm;
            } else {
                a = m;
                fa = fm;
            }
        }
        let h = dist(&a, &b);
        let gap = hausdorff(&fa, &fb);
        if h > 0.0
            && gap > ratio_threshold * h
            && gap > 1e-9
            && witnesses.iter().all(|w| dist(&w.x, &a) > 1e-6)
        {
            witnesses.push(ContinuityWitness { x: a, h, gap });
        }
    }
    Ok(ContinuityReport {
        samples: sample_count,
        ratio_threshold,
        witnesses,
    })
}

/// Sample points of the box where no guard fires.
pub fn check_guard_coverage(
    f: &PolytopeMap,
    bx: &BoxRegion,
    sample_count: usize,
    seed: u64,
) -> Vec<Vec<f64>> {
    let mut rng = rng::stream(seed, COVER_TAG);
    let mut out = Vec::new();
    for _ in 0..sample_count {
        let x = rng::uniform_in_box(&mut rng, &bx.lo, &bx.hi);
        if f.piece_index(&x).is_err() {
            out.push(x);
        }
    }
    out
}
