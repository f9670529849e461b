//! Box-restricted sampling of sets, boundaries and relative sets.

use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use super::{BoxRegion, Membership, ProjectionConfig, SetExpr};
use crate::linalg::dist;
use crate::rng;

const BOUNDARY_TAG: u64 = 0xB0DA;
const REGION_TAG: u64 = 0x5E7;
const MEET_TAG: u64 = 0x3EE7;

/// A set given either directly or as the boundary of a set.
#[derive(Clone, Debug, PartialEq)]
pub enum Region {
    Set(SetExpr),
    BoundaryOf(SetExpr),
}

impl Region {
    /// The region as a closed set.
    pub fn as_set(&self) -> SetExpr {
        match self {
            Region::Set(s) => s.clone(),
            Region::BoundaryOf(s) => s.boundary(),
        }
    }

    fn boundary_set(&self) -> SetExpr {
        match self {
            Region::Set(s) | Region::BoundaryOf(s) => s.boundary(),
        }
    }

    pub fn classify(&self, x: &[f64], tol: f64) -> Membership {
        match self {
            Region::Set(s) => s.classify(x, tol),
            Region::BoundaryOf(s) => match s.classify(x, tol) {
                Membership::Boundary => Membership::Boundary,
                _ => Membership::Outside,
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RelativeMode {
    /// `A ∩ int(B)`, interior certified with a margin.
    AIntB,
    /// `A \ B`
    AMinusB,
    /// `∂A ∩ ∂B`
    BoundaryMeet,
}

/// Points of the tolerance band of `∂S` found by bisecting segments whose
/// endpoints have opposite exact membership. Each result is the endpoint
/// on the `S` side, so it lies in `S` exactly.
pub fn sample_boundary(
    s: &SetExpr,
    bx: &BoxRegion,
    count: usize,
    tol: f64,
    seed: u64,
) -> Vec<Vec<f64>> {
    let mut rng = rng::stream(seed, BOUNDARY_TAG);
    let mut out = Vec::new();
    let budget = count.saturating_mul(400).max(1000);
    for _ in 0..budget {
        if out.len() >= count {
            break;
        }
        let a = rng::uniform_in_box(&mut rng, &bx.lo, &bx.hi);
        let b = rng::uniform_in_box(&mut rng, &bx.lo, &bx.hi);
        let (ia, ib) = (s.contains(&a), s.contains(&b));
        if ia == ib {
            continue;
        }
        let (mut inp, mut outp) = if ia { (a, b) } else { (b, a) };
        for _ in 0..200 {
            let mid: Vec<f64> = inp.iter().zip(&outp).map(|(p, q)| 0.5 * (p + q)).collect();
            if mid == inp || mid == outp {
                break;
            }
            if s.contains(&mid) {
                inp = mid;
            } else {
                outp = mid;
            }
        }
        if s.classify(&inp, tol) == Membership::Boundary {
            out.push(inp);
        }
    }
    out
}

/// Points of a region inside a box. Thin sets (no interior in the box)
/// are reached by projecting uniform points onto them.
pub fn sample_region(
    r: &Region,
    bx: &BoxRegion,
    count: usize,
    tol: f64,
    seed: u64,
) -> Vec<Vec<f64>> {
    match r {
        Region::BoundaryOf(s) => sample_boundary(s, bx, count, tol, seed),
        Region::Set(s) => {
            let mut rng = rng::stream(seed, REGION_TAG);
            let mut out = Vec::new();
            for _ in 0..count.saturating_mul(50).max(500) {
                if out.len() >= count {
                    return out;
                }
                let p = rng::uniform_in_box(&mut rng, &bx.lo, &bx.hi);
                if s.contains(&p) {
                    out.push(p);
                }
            }
            let cfg = ProjectionConfig {
                tol,
                seed,
                starts: 4,
                ..ProjectionConfig::default()
            };
            for _ in 0..count.saturating_mul(4) {
                if out.len() >= count {
                    break;
                }
                let p = rng::uniform_in_box(&mut rng, &bx.lo, &bx.hi);
                if let Ok(res) = s.project(&p, &cfg) {
                    for q in res.nearest {
                        if bx.contains(&q) && out.len() < count {
                            out.push(q);
                        }
                    }
                }
            }
            out
        }
    }
}

/// `p` is inside `s` and every probe at distance `margin` (axis directions
/// and, up to dimension 4, the cube diagonals) is not outside.
pub fn certify_interior(s: &SetExpr, p: &[f64], margin: f64, tol: f64) -> bool {
    if s.classify(p, tol) != Membership::Inside {
        return false;
    }
    let n = p.len();
    for i in 0..n {
        for sign in [-1.0, 1.0] {
            let mut q = p.to_vec();
            q[i] += sign * margin;
            if s.classify(&q, tol) == Membership::Outside {
                return false;
            }
        }
    }
    if n <= 4 {
        let scale = margin / (n as f64).sqrt();
        for mask in 0..(1u32 << n) {
            let q: Vec<f64> = (0..n)
                .map(|i| p[i] + if mask & (1 << i) != 0 { scale } else { -scale })
                .collect();
            if s.classify(&q, tol) == Membership::Outside {
                return false;
            }
        }
    }
    true
}

/// Samples of `A ∩ int(B)`, `A \ B` or `∂A ∩ ∂B` inside the box.
#[allow(clippy::too_many_arguments)]
pub fn sample_relative_set(
    a: &Region,
    b: &Region,
    mode: RelativeMode,
    bx: &BoxRegion,
    count: usize,
    tol: f64,
    margin: f64,
    seed: u64,
) -> Vec<Vec<f64>> {
    match mode {
        RelativeMode::AIntB => {
            let bset = b.as_set();
            sample_region(a, bx, count.saturating_mul(8), tol, seed)
                .into_iter()
                .filter(|p| certify_interior(&bset, p, margin, tol))
                .take(count)
                .collect()
        }
        RelativeMode::AMinusB => sample_region(a, bx, count.saturating_mul(8), tol, seed)
            .into_iter()
            .filter(|p| b.classify(p, tol) == Membership::Outside)
            .take(count)
            .collect(),
        RelativeMode::BoundaryMeet => {
            let meet = a.boundary_set().and(&b.boundary_set());
            let cfg = ProjectionConfig {
                tol,
                seed: seed ^ MEET_TAG,
                starts: 4,
                ..ProjectionConfig::default()
            };
            let mut starts = sample_boundary(&a_base(a), bx, count, tol, seed);
            starts.extend(sample_boundary(&a_base(b), bx, count, tol, seed ^ MEET_TAG));
            if starts.is_empty() {
                let mut rng = rng::stream(seed, MEET_TAG);
                starts = (0..count)
                    .map(|_| rng::uniform_in_box(&mut rng, &bx.lo, &bx.hi))
                    .collect();
            }
            let mut out: Vec<Vec<f64>> = Vec::new();
            for s in starts {
                let Ok(res) = meet.project(&s, &cfg) else {
                    continue;
                };
                for q in res.nearest {
                    if bx.contains(&q) && out.iter().all(|p| dist(p, &q) > 10.0 * tol) {
                        out.push(q);
                    }
                }
            }
            out.sort_by(|p, q| p.partial_cmp(q).unwrap_or(core::cmp::Ordering::Equal));
            out.truncate(count);
            out
        }
    }
}

fn a_base(r: &Region) -> SetExpr {
    match r {
        Region::Set(s) | Region::BoundaryOf(s) => s.clone(),
    }
}
