//! Closed sets in R^n built from smooth sublevel sets.
//!
//! A [`SetExpr`] is a tree of leaves `{x : g(x) <= 0}` joined by finite
//! intersections and unions, so every value is closed. There is no
//! complement node; the boundary of a set is expressed as `S ∩ dual(S)`,
//! where `dual` negates every leaf and swaps intersections with unions.

mod project;
mod sample;

pub use project::{ProjectionConfig, ProjectionFailure, ProjectionResult, ProjectionStatus};
pub use sample::{
    certify_interior, sample_boundary, sample_region, sample_relative_set, Region, RelativeMode,
};

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use serde::{Deserialize, Serialize};

use crate::expr::{EvalError, Expr, ParseError};
use crate::linalg::Polyhedron;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GeometryError {
    Parse(ParseError),
    /// A field references `x{index+1}` in a set of dimension `dim`.
    VariableOutOfRange {
        index: usize,
        dim: usize,
    },
    DimensionMismatch {
        expected: usize,
        found: usize,
    },
    EmptyCombination,
    /// Set expressions may not contain `sin`, `cos` or `exp`.
    FunctionInField,
}

impl fmt::Display for GeometryError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeometryError::Parse(e) => write!(f, "{}", e),
            GeometryError::VariableOutOfRange { index, dim } => {
                write!(f, "x{} used in a set of dimension {}", index + 1, dim)
            }
            GeometryError::DimensionMismatch { expected, found } => {
                write!(
                    f,
                    "dimension mismatch: expected {}, found {}",
                    expected, found
                )
            }
            GeometryError::EmptyCombination => {
                f.write_str("intersection/union needs at least one child")
            }
            GeometryError::FunctionInField => {
                f.write_str("function calls are not allowed in set fields")
            }
        }
    }
}

impl From<ParseError> for GeometryError {
    fn from(e: ParseError) -> Self {
        GeometryError::Parse(e)
    }
}

/// A smooth scalar function together with its exact gradient and Hessian.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    pub dim: usize,
    pub expr: Expr,
    pub gradient: Vec<Expr>,
    hessian: Vec<Expr>,
    affine: Option<(Vec<f64>, f64)>,
}

impl ScalarField {
    pub fn new(dim: usize, expr: Expr) -> Result<Self, GeometryError> {
        if let Some(i) = expr.max_var() {
            if i >= dim {
                return Err(GeometryError::VariableOutOfRange { index: i, dim });
            }
        }
        if expr.has_functions() {
            return Err(GeometryError::FunctionInField);
        }
        let gradient: Vec<Expr> = (0..dim).map(|i| expr.derivative(i)).collect();
        let mut hessian = Vec::with_capacity(dim * dim);
        for g in &gradient {
            for j in 0..dim {
                hessian.push(g.derivative(j));
            }
        }
        let affine = expr.affine(dim);
        Ok(Self {
            dim,
            expr,
            gradient,
            hessian,
            affine,
        })
    }

    pub fn parse(dim: usize, src: &str) -> Result<Self, GeometryError> {
        Self::new(dim, Expr::parse(src)?)
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64, EvalError> {
        self.expr.eval(x)
    }

    pub fn grad(&self, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        if let Some((a, _)) = &self.affine {
            return Ok(a.clone());
        }
        self.gradient.iter().map(|g| g.eval(x)).collect()
    }

    /// Row-major `n x n` Hessian.
    pub fn hess(&self, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        if self.affine.is_some() {
            return Ok(vec![0.0; self.dim * self.dim]);
        }
        self.hessian.iter().map(|h| h.eval(x)).collect()
    }

    /// `(a, b)` with `g(x) = a·x + b`, when the field is affine.
    pub fn affine(&self) -> Option<&(Vec<f64>, f64)> {
        self.affine.as_ref()
    }

    pub fn negated(&self) -> ScalarField {
        let expr = Expr::neg(self.expr.clone());
        ScalarField {
            dim: self.dim,
            gradient: self.gradient.iter().map(|g| Expr::neg(g.clone())).collect(),
            hessian: self.hessian.iter().map(|h| Expr::neg(h.clone())).collect(),
            affine: self
                .affine
                .as_ref()
                .map(|(a, b)| (a.iter().map(|v| -v).collect(), -b)),
            expr,
        }
    }

    /// True when `other` is structurally (or, for affine fields, numerically) `-self`.
    fn is_negation_of(&self, other: &ScalarField) -> bool {
        if let (Some((a1, b1)), Some((a2, b2))) = (&self.affine, &other.affine) {
            return a1.iter().zip(a2).all(|(p, q)| p == &-q) && *b1 == -*b2;
        }
        other.expr == Expr::neg(self.expr.clone())
    }

    fn same_as(&self, other: &ScalarField) -> bool {
        if let (Some(p), Some(q)) = (&self.affine, &other.affine) {
            return p == q;
        }
        self.expr == other.expr
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Membership {
    Outside,
    Boundary,
    Inside,
}

/// Axis-aligned box `[lo_1, hi_1] x ... x [lo_n, hi_n]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxRegion {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxRegion {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        Self { lo, hi }
    }

    /// `[-r, r]^n`
    pub fn cube(dim: usize, r: f64) -> Self {
        Self {
            lo: vec![-r; dim],
            hi: vec![r; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (a, b))| *a <= *v && *v <= *b)
    }

    pub fn around(center: &[f64], r: f64) -> Self {
        Self {
            lo: center.iter().map(|c| c - r).collect(),
            hi: center.iter().map(|c| c + r).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SetNode {
    Sublevel(Arc<ScalarField>),
    Intersection(Vec<SetExpr>),
    Union(Vec<SetExpr>),
}

/// One conjunct of the disjunctive normal form: `g_i <= 0` and `h_j = 0`.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Conjunct {
    pub ineqs: Vec<Arc<ScalarField>>,
    pub eqs: Vec<Arc<ScalarField>>,
    /// Present when every field is affine.
    pub polyhedron: Option<Polyhedron>,
}

impl Conjunct {
    fn from_leaves(dim: usize, leaves: Vec<Arc<ScalarField>>) -> Conjunct {
        let mut ineqs: Vec<Arc<ScalarField>> = Vec::new();
        let mut eqs: Vec<Arc<ScalarField>> = Vec::new();
        for leaf in leaves {
            if eqs
                .iter()
                .any(|e| e.same_as(&leaf) || e.is_negation_of(&leaf))
            {
                continue;
            }
            if ineqs.iter().any(|e| e.same_as(&leaf)) {
                continue;
            }
            if let Some(pos) = ineqs.iter().position(|e| e.is_negation_of(&leaf)) {
                let paired = ineqs.remove(pos);
                eqs.push(paired);
                continue;
            }
            ineqs.push(leaf);
        }
        let polyhedron = if ineqs.iter().chain(&eqs).all(|f| f.affine().is_some()) {
            let mut p = Polyhedron::new(dim);
            for f in &ineqs {
                let (a, b) = f.affine().unwrap();
                p.ineq.push((a.clone(), -b));
            }
            for f in &eqs {
                let (a, b) = f.affine().unwrap();
                p.eq.push((a.clone(), -b));
            }
            Some(p)
        } else {
            None
        };
        Conjunct {
            ineqs,
            eqs,
            polyhedron,
        }
    }

    /// Exact (zero-tolerance) membership.
    pub fn contains_exact(&self, x: &[f64]) -> bool {
        self.ineqs.iter().all(|f| f.eval(x).is_ok_and(|v| v <= 0.0))
            && self.eqs.iter().all(|f| f.eval(x) == Ok(0.0))
    }

    /// Largest constraint violation, or `None` on evaluation failure.
    pub fn violation(&self, x: &[f64]) -> Option<f64> {
        let mut worst = 0.0_f64;
        for f in &self.ineqs {
            worst = worst.max(f.eval(x).ok()?);
        }
        for f in &self.eqs {
            worst = worst.max(f.eval(x).ok()?.abs());
        }
        Some(worst)
    }
}

/// Safety valve on distributing intersections over unions.
const MAX_CONJUNCTS: usize = 4096;

/// A closed subset of R^n.
#[derive(Clone, Debug)]
pub struct SetExpr {
    dim: usize,
    node: SetNode,
    dnf: Arc<Vec<Conjunct>>,
}

impl PartialEq for SetExpr {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.node == other.node
    }
}

impl SetExpr {
    pub fn leaf(field: ScalarField) -> SetExpr {
        let dim = field.dim;
        Self::build(dim, SetNode::Sublevel(Arc::new(field)))
    }

    /// `{x : g(x) <= 0}` from expression text.
    pub fn sublevel(dim: usize, src: &str) -> Result<SetExpr, GeometryError> {
        Ok(Self::leaf(ScalarField::parse(dim, src)?))
    }

    pub fn intersection(children: Vec<SetExpr>) -> Result<SetExpr, GeometryError> {
        let dim = Self::common_dim(&children)?;
        Ok(Self::build(dim, SetNode::Intersection(children)))
    }

    pub fn union(children: Vec<SetExpr>) -> Result<SetExpr, GeometryError> {
        let dim = Self::common_dim(&children)?;
        Ok(Self::build(dim, SetNode::Union(children)))
    }

    fn common_dim(children: &[SetExpr]) -> Result<usize, GeometryError> {
        let first = children.first().ok_or(GeometryError::EmptyCombination)?;
        for c in children {
            if c.dim != first.dim {
                return Err(GeometryError::DimensionMismatch {
                    expected: first.dim,
                    found: c.dim,
                });
            }
        }
        Ok(first.dim)
    }

    fn build(dim: usize, node: SetNode) -> SetExpr {
        let leaves = Self::dnf_leaves(&node);
        let dnf = leaves
            .into_iter()
            .map(|c| Conjunct::from_leaves(dim, c))
            .collect();
        SetExpr {
            dim,
            node,
            dnf: Arc::new(dnf),
        }
    }

    fn dnf_leaves(node: &SetNode) -> Vec<Vec<Arc<ScalarField>>> {
        match node {
            SetNode::Sublevel(f) => vec![vec![f.clone()]],
            SetNode::Union(children) => {
                let mut out = Vec::new();
                for c in children {
                    out.extend(Self::dnf_leaves(&c.node));
                }
                out.truncate(MAX_CONJUNCTS);
                out
            }
            SetNode::Intersection(children) => {
                let mut acc: Vec<Vec<Arc<ScalarField>>> = vec![Vec::new()];
                for c in children {
                    let part = Self::dnf_leaves(&c.node);
                    let mut next = Vec::with_capacity(acc.len() * part.len());
                    'outer: for a in &acc {
                        for p in &part {
                            if next.len() >= MAX_CONJUNCTS {
                                break 'outer;
                            }
                            let mut merged = a.clone();
                            merged.extend(p.iter().cloned());
                            next.push(merged);
                        }
                    }
                    acc = next;
                }
                acc
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn node(&self) -> &SetNode {
        &self.node
    }

    pub(crate) fn conjuncts(&self) -> &[Conjunct] {
        &self.dnf
    }

    /// True when every leaf is affine (the set is a finite union of polyhedra).
    pub fn is_polyhedral(&self) -> bool {
        self.dnf.iter().all(|c| c.polyhedron.is_some())
    }

    /// Leaf `inside` if `g < -tol`, `boundary` if `|g| <= tol`, else
    /// `outside`; intersections take the worst child, unions the best.
    pub fn membership(&self, x: &[f64], tol: f64) -> Result<Membership, EvalError> {
        match &self.node {
            SetNode::Sublevel(f) => {
                let g = f.eval(x)?;
                Ok(if g < -tol {
                    Membership::Inside
                } else if g.abs() <= tol {
                    Membership::Boundary
                } else {
                    Membership::Outside
                })
            }
            SetNode::Intersection(cs) => {
                let mut worst = Membership::Inside;
                for c in cs {
                    worst = worst.min(c.membership(x, tol)?);
                    if worst == Membership::Outside {
                        break;
                    }
                }
                Ok(worst)
            }
            SetNode::Union(cs) => {
                let mut best = Membership::Outside;
                for c in cs {
                    best = best.max(c.membership(x, tol)?);
                    if best == Membership::Inside {
                        break;
                    }
                }
                Ok(best)
            }
        }
    }

    /// Membership with evaluation failures read as `outside`.
    pub fn classify(&self, x: &[f64], tol: f64) -> Membership {
        self.membership(x, tol).unwrap_or(Membership::Outside)
    }

    /// `g(x) <= 0` semantics with no tolerance band.
    pub fn contains(&self, x: &[f64]) -> bool {
        self.classify(x, 0.0) != Membership::Outside
    }

    /// The closure of the complement: leaves negated, ∩ and ∪ swapped.
    pub fn dual(&self) -> SetExpr {
        match &self.node {
            SetNode::Sublevel(f) => Self::leaf(f.negated()),
            SetNode::Intersection(cs) => Self::build(
                self.dim,
                SetNode::Union(cs.iter().map(|c| c.dual()).collect()),
            ),
            SetNode::Union(cs) => Self::build(
                self.dim,
                SetNode::Intersection(cs.iter().map(|c| c.dual()).collect()),
            ),
        }
    }

    /// The topological boundary, as `S ∩ cl(R^n \ S)`.
    pub fn boundary(&self) -> SetExpr {
        Self::build(
            self.dim,
            SetNode::Intersection(vec![self.clone(), self.dual()]),
        )
    }

    pub fn and(&self, other: &SetExpr) -> SetExpr {
        Self::intersection(vec![self.clone(), other.clone()]).expect("dimensions agree")
    }

    /// All leaves in tree order.
    pub fn leaves(&self) -> Vec<Arc<ScalarField>> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves(&self, out: &mut Vec<Arc<ScalarField>>) {
        match &self.node {
            SetNode::Sublevel(f) => out.push(f.clone()),
            SetNode::Intersection(cs) | SetNode::Union(cs) => {
                for c in cs {
                    c.collect_leaves(out);
                }
            }
        }
    }

    /// Canonical text form, e.g. `intersection(sublevel(x1), sublevel(-(x2)))`.
    pub fn describe(&self) -> String {
        use alloc::format;
        match &self.node {
            SetNode::Sublevel(f) => format!("{{{} <= 0}}", f.expr),
            SetNode::Intersection(cs) | SetNode::Union(cs) => {
                let parts: Vec<String> = cs.iter().map(|c| c.describe()).collect();
                let op = if matches!(self.node, SetNode::Intersection(_)) {
                    " ∩ "
                } else {
                    " ∪ "
                };
                format!("({})", parts.join(op))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn example1_k() -> SetExpr {
        SetExpr::intersection(vec![
            SetExpr::sublevel(2, "x1").unwrap(),
            SetExpr::sublevel(2, "-x2").unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn membership_examples() {
        let k = example1_k();
        assert_eq!(
            k.membership(&[-1.0, 1.0], 1e-9).unwrap(),
            Membership::Inside
        );
        assert_eq!(
            k.membership(&[0.0, 0.0], 1e-9).unwrap(),
            Membership::Boundary
        );
        assert_eq!(
            k.membership(&[0.1, 0.0], 1e-9).unwrap(),
            Membership::Outside
        );
        let c = SetExpr::sublevel(2, "x2 - x1^2").unwrap();
        assert_eq!(
            c.membership(&[0.5, 0.25], 1e-9).unwrap(),
            Membership::Boundary
        );
    }

    #[test]
    fn boundary_of_quadrant_splits_into_two_rays() {
        let dk = example1_k().boundary();
        let conj = dk.conjuncts();
        assert_eq!(conj.len(), 2);
        assert!(conj.iter().all(|c| c.eqs.len() == 1 && c.ineqs.len() == 1));
        assert!(dk.contains(&[0.0, 0.5]));
        assert!(dk.contains(&[-0.5, 0.0]));
        assert!(!dk.contains(&[-0.5, 0.5]));
        assert!(!dk.contains(&[0.5, 0.0]));
    }

    #[test]
    fn union_boundary_skips_interior_seams() {
        let c = SetExpr::union(vec![
            SetExpr::sublevel(2, "x1").unwrap(),
            SetExpr::sublevel(2, "x2 + x1^2/2").unwrap(),
        ])
        .unwrap();
        let dc = c.boundary();
        assert!(dc.contains(&[0.0, 0.3]));
        assert_ne!(dc.classify(&[0.4, -0.08], 1e-12), Membership::Outside);
        assert!(!dc.contains(&[0.0, -0.3]));
        assert!(!dc.contains(&[-0.4, -0.08]));
    }

    #[test]
    fn dimension_checks() {
        assert!(matches!(
            SetExpr::sublevel(1, "x2"),
            Err(GeometryError::VariableOutOfRange { index: 1, dim: 1 })
        ));
        let a = SetExpr::sublevel(1, "x1").unwrap();
        let b = SetExpr::sublevel(2, "x1").unwrap();
        assert!(SetExpr::union(vec![a, b]).is_err());
        assert!(SetExpr::union(vec![]).is_err());
    }

    #[test]
    fn field_derivatives() {
        let f = ScalarField::parse(2, "x2 - x1^2").unwrap();
        assert_eq!(f.grad(&[0.5, 0.0]).unwrap(), vec![-1.0, 1.0]);
        assert_eq!(f.hess(&[0.5, 0.0]).unwrap(), vec![-2.0, 0.0, 0.0, 0.0]);
        assert!(f.affine().is_none());
        let n = f.negated();
        assert_eq!(n.eval(&[1.0, 3.0]).unwrap(), -2.0);
        assert!(f.is_negation_of(&n));
    }
}
