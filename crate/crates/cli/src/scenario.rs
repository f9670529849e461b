//! Scenario files: the JSON description of a system, its tolerances and
//! the checks to run.

use serde::{Deserialize, Serialize};
use thiserror::Error;
use viabilitykit_core::dynamics::{Guard, Piece};
use viabilitykit_core::expr::{guard_to_string, parse_guard, ParseError};
use viabilitykit_core::geometry::{GeometryError, SetNode};
use viabilitykit_core::{
    BoxRegion, Expr, PolytopeMap, ScalarField, Selection, SetExpr, System, VerifyConfig,
};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario JSON, line {line}, column {column}: {message}")]
    Json {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{field}, column {column}: {message}")]
    Expr {
        field: String,
        column: usize,
        message: String,
    },
    #[error("{0}")]
    Invalid(String),
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl ScenarioError {
    fn expr(field: impl Into<String>, e: ParseError) -> Self {
        ScenarioError::Expr {
            field: field.into(),
            column: e.column,
            message: e.message,
        }
    }

    fn geometry(field: &str, e: GeometryError) -> Self {
        match e {
            GeometryError::Parse(p) => Self::expr(field, p),
            other => ScenarioError::Invalid(format!("{}: {}", field, other)),
        }
    }
}

/// A set: a field string `g` meaning `{x : g(x) <= 0}`, or an
/// intersection (`all`) or union (`any`) of sets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SetSpec {
    Field(String),
    All { all: Vec<SetSpec> },
    Any { any: Vec<SetSpec> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PieceSpec {
    #[serde(default = "always")]
    pub guard: String,
    pub vertices: Vec<Vec<String>>,
}

fn always() -> String {
    "true".into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSpec {
    pub pieces: Vec<PieceSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub tol: f64,
    pub eps_cone: f64,
    pub margin: f64,
    pub violation_tol: f64,
    pub h: f64,
    pub horizon: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        let d = VerifyConfig::default();
        Self {
            tol: d.tol,
            eps_cone: d.eps_cone,
            margin: d.margin,
            violation_tol: d.violation_tol,
            h: d.h,
            horizon: d.horizon,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionSpec {
    /// Zero-based vertex index.
    Vertex(usize),
    /// One weight expression per vertex.
    Weights(Vec<String>),
}

impl Default for SelectionSpec {
    fn default() -> Self {
        SelectionSpec::Vertex(0)
    }
}

impl SelectionSpec {
    /// Parses `vertex:J` or `weights:e1,e2,...`.
    pub fn parse_flag(s: &str) -> Result<Self, ScenarioError> {
        let bad = || {
            ScenarioError::Invalid(format!(
                "bad selection '{}': use vertex:J or weights:e1,e2",
                s
            ))
        };
        let (kind, rest) = s.split_once(':').ok_or_else(bad)?;
        match kind.trim() {
            "vertex" => rest
                .trim()
                .parse()
                .map(SelectionSpec::Vertex)
                .map_err(|_| bad()),
            "weights" => Ok(SelectionSpec::Weights(
                rest.split(',').map(|w| w.trim().to_string()).collect(),
            )),
            _ => Err(bad()),
        }
    }

    pub fn compile(&self, field: &str) -> Result<Selection, ScenarioError> {
        match self {
            SelectionSpec::Vertex(j) => Ok(Selection::Vertex(*j)),
            SelectionSpec::Weights(ws) => ws
                .iter()
                .enumerate()
                .map(|(i, w)| {
                    Expr::parse(w)
                        .map_err(|e| ScenarioError::expr(format!("{}.weights[{}]", field, i), e))
                })
                .collect::<Result<Vec<_>, _>>()
                .map(Selection::ConvexWeights),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyticSpec {
    pub x0: Vec<f64>,
    #[serde(default)]
    pub selection: SelectionSpec,
    /// `φ(t)` per component, in the time grammar (`t`, `sin`, `cos`, `exp`).
    pub phi: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum CheckName {
    Standing,
    Nagumo,
    CriticalSet,
    Assumption1,
    Assumption2,
    Assumption3,
    Pr,
    Empirical,
}

impl CheckName {
    pub const ALL: [CheckName; 8] = [
        CheckName::Standing,
        CheckName::Nagumo,
        CheckName::CriticalSet,
        CheckName::Assumption1,
        CheckName::Assumption2,
        CheckName::Assumption3,
        CheckName::Pr,
        CheckName::Empirical,
    ];
}

fn all_checks() -> Vec<CheckName> {
    CheckName::ALL.to_vec()
}

fn is_all_checks(c: &[CheckName]) -> bool {
    c == CheckName::ALL
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub dim: usize,
    #[serde(rename = "F")]
    pub f: MapSpec,
    #[serde(rename = "C")]
    pub c: SetSpec,
    #[serde(rename = "K")]
    pub k: SetSpec,
    #[serde(rename = "box")]
    pub bx: BoxSpec,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub selections: Vec<SelectionSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub starts: Vec<Vec<f64>>,
    #[serde(default = "all_checks", skip_serializing_if = "is_all_checks")]
    pub checks: Vec<CheckName>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub analytic_solutions: Vec<AnalyticSpec>,
}

/// A scenario turned into core objects.
#[derive(Clone, Debug)]
pub struct Compiled {
    pub system: System,
    pub cfg: VerifyConfig,
    pub analytic: Vec<(Vec<f64>, Selection, Vec<Expr>)>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        serde_json::from_str(text).map_err(|e| ScenarioError::Json {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serialises")
    }

    pub fn compile(&self) -> Result<Compiled, ScenarioError> {
        let n = self.dim;
        if n == 0 {
            return Err(ScenarioError::Invalid("dim must be positive".into()));
        }
        let mut pieces = Vec::new();
        for (i, p) in self.f.pieces.iter().enumerate() {
            let field = format!("F.pieces[{}]", i);
            let guard = Guard {
                comparisons: parse_guard(&p.guard)
                    .map_err(|e| ScenarioError::expr(format!("{}.guard", field), e))?,
            };
            let mut vertices = Vec::new();
            for (j, v) in p.vertices.iter().enumerate() {
                let comps = v
                    .iter()
                    .enumerate()
                    .map(|(l, s)| {
                        Expr::parse(s).map_err(|e| {
                            ScenarioError::expr(format!("{}.vertices[{}][{}]", field, j, l), e)
                        })
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                vertices.push(comps);
            }
            pieces.push(Piece { guard, vertices });
        }
        let f =
            PolytopeMap::new(n, pieces).map_err(|e| ScenarioError::Invalid(format!("F: {}", e)))?;
        let c = compile_set(&self.c, n, "C")?;
        let k = compile_set(&self.k, n, "K")?;
        if self.bx.lo.len() != n || self.bx.hi.len() != n {
            return Err(ScenarioError::Invalid(format!(
                "box must have {} coordinates",
                n
            )));
        }
        if self
            .bx
            .lo
            .iter()
            .zip(&self.bx.hi)
            .any(|(a, b)| a.partial_cmp(b) != Some(std::cmp::Ordering::Less))
        {
            return Err(ScenarioError::Invalid(
                "box needs lo < hi in every coordinate".into(),
            ));
        }
        let bx = BoxRegion::new(self.bx.lo.clone(), self.bx.hi.clone());
        let system = System::new(f, c, k, bx).map_err(ScenarioError::Invalid)?;
        for (i, s) in self.starts.iter().enumerate() {
            if s.len() != n {
                return Err(ScenarioError::Invalid(format!(
                    "starts[{}] must have {} coordinates",
                    i, n
                )));
            }
        }
        let t = &self.tolerances;
        for (name, v) in [
            ("tol", t.tol),
            ("eps_cone", t.eps_cone),
            ("margin", t.margin),
            ("violation_tol", t.violation_tol),
            ("h", t.h),
            ("horizon", t.horizon),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ScenarioError::Invalid(format!(
                    "tolerances.{} must be positive",
                    name
                )));
            }
        }
        let selections = self
            .selections
            .iter()
            .enumerate()
            .map(|(i, s)| s.compile(&format!("selections[{}]", i)))
            .collect::<Result<Vec<_>, _>>()?;
        let cfg = VerifyConfig {
            tol: t.tol,
            eps_cone: t.eps_cone,
            margin: t.margin,
            seed: self.seed,
            violation_tol: t.violation_tol,
            h: t.h,
            horizon: t.horizon,
            starts: self.starts.clone(),
            selections,
            ..VerifyConfig::default()
        };
        let mut analytic = Vec::new();
        for (i, a) in self.analytic_solutions.iter().enumerate() {
            let field = format!("analytic_solutions[{}]", i);
            if a.x0.len() != n || a.phi.len() != n {
                return Err(ScenarioError::Invalid(format!(
                    "{} must have {} components",
                    field, n
                )));
            }
            let phi = a
                .phi
                .iter()
                .enumerate()
                .map(|(l, s)| {
                    Expr::parse_time(s)
                        .map_err(|e| ScenarioError::expr(format!("{}.phi[{}]", field, l), e))
                })
                .collect::<Result<Vec<_>, _>>()?;
            analytic.push((a.x0.clone(), a.selection.compile(&field)?, phi));
        }
        Ok(Compiled {
            system,
            cfg,
            analytic,
        })
    }

    /// The same scenario with every expression in canonical printed form.
    pub fn canonical(&self) -> Result<Scenario, ScenarioError> {
        let compiled = self.compile()?;
        let mut out = self.clone();
        for (spec, piece) in out.f.pieces.iter_mut().zip(&compiled.system.f.pieces) {
            spec.guard = guard_to_string(&piece.guard.comparisons);
            spec.vertices = piece
                .vertices
                .iter()
                .map(|v| v.iter().map(|e| e.to_string()).collect())
                .collect();
        }
        out.c = set_spec(&compiled.system.c);
        out.k = set_spec(&compiled.system.k);
        for (spec, (_, sel, phi)) in out.analytic_solutions.iter_mut().zip(&compiled.analytic) {
            spec.phi = phi.iter().map(|e| e.to_time_string()).collect();
            if let Selection::ConvexWeights(ws) = sel {
                spec.selection = SelectionSpec::Weights(ws.iter().map(|e| e.to_string()).collect());
            }
        }
        for (spec, sel) in out.selections.iter_mut().zip(&compiled.cfg.selections) {
            if let Selection::ConvexWeights(ws) = sel {
                *spec = SelectionSpec::Weights(ws.iter().map(|e| e.to_string()).collect());
            }
        }
        Ok(out)
    }
}

fn compile_set(spec: &SetSpec, n: usize, field: &str) -> Result<SetExpr, ScenarioError> {
    match spec {
        SetSpec::Field(src) => {
            let f = ScalarField::parse(n, src).map_err(|e| ScenarioError::geometry(field, e))?;
            Ok(SetExpr::leaf(f))
        }
        SetSpec::All { all } => {
            let parts = all
                .iter()
                .enumerate()
                .map(|(i, s)| compile_set(s, n, &format!("{}.all[{}]", field, i)))
                .collect::<Result<Vec<_>, _>>()?;
            SetExpr::intersection(parts).map_err(|e| ScenarioError::geometry(field, e))
        }
        SetSpec::Any { any } => {
            let parts = any
                .iter()
                .enumerate()
                .map(|(i, s)| compile_set(s, n, &format!("{}.any[{}]", field, i)))
                .collect::<Result<Vec<_>, _>>()?;
            SetExpr::union(parts).map_err(|e| ScenarioError::geometry(field, e))
        }
    }
}

fn set_spec(s: &SetExpr) -> SetSpec {
    match s.node() {
        SetNode::Sublevel(f) => SetSpec::Field(f.expr.to_string()),
        SetNode::Intersection(cs) => SetSpec::All {
            all: cs.iter().map(set_spec).collect(),
        },
        SetNode::Union(cs) => SetSpec::Any {
            any: cs.iter().map(set_spec).collect(),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = r#"{
        "name": "small",
        "dim": 2,
        "F": { "pieces": [ { "vertices": [["1", "0"]] } ] },
        "C": "x2 - x1^2",
        "K": { "all": ["x1", "-x2"] },
        "box": { "lo": [-1, -1], "hi": [1, 1] }
    }"#;

    #[test]
    fn parses_with_defaults() {
        let s = Scenario::from_json(SMALL).unwrap();
        assert_eq!(s.checks, CheckName::ALL.to_vec());
        assert_eq!(s.tolerances, Tolerances::default());
        let c = s.compile().unwrap();
        assert_eq!(
            c.system.f.evaluate(&[0.3, 0.3]).unwrap(),
            vec![vec![1.0, 0.0]]
        );
        assert!(c.system.k.contains(&[-0.5, 0.5]));
    }

    #[test]
    fn canonical_form_round_trips() {
        let s = Scenario::from_json(SMALL).unwrap().canonical().unwrap();
        let again = Scenario::from_json(&s.to_json()).unwrap();
        assert_eq!(again, s);
        assert_eq!(again.canonical().unwrap(), s);
    }

    #[test]
    fn json_errors_carry_positions() {
        let err = Scenario::from_json("{\n  \"name\": 3\n}").unwrap_err();
        match err {
            ScenarioError::Json { line, .. } => assert_eq!(line, 2),
            other => panic!("{:?}", other),
        }
    }

    #[test]
    fn expression_errors_name_the_field() {
        let bad = SMALL.replace("x2 - x1^2", "x2 - * x1");
        let err = Scenario::from_json(&bad).unwrap().compile().unwrap_err();
        match err {
            ScenarioError::Expr { field, column, .. } => {
                assert_eq!(field, "C");
                assert_eq!(column, 6);
            }
            other => panic!("{:?}", other),
        }
        let bad = SMALL.replace("x2 - x1^2", "x3");
        assert!(Scenario::from_json(&bad).unwrap().compile().is_err());
    }

    #[test]
    fn selection_flags() {
        assert_eq!(
            SelectionSpec::parse_flag("vertex:2").unwrap(),
            SelectionSpec::Vertex(2)
        );
        assert_eq!(
            SelectionSpec::parse_flag("weights: x1, 1").unwrap(),
            SelectionSpec::Weights(vec!["x1".into(), "1".into()])
        );
        assert!(SelectionSpec::parse_flag("random").is_err());
    }
}
