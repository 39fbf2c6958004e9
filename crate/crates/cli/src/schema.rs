//! Serde schema of scenario files.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default)]
    pub notes: Vec<String>,
    #[serde(default)]
    pub constants: BTreeMap<String, f64>,
    #[serde(default, rename = "manifold")]
    pub manifolds: Vec<ManifoldBlock>,
    #[serde(default, rename = "map")]
    pub maps: Vec<MapBlock>,
    #[serde(default, rename = "function")]
    pub functions: Vec<FunctionBlock>,
    #[serde(default, rename = "field")]
    pub fields: Vec<FieldBlock>,
    #[serde(default, rename = "complex_structure")]
    pub structures: Vec<StructureBlock>,
    #[serde(default, rename = "leaf")]
    pub leaves: Vec<LeafBlock>,
    #[serde(default)]
    pub samples: Vec<SampleBlock>,
    #[serde(default, rename = "geodesic")]
    pub geodesics: Vec<GeodesicBlock>,
    #[serde(default, rename = "check")]
    pub checks: Vec<CheckBlock>,
}

fn default_seed() -> u64 {
    7
}

fn default_tolerance() -> f64 {
    1e-8
}

/// Expression text; bare numbers are accepted for convenience.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Term {
    Number(f64),
    Text(String),
}

impl Term {
    pub fn text(&self) -> String {
        match self {
            Term::Number(x) => format!("{x:?}"),
            Term::Text(s) => s.clone(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifoldBlock {
    pub name: String,
    pub dim: Option<usize>,
    pub coords: Vec<String>,
    /// Row-major rows; omitted means Euclidean.
    pub metric: Option<Vec<Vec<Term>>>,
    #[serde(default)]
    pub domain: Vec<String>,
    /// Metric text as printed in the source, used under `--literal-metric`.
    pub literal_metric: Option<Vec<Vec<Term>>>,
    /// Values for the foreign symbols of `literal_metric`.
    #[serde(default)]
    pub literal_bindings: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapBlock {
    pub name: String,
    pub source: String,
    pub target: String,
    pub components: Vec<Term>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionBlock {
    pub name: String,
    pub manifold: String,
    pub expr: Term,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldBlock {
    pub name: String,
    pub manifold: String,
    pub components: Option<Vec<Term>>,
    /// Name of a function whose gradient is the field.
    pub gradient: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StructureBlock {
    pub name: String,
    pub manifold: String,
    pub matrix: Vec<Vec<Term>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeafKindText {
    Range,
    Normal,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeafBlock {
    pub name: String,
    pub manifold: String,
    pub kind: LeafKindText,
    pub params: Vec<String>,
    /// Over `[params..., target coordinates...]`.
    pub embedding: Vec<Term>,
    /// Parameter values of the base point, over the target coordinates.
    pub at: Vec<Term>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleBlock {
    pub name: String,
    pub manifold: String,
    pub points: Option<Vec<Vec<f64>>>,
    pub lo: Option<Vec<f64>>,
    pub hi: Option<Vec<f64>>,
    pub count: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveText {
    Geodesic,
    Line,
}

/// One geodesic, or a seeded family when `count` is set.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeodesicBlock {
    pub name: String,
    /// Integrate on this manifold; alternative to `source_curve`.
    pub manifold: Option<String>,
    /// Map used to decompose the velocity (and to push source curves forward).
    pub map: Option<String>,
    /// Push a source curve of this kind forward through `map`.
    pub source_curve: Option<CurveText>,
    pub start: Option<Vec<f64>>,
    pub velocity: Option<Vec<f64>>,
    /// Source point fixing the range subspace; `start` defaults to its image.
    pub anchor: Option<Vec<f64>>,
    /// Function `g` whose Clairaut invariant is written to the trace.
    pub g: Option<String>,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    #[serde(default = "default_step")]
    pub step: f64,
    /// Keep every k-th sample.
    #[serde(default = "default_every")]
    pub record_every: usize,
    pub count: Option<usize>,
    pub start_lo: Option<Vec<f64>>,
    pub start_hi: Option<Vec<f64>>,
    pub velocity_lo: Option<Vec<f64>>,
    pub velocity_hi: Option<Vec<f64>>,
}

fn default_t_end() -> f64 {
    1.0
}

fn default_step() -> f64 {
    1e-3
}

fn default_every() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Pass,
    Fail,
    HypothesisNotMet,
}

impl Outcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            Outcome::Pass => "pass",
            Outcome::Fail => "fail",
            Outcome::HypothesisNotMet => "hypothesis-not-met",
        }
    }
}

/// A single outcome for every report of a check, or one per report name.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Expect {
    All(Outcome),
    PerReport(BTreeMap<String, Outcome>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum LambdaText {
    Value(f64),
    Word(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    RiemannianMap,
    SecondFundamentalForm,
    Umbilical,
    Tension,
    ClairautCertificate,
    Harmonicity,
    ClairautInvariant,
    GeodesicConditions,
    Killing,
    Soliton,
    SolitonFit,
    TraceLemma,
    RicciDecomposition,
    ScalarCurvature,
    EinsteinLeaf,
    ConformalKilling,
    Kaehler,
    AntiInvariance,
    BcDecomposition,
    AntiInvariantGeodesic,
    ClairautAntiInvariant,
    Dichotomy,
    RangeTotallyGeodesic,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckBlock {
    pub name: String,
    pub kind: CheckKind,
    pub expect: Option<Expect>,
    /// Replaces `expect` under `--literal-metric`.
    pub expect_literal: Option<Expect>,
    pub tol: Option<f64>,
    #[serde(default)]
    pub notes: Vec<String>,
    pub map: Option<String>,
    pub manifold: Option<String>,
    pub samples: Option<String>,
    pub g: Option<String>,
    pub field: Option<String>,
    pub structure: Option<String>,
    #[serde(default)]
    pub geodesics: Vec<String>,
    pub lambda: Option<LambdaText>,
    pub lambda_range: Option<LambdaText>,
    pub lambda_normal: Option<LambdaText>,
    pub range_leaf: Option<String>,
    pub normal_leaf: Option<String>,
    /// Expected normal coefficient `b` of `(nabla F*)(X,X)` along the first normal vector.
    pub coefficient: Option<f64>,
}

/// Parses scenario text, mapping syntax and schema errors to line/column.
pub fn parse_scenario(text: &str) -> CliResult<Scenario> {
    toml::from_str(text).map_err(|e| {
        let (line, column) = match e.span() {
            Some(span) => line_column(text, span.start),
            None => (0, 0),
        };
        CliError::Parse { line, column, message: e.message().trim().to_string() }
    })
}

/// One-based line and column of a byte offset.
pub fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map(|s| s.chars().count()).unwrap_or(0) + 1;
    (line, column)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_scenario_parses_with_defaults() {
        let s = parse_scenario("name = \"x\"\n").unwrap();
        assert_eq!(s.seed, 7);
        assert_eq!(s.tolerance, 1e-8);
        assert!(s.checks.is_empty());
    }

    #[test]
    fn syntax_error_reports_position() {
        let err = parse_scenario("name = \"x\"\nseed = = 3\n").unwrap_err();
        match err {
            CliError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_field_is_rejected() {
        let err = parse_scenario("name = \"x\"\n[[manifold]]\nname = \"M\"\ncoords = [\"x\"]\nmetrc = [[1]]\n").unwrap_err();
        assert!(matches!(err, CliError::Parse { line: 5, .. }), "{err:?}");
    }

    #[test]
    fn expectations_accept_both_forms() {
        let text = r#"
name = "x"
[[check]]
name = "a"
kind = "soliton"
expect = "fail"
[[check]]
name = "b"
kind = "clairaut_certificate"
expect = { condition_i = "hypothesis-not-met" }
"#;
        let s = parse_scenario(text).unwrap();
        assert!(matches!(s.checks[0].expect, Some(Expect::All(Outcome::Fail))));
        assert!(matches!(&s.checks[1].expect, Some(Expect::PerReport(m)) if m["condition_i"] == Outcome::HypothesisNotMet));
    }

    #[test]
    fn line_column_counts_from_one() {
        assert_eq!(line_column("ab\ncd", 4), (2, 2));
        assert_eq!(line_column("ab", 0), (1, 1));
    }
}
