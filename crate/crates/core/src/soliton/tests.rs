use std::collections::BTreeMap;
use std::sync::Arc;

use super::*;
use crate::report::Verdict;
use crate::symexpr::{parse, SymbolTable};

fn consts() -> BTreeMap<String, f64> {
    BTreeMap::new()
}

fn chart(name: &str, coords: &[&str], metric: &[&str]) -> Arc<ChartedManifold> {
    Arc::new(ChartedManifold::from_text(name, coords, metric, &consts()).unwrap())
}

fn field(man: &ChartedManifold, text: &str) -> ScalarField {
    let table = SymbolTable::new(man.coords());
    ScalarField::new(parse(text, &table).unwrap(), man.dim())
}

fn components(man: &ChartedManifold, comps: &[&str]) -> VectorField {
    let table = SymbolTable::new(man.coords());
    VectorField::from_components(comps.iter().map(|c| parse(c, &table).unwrap()).collect())
}

fn leaf(kind: LeafKind, params: &[&str], base: &[&str], embedding: &[&str], at: &[&str]) -> Leaf {
    let mut names: Vec<String> = params.iter().map(|s| s.to_string()).collect();
    names.extend(base.iter().map(|s| s.to_string()));
    let table = SymbolTable::new(&names);
    Leaf {
        name: "leaf".into(),
        kind,
        params: params.iter().map(|s| s.to_string()).collect(),
        embedding: embedding.iter().map(|e| parse(e, &table).unwrap()).collect(),
        at: at.iter().map(|e| parse(e, &table).unwrap()).collect(),
    }
}

fn exp_metric() -> Arc<ChartedManifold> {
    chart("N", &["y1", "y2"], &["exp(2*y2)", "0", "0", "1"])
}

fn example() -> SmoothMap {
    let m = chart("M", &["x1", "x2"], &["exp(2*x2)", "0", "0", "1"]);
    SmoothMap::from_text("F", m, exp_metric(), &["x1", "0"], &consts()).unwrap()
}

fn fiber_samples() -> Vec<Vec<f64>> {
    vec![vec![0.3, 0.0], vec![-1.2, 0.0], vec![2.0, 0.0], vec![0.7, 0.0]]
}

fn target_samples() -> Vec<Vec<f64>> {
    vec![vec![0.1, -0.4], vec![1.3, 0.2], vec![-0.5, 0.9]]
}

fn sphere() -> Arc<ChartedManifold> {
    chart("S2", &["th", "ph"], &["1", "0", "0", "sin(th)^2"])
}

#[test]
fn classification_follows_sign() {
    assert_eq!(Classification::of(-0.5, 0.0), Classification::Shrinking);
    assert_eq!(Classification::of(0.0, 0.0), Classification::Steady);
    assert_eq!(Classification::of(2.0, 0.0), Classification::Expanding);
    assert_eq!(Classification::of(1e-13, 1e-12), Classification::Steady);
    let d = SolitonData::new("N", VectorField::zero(2), 1.0);
    assert_eq!(d.classification, Some(Classification::Expanding));
}

#[test]
fn flat_is_steady() {
    let flat = ChartedManifold::euclidean("R2", vec!["y1".into(), "y2".into()]);
    let r = soliton_residual(&flat, &VectorField::zero(2), 0.0, &target_samples(), 1e-12).unwrap();
    assert!(r.passed());
    assert_eq!(r.labels["classification"], "steady");
}

#[test]
fn exponential_metric_is_expanding_einstein() {
    let n = exp_metric();
    let r = soliton_residual(&n, &VectorField::zero(2), 1.0, &target_samples(), 1e-9).unwrap();
    assert!(r.passed(), "{r:?}");
    assert_eq!(r.labels["classification"], "expanding");
    let t = trace_lemma_check(&n, &VectorField::zero(2), 1.0, &target_samples(), 1e-9).unwrap();
    assert!(t.passed());
}

#[test]
fn sphere_is_shrinking() {
    let s = sphere();
    let pts = vec![vec![0.7, 0.1], vec![1.9, -2.0]];
    let r = soliton_residual(&s, &VectorField::zero(2), -1.0, &pts, 1e-9).unwrap();
    assert!(r.passed());
    assert_eq!(r.labels["classification"], "shrinking");
    assert!(trace_lemma_check(&s, &VectorField::zero(2), -1.0, &pts, 1e-9).unwrap().passed());
    let fit = solve_lambda(&s, &VectorField::zero(2), &pts, 1e-9).unwrap();
    assert!((fit.lambda + 1.0).abs() < 1e-9);
}

#[test]
fn gaussian_soliton_lambda_recovered() {
    let flat = ChartedManifold::euclidean("R2", vec!["y1".into(), "y2".into()]);
    let z = components(&flat, &["0.75*y1", "0.75*y2"]);
    let fit = solve_lambda(&flat, &z, &target_samples(), 1e-9).unwrap();
    assert!((fit.lambda + 0.75).abs() < 1e-9);
    assert!(fit.residual < 1e-9 && !fit.almost);
}

#[test]
fn non_soliton_is_flagged() {
    let flat = ChartedManifold::euclidean("R2", vec!["y1".into(), "y2".into()]);
    let z = components(&flat, &["y1^2", "0"]);
    let fit = solve_lambda(&flat, &z, &target_samples(), 1e-9).unwrap();
    assert!(fit.residual > 0.1);
    assert!(fit.almost);
    let r = solve_lambda_report(&flat, &z, &target_samples(), 1e-9).unwrap();
    assert!(!r.passed());
    assert_eq!(r.labels["classification"], "almost");
}

#[test]
fn gradient_route_agrees() {
    let n = exp_metric();
    let f = field(&n, "y1^2 + sin(y2)*y1");
    let z = VectorField::gradient(f.clone());
    for p in target_samples() {
        let a = soliton_tensor(&n, &z, &p).unwrap();
        let b = gradient_soliton_tensor(&n, &f, &p).unwrap();
        assert!((a - b).amax() < 1e-9);
    }
}

#[test]
fn frame_terms_match_hessian_trace() {
    let map = example();
    let g = field(map.target(), "y2");
    for p in fiber_samples() {
        let s = map.split(&p).unwrap();
        let t = normal_frame_terms(&map, &g, &s).unwrap();
        assert!((t.connection - t.second + t.hessian_trace).abs() < 1e-8, "{t:?}");
        assert!((t.grad_sq - 1.0).abs() < 1e-12);
    }
}

#[test]
fn example_ricci_decomposition() {
    let map = example();
    let g = field(map.target(), "y2");
    let r = ricci_decomposition_check(&map, &g, None, None, &fiber_samples(), 1e-7).unwrap();
    assert!(r.passed(), "{r:?}");
    assert!((r.values["ric_range_00"] + 1.0).abs() < 1e-9);
    assert!((r.values["ric_normal_00"] + 1.0).abs() < 1e-9);
}

#[test]
fn example_scalar_theorems_with_block_lambda() {
    let map = example();
    let g = field(map.target(), "y2");
    let (a, b) = scalar_curvature_theorems(&map, &g, None, None, LambdaSpec::Fit, LambdaSpec::Fit, &fiber_samples(), 1e-7).unwrap();
    assert!(a.passed(), "{a:?}");
    assert!(b.passed(), "{b:?}");
    assert!((a.values["lambda"] - 2.0).abs() < 1e-9);
    assert!((b.values["lambda"] - 1.0).abs() < 1e-9);
    assert!((a.values["laplacian_g"] - 1.0).abs() < 1e-12);

    // full-manifold constant does not solve the range block
    let (a1, _) =
        scalar_curvature_theorems(&map, &g, None, None, LambdaSpec::Value(1.0), LambdaSpec::Fit, &fiber_samples(), 1e-7).unwrap();
    assert_eq!(a1.verdict, Verdict::HypothesisNotMet);
    assert!((a1.get("scalar_identity").unwrap().max - 1.0).abs() < 1e-9);
}

#[test]
fn perturbed_g_breaks_scalar_theorem() {
    let map = example();
    let g = field(map.target(), "y2 + 0.3*y2^2 + 0.1");
    let pts: Vec<Vec<f64>> = fiber_samples();
    let (a, _) = scalar_curvature_theorems(&map, &g, None, None, LambdaSpec::Value(2.0), LambdaSpec::Fit, &pts, 1e-7).unwrap();
    assert!(!a.passed());
    let g2 = field(map.target(), "2*y2");
    let (a2, _) = scalar_curvature_theorems(&map, &g2, None, None, LambdaSpec::Value(2.0), LambdaSpec::Fit, &pts, 1e-7).unwrap();
    assert!(a2.get("scalar_identity").unwrap().max > 1e-3);
}

fn spheres() -> SmoothMap {
    let (rho, sigma) = ("1.5", "0.8");
    let n = Arc::new(
        ChartedManifold::from_text(
            "S2xS2",
            &["a1", "b1", "a2", "b2"],
            &[
                &format!("{rho}^2"), "0", "0", "0",
                "0", &format!("{rho}^2*sin(a1)^2"), "0", "0",
                "0", "0", &format!("{sigma}^2"), "0",
                "0", "0", "0", &format!("{sigma}^2*sin(a2)^2"),
            ],
            &consts(),
        )
        .unwrap(),
    );
    let m = Arc::new(
        ChartedManifold::from_text(
            "S2xR",
            &["x1", "x2", "w"],
            &[&format!("{rho}^2"), "0", "0", "0", &format!("{rho}^2*sin(x1)^2"), "0", "0", "0", "1"],
            &consts(),
        )
        .unwrap(),
    );
    SmoothMap::from_text("F", m, n, &["x1", "x2", "pi/2", "0"], &consts()).unwrap()
}

fn sphere_leaves() -> (Leaf, Leaf) {
    let base = ["a1", "b1", "a2", "b2"];
    let range = leaf(LeafKind::Range, &["u", "v"], &base, &["u", "v", "a2", "b2"], &["a1", "b1"]);
    let normal = leaf(LeafKind::Normal, &["u", "v"], &base, &["a1", "b1", "u", "v"], &["a2", "b2"]);
    (range, normal)
}

fn sphere_samples() -> Vec<Vec<f64>> {
    vec![vec![0.9, 0.2, -1.0], vec![1.7, -2.4, 0.5], vec![1.2, 1.0, 3.0]]
}

#[test]
fn rank_two_scalar_theorems() {
    let map = spheres();
    let g = field(map.target(), "0.25");
    let (rl, nl) = sphere_leaves();
    let (a, b) =
        scalar_curvature_theorems(&map, &g, Some(&rl), Some(&nl), LambdaSpec::Fit, LambdaSpec::Fit, &sphere_samples(), 1e-7).unwrap();
    assert!(a.passed(), "{a:?}");
    assert!(b.passed(), "{b:?}");
    assert!((a.values["leaf_scalar"] - 2.0 / 2.25).abs() < 1e-9);
    assert!((b.values["leaf_scalar"] - 2.0 / 0.64).abs() < 1e-9);
    assert!((a.values["lambda"] + 1.0 / 2.25).abs() < 1e-9);

    let r = ricci_decomposition_check(&map, &g, Some(&rl), Some(&nl), &sphere_samples(), 1e-7).unwrap();
    assert!(r.passed(), "{r:?}");
    let missing = ricci_decomposition_check(&map, &g, None, None, &sphere_samples(), 1e-7);
    assert!(matches!(missing, Err(GeomError::LeafUnavailable)));
}

#[test]
fn rank_two_einstein_leaf() {
    let map = spheres();
    let g = field(map.target(), "0");
    let (rl, _) = sphere_leaves();
    let r = einstein_leaf_check(&map, &g, &VectorField::zero(4), LambdaSpec::Fit, Some(&rl), &sphere_samples(), 1e-7).unwrap();
    assert!(r.passed(), "{r:?}");
    assert!((r.values["lambda_prime"] - 1.0 / 2.25).abs() < 1e-9);
}

#[test]
fn one_dimensional_einstein_leaf_and_control() {
    let map = example();
    let g = field(map.target(), "y2");
    let r = einstein_leaf_check(&map, &g, &VectorField::zero(2), LambdaSpec::Fit, None, &fiber_samples(), 1e-7).unwrap();
    assert!(r.passed(), "{r:?}");
    assert!(r.values["lambda_prime"].abs() < 1e-7);
    let bad = field(map.target(), "2*y2");
    let c = einstein_leaf_check(&map, &bad, &VectorField::zero(2), LambdaSpec::Fit, None, &fiber_samples(), 1e-7).unwrap();
    assert!(!c.passed());
}

#[test]
fn round_sphere_exposes_gauss_term() {
    let radius = 2.0;
    let m = chart("S2", &["th", "ph"], &["4", "0", "0", "4*sin(th)^2"]);
    let n = Arc::new(ChartedManifold::euclidean("R3", vec!["y1".into(), "y2".into(), "y3".into()]));
    let map =
        SmoothMap::from_text("F", m, n, &["2*sin(th)*cos(ph)", "2*sin(th)*sin(ph)", "2*cos(th)"], &consts()).unwrap();
    let g = field(map.target(), "0.5*ln(y1^2+y2^2+y3^2)");
    let base = ["y1", "y2", "y3"];
    let rl = leaf(LeafKind::Range, &["u", "v"], &base, &["u", "v", "sqrt(y1^2+y2^2+y3^2-u^2-v^2)"], &["y1", "y2"]);
    let pts = vec![vec![0.6, 0.3], vec![1.0, 2.0], vec![0.4, -1.5]];
    let r = ricci_decomposition_check(&map, &g, Some(&rl), None, &pts, 1e-7).unwrap();
    // the Clairaut hypotheses hold, the range identity misses (k-1)|grad g|^2
    assert_eq!(r.verdict, Verdict::Fail, "{r:?}");
    let miss = r.get("range_block").unwrap().max;
    assert!((miss - 1.0 / (radius * radius)).abs() < 1e-7, "{miss}");
    assert!(r.get("normal_block").unwrap().pass);
}

#[test]
fn circle_conformal_killing() {
    let m = chart("C", &["t"], &["4"]);
    let n = Arc::new(ChartedManifold::euclidean("R2", vec!["y1".into(), "y2".into()]));
    let map = SmoothMap::from_text("F", m, n, &["2*cos(t)", "2*sin(t)"], &consts()).unwrap();
    let g = field(map.target(), "0.5*ln(y1^2+y2^2)");
    let pts = vec![vec![0.3], vec![1.9], vec![-2.2]];
    let z = components(map.target(), &["1", "0"]);
    let r = conformal_killing_theorem_check(&map, &g, &z, LambdaSpec::Fit, None, None, &pts, 1e-7).unwrap();
    assert!(r.passed(), "{r:?}");
    assert_eq!(r.labels["biconditional"], "consistent");
    assert!(r.values["mu"].abs() < 1e-7);

    let rot = components(map.target(), &["-y2", "y1"]);
    let c = conformal_killing_theorem_check(&map, &g, &rot, LambdaSpec::Fit, None, None, &pts, 1e-7).unwrap();
    assert_eq!(c.verdict, Verdict::HypothesisNotMet);
    assert!(!c.get("geodesic_field").unwrap().pass);
}

#[test]
fn line_with_constant_g_is_killing() {
    let m = chart("L", &["t"], &["1"]);
    let n = Arc::new(ChartedManifold::euclidean("R2", vec!["y1".into(), "y2".into()]));
    let map = SmoothMap::from_text("F", m, n, &["t", "0"], &consts()).unwrap();
    let g = field(map.target(), "3");
    let z = components(map.target(), &["0.2", "1"]);
    let r = conformal_killing_theorem_check(&map, &g, &z, LambdaSpec::Fit, None, None, &[vec![0.1], vec![2.0]], 1e-9).unwrap();
    assert!(r.passed(), "{r:?}");
    assert_eq!(r.labels["killing_on_normal"], "true");
}
