use std::collections::BTreeMap;
use std::sync::Arc;

use super::*;
use crate::geodesic::{integrate_geodesic, push_forward_curve, SourceCurve};
use crate::report::Verdict;
use crate::symexpr::parse;

fn consts() -> BTreeMap<String, f64> {
    BTreeMap::new()
}

fn chart(name: &str, coords: &[&str], metric: &[&str]) -> Arc<ChartedManifold> {
    Arc::new(ChartedManifold::from_text(name, coords, metric, &consts()).unwrap())
}

fn flat(n: usize) -> Arc<ChartedManifold> {
    Arc::new(ChartedManifold::euclidean("R", (1..=n).map(|i| format!("y{i}")).collect()))
}

fn scalar(man: &ChartedManifold, text: &str) -> ScalarField {
    ScalarField::new(parse(text, &SymbolTable::new(man.coords())).unwrap(), man.dim())
}

fn example() -> SmoothMap {
    let m = chart("M", &["x1", "x2"], &["exp(2*x2)", "0", "0", "exp(2*x2)"]);
    let n = chart("N", &["y1", "y2"], &["exp(2*y2)", "0", "0", "1"]);
    SmoothMap::from_text("F", m, n, &["(x1 - x2)/sqrt(2)", "0"], &consts()).unwrap()
}

fn paper_j(map: &SmoothMap) -> ComplexStructure {
    ComplexStructure::from_text(map.target(), &["0", "-1", "1", "0"], &consts()).unwrap()
}

fn hermitian_j(map: &SmoothMap) -> ComplexStructure {
    ComplexStructure::from_text(map.target(), &["0", "-exp(-y2)", "exp(y2)", "0"], &consts()).unwrap()
}

fn fiber() -> Vec<Vec<f64>> {
    vec![vec![0.4, 0.0], vec![-1.1, 0.0], vec![2.3, 0.0]]
}

fn traces(map: &SmoothMap) -> Vec<GeodesicTrace> {
    let starts = [([0.4, 0.0], [0.8, 0.3]), ([-1.1, 0.0], [0.5, -0.6]), ([2.3, 0.0], [-0.4, 0.9])];
    starts
        .iter()
        .map(|(p, v)| integrate_geodesic(map.target(), &map.apply(p).unwrap(), v, 0.5, 1e-3).unwrap().with_anchor(p))
        .map(|mut t| {
            let stride: Vec<usize> = (0..t.len()).step_by(50).collect();
            t.times = stride.iter().map(|&i| t.times[i]).collect();
            t.points = stride.iter().map(|&i| t.points[i].clone()).collect();
            t.velocities = stride.iter().map(|&i| t.velocities[i].clone()).collect();
            t.accelerations = stride.iter().map(|&i| t.accelerations[i].clone()).collect();
            t.anchors = stride.iter().map(|&i| t.anchors[i].clone()).collect();
            t.anchor_velocities = stride.iter().map(|&i| t.anchor_velocities[i].clone()).collect();
            t
        })
        .collect()
}

#[test]
fn flat_constant_structure_is_kaehler() {
    let e = flat(2);
    let j = ComplexStructure::from_text(&e, &["0", "-1", "1", "0"], &consts()).unwrap();
    let r = kaehler_check(&e, &j, &[vec![0.3, 1.0], vec![-2.0, 0.5]], 1e-10).unwrap();
    assert!(r.passed());
}

#[test]
fn example_structure_is_not_parallel() {
    let map = example();
    let pts = vec![vec![0.3, 0.0], vec![1.0, 0.0]];
    let r = kaehler_check(map.target(), &paper_j(&map), &pts, 1e-10).unwrap();
    assert!(r.get("j_squared_plus_identity").unwrap().pass);
    assert!(r.get("hermitian_compatibility").unwrap().pass);
    assert!(!r.get("nabla_j").unwrap().pass);
    let h = kaehler_check(map.target(), &hermitian_j(&map), &[vec![0.3, -0.7], vec![1.0, 0.4]], 1e-10).unwrap();
    assert!(h.passed(), "{h:?}");
}

#[test]
fn incompatible_structure_fails() {
    let n = chart("N", &["y1", "y2"], &["exp(2*y2)", "0", "0", "1"]);
    let j = ComplexStructure::from_text(&n, &["0", "-1", "1", "0"], &consts()).unwrap();
    let r = kaehler_check(&n, &j, &[vec![0.0, 0.8]], 1e-10).unwrap();
    assert!(!r.get("hermitian_compatibility").unwrap().pass);
}

#[test]
fn example_is_anti_invariant_lagrangian() {
    let map = example();
    let j = paper_j(&map);
    let r = anti_invariance_check(&map, &j, &fiber(), 1e-10).unwrap();
    assert!(r.passed());
    // the chart structure J(y1,y2) = (-y2,y1) sends e1' to +e2'
    assert!((r.values["j_range0_on_normal0"] - 1.0).abs() < 1e-12);
    let bc = bc_decompose(&map, &j, &fiber()[0]).unwrap();
    assert!(bc.lagrangian);
    assert!(bc.reconstruction_defect() < 1e-12);
    assert!((bc.b[0][0] + 1.0).abs() < 1e-12 && bc.c[0].amax() < 1e-12);
}

#[test]
fn holomorphic_control_fails() {
    let e = flat(2);
    let map = SmoothMap::from_text("id", e.clone(), e.clone(), &["x1", "x2"].map(|s| s.replace('x', "y")).iter().map(|s| s.as_str()).collect::<Vec<_>>(), &consts())
        .unwrap();
    let j = ComplexStructure::from_text(&e, &["0", "-1", "1", "0"], &consts()).unwrap();
    let r = anti_invariance_check(&map, &j, &[vec![0.1, 0.2]], 1e-10).unwrap();
    assert!(!r.passed());
    assert!((r.get("range_part_of_j_range").unwrap().max - 1.0).abs() < 1e-12);
}

#[test]
fn rank_one_into_four_space_has_mu() {
    let m = flat(2);
    let map = SmoothMap::from_text("F", m, flat(4), &["y1", "0", "0", "0"], &consts()).unwrap();
    let j = ComplexStructure::from_text(
        map.target(),
        &["0", "0", "-1", "0", "0", "0", "0", "-1", "1", "0", "0", "0", "0", "1", "0", "0"],
        &consts(),
    )
    .unwrap();
    let bc = bc_decompose(&map, &j, &[0.5, 0.5]).unwrap();
    assert_eq!(bc.mu.len(), 2);
    assert!(!bc.lagrangian);
    assert!(bc.reconstruction_defect() < 1e-12);
    for (jv, (b, c)) in bc.j_normal.iter().zip(bc.b.iter().zip(&bc.c)) {
        let lhs = jv.norm_squared();
        assert!((lhs - b.norm_squared() - c.norm_squared()).abs() < 1e-10);
        assert!(b.dot(c).abs() < 1e-12);
    }
}

#[test]
fn theorem_4_7_on_example() {
    let map = example();
    let g = scalar(map.target(), "y2");
    let trs = traces(&map);
    let r = clairaut_anti_invariant_check(&map, &hermitian_j(&map), &g, &trs, &fiber(), 1e-6).unwrap();
    assert!(r.passed(), "{r:?}");
    // off the fiber the map is not Riemannian, so Eq (2.3) fails and the certificate is gated
    assert_eq!(r.labels["biconditional"], "not-applicable");
    let p = clairaut_anti_invariant_check(&map, &paper_j(&map), &g, &trs, &fiber(), 1e-6).unwrap();
    assert_eq!(p.verdict, Verdict::HypothesisNotMet);
    assert!(p.get("theorem_scalar").unwrap().max < 1e-6);
    let wrong = scalar(map.target(), "2*y2");
    let w = clairaut_anti_invariant_check(&map, &hermitian_j(&map), &wrong, &trs, &fiber(), 1e-6).unwrap();
    assert_eq!(w.verdict, Verdict::Fail);
}

#[test]
fn geodesic_conditions_need_parallel_structure() {
    let map = example();
    let trs = traces(&map);
    let res = anti_invariant_geodesic_residuals(&map, &hermitian_j(&map), &trs[0], 1e-8).unwrap();
    assert!(res.range_condition.iter().chain(&res.normal_condition).all(|x| *x < 1e-6), "{res:?}");
    let line = push_forward_curve(&map, SourceCurve::Line, &[0.4, 0.0], &[1.0, 0.0], 0.2, 1e-2).unwrap();
    let bad = anti_invariant_geodesic_residuals(&map, &hermitian_j(&map), &line, 1e-8).unwrap();
    let worst = bad.range_condition.iter().chain(&bad.normal_condition).fold(0.0f64, |a, b| a.max(*b));
    assert!(worst > 1e-3);
    assert!(matches!(anti_invariant_geodesic_residuals(&map, &paper_j(&map), &trs[0], 1e-8), Err(GeomError::RequiresKaehler(_))));
}

#[test]
fn dichotomy_and_minimality() {
    let map = example();
    let g = scalar(map.target(), "y2");
    let d = theorem_4_8_dichotomy(&map, &paper_j(&map), &g, &fiber(), 1e-8).unwrap();
    assert_eq!(d.verdict, Verdict::HypothesisNotMet);
    assert_eq!(d.labels["branch"], "dim(rangeF*) = 1");
    let t = theorem_4_6_check(&map, &hermitian_j(&map), &g, &fiber(), 1e-8).unwrap();
    assert_eq!(t.verdict, Verdict::HypothesisNotMet);
}

fn rank_two() -> (SmoothMap, ComplexStructure) {
    let map = SmoothMap::from_text("F", flat(3), flat(4), &["y1", "y2", "0", "0"], &consts()).unwrap();
    let j = ComplexStructure::from_text(
        map.target(),
        &["0", "0", "-1", "0", "0", "0", "0", "-1", "1", "0", "0", "0", "0", "1", "0", "0"],
        &consts(),
    )
    .unwrap();
    (map, j)
}

#[test]
fn rank_two_lagrangian() {
    let (map, j) = rank_two();
    let pts = vec![vec![0.2, -0.3, 1.0], vec![1.5, 0.7, -2.0]];
    let g = scalar(map.target(), "(y3^2 + y4^2)/2");
    assert!(kaehler_check(map.target(), &j, &[vec![0.0; 4]], 1e-10).unwrap().passed());
    assert!(bc_decompose(&map, &j, &pts[0]).unwrap().lagrangian);
    let d = theorem_4_8_dichotomy(&map, &j, &g, &pts, 1e-8).unwrap();
    assert!(d.passed());
    assert_eq!(d.labels["branch"], "g constant on J(rangeF*)");
    let t = theorem_4_6_check(&map, &j, &g, &pts, 1e-8).unwrap();
    assert!(t.passed(), "{t:?}");
    let flat_g = scalar(map.target(), "0");
    let trs: Vec<GeodesicTrace> = [([0.2, -0.3, 1.0], [0.5, 0.1, 0.3, -0.4]), ([1.5, 0.7, -2.0], [-0.2, 0.9, 0.6, 0.1])]
        .iter()
        .map(|(p, v)| integrate_geodesic(map.target(), &map.apply(p).unwrap(), v, 0.5, 1e-2).unwrap().with_anchor(p))
        .collect();
    let r = clairaut_anti_invariant_check(&map, &j, &flat_g, &trs, &pts, 1e-8).unwrap();
    assert!(r.passed(), "{r:?}");
    assert_eq!(r.labels["biconditional"], "consistent");
    let bad = scalar(map.target(), "y3");
    let c = theorem_4_8_dichotomy(&map, &j, &bad, &pts, 1e-8).unwrap();
    assert_eq!(c.verdict, Verdict::HypothesisNotMet);
    assert_eq!(c.labels["branch"], "neither");
}


#[test]
fn rank_two_harmonicity_agrees_with_fiber_curvature() {
    let (map, _) = rank_two();
    let g = scalar(map.target(), "(y3^2 + y4^2)/2");
    let r = crate::clairaut::check_harmonicity(&map, &g, &[vec![0.2, -0.3, 1.0], vec![1.5, 0.7, -2.0]], 1e-8).unwrap();
    assert!(r.passed(), "{r:?}");
    assert_eq!(r.labels["harmonic"], "true");
}
