//! Geodesic integration, velocity decomposition along a map, and the
//! Clairaut invariant monitor.

use serde::Serialize;

use crate::error::{GeomError, Result};
use crate::geometry::{ChartedManifold, ScalarField};
use crate::linalg::{inner, norm, Matrix, Vector};
use crate::rmap::{richardson, SmoothMap, TargetFrame};

pub const DEFAULT_STEP: f64 = 1e-3;
const BLOW_UP: f64 = 1e12;
const DEGENERATE_NORMAL: f64 = 1e-12;

/// Sampled curve with optional decomposition relative to a map.
#[derive(Debug, Clone, Default)]
pub struct GeodesicTrace {
    pub times: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    pub velocities: Vec<Vector>,
    pub accelerations: Vec<Vector>,
    /// Source points aligned with each sample; they fix the range subspace.
    pub anchors: Vec<Vec<f64>>,
    pub anchor_velocities: Vec<Vector>,
    pub range_component: Vec<Vector>,
    pub normal_component: Vec<Vector>,
    pub omega: Vec<f64>,
    pub invariant: Vec<f64>,
}

impl GeodesicTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Relative spread of the speed `|v|_g` along the trace.
    pub fn speed_drift(&self, man: &ChartedManifold) -> Result<f64> {
        let speeds = self
            .points
            .iter()
            .zip(&self.velocities)
            .map(|(p, v)| Ok(norm(&man.metric_at(p)?, v)))
            .collect::<Result<Vec<f64>>>()?;
        Ok(relative_spread(&speeds))
    }

    /// Uses a single source point as anchor for every sample.
    pub fn with_anchor(mut self, anchor: &[f64]) -> Self {
        let zero = Vector::zeros(anchor.len());
        self.anchors = vec![anchor.to_vec(); self.len()];
        self.anchor_velocities = vec![zero; self.len()];
        self
    }

    fn state(&self, i: usize) -> CurveState {
        CurveState {
            anchor: self.anchors[i].clone(),
            anchor_vel: self.anchor_velocities[i].clone(),
            q: self.points[i].clone(),
            vel: self.velocities[i].clone(),
            acc: self.accelerations[i].clone(),
        }
    }
}

/// `(max - min) / max(|mean|, 1e-300)`.
pub fn relative_spread(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    (max - min) / mean.abs().max(1e-300)
}

fn geodesic_rhs(man: &ChartedManifold, x: &Vector, v: &Vector) -> Result<Vector> {
    Ok(-man.christoffel(x.as_slice())?.contract(v, v))
}

fn check_state(man: &ChartedManifold, x: &Vector, v: &Vector, t: f64) -> Result<()> {
    if x.iter().chain(v.iter()).any(|c| !c.is_finite() || c.abs() > BLOW_UP) {
        return Err(GeomError::BlowUp { t });
    }
    if !man.in_domain(x.as_slice()) {
        return Err(GeomError::DomainExit { t });
    }
    Ok(())
}

/// Classical fixed-step RK4 for `x'' + Gamma(x', x') = 0`.
pub fn integrate_geodesic(man: &ChartedManifold, p0: &[f64], v0: &[f64], t_end: f64, step: f64) -> Result<GeodesicTrace> {
    let n = man.dim();
    if p0.len() != n || v0.len() != n {
        return Err(GeomError::DimensionMismatch { expected: n, got: p0.len().min(v0.len()) });
    }
    if !(step > 0.0) || !(t_end >= 0.0) {
        return Err(GeomError::Invalid("step must be positive and t_end non-negative".into()));
    }
    let steps = (t_end / step).round().max(1.0) as usize;
    let h = t_end / steps as f64;
    let mut x = Vector::from_column_slice(p0);
    let mut v = Vector::from_column_slice(v0);
    check_state(man, &x, &v, 0.0)?;
    let mut trace = GeodesicTrace::default();
    let mut acc = geodesic_rhs(man, &x, &v)?;
    for k in 0..=steps {
        let t = k as f64 * h;
        trace.times.push(t);
        trace.points.push(x.as_slice().to_vec());
        trace.velocities.push(v.clone());
        trace.accelerations.push(acc.clone());
        if k == steps {
            break;
        }
        let k1x = v.clone();
        let k1v = acc.clone();
        let x2 = &x + &k1x * (h / 2.0);
        let v2 = &v + &k1v * (h / 2.0);
        check_state(man, &x2, &v2, t)?;
        let k2v = geodesic_rhs(man, &x2, &v2)?;
        let x3 = &x + &v2 * (h / 2.0);
        let v3 = &v + &k2v * (h / 2.0);
        check_state(man, &x3, &v3, t)?;
        let k3v = geodesic_rhs(man, &x3, &v3)?;
        let x4 = &x + &v3 * h;
        let v4 = &v + &k3v * h;
        check_state(man, &x4, &v4, t)?;
        let k4v = geodesic_rhs(man, &x4, &v4)?;
        x += (k1x + &v2 * 2.0 + &v3 * 2.0 + &v4) * (h / 6.0);
        v += (k1v + k2v * 2.0 + k3v * 2.0 + k4v) * (h / 6.0);
        check_state(man, &x, &v, t + h)?;
        acc = geodesic_rhs(man, &x, &v)?;
    }
    Ok(trace)
}

/// How a source curve is generated before pushing it forward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceCurve {
    Geodesic,
    /// Coordinate straight line `p0 + t v0` (generally not a geodesic).
    Line,
}

/// Pushes a source curve forward: `beta = F(alpha)` with the source curve as anchors.
pub fn push_forward_curve(
    map: &SmoothMap,
    kind: SourceCurve,
    p0: &[f64],
    v0: &[f64],
    t_end: f64,
    step: f64,
) -> Result<GeodesicTrace> {
    let src = map.source();
    let alpha = match kind {
        SourceCurve::Geodesic => integrate_geodesic(src, p0, v0, t_end, step)?,
        SourceCurve::Line => {
            let steps = (t_end / step).round().max(1.0) as usize;
            let h = t_end / steps as f64;
            let mut tr = GeodesicTrace::default();
            for k in 0..=steps {
                let t = k as f64 * h;
                tr.times.push(t);
                tr.points.push(p0.iter().zip(v0).map(|(a, b)| a + t * b).collect());
                tr.velocities.push(Vector::from_column_slice(v0));
                tr.accelerations.push(Vector::zeros(v0.len()));
            }
            tr
        }
    };
    let mut out = GeodesicTrace { times: alpha.times.clone(), ..Default::default() };
    for i in 0..alpha.len() {
        let a = &alpha.points[i];
        let jac = map.differential(a)?;
        let d2 = map.second_partials(a)?;
        let (av, aa) = (&alpha.velocities[i], &alpha.accelerations[i]);
        let quad = Vector::from_fn(map.target().dim(), |g, _| av.dot(&(&d2[g] * av)));
        out.points.push(map.apply(a)?);
        out.velocities.push(&jac * av);
        out.accelerations.push(&jac * aa + quad);
        out.anchors.push(a.clone());
        out.anchor_velocities.push(av.clone());
    }
    Ok(out)
}

/// Angle between `v` and its normal part `n`; `pi/2` when the normal part vanishes.
pub fn angle_to_normal(g: &Matrix, v: &Vector, n: &Vector) -> f64 {
    let nn = norm(g, n);
    let nv = norm(g, v);
    if nn < DEGENERATE_NORMAL || nv == 0.0 {
        return std::f64::consts::FRAC_PI_2;
    }
    (inner(g, v, n) / (nv * nn)).clamp(-1.0, 1.0).acos()
}

/// Splits each velocity into range and normal parts and records the angle omega.
pub fn decompose_velocity(map: &SmoothMap, trace: &mut GeodesicTrace) -> Result<()> {
    if trace.anchors.len() != trace.len() {
        return Err(GeomError::SplitUnavailable("trace has no aligned source points".into()));
    }
    trace.range_component.clear();
    trace.normal_component.clear();
    trace.omega.clear();
    for i in 0..trace.len() {
        let frame = map
            .target_frame(&trace.anchors[i], &trace.points[i])
            .map_err(|e| GeomError::SplitUnavailable(format!("t = {}: {e}", trace.times[i])))?;
        let v = &trace.velocities[i];
        let a = frame.range_part(v);
        let n = frame.normal_part(v);
        trace.omega.push(angle_to_normal(&frame.g, v, &n));
        trace.range_component.push(a);
        trace.normal_component.push(n);
    }
    Ok(())
}

/// Clairaut monitor output.
#[derive(Debug, Clone, Serialize)]
pub struct ClairautMonitor {
    pub samples: Vec<f64>,
    pub drift: f64,
}

/// `c(t) = exp(g(beta(t))) sin(omega(t))` and its relative drift; stores the samples in the trace.
pub fn clairaut_monitor(trace: &mut GeodesicTrace, g: &ScalarField) -> Result<ClairautMonitor> {
    if trace.omega.len() != trace.len() {
        return Err(GeomError::Invalid("trace must be decomposed before monitoring".into()));
    }
    let samples = trace
        .points
        .iter()
        .zip(&trace.omega)
        .map(|(p, w)| Ok(g.value(p)?.exp() * w.sin()))
        .collect::<Result<Vec<f64>>>()?;
    trace.invariant = samples.clone();
    Ok(ClairautMonitor { drift: relative_spread(&samples), samples })
}

/// Kinematic state of a curve sample, extended linearly for time derivatives.
#[derive(Debug, Clone)]
pub struct CurveState {
    pub anchor: Vec<f64>,
    pub anchor_vel: Vector,
    pub q: Vec<f64>,
    pub vel: Vector,
    pub acc: Vector,
}

impl CurveState {
    fn shifted(&self, h: f64) -> (Vec<f64>, Vec<f64>, Vector) {
        let a = self.anchor.iter().zip(self.anchor_vel.iter()).map(|(x, v)| x + h * v).collect();
        let q = self.q.iter().zip(self.vel.iter()).map(|(x, v)| x + h * v).collect();
        (a, q, &self.vel + &self.acc * h)
    }
}

/// Covariant derivative along the curve of a vector quantity `w(anchor, q, velocity)`.
pub fn covariant_along<W>(man: &ChartedManifold, state: &CurveState, w: W) -> Result<Vector>
where
    W: Fn(&[f64], &[f64], &Vector) -> Result<Vector>,
{
    let f = |h: f64| -> Result<Vector> {
        let (a, q, v) = state.shifted(h);
        w(&a, &q, &v)
    };
    let scale = state.vel.amax().max(state.anchor_vel.amax()).max(state.acc.amax().sqrt()).max(1e-12);
    let dw = richardson(&f, 1e-3 / scale)?;
    let w0 = w(&state.anchor, &state.q, &state.vel)?;
    Ok(dw + man.christoffel(&state.q)?.contract(&state.vel, &w0))
}

/// Per-sample quantities used by the geodesic decomposition conditions.
pub struct CurveSample {
    pub state: CurveState,
    pub frame: TargetFrame,
    pub range: Vector,
    pub normal: Vector,
}

pub fn curve_sample(map: &SmoothMap, trace: &GeodesicTrace, i: usize) -> Result<CurveSample> {
    if trace.anchors.len() != trace.len() || trace.accelerations.len() != trace.len() {
        return Err(GeomError::SplitUnavailable("trace has no aligned source points".into()));
    }
    let state = trace.state(i);
    let frame = map.target_frame(&state.anchor, &state.q)?;
    let range = frame.range_part(&state.vel);
    let normal = frame.normal_part(&state.vel);
    Ok(CurveSample { state, frame, range, normal })
}

/// `D_t` of the range part of the velocity.
pub fn range_velocity_derivative(map: &SmoothMap, s: &CurveSample) -> Result<Vector> {
    covariant_along(map.target(), &s.state, |a, q, v| Ok(map.target_frame(a, q)?.range_part(v)))
}

/// `D_t` of the normal part of the velocity.
pub fn normal_velocity_derivative(map: &SmoothMap, s: &CurveSample) -> Result<Vector> {
    covariant_along(map.target(), &s.state, |a, q, v| Ok(map.target_frame(a, q)?.normal_part(v)))
}

/// Residual norms of the two geodesic decomposition conditions at every sample.
#[derive(Debug, Clone, Default, Serialize)]
pub struct ConditionResiduals {
    /// `(nabla F*)(X,X) + nabla^perp_X V + nabla^perp_V V`.
    pub normal_condition: Vec<f64>,
    /// `-S_V F*X + F*(nabla_X X) + nabla_V F*X`.
    pub range_condition: Vec<f64>,
    /// `|beta'' + Gamma(beta', beta')|`, the direct geodesic test.
    pub acceleration: Vec<f64>,
}

pub fn geodesic_condition_residuals(map: &SmoothMap, trace: &GeodesicTrace) -> Result<ConditionResiduals> {
    let mut out = ConditionResiduals::default();
    let target = map.target();
    for i in 0..trace.len() {
        let s = curve_sample(map, trace, i)?;
        let g = &s.frame.g;
        let dv = normal_velocity_derivative(map, &s)?;
        let da = range_velocity_derivative(map, &s)?;
        let e1 = map.range_sff(&s.frame, &s.range, &s.range)? + s.frame.normal_part(&dv);
        let e2 = -map.range_shape(&s.frame, &s.normal, &s.range)? + s.frame.range_part(&da);
        let acc = &s.state.acc + target.christoffel(&s.state.q)?.contract(&s.state.vel, &s.state.vel);
        out.normal_condition.push(norm(g, &e1));
        out.range_condition.push(norm(g, &e2));
        out.acceleration.push(norm(g, &acc));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;
    use std::sync::Arc;

    fn chart(coords: &[&str], metric: &[&str]) -> Arc<ChartedManifold> {
        Arc::new(ChartedManifold::from_text("c", coords, metric, &BTreeMap::new()).unwrap())
    }

    fn example3() -> SmoothMap {
        let m = chart(&["x1", "x2"], &["exp(2*x2)", "0", "0", "1"]);
        let n = chart(&["y1", "y2"], &["exp(2*y2)", "0", "0", "1"]);
        SmoothMap::from_text("F", m, n, &["x1", "0"], &BTreeMap::new()).unwrap()
    }

    fn scalar(text: &str) -> ScalarField {
        let t = crate::symexpr::SymbolTable::new(&["y1".into(), "y2".into()]);
        ScalarField::new(crate::symexpr::parse(text, &t).unwrap(), 2)
    }

    #[test]
    fn flat_geodesics_are_lines() {
        let e = ChartedManifold::euclidean("e", vec!["a".into(), "b".into()]);
        let tr = integrate_geodesic(&e, &[1.0, 2.0], &[0.5, -1.0], 1.0, 1e-2).unwrap();
        let last = tr.points.last().unwrap();
        assert!((last[0] - 1.5).abs() < 1e-12 && (last[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn equator_stays_on_equator() {
        let s = chart(&["th", "ph"], &["1", "0", "0", "sin(th)^2"]);
        let tr = integrate_geodesic(&s, &[std::f64::consts::FRAC_PI_2, 0.0], &[0.0, 1.0], 1.0, 1e-3).unwrap();
        assert!(tr.points.iter().all(|p| (p[0] - std::f64::consts::FRAC_PI_2).abs() < 1e-14));
    }

    #[test]
    fn speed_is_conserved() {
        let h = chart(&["y1", "y2"], &["exp(2*y2)", "0", "0", "1"]);
        let tr = integrate_geodesic(&h, &[0.1, -0.2], &[0.8, 0.6], 1.0, 1e-3).unwrap();
        assert!(tr.speed_drift(&h).unwrap() < 1e-6);
    }

    #[test]
    fn domain_exit_and_blow_up() {
        let h = chart(&["y1", "y2"], &["1", "0", "0", "1"]);
        let m = Arc::try_unwrap(h).unwrap().with_domain(vec![crate::symexpr::Expr::var(0)]);
        assert!(matches!(integrate_geodesic(&m, &[0.1, 0.0], &[-1.0, 0.0], 1.0, 1e-3), Err(GeomError::DomainExit { .. })));
        let e = ChartedManifold::euclidean("e", vec!["a".into()]);
        assert!(matches!(integrate_geodesic(&e, &[0.0], &[1e13], 1.0, 0.5), Err(GeomError::BlowUp { .. })));
    }

    #[test]
    fn decomposition_limits() {
        let f = example3();
        let n = f.target();
        let normal = integrate_geodesic(n, &[0.0, 0.0], &[0.0, 1.0], 0.5, 1e-3).unwrap();
        let mut normal = normal.with_anchor(&[0.0, 0.0]);
        decompose_velocity(&f, &mut normal).unwrap();
        assert!(normal.omega.iter().all(|w| w.abs() < 1e-12));
        assert!(normal.range_component.iter().all(|a| a.amax() < 1e-14));

        let mut tangent = GeodesicTrace {
            times: vec![0.0],
            points: vec![vec![0.0, 0.0]],
            velocities: vec![Vector::from_vec(vec![1.0, 0.0])],
            accelerations: vec![Vector::zeros(2)],
            ..Default::default()
        }
        .with_anchor(&[0.0, 0.0]);
        decompose_velocity(&f, &mut tangent).unwrap();
        assert_eq!(tangent.omega[0], std::f64::consts::FRAC_PI_2);
    }

    #[test]
    fn clairaut_invariant_on_example() {
        let f = example3();
        let mut tr = integrate_geodesic(f.target(), &[0.2, 0.1], &[0.7, 0.5], 1.0, 1e-3).unwrap().with_anchor(&[0.0, 0.0]);
        decompose_velocity(&f, &mut tr).unwrap();
        for ((a, v), (p, vel)) in tr.range_component.iter().zip(&tr.normal_component).zip(tr.points.iter().zip(&tr.velocities)) {
            let g = f.target().metric_at(p).unwrap();
            let lhs = norm(&g, a).powi(2) + norm(&g, v).powi(2);
            assert!((lhs - norm(&g, vel).powi(2)).abs() < 1e-9);
        }
        let good = clairaut_monitor(&mut tr, &scalar("y2")).unwrap();
        assert!(good.drift < 1e-5, "drift {}", good.drift);
        let bad = clairaut_monitor(&mut tr, &scalar("2*y2")).unwrap();
        assert!(bad.drift > 1e-2);
        let e = ChartedManifold::euclidean("e", vec!["y1".into(), "y2".into()]);
        let flat = SmoothMap::new("f", Arc::new(ChartedManifold::euclidean("m", vec!["x1".into()])), Arc::new(e), vec![crate::symexpr::Expr::var(0), crate::symexpr::Expr::zero()]).unwrap();
        let mut tr = integrate_geodesic(flat.target(), &[0.0, 0.0], &[0.3, 0.4], 1.0, 1e-3).unwrap().with_anchor(&[0.0]);
        decompose_velocity(&flat, &mut tr).unwrap();
        assert!(clairaut_monitor(&mut tr, &scalar("1")).unwrap().drift < 1e-12);
    }

    #[test]
    fn lemma_residuals_match_direct_geodesic_test() {
        let f = example3();
        let tr = integrate_geodesic(f.target(), &[0.2, 0.1], &[0.7, 0.5], 0.2, 1e-3).unwrap().with_anchor(&[0.0, 0.0]);
        let res = geodesic_condition_residuals(&f, &tr).unwrap();
        assert!(res.normal_condition.iter().chain(&res.range_condition).all(|r| *r < 1e-7));

        let line = push_forward_curve(&f, SourceCurve::Line, &[0.0, 0.0], &[1.0, 0.0], 0.2, 1e-2).unwrap();
        let res = geodesic_condition_residuals(&f, &line).unwrap();
        assert!(res.normal_condition.iter().all(|r| *r > 1e-3));
        assert!(res.acceleration.iter().all(|r| *r > 1e-3));
    }
}
