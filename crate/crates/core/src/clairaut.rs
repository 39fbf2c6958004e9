//! Clairaut characterizations of a Riemannian map with `s = exp(g)`.

use crate::error::{GeomError, Result};
use crate::geometry::ScalarField;
use crate::linalg::{inner, least_squares, norm, Matrix, Vector};
use crate::report::CheckReport;
use crate::rmap::{richardson, FrameSplit, SmoothMap};

/// Per-condition reports for one map and one function `g`.
#[derive(Debug, Clone)]
pub struct ClairautCertificate {
    pub map: String,
    pub g: String,
    pub hypotheses: CheckReport,
    pub condition_i: CheckReport,
    pub condition_ii: CheckReport,
    pub eq_3_13: CheckReport,
    pub eq_3_20: CheckReport,
}

impl ClairautCertificate {
    pub fn reports(&self) -> Vec<&CheckReport> {
        vec![&self.hypotheses, &self.condition_i, &self.condition_ii, &self.eq_3_13, &self.eq_3_20]
    }

    pub fn certified(&self) -> bool {
        self.condition_ii.passed() && self.condition_i.passed()
    }
}

/// Range part of `nabla_U V` for normal `U`, `V` at `F(p)`, with `V` extended by
/// normal projection onto the frame at nearby target points.
pub fn normal_geodesy_defect(map: &SmoothMap, s: &FrameSplit) -> Result<f64> {
    let gam = map.target().christoffel(&s.image)?;
    let mut worst = 0.0f64;
    for u in &s.normal {
        for v in &s.normal {
            let ext = |t: f64| -> Result<Vector> {
                let q: Vec<f64> = s.image.iter().zip(u.iter()).map(|(a, b)| a + t * b).collect();
                Ok(map.target_frame(&s.point, &q)?.normal_part(v))
            };
            let dv = richardson(&ext, 1e-3 / u.amax().max(1e-12))?;
            let nabla = dv + gam.contract(u, v);
            worst = worst.max(norm(&s.g2, &s.range_part(&nabla)));
        }
    }
    Ok(worst)
}

struct SampleResiduals {
    isometry: f64,
    normality: f64,
    normal_geodesy: f64,
    shape: f64,
    range_gradient: f64,
    umbilical: f64,
    h2_gradient: f64,
    eq_3_13: f64,
    eq_3_20: f64,
}

fn sample(map: &SmoothMap, g: &ScalarField, p: &[f64]) -> Result<SampleResiduals> {
    let s = map.split(p)?;
    let grad = map.target().gradient(g, &s.image)?;
    let mut shape = 0.0f64;
    let mut eq_3_13 = 0.0f64;
    let mut eq_3_20 = 0.0f64;
    for x in &s.horizontal {
        let fx = s.push(x);
        for v in &s.normal {
            let sv = map.shape_operator_along(p, v, x)?;
            let vg = inner(&s.g2, &grad, v);
            shape = shape.max(norm(&s.g2, &(&sv + &fx * vg)));
            let lhs = inner(&s.g2, &sv, &fx);
            let rhs = -inner(&s.g2, &fx, &fx) * vg;
            eq_3_13 = eq_3_13.max((lhs - rhs).abs());
        }
        let b = map.sff_raw(p, x, x)?;
        eq_3_20 = eq_3_20.max(norm(&s.g2, &(b + &grad * inner(&s.g1, x, x))));
    }
    let range_gradient = s.range.iter().map(|e| inner(&s.g2, &grad, e).abs()).fold(0.0, f64::max);
    let h2 = map.mean_curvature_range(p)?;
    Ok(SampleResiduals {
        isometry: map.isometry_defect(&s),
        normality: map.normality_defect(&s)?,
        normal_geodesy: normal_geodesy_defect(map, &s)?,
        shape,
        range_gradient,
        umbilical: map.umbilical_defect(&s)?,
        h2_gradient: norm(&s.g2, &(h2 + grad)),
        eq_3_13,
        eq_3_20,
    })
}

fn column(rows: &[SampleResiduals], f: impl Fn(&SampleResiduals) -> f64) -> Vec<f64> {
    rows.iter().map(f).collect()
}

/// Evaluates the hypotheses and the Theorem 3.2 conditions at every sample.
pub fn certify(map: &SmoothMap, g: &ScalarField, samples: &[Vec<f64>], tol: f64) -> Result<ClairautCertificate> {
    if samples.is_empty() {
        return Err(GeomError::Invalid("no sample points".into()));
    }
    let rows = samples.iter().map(|p| sample(map, g, p)).collect::<Result<Vec<_>>>()?;

    let mut hyp = CheckReport::new("hypotheses", "Theorem 3.2 standing assumptions: Riemannian map, Eq (2.3), (rangeF*)^perp totally geodesic");
    hyp.residual("isometry", &column(&rows, |r| r.isometry), tol);
    hyp.residual("eq_2_3_normality", &column(&rows, |r| r.normality), tol);
    hyp.residual("normal_totally_geodesic", &column(&rows, |r| r.normal_geodesy), tol);
    let hyp = hyp.finish();
    let gate = hyp.passed();

    let finish = |r: CheckReport| if gate { r.finish() } else { r.hypothesis_not_met("hypotheses of Theorem 3.2 not met at the samples") };

    let mut c1 = CheckReport::new("condition_i", "Theorem 3.2 (i) S_V F*X = -V(g) F*X");
    c1.residual("shape_operator", &column(&rows, |r| r.shape), tol);
    c1.residual("g_constant_along_range", &column(&rows, |r| r.range_gradient), tol);
    let c1 = finish(c1);

    let mut c2 = CheckReport::new("condition_ii", "Theorem 3.2 (ii) umbilical with H2 = -grad g");
    c2.residual("umbilical", &column(&rows, |r| r.umbilical), tol);
    c2.residual("h2_plus_gradient", &column(&rows, |r| r.h2_gradient), tol);
    let c2 = finish(c2);

    let mut e13 = CheckReport::new("eq_3_13", "Eq (3.13) g2(S_V F*X, F*X) = -g2(F*X, F*X) g2(grad g, V)");
    e13.residual("eq_3_13", &column(&rows, |r| r.eq_3_13), tol);
    let e13 = finish(e13);

    let mut e20 = CheckReport::new("eq_3_20", "Eq (3.20) (nabla F*)(X,X) = -g1(X,X) grad g");
    e20.residual("eq_3_20", &column(&rows, |r| r.eq_3_20), tol);
    let e20 = finish(e20);

    Ok(ClairautCertificate {
        map: map.name().to_string(),
        g: g.expr().display_with(map.target().coords()).to_string(),
        hypotheses: hyp,
        condition_i: c1,
        condition_ii: c2,
        eq_3_13: e13,
        eq_3_20: e20,
    })
}

/// Harmonicity theorem: with minimal fibers, `tau(F) = 0` iff `g` is constant.
pub fn check_harmonicity(map: &SmoothMap, g: &ScalarField, samples: &[Vec<f64>], tol: f64) -> Result<CheckReport> {
    let mut r = CheckReport::new("harmonicity", "Theorem: F is harmonic iff g is constant on N (kerF* minimal)");
    let mut fiber = Vec::new();
    let mut tension = Vec::new();
    let mut gradient = Vec::new();
    for p in samples {
        let s = map.split(p)?;
        fiber.push(norm(&s.g1, &map.mean_curvature_fiber(p)?));
        tension.push(norm(&s.g2, &map.tension_field(p)?.direct));
        gradient.push(norm(&s.g2, &map.target().gradient(g, &s.image)?));
    }
    let cert = certify(map, g, samples, tol)?;
    r.residual("fiber_mean_curvature", &fiber, tol);
    r.value("tension_max", tension.iter().cloned().fold(0.0, f64::max));
    r.value("gradient_max", gradient.iter().cloned().fold(0.0, f64::max));
    r.value("tension_min", tension.iter().cloned().fold(f64::INFINITY, f64::min));
    r.value("gradient_min", gradient.iter().cloned().fold(f64::INFINITY, f64::min));
    if !r.residuals[0].pass {
        return Ok(r.hypothesis_not_met("kerF* is not minimal at the samples"));
    }
    if !cert.certified() {
        return Ok(r.hypothesis_not_met("map is not certified Clairaut for this g"));
    }
    let consistent = tension.iter().zip(&gradient).all(|(t, d)| (*t < tol) == (*d < tol));
    let harmonic = tension.iter().all(|t| *t < tol);
    r.label("harmonic", if harmonic { "true" } else { "false" });
    r.label("biconditional", if consistent { "consistent" } else { "violated" });
    Ok(r.finish_with(consistent))
}

/// Non-authoritative least-squares fit of `H2 = -grad g` over `g = sum c_k phi_k`.
pub fn fit_potential(map: &SmoothMap, basis: &[ScalarField], samples: &[Vec<f64>]) -> Result<(Vec<f64>, f64)> {
    let n = map.target().dim();
    let rows = samples.len() * n;
    let mut a = Matrix::zeros(rows, basis.len());
    let mut b = Vector::zeros(rows);
    for (si, p) in samples.iter().enumerate() {
        let s = map.split(p)?;
        let l = s.g2.clone().cholesky().ok_or_else(|| GeomError::SingularMetric { point: s.image.clone() })?.l();
        let h2 = l.transpose() * map.mean_curvature_range(p)?;
        for (k, phi) in basis.iter().enumerate() {
            let gk = l.transpose() * map.target().gradient(phi, &s.image)?;
            for i in 0..n {
                a[(si * n + i, k)] = gk[i];
            }
        }
        for i in 0..n {
            b[si * n + i] = -h2[i];
        }
    }
    let c = least_squares(&a, &b, 1e-12);
    let res = (&a * &c - &b).amax();
    Ok((c.iter().cloned().collect(), res))
}

/// Agreement of the two condition verdicts, as Theorem 3.2 asserts.
pub fn conditions_agree(cert: &ClairautCertificate) -> bool {
    cert.condition_i.verdict == cert.condition_ii.verdict
}
