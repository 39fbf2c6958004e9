//! Almost complex structures on the target and anti-invariant Riemannian maps.

use std::collections::BTreeMap;

use crate::clairaut::certify;
use crate::error::{GeomError, Result};
use crate::geodesic::{covariant_along, curve_sample, GeodesicTrace};
use crate::geometry::{eval, parse_text, ChartedManifold, ScalarField};
use crate::linalg::{gram_schmidt, inner, norm, project, Matrix, Vector};
use crate::report::CheckReport;
use crate::rmap::{FrameSplit, SmoothMap, TargetFrame};
use crate::symexpr::{Expr, SymbolTable};

/// `(1,1)`-tensor in chart components: column `j` is `J d_j`.
#[derive(Debug, Clone)]
pub struct ComplexStructure {
    manifold: String,
    j: Vec<Vec<Expr>>,
    dj: Vec<Vec<Vec<Expr>>>,
}

impl ComplexStructure {
    pub fn new(man: &ChartedManifold, j: Vec<Vec<Expr>>) -> Result<Self> {
        let n = man.dim();
        if j.len() != n || j.iter().any(|r| r.len() != n) {
            return Err(GeomError::Invalid(format!("complex structure must be {n}x{n}")));
        }
        if j.iter().flatten().filter_map(|e| e.max_var()).any(|v| v >= n) {
            return Err(GeomError::Invalid("complex structure refers to unknown coordinates".into()));
        }
        let dj = (0..n).map(|i| j.iter().map(|row| row.iter().map(|e| e.differentiate(i)).collect()).collect()).collect();
        Ok(ComplexStructure { manifold: man.name().to_string(), j, dj })
    }

    /// Row-major entries `J^k_j`.
    pub fn from_text(man: &ChartedManifold, entries: &[&str], constants: &BTreeMap<String, f64>) -> Result<Self> {
        let n = man.dim();
        if entries.len() != n * n {
            return Err(GeomError::Invalid(format!("expected {} entries, got {}", n * n, entries.len())));
        }
        let table = SymbolTable::new(man.coords()).with_constants(constants);
        let flat = entries.iter().map(|e| parse_text(e, &table)).collect::<Result<Vec<_>>>()?;
        let j = flat.chunks(n).map(|c| c.to_vec()).collect();
        Self::new(man, j)
    }

    pub fn manifold(&self) -> &str {
        &self.manifold
    }

    pub fn at(&self, p: &[f64]) -> Result<Matrix> {
        let n = self.j.len();
        let mut m = Matrix::zeros(n, n);
        for k in 0..n {
            for c in 0..n {
                m[(k, c)] = eval(&self.j[k][c], p)?;
            }
        }
        Ok(m)
    }

    /// `[i]` is the matrix `nabla_i J`.
    pub fn covariant_derivative(&self, man: &ChartedManifold, p: &[f64]) -> Result<Vec<Matrix>> {
        let n = self.j.len();
        let jm = self.at(p)?;
        let gam = man.christoffel(p)?;
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let gi = Matrix::from_fn(n, n, |k, m| gam.get(k, i, m));
            let mut d = &gi * &jm - &jm * &gi;
            for k in 0..n {
                for c in 0..n {
                    d[(k, c)] += eval(&self.dj[i][k][c], p)?;
                }
            }
            out.push(d);
        }
        Ok(out)
    }
}

/// `J^2 + I`, Hermitian compatibility and `nabla J` over orthonormal frames.
pub fn kaehler_check(man: &ChartedManifold, j: &ComplexStructure, samples: &[Vec<f64>], tol: f64) -> Result<CheckReport> {
    let (mut sq, mut compat, mut par) = (Vec::new(), Vec::new(), Vec::new());
    for p in samples {
        let jm = j.at(p)?;
        let n = jm.nrows();
        let g = man.metric_at(p)?;
        let e = crate::linalg::columns(&man.orthonormal_frame(p)?, n);
        sq.push((&jm * &jm + Matrix::identity(n, n)).amax());
        compat.push((e.transpose() * (jm.transpose() * &g * &jm - &g) * &e).amax());
        let dj = j.covariant_derivative(man, p)?;
        let mut worst = 0.0f64;
        for a in 0..n {
            let dir = e.column(a);
            let along = dj.iter().enumerate().fold(Matrix::zeros(n, n), |acc, (i, d)| acc + d * dir[i]);
            for b in 0..n {
                worst = worst.max(norm(&g, &(&along * e.column(b))));
            }
        }
        par.push(worst);
    }
    let mut r = CheckReport::new("kaehler", "Kaehler: J^2 = -I, g2(JX,JY) = g2(X,Y) (4.1), (nabla_X J)Y = 0");
    r.residual("j_squared_plus_identity", &sq, tol);
    r.residual("hermitian_compatibility", &compat, tol);
    r.residual("nabla_j", &par, tol);
    Ok(r.finish())
}

fn parallel_defect(map: &SmoothMap, j: &ComplexStructure, q: &[f64]) -> Result<f64> {
    Ok(j.covariant_derivative(map.target(), q)?.iter().map(|d| d.amax()).fold(0.0, f64::max))
}

pub fn anti_invariance_check(map: &SmoothMap, j: &ComplexStructure, samples: &[Vec<f64>], tol: f64) -> Result<CheckReport> {
    let mut res = Vec::new();
    let mut r = CheckReport::new("anti_invariance", "Definition: J(rangeF*_p) is contained in (rangeF*_p)^perp");
    for (idx, p) in samples.iter().enumerate() {
        let s = map.split(p)?;
        let jm = j.at(&s.image)?;
        let mut worst = 0.0f64;
        for e in &s.range {
            worst = worst.max(norm(&s.g2, &s.range_part(&(&jm * e))));
        }
        res.push(worst);
        if idx == 0 {
            let je = &jm * &s.range[0];
            for (k, nv) in s.normal.iter().enumerate() {
                r.value(format!("j_range0_on_normal{k}"), inner(&s.g2, &je, nv));
            }
        }
    }
    r.residual("range_part_of_j_range", &res, tol);
    Ok(r.finish())
}

/// `JV = BV + CV` for every normal basis vector at a point.
#[derive(Debug, Clone)]
pub struct BcDecomposition {
    pub point: Vec<f64>,
    pub g: Matrix,
    pub normal: Vec<Vector>,
    pub j_normal: Vec<Vector>,
    pub b: Vec<Vector>,
    pub c: Vec<Vector>,
    pub j_range: Vec<Vector>,
    pub mu: Vec<Vector>,
    pub lagrangian: bool,
}

impl BcDecomposition {
    fn build(g: &Matrix, jm: &Matrix, range: &[Vector], normal: &[Vector], point: Vec<f64>) -> Self {
        let j_range = gram_schmidt(g, &[], range.iter().map(|e| jm * e), 1e-8);
        let mut against = range.to_vec();
        against.extend(j_range.iter().cloned());
        let mut mu = gram_schmidt(g, &against, normal.iter().cloned(), 1e-8);
        for v in &mut mu {
            crate::linalg::fix_sign(v);
        }
        let j_normal: Vec<Vector> = normal.iter().map(|v| jm * v).collect();
        let b = j_normal.iter().map(|w| project(g, range, w)).collect();
        let c = j_normal.iter().map(|w| project(g, &mu, w)).collect();
        let lagrangian = mu.is_empty();
        BcDecomposition { point, g: g.clone(), normal: normal.to_vec(), j_normal, b, c, j_range, mu, lagrangian }
    }

    /// `(BV, CV)` for an arbitrary normal vector.
    pub fn split(&self, range: &[Vector], jv: &Vector) -> (Vector, Vector) {
        (project(&self.g, range, jv), project(&self.g, &self.mu, jv))
    }

    pub fn reconstruction_defect(&self) -> f64 {
        self.j_normal
            .iter()
            .zip(self.b.iter().zip(&self.c))
            .map(|(jv, (b, c))| (jv - b - c).amax())
            .fold(0.0, f64::max)
    }
}

pub fn bc_decompose(map: &SmoothMap, j: &ComplexStructure, p: &[f64]) -> Result<BcDecomposition> {
    let s = map.split(p)?;
    let jm = j.at(&s.image)?;
    Ok(BcDecomposition::build(&s.g2, &jm, &s.range, &s.normal, s.image.clone()))
}

fn frame_bc(frame: &TargetFrame, jm: &Matrix) -> BcDecomposition {
    BcDecomposition::build(&frame.g, jm, &frame.range, &frame.normal, frame.q.clone())
}

/// Per-sample norms of the two anti-invariant geodesic conditions.
#[derive(Debug, Clone, Default)]
pub struct AntiInvariantResiduals {
    /// `-S_{JA}A - S_{CV}A + (nabla_V BV + F*(nabla_X *F* BV))`
    pub range_condition: Vec<f64>,
    /// `(nabla F*)(X, *F* BV) + nabla-perp (JA) + nabla-perp (CV)`
    pub normal_condition: Vec<f64>,
    pub acceleration: Vec<f64>,
}

/// Evaluates both conditions along a decomposable trace. Requires a parallel `J`.
pub fn anti_invariant_geodesic_residuals(
    map: &SmoothMap,
    j: &ComplexStructure,
    trace: &GeodesicTrace,
    tol: f64,
) -> Result<AntiInvariantResiduals> {
    let target = map.target();
    let mut out = AntiInvariantResiduals::default();
    for i in 0..trace.len() {
        let defect = parallel_defect(map, j, &trace.points[i])?;
        if defect > tol {
            return Err(GeomError::RequiresKaehler(defect));
        }
        let s = curve_sample(map, trace, i)?;
        let g = &s.frame.g;
        let jm = j.at(&s.state.q)?;
        let bc = frame_bc(&s.frame, &jm);
        let (bv, cv) = bc.split(&s.frame.range, &(&jm * &s.normal));
        let ja = &jm * &s.range;
        let d_bv = covariant_along(target, &s.state, |a, q, v| {
            let f = map.target_frame(a, q)?;
            let jq = j.at(q)?;
            Ok(f.range_part(&(&jq * f.normal_part(v))))
        })?;
        let d_ja = covariant_along(target, &s.state, |a, q, v| {
            let f = map.target_frame(a, q)?;
            Ok(j.at(q)? * f.range_part(v))
        })?;
        let d_cv = covariant_along(target, &s.state, |a, q, v| {
            let f = map.target_frame(a, q)?;
            let jq = j.at(q)?;
            let b = frame_bc(&f, &jq);
            Ok(b.split(&f.range, &(&jq * f.normal_part(v))).1)
        })?;
        let e1 = -map.range_shape(&s.frame, &ja, &s.range)? - map.range_shape(&s.frame, &cv, &s.range)? + s.frame.range_part(&d_bv);
        let e2 = map.range_sff(&s.frame, &s.range, &bv)? + s.frame.normal_part(&d_ja) + s.frame.normal_part(&d_cv);
        let acc = &s.state.acc + target.christoffel(&s.state.q)?.contract(&s.state.vel, &s.state.vel);
        out.range_condition.push(norm(g, &e1));
        out.normal_condition.push(norm(g, &e2));
        out.acceleration.push(norm(g, &acc));
    }
    Ok(out)
}

/// Scalar of Theorem 4.7 at every sample of every trace.
pub fn theorem_4_7_scalars(map: &SmoothMap, j: &ComplexStructure, g: &ScalarField, trace: &GeodesicTrace) -> Result<Vec<f64>> {
    let target = map.target();
    let mut out = Vec::with_capacity(trace.len());
    for i in 0..trace.len() {
        let s = curve_sample(map, trace, i)?;
        let gm = &s.frame.g;
        let jm = j.at(&s.state.q)?;
        let bc = frame_bc(&s.frame, &jm);
        let (bv, cv) = bc.split(&s.frame.range, &(&jm * &s.normal));
        let ja = &jm * &s.range;
        let shapes = map.range_shape(&s.frame, &ja, &s.range)? + map.range_shape(&s.frame, &cv, &s.range)?;
        let d_ja = covariant_along(target, &s.state, |a, q, v| {
            let f = map.target_frame(a, q)?;
            Ok(j.at(q)? * f.range_part(v))
        })?;
        let normal_block = map.range_sff(&s.frame, &s.range, &bv)? + s.frame.normal_part(&d_ja);
        let dg = g.partials(&s.state.q)?.dot(&s.state.vel);
        let e = inner(gm, &shapes, &bv) - inner(gm, &normal_block, &cv) - inner(gm, &s.range, &s.range) * dg;
        out.push(e);
    }
    Ok(out)
}

pub fn clairaut_anti_invariant_check(
    map: &SmoothMap,
    j: &ComplexStructure,
    g: &ScalarField,
    traces: &[GeodesicTrace],
    samples: &[Vec<f64>],
    tol: f64,
) -> Result<CheckReport> {
    let mut r = CheckReport::new(
        "theorem_4_7",
        "Theorem 4.7: g2(S_{JF*X}F*X + S_{CV}F*X, BV) - g2((nabla F*)(X,*F*BV) + nabla-perp JF*X, CV) - g2(F*X,F*X) d(g o beta)/dt = 0",
    );
    let anti = anti_invariance_check(map, j, samples, tol)?;
    let kaehler = samples.iter().map(|p| parallel_defect(map, j, &map.apply(p)?)).collect::<Result<Vec<_>>>()?;
    r.residual("anti_invariance", &[anti.get("range_part_of_j_range").map(|x| x.max).unwrap_or(f64::NAN)], tol);
    r.residual("nabla_j", &kaehler, tol);
    let hyp = r.passed_residuals();
    let mut all = Vec::new();
    for tr in traces {
        all.extend(theorem_4_7_scalars(map, j, g, tr)?);
    }
    r.residual("theorem_scalar", &all, tol);
    let cert = certify(map, g, samples, tol)?;
    let certified = cert.certified();
    r.label("clairaut_certificate", cert.condition_ii.verdict.as_str());
    let scalar_ok = r.get("theorem_scalar").map(|x| x.pass).unwrap_or(false);
    let agreement = if !cert.hypotheses.passed() {
        "not-applicable"
    } else if certified == scalar_ok {
        "consistent"
    } else {
        "violated"
    };
    r.label("biconditional", agreement);
    Ok(if hyp { r.finish_with(scalar_ok) } else { r.hypothesis_not_met("target structure is not Kaehler or the map is not anti-invariant") })
}

pub fn theorem_4_8_dichotomy(map: &SmoothMap, j: &ComplexStructure, g: &ScalarField, samples: &[Vec<f64>], tol: f64) -> Result<CheckReport> {
    let mut vals = Vec::new();
    let mut rank = 0;
    for p in samples {
        let s: FrameSplit = map.split(p)?;
        rank = rank.max(s.rank());
        let jm = j.at(&s.image)?;
        let dg = g.partials(&s.image)?;
        for e in &s.range {
            vals.push(dg.dot(&(&jm * e)));
        }
    }
    let mut r = CheckReport::new("theorem_4_8", "Theorem 4.8: dim(rangeF*) = 1 or g is constant on J(rangeF*)");
    r.residual("j_range_derivative_of_g", &vals, tol);
    let branch_ii = r.passed_residuals();
    let branch = if rank == 1 {
        "dim(rangeF*) = 1"
    } else if branch_ii {
        "g constant on J(rangeF*)"
    } else {
        "neither"
    };
    r.label("branch", branch);
    r.value("rank", rank as f64);
    let certified = certify(map, g, samples, tol)?.certified();
    Ok(if certified { r.finish_with(branch != "neither") } else { r.hypothesis_not_met("not a certified Clairaut map for this g") })
}

pub fn theorem_4_6_check(map: &SmoothMap, j: &ComplexStructure, g: &ScalarField, samples: &[Vec<f64>], tol: f64) -> Result<CheckReport> {
    let mut r = CheckReport::new("theorem_4_6", "Theorem 4.6: rangeF* is (i) minimal and (ii) totally geodesic");
    let (mut h, mut sff, mut lag) = (Vec::new(), Vec::new(), true);
    let mut rank = usize::MAX;
    for p in samples {
        let s = map.split(p)?;
        rank = rank.min(s.rank());
        lag &= bc_decompose(map, j, p)?.lagrangian;
        h.push(norm(&s.g2, &map.mean_curvature_range(p)?));
        let mut worst = 0.0f64;
        for x in &s.horizontal {
            for y in &s.horizontal {
                worst = worst.max(norm(&s.g2, &map.second_fundamental_form(p, x, y)?));
            }
        }
        sff.push(worst);
    }
    r.residual("mean_curvature_h2", &h, tol);
    r.residual("second_fundamental_form", &sff, tol);
    r.label("lagrangian", lag.to_string());
    let kaehler = samples.iter().map(|p| parallel_defect(map, j, &map.apply(p)?)).collect::<Result<Vec<_>>>()?;
    let certified = certify(map, g, samples, tol)?.certified();
    let is_kaehler = kaehler.iter().all(|d| *d < tol);
    Ok(if rank <= 1 || rank == usize::MAX {
        r.hypothesis_not_met("requires dim(rangeF*) > 1")
    } else if !lag {
        r.hypothesis_not_met("map is not Lagrangian")
    } else if !certified || !is_kaehler {
        r.hypothesis_not_met("not a certified Clairaut map into a Kaehler target")
    } else {
        r.finish()
    })
}

#[cfg(test)]
mod tests;
