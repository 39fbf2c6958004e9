//! Operator calculus of a smooth map between charted manifolds: differential,
//! subspace splits, second fundamental form, shape operator, mean curvatures.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{GeomError, Result};
use crate::geometry::{eval, parse_text, ChartedManifold, VectorField};
use crate::linalg::{columns, fix_sign, gram_schmidt, inner, singular_split, norm, project, unit, Matrix, Vector};
use crate::report::CheckReport;
use crate::symexpr::{Expr, SymbolTable};

/// Singular values at or below this are treated as zero.
pub const RANK_TOL: f64 = 1e-10;
/// Singular values in `(RANK_TOL, AMBIGUITY_TOP]` make the rank ambiguous.
pub const AMBIGUITY_TOP: f64 = 100.0 * RANK_TOL;
/// Tolerance for horizontality and normality preconditions.
pub const PRECONDITION_TOL: f64 = 1e-8;

const NEIGHBOR_STEP: f64 = 1e-5;

#[derive(Debug)]
pub struct SmoothMap {
    name: String,
    source: Arc<ChartedManifold>,
    target: Arc<ChartedManifold>,
    components: Vec<Expr>,
    jac: Vec<Vec<Expr>>,
    hess: Vec<Vec<Vec<Expr>>>,
}

/// Orthonormal bases of the four canonical subspaces at a point.
#[derive(Debug, Clone)]
pub struct FrameSplit {
    pub point: Vec<f64>,
    pub image: Vec<f64>,
    pub jacobian: Matrix,
    pub g1: Matrix,
    pub g2: Matrix,
    pub kernel: Vec<Vector>,
    pub horizontal: Vec<Vector>,
    pub range: Vec<Vector>,
    pub normal: Vec<Vector>,
}

impl FrameSplit {
    pub fn rank(&self) -> usize {
        self.range.len()
    }

    pub fn push(&self, x: &Vector) -> Vector {
        &self.jacobian * x
    }

    pub fn range_part(&self, v: &Vector) -> Vector {
        project(&self.g2, &self.range, v)
    }

    pub fn normal_part(&self, v: &Vector) -> Vector {
        project(&self.g2, &self.normal, v)
    }

    pub fn kernel_part(&self, x: &Vector) -> Vector {
        project(&self.g1, &self.kernel, x)
    }

    pub fn horizontal_part(&self, x: &Vector) -> Vector {
        project(&self.g1, &self.horizontal, x)
    }

    /// Images of the horizontal basis; orthonormal when the map is Riemannian.
    pub fn pushed_horizontal(&self) -> Vec<Vector> {
        self.horizontal.iter().map(|x| self.push(x)).collect()
    }
}

/// Range and normal bases at an arbitrary target point `q`; the range is the
/// column space of the differential at an anchor source point.
#[derive(Debug, Clone)]
pub struct TargetFrame {
    pub anchor: Vec<f64>,
    pub q: Vec<f64>,
    pub g: Matrix,
    pub range: Vec<Vector>,
    pub normal: Vec<Vector>,
}

impl TargetFrame {
    pub fn range_part(&self, v: &Vector) -> Vector {
        project(&self.g, &self.range, v)
    }

    pub fn normal_part(&self, v: &Vector) -> Vector {
        project(&self.g, &self.normal, v)
    }

    pub fn rank(&self) -> usize {
        self.range.len()
    }
}

/// Both evaluations of the tension field.
#[derive(Debug, Clone)]
pub struct Tension {
    pub direct: Vector,
    pub lemma: Vector,
}

impl SmoothMap {
    pub fn new(
        name: impl Into<String>,
        source: Arc<ChartedManifold>,
        target: Arc<ChartedManifold>,
        components: Vec<Expr>,
    ) -> Result<Self> {
        let (m, n) = (source.dim(), target.dim());
        if components.len() != n {
            return Err(GeomError::DimensionMismatch { expected: n, got: components.len() });
        }
        if components.iter().any(|c| c.max_var().is_some_and(|v| v >= m)) {
            return Err(GeomError::Invalid("map component references an undeclared coordinate".into()));
        }
        let jac: Vec<Vec<Expr>> =
            components.iter().map(|c| (0..m).map(|i| c.differentiate(i)).collect()).collect();
        let hess = jac.iter().map(|row| row.iter().map(|d| (0..m).map(|j| d.differentiate(j)).collect()).collect()).collect();
        Ok(Self { name: name.into(), source, target, components, jac, hess })
    }

    pub fn from_text(
        name: impl Into<String>,
        source: Arc<ChartedManifold>,
        target: Arc<ChartedManifold>,
        components: &[&str],
        constants: &BTreeMap<String, f64>,
    ) -> Result<Self> {
        let table = SymbolTable::new(source.coords()).with_constants(constants);
        let comps = components.iter().map(|c| parse_text(c, &table)).collect::<Result<Vec<_>>>()?;
        Self::new(name, source, target, comps)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn source(&self) -> &ChartedManifold {
        &self.source
    }

    pub fn target(&self) -> &ChartedManifold {
        &self.target
    }

    pub fn source_arc(&self) -> Arc<ChartedManifold> {
        self.source.clone()
    }

    pub fn target_arc(&self) -> Arc<ChartedManifold> {
        self.target.clone()
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }

    pub fn apply(&self, p: &[f64]) -> Result<Vec<f64>> {
        if p.len() != self.source.dim() {
            return Err(GeomError::DimensionMismatch { expected: self.source.dim(), got: p.len() });
        }
        self.components.iter().map(|c| eval(c, p)).collect()
    }

    /// Jacobian matrix `[gamma, i] = d_i F^gamma`.
    pub fn differential(&self, p: &[f64]) -> Result<Matrix> {
        let (m, n) = (self.source.dim(), self.target.dim());
        let mut j = Matrix::zeros(n, m);
        for g in 0..n {
            for i in 0..m {
                j[(g, i)] = eval(&self.jac[g][i], p)?;
            }
        }
        Ok(j)
    }

    /// `[gamma]` holds the matrix of second partials of `F^gamma`.
    pub fn second_partials(&self, p: &[f64]) -> Result<Vec<Matrix>> {
        let m = self.source.dim();
        self.hess
            .iter()
            .map(|h| {
                let mut mat = Matrix::zeros(m, m);
                for i in 0..m {
                    for j in 0..m {
                        mat[(i, j)] = eval(&h[i][j], p)?;
                    }
                }
                Ok(mat)
            })
            .collect()
    }

    /// Euclidean null-space basis of the Jacobian and the numeric rank.
    fn null_space(&self, p: &[f64], jac: &Matrix) -> Result<(Vec<Vector>, usize)> {
        let m = jac.ncols();
        let (values, right) = singular_split(jac);
        let mut null = Vec::new();
        let mut rank = 0;
        for (s, v) in values.iter().zip(right) {
            if *s > AMBIGUITY_TOP {
                rank += 1;
            } else if *s > RANK_TOL {
                return Err(GeomError::RankDeficiencyAmbiguous { point: p.to_vec(), value: *s });
            } else {
                null.push(v);
            }
        }
        debug_assert_eq!(null.len() + rank, m);
        Ok((null, rank))
    }

    pub fn rank_at(&self, p: &[f64]) -> Result<usize> {
        let jac = self.differential(p)?;
        Ok(self.null_space(p, &jac)?.1)
    }

    /// Split at `p`, after confirming the rank is constant at nearby points.
    pub fn split(&self, p: &[f64]) -> Result<FrameSplit> {
        let s = self.split_unchecked(p)?;
        for i in 0..p.len() {
            for sign in [-1.0, 1.0] {
                let mut q = p.to_vec();
                q[i] += sign * NEIGHBOR_STEP;
                if !self.source.in_domain(&q) {
                    continue;
                }
                if self.rank_at(&q)? != s.rank() {
                    return Err(GeomError::RankNotConstant { point: p.to_vec() });
                }
            }
        }
        Ok(s)
    }

    pub fn split_unchecked(&self, p: &[f64]) -> Result<FrameSplit> {
        let (m, n) = (self.source.dim(), self.target.dim());
        let jac = self.differential(p)?;
        let image = self.apply(p)?;
        let g1 = self.source.metric_at(p)?;
        let g2 = self.target.metric_at(&image)?;
        let (null, rank) = self.null_space(p, &jac)?;
        if rank == 0 {
            return Err(GeomError::ZeroRank { point: p.to_vec() });
        }
        let pnull: Matrix = null.iter().fold(Matrix::zeros(m, m), |acc, v| acc + v * v.transpose());
        let mut kernel = gram_schmidt(&g1, &[], (0..m).map(|i| &pnull * unit(m, i)), 1e-8);
        let mut horizontal = gram_schmidt(&g1, &kernel, (0..m).map(|i| unit(m, i)), 1e-8);
        let (values, right) = singular_split(&jac);
        let cols: Vec<Vector> =
            values.iter().zip(&right).filter(|(s, _)| **s > AMBIGUITY_TOP).map(|(s, v)| &jac * v / *s).collect();
        let prange: Matrix = cols.iter().fold(Matrix::zeros(n, n), |acc, v| acc + v * v.transpose());
        let mut range = gram_schmidt(&g2, &[], (0..n).map(|i| &prange * unit(n, i)), 1e-8);
        let mut normal = gram_schmidt(&g2, &range, (0..n).map(|i| unit(n, i)), 1e-8);
        if kernel.len() != m - rank || horizontal.len() != rank || range.len() != rank || normal.len() != n - rank {
            return Err(GeomError::SplitUnavailable(format!("inconsistent subspace dimensions at {p:?}")));
        }
        for v in kernel.iter_mut().chain(&mut horizontal).chain(&mut range).chain(&mut normal) {
            fix_sign(v);
        }
        Ok(FrameSplit { point: p.to_vec(), image, jacobian: jac, g1, g2, kernel, horizontal, range, normal })
    }

    pub fn target_frame(&self, anchor: &[f64], q: &[f64]) -> Result<TargetFrame> {
        let s = self.split_unchecked(anchor)?;
        let n = self.target.dim();
        let g = self.target.metric_at(q)?;
        let mut range = gram_schmidt(&g, &[], s.range.iter().cloned(), 1e-8);
        let mut normal = gram_schmidt(&g, &range, (0..n).map(|i| unit(n, i)), 1e-8);
        if range.len() != s.rank() || normal.len() != n - s.rank() {
            return Err(GeomError::SplitUnavailable(format!("degenerate frame at {q:?}")));
        }
        for v in range.iter_mut().chain(&mut normal) {
            fix_sign(v);
        }
        Ok(TargetFrame { anchor: anchor.to_vec(), q: q.to_vec(), g, range, normal })
    }

    /// Second fundamental form of the range distribution at `q` for range vectors `a`, `b`.
    /// On the image this is `(nabla F*)(X, Y)` with `X`, `Y` the horizontal preimages;
    /// off the image the range is extended with constant coefficients, giving the
    /// normal part of `Gamma(a, b)`.
    pub fn range_sff(&self, frame: &TargetFrame, a: &Vector, b: &Vector) -> Result<Vector> {
        let image = self.apply(&frame.anchor)?;
        let on_image = image.iter().zip(&frame.q).all(|(u, v)| (u - v).abs() < 1e-12);
        if on_image {
            let s = self.split_unchecked(&frame.anchor)?;
            let pushed = columns(&s.pushed_horizontal(), self.target.dim());
            let pinv = pushed.clone().pseudo_inverse(1e-12).map_err(|e| GeomError::SplitUnavailable(e.to_string()))?;
            let hor = columns(&s.horizontal, self.source.dim());
            let x = &hor * (&pinv * a);
            let y = &hor * (&pinv * b);
            Ok(s.normal_part(&self.sff_raw(&frame.anchor, &x, &y)?))
        } else {
            let gam = self.target.christoffel(&frame.q)?;
            Ok(frame.normal_part(&gam.contract(a, b)))
        }
    }

    /// Shape operator of the range distribution by duality:
    /// `S_v a = sum_k g(v, II(a, E_k)) E_k` over the orthonormal range basis.
    pub fn range_shape(&self, frame: &TargetFrame, v: &Vector, a: &Vector) -> Result<Vector> {
        let mut out = Vector::zeros(v.len());
        for e in &frame.range {
            let c = inner(&frame.g, v, &self.range_sff(frame, a, e)?);
            out.axpy(c, e, 1.0);
        }
        Ok(out)
    }

    pub fn check_riemannian(&self, samples: &[Vec<f64>], tol: f64) -> Result<CheckReport> {
        let mut res = Vec::with_capacity(samples.len());
        for p in samples {
            res.push(self.isometry_defect(&self.split(p)?));
        }
        let mut r = CheckReport::new("riemannian", "Eq (2.1) g2(F*X, F*Y) = g1(X, Y)");
        r.residual("isometry", &res, tol);
        Ok(r.finish())
    }

    /// Largest `|g2(F*Xi, F*Xj) - delta_ij|` over the horizontal basis.
    pub fn isometry_defect(&self, s: &FrameSplit) -> f64 {
        let pushed = s.pushed_horizontal();
        let mut worst = 0.0f64;
        for i in 0..pushed.len() {
            for j in i..pushed.len() {
                let d = inner(&s.g2, &pushed[i], &pushed[j]) - if i == j { 1.0 } else { 0.0 };
                worst = worst.max(d.abs());
            }
        }
        worst
    }

    /// `*F* v`, defined by `g1(*F* v, x) = g2(v, F* x)`.
    pub fn adjoint(&self, p: &[f64], v: &Vector) -> Result<Vector> {
        let jac = self.differential(p)?;
        let ginv = self.source.inverse_metric_at(p)?;
        let g2 = self.target.metric_at(&self.apply(p)?)?;
        Ok(ginv * jac.transpose() * g2 * v)
    }

    /// Coordinate formula for `(nabla F*)(x, y)`, valid for any tangent vectors.
    pub fn sff_raw(&self, p: &[f64], x: &Vector, y: &Vector) -> Result<Vector> {
        let jac = self.differential(p)?;
        let d2 = self.second_partials(p)?;
        let gm = self.source.christoffel(p)?;
        let gn = self.target.christoffel(&self.apply(p)?)?;
        let (fx, fy) = (&jac * x, &jac * y);
        let n = self.target.dim();
        let mut out = Vector::from_fn(n, |g, _| x.dot(&(&d2[g] * y)));
        out += gn.contract(&fx, &fy);
        out -= &jac * gm.contract(x, y);
        Ok(out)
    }

    /// `(nabla F*)(x, y)` for horizontal `x`, `y`.
    pub fn second_fundamental_form(&self, p: &[f64], x: &Vector, y: &Vector) -> Result<Vector> {
        let s = self.split_unchecked(p)?;
        for v in [x, y] {
            let k = norm(&s.g1, &s.kernel_part(v));
            if k > PRECONDITION_TOL * norm(&s.g1, v).max(1.0) {
                return Err(GeomError::NotHorizontal(k));
            }
        }
        self.sff_raw(p, x, y)
    }

    fn ensure_normal(&self, s: &FrameSplit, v: &Vector) -> Result<()> {
        let r = norm(&s.g2, &s.range_part(v));
        if r > PRECONDITION_TOL * norm(&s.g2, v).max(1.0) {
            return Err(GeomError::VNotNormal(r));
        }
        Ok(())
    }

    /// `nabla^N_{F* x} V` for a target field `V`.
    fn target_derivative(&self, s: &FrameSplit, field: &VectorField, x: &Vector) -> Result<Vector> {
        let v = field.value(&self.target, &s.image)?;
        self.ensure_normal(s, &v)?;
        field.covariant_derivative(&self.target, &s.image, &s.push(x))
    }

    /// `S_V F* x`, the negative range part of `nabla^N_{F* x} V`.
    pub fn shape_operator(&self, p: &[f64], field: &VectorField, x: &Vector) -> Result<Vector> {
        let s = self.split_unchecked(p)?;
        Ok(-s.range_part(&self.target_derivative(&s, field, x)?))
    }

    /// `nabla^{F perp}_x V`, the normal part of `nabla^N_{F* x} V`.
    pub fn normal_connection(&self, p: &[f64], x: &Vector, field: &VectorField) -> Result<Vector> {
        let s = self.split_unchecked(p)?;
        Ok(s.normal_part(&self.target_derivative(&s, field, x)?))
    }

    /// Shape operator for a normal vector `v` at `F(p)`, extended along the
    /// curve `s -> F(p + s x)` by normal projection.
    pub fn shape_operator_along(&self, p: &[f64], v: &Vector, x: &Vector) -> Result<Vector> {
        let s = self.split_unchecked(p)?;
        self.ensure_normal(&s, v)?;
        let extended = |t: f64| -> Result<Vector> {
            let q: Vec<f64> = p.iter().zip(x.iter()).map(|(a, b)| a + t * b).collect();
            Ok(self.split_unchecked(&q)?.normal_part(v))
        };
        let dv = richardson(&extended, 1e-3 / norm_inf(x).max(1e-12))?;
        let nabla = dv + self.target.christoffel(&s.image)?.contract(&s.push(x), v);
        Ok(-s.range_part(&nabla))
    }

    /// `H2 = (1/rank) sum (nabla F*)(X_j, X_j)` over the horizontal basis.
    pub fn mean_curvature_range(&self, p: &[f64]) -> Result<Vector> {
        let s = self.split_unchecked(p)?;
        self.mean_curvature_range_at(&s)
    }

    pub(crate) fn mean_curvature_range_at(&self, s: &FrameSplit) -> Result<Vector> {
        let mut h = Vector::zeros(self.target.dim());
        for x in &s.horizontal {
            h += self.sff_raw(&s.point, x, x)?;
        }
        Ok(h / s.horizontal.len() as f64)
    }

    /// g1-orthogonal projector onto the kernel at `p`.
    pub fn kernel_projector(&self, p: &[f64]) -> Result<Matrix> {
        let m = self.source.dim();
        let jac = self.differential(p)?;
        let g1 = self.source.metric_at(p)?;
        let (null, _) = self.null_space(p, &jac)?;
        if null.is_empty() {
            return Ok(Matrix::zeros(m, m));
        }
        let nb = Matrix::from_columns(&null);
        let gram = nb.transpose() * &g1 * &nb;
        let inv = gram.try_inverse().ok_or_else(|| GeomError::SingularMetric { point: p.to_vec() })?;
        Ok(&nb * inv * nb.transpose() * g1)
    }

    /// Mean curvature of the fibers: average horizontal part of `nabla^M_U W`
    /// where `W` extends each kernel basis vector by kernel projection.
    pub fn mean_curvature_fiber(&self, p: &[f64]) -> Result<Vector> {
        let s = self.split_unchecked(p)?;
        self.mean_curvature_fiber_at(&s)
    }

    pub(crate) fn mean_curvature_fiber_at(&self, s: &FrameSplit) -> Result<Vector> {
        let m = self.source.dim();
        if s.kernel.is_empty() {
            return Ok(Vector::zeros(m));
        }
        let gm = self.source.christoffel(&s.point)?;
        let mut h = Vector::zeros(m);
        for u in &s.kernel {
            let ext = |t: f64| -> Result<Vector> {
                let q: Vec<f64> = s.point.iter().zip(u.iter()).map(|(a, b)| a + t * b).collect();
                Ok(self.kernel_projector(&q)? * u)
            };
            let dw = richardson(&ext, 1e-3 / norm_inf(u).max(1e-12))?;
            let nabla = dw + gm.contract(u, u);
            h += s.horizontal_part(&nabla);
        }
        Ok(h / s.kernel.len() as f64)
    }

    /// Tension field by the direct trace and by `-k F*(H) + r H2`.
    pub fn tension_field(&self, p: &[f64]) -> Result<Tension> {
        let s = self.split_unchecked(p)?;
        let mut direct = Vector::zeros(self.target.dim());
        for e in s.kernel.iter().chain(&s.horizontal) {
            direct += self.sff_raw(p, e, e)?;
        }
        let h = self.mean_curvature_fiber_at(&s)?;
        let h2 = self.mean_curvature_range_at(&s)?;
        let lemma = -(s.push(&h) * s.kernel.len() as f64) + h2 * s.horizontal.len() as f64;
        Ok(Tension { direct, lemma })
    }

    /// Largest `|(nabla F*)(Xi, Xj) - delta_ij H2|` over the horizontal basis at one point.
    pub fn umbilical_defect(&self, s: &FrameSplit) -> Result<f64> {
        let h2 = self.mean_curvature_range_at(s)?;
        let mut worst = 0.0f64;
        for i in 0..s.horizontal.len() {
            for j in i..s.horizontal.len() {
                let mut d = self.sff_raw(&s.point, &s.horizontal[i], &s.horizontal[j])?;
                if i == j {
                    d -= &h2;
                }
                worst = worst.max(norm(&s.g2, &d));
            }
        }
        Ok(worst)
    }

    pub fn umbilical_check(&self, samples: &[Vec<f64>], tol: f64) -> Result<CheckReport> {
        let mut res = Vec::with_capacity(samples.len());
        for p in samples {
            res.push(self.umbilical_defect(&self.split(p)?)?);
        }
        let mut r = CheckReport::new("umbilical", "Lemma 2.1 (nabla F*)(X,Y) = g1(X,Y) H2");
        r.residual("umbilical", &res, tol);
        Ok(r.finish())
    }

    /// Largest `|g2((nabla F*)(Xi, Xj), F* Xk)|`: the range part of the second fundamental form.
    pub fn normality_defect(&self, s: &FrameSplit) -> Result<f64> {
        let pushed = s.pushed_horizontal();
        let mut worst = 0.0f64;
        for i in 0..s.horizontal.len() {
            for j in i..s.horizontal.len() {
                let b = self.sff_raw(&s.point, &s.horizontal[i], &s.horizontal[j])?;
                for z in &pushed {
                    worst = worst.max(inner(&s.g2, &b, z).abs());
                }
            }
        }
        Ok(worst)
    }
}

fn norm_inf(v: &Vector) -> f64 {
    v.amax()
}

/// Fourth-order central difference of a vector-valued function at 0.
pub(crate) fn richardson<F>(f: &F, h: f64) -> Result<Vector>
where
    F: Fn(f64) -> Result<Vector>,
{
    let (a, b, c, d) = (f(h)?, f(-h)?, f(2.0 * h)?, f(-2.0 * h)?);
    Ok(((a - b) * 8.0 - (c - d)) / (12.0 * h))
}
