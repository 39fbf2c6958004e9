//! Single-chart Riemannian manifolds: metric, connection, curvature and
//! the differential operators built on them.

use std::sync::OnceLock;

use crate::error::{GeomError, Result};
use crate::linalg::{gram_schmidt, inner, min_eigenvalue, unit, Matrix, Vector};
use crate::report::CheckReport;
use crate::symexpr::{parse, DomainError, Expr, SymbolTable};
use std::collections::BTreeMap;

pub(crate) fn parse_text(text: &str, table: &SymbolTable) -> Result<Expr> {
    parse(text, table).map_err(|e| GeomError::Invalid(format!("'{text}': {e}")))
}

pub(crate) fn eval(e: &Expr, p: &[f64]) -> Result<f64> {
    e.evaluate(p).map_err(domain)
}

pub(crate) fn domain(e: DomainError) -> GeomError {
    GeomError::Domain(e.to_string())
}

/// Minimum metric eigenvalue accepted as positive definite.
pub const PD_TOL: f64 = 1e-10;

/// A Riemannian metric on an open subset of R^n in a single chart.
#[derive(Debug)]
pub struct ChartedManifold {
    name: String,
    coords: Vec<String>,
    metric: Vec<Vec<Expr>>,
    domain: Vec<Expr>,
    dmetric: Vec<Vec<Vec<Expr>>>,
    d2metric: OnceLock<Vec<Vec<Vec<Vec<Expr>>>>>,
}

impl ChartedManifold {
    /// `metric` is row-major; entries (i,j) and (j,i) must be the same tree.
    pub fn new(name: impl Into<String>, coords: Vec<String>, metric: Vec<Vec<Expr>>) -> Result<Self> {
        let n = coords.len();
        if n == 0 || metric.len() != n || metric.iter().any(|r| r.len() != n) {
            return Err(GeomError::Invalid(format!("metric must be {n}x{n}")));
        }
        for i in 0..n {
            for j in 0..i {
                if metric[i][j] != metric[j][i] {
                    return Err(GeomError::Invalid(format!("metric entries ({i},{j}) and ({j},{i}) differ")));
                }
            }
        }
        for row in &metric {
            for e in row {
                if e.max_var().is_some_and(|v| v >= n) {
                    return Err(GeomError::Invalid("metric references an undeclared coordinate".into()));
                }
            }
        }
        let dmetric = (0..n)
            .map(|k| metric.iter().map(|row| row.iter().map(|e| e.differentiate(k)).collect()).collect())
            .collect();
        Ok(Self { name: name.into(), coords, metric, domain: Vec::new(), dmetric, d2metric: OnceLock::new() })
    }

    /// Builds a chart from expression text; `metric` is row-major with n*n entries.
    pub fn from_text(
        name: impl Into<String>,
        coords: &[&str],
        metric: &[&str],
        constants: &BTreeMap<String, f64>,
    ) -> Result<Self> {
        let names: Vec<String> = coords.iter().map(|s| s.to_string()).collect();
        let n = names.len();
        if metric.len() != n * n {
            return Err(GeomError::Invalid(format!("expected {} metric entries, got {}", n * n, metric.len())));
        }
        let table = SymbolTable::new(&names).with_constants(constants);
        let mut rows = Vec::with_capacity(n);
        for i in 0..n {
            let mut row = Vec::with_capacity(n);
            for j in 0..n {
                row.push(parse_text(metric[i * n + j], &table)?);
            }
            rows.push(row);
        }
        Self::new(name, names, rows)
    }

    /// Euclidean metric on R^n.
    pub fn euclidean(name: impl Into<String>, coords: Vec<String>) -> Self {
        let n = coords.len();
        let metric = (0..n)
            .map(|i| (0..n).map(|j| Expr::constant(if i == j { 1.0 } else { 0.0 })).collect())
            .collect();
        Self::new(name, coords, metric).expect("identity metric is valid")
    }

    /// Adds inequality constraints `c(p) > 0` restricting the admissible domain.
    pub fn with_domain(mut self, constraints: Vec<Expr>) -> Self {
        self.domain = constraints;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[String] {
        &self.coords
    }

    pub fn metric_exprs(&self) -> &[Vec<Expr>] {
        &self.metric
    }

    pub fn in_domain(&self, p: &[f64]) -> bool {
        p.len() == self.dim() && self.domain.iter().all(|c| matches!(c.evaluate(p), Ok(v) if v > 0.0))
    }

    fn check_len(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.dim() {
            return Err(GeomError::DimensionMismatch { expected: self.dim(), got: p.len() });
        }
        Ok(())
    }

    /// Metric matrix at `p`, verified positive definite.
    pub fn metric_at(&self, p: &[f64]) -> Result<Matrix> {
        self.check_len(p)?;
        let n = self.dim();
        let mut g = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = eval(&self.metric[i][j], p)?;
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        let min_eig = min_eigenvalue(&g);
        if !(min_eig > PD_TOL) {
            return Err(GeomError::NotPositiveDefinite { point: p.to_vec(), min_eig });
        }
        Ok(g)
    }

    pub fn inverse_metric_at(&self, p: &[f64]) -> Result<Matrix> {
        let g = self.metric_at(p)?;
        g.try_inverse().ok_or_else(|| GeomError::SingularMetric { point: p.to_vec() })
    }

    /// `[k]` holds the matrix of partials `d_k g_ij`.
    pub fn metric_derivatives(&self, p: &[f64]) -> Result<Vec<Matrix>> {
        let n = self.dim();
        self.dmetric
            .iter()
            .map(|dk| {
                let mut m = Matrix::zeros(n, n);
                for i in 0..n {
                    for j in i..n {
                        let v = eval(&dk[i][j], p)?;
                        m[(i, j)] = v;
                        m[(j, i)] = v;
                    }
                }
                Ok(m)
            })
            .collect()
    }

    fn metric_second_derivatives(&self, p: &[f64]) -> Result<Vec<Vec<Matrix>>> {
        let n = self.dim();
        let d2 = self.d2metric.get_or_init(|| {
            (0..n)
                .map(|l| {
                    self.dmetric
                        .iter()
                        .map(|dk| dk.iter().map(|row| row.iter().map(|e| e.differentiate(l)).collect()).collect())
                        .collect()
                })
                .collect()
        });
        d2.iter()
            .map(|dl| {
                dl.iter()
                    .map(|dlk: &Vec<Vec<Expr>>| {
                        let mut m = Matrix::zeros(n, n);
                        for i in 0..n {
                            for j in i..n {
                                let v = eval(&dlk[i][j], p)?;
                                m[(i, j)] = v;
                                m[(j, i)] = v;
                            }
                        }
                        Ok(m)
                    })
                    .collect()
            })
            .collect()
    }

    /// Christoffel symbols of the Levi-Civita connection at `p`.
    pub fn christoffel(&self, p: &[f64]) -> Result<Christoffel> {
        let ginv = self.inverse_metric_at(p)?;
        let dg = self.metric_derivatives(p)?;
        Ok(christoffel_from(&ginv, &dg))
    }

    /// `[l]` holds the partial derivative `d_l Gamma^k_ij`.
    pub fn christoffel_derivatives(&self, p: &[f64]) -> Result<Vec<Christoffel>> {
        let n = self.dim();
        let ginv = self.inverse_metric_at(p)?;
        let dg = self.metric_derivatives(p)?;
        let d2g = self.metric_second_derivatives(p)?;
        let lowered = lowered_christoffel(&dg);
        let mut out = Vec::with_capacity(n);
        for l in 0..n {
            let dginv = -&ginv * &dg[l] * &ginv;
            let dlow = lowered_christoffel(&d2g[l]);
            let mut c = Christoffel::zeros(n);
            for k in 0..n {
                for i in 0..n {
                    for j in i..n {
                        let mut s = 0.0;
                        for m in 0..n {
                            s += dginv[(k, m)] * lowered[m][(i, j)] + ginv[(k, m)] * dlow[m][(i, j)];
                        }
                        c.set(k, i, j, s);
                    }
                }
            }
            out.push(c);
        }
        Ok(out)
    }

    /// Riemann tensor `R^l_ijk`, so that `R(d_j, d_k) d_i = R^l_ijk d_l`.
    pub fn riemann(&self, p: &[f64]) -> Result<Riemann> {
        let n = self.dim();
        let gam = self.christoffel(p)?;
        let dgam = self.christoffel_derivatives(p)?;
        let mut r = Riemann { n, data: vec![0.0; n * n * n * n] };
        for l in 0..n {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let mut s = dgam[j].get(l, i, k) - dgam[k].get(l, i, j);
                        for m in 0..n {
                            s += gam.get(l, j, m) * gam.get(m, i, k) - gam.get(l, k, m) * gam.get(m, i, j);
                        }
                        r.data[((l * n + i) * n + j) * n + k] = s;
                    }
                }
            }
        }
        Ok(r)
    }

    /// Ricci tensor `Ric_ik = R^j_ijk`.
    pub fn ricci(&self, p: &[f64]) -> Result<Matrix> {
        let n = self.dim();
        let r = self.riemann(p)?;
        let mut ric = Matrix::zeros(n, n);
        for i in 0..n {
            for k in 0..n {
                ric[(i, k)] = (0..n).map(|j| r.get(j, i, j, k)).sum();
            }
        }
        Ok((&ric + ric.transpose()) * 0.5)
    }

    pub fn scalar_curvature(&self, p: &[f64]) -> Result<f64> {
        let ginv = self.inverse_metric_at(p)?;
        Ok(ginv.component_mul(&self.ricci(p)?).sum())
    }

    /// Covariant derivative of the constant-coefficient extension of `y` along `x`,
    /// i.e. `Gamma(x, y)`.
    pub fn connection_term(&self, p: &[f64], x: &Vector, y: &Vector) -> Result<Vector> {
        Ok(self.christoffel(p)?.contract(x, y))
    }

    pub fn gradient(&self, f: &ScalarField, p: &[f64]) -> Result<Vector> {
        Ok(self.inverse_metric_at(p)? * f.partials(p)?)
    }

    /// Hessian matrix `d_i d_j f - Gamma^k_ij d_k f`.
    pub fn hessian_matrix(&self, f: &ScalarField, p: &[f64]) -> Result<Matrix> {
        let n = self.dim();
        let gam = self.christoffel(p)?;
        let df = f.partials(p)?;
        let mut h = f.second_partials(p)?;
        for i in 0..n {
            for j in 0..n {
                h[(i, j)] -= (0..n).map(|k| gam.get(k, i, j) * df[k]).sum::<f64>();
            }
        }
        Ok(h)
    }

    pub fn hessian(&self, f: &ScalarField, p: &[f64], x: &Vector, y: &Vector) -> Result<f64> {
        Ok(x.dot(&(self.hessian_matrix(f, p)? * y)))
    }

    pub fn laplacian(&self, f: &ScalarField, p: &[f64]) -> Result<f64> {
        let ginv = self.inverse_metric_at(p)?;
        Ok(ginv.component_mul(&self.hessian_matrix(f, p)?).sum())
    }

    /// Matrix of `(L_Z g)(d_i, d_j) = g(nabla_i Z, d_j) + g(d_i, nabla_j Z)`.
    pub fn lie_derivative_matrix(&self, z: &VectorField, p: &[f64]) -> Result<Matrix> {
        let g = self.metric_at(p)?;
        let nz = z.covariant_matrix(self, p)?;
        let a = &g * nz;
        Ok(&a + a.transpose())
    }

    pub fn lie_derivative_metric(&self, z: &VectorField, p: &[f64], x: &Vector, y: &Vector) -> Result<f64> {
        Ok(x.dot(&(self.lie_derivative_matrix(z, p)? * y)))
    }

    /// Orthonormal frame from Gram-Schmidt on the coordinate basis in declaration order.
    pub fn orthonormal_frame(&self, p: &[f64]) -> Result<Vec<Vector>> {
        let g = self.metric_at(p)?;
        let n = self.dim();
        Ok(gram_schmidt(&g, &[], (0..n).map(|i| unit(n, i)), 1e-12))
    }

    /// Expresses a bilinear form matrix in the orthonormal frame at `p`.
    pub fn frame_components(&self, p: &[f64], form: &Matrix) -> Result<Matrix> {
        let e = crate::linalg::columns(&self.orthonormal_frame(p)?, self.dim());
        Ok(e.transpose() * form * e)
    }

    pub fn killing_check(&self, z: &VectorField, samples: &[Vec<f64>], tol: f64) -> Result<CheckReport> {
        let mut res = Vec::with_capacity(samples.len());
        for p in samples {
            let l = self.frame_components(p, &self.lie_derivative_matrix(z, p)?)?;
            res.push(l.amax());
        }
        let mut r = CheckReport::new("killing", "L_Z g = 0");
        r.residual("lie_derivative", &res, tol);
        Ok(r.finish())
    }

    /// Conformal test; also returns the per-sample potential `f` with `L_Z g = 2 f g`.
    pub fn conformal_check(&self, z: &VectorField, samples: &[Vec<f64>], tol: f64) -> Result<(CheckReport, Vec<f64>)> {
        let n = self.dim() as f64;
        let mut res = Vec::with_capacity(samples.len());
        let mut fs = Vec::with_capacity(samples.len());
        for p in samples {
            let l = self.frame_components(p, &self.lie_derivative_matrix(z, p)?)?;
            let tr = l.trace();
            let dev = &l - Matrix::identity(l.nrows(), l.ncols()) * (tr / n);
            res.push(dev.amax());
            fs.push(tr / (2.0 * n));
        }
        let mut r = CheckReport::new("conformal", "L_Z g = 2 f g");
        r.residual("trace_free_part", &res, tol);
        if !fs.is_empty() {
            r.value("f_mean", fs.iter().sum::<f64>() / fs.len() as f64);
        }
        Ok((r.finish(), fs))
    }
}

pub(crate) fn lowered_christoffel(dg: &[Matrix]) -> Vec<Matrix> {
    let n = dg.len();
    (0..n)
        .map(|m| {
            let mut c = Matrix::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    c[(i, j)] = 0.5 * (dg[i][(j, m)] + dg[j][(i, m)] - dg[m][(i, j)]);
                }
            }
            c
        })
        .collect()
}

pub(crate) fn christoffel_from(ginv: &Matrix, dg: &[Matrix]) -> Christoffel {
    let n = dg.len();
    let low = lowered_christoffel(dg);
    let mut c = Christoffel::zeros(n);
    for k in 0..n {
        for i in 0..n {
            for j in i..n {
                c.set(k, i, j, (0..n).map(|m| ginv[(k, m)] * low[m][(i, j)]).sum());
            }
        }
    }
    c
}

/// `Gamma^k_ij`, symmetric in the lower indices by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Christoffel {
    n: usize,
    data: Vec<f64>,
}

impl Christoffel {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n * n] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.data[(k * self.n + i) * self.n + j]
    }

    fn set(&mut self, k: usize, i: usize, j: usize, v: f64) {
        let n = self.n;
        self.data[(k * n + i) * n + j] = v;
        self.data[(k * n + j) * n + i] = v;
    }

    /// `Gamma(x, y)^k = Gamma^k_ij x^i y^j`.
    pub fn contract(&self, x: &Vector, y: &Vector) -> Vector {
        let n = self.n;
        Vector::from_fn(n, |k, _| {
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    s += self.get(k, i, j) * x[i] * y[j];
                }
            }
            s
        })
    }

    /// Matrix `M^k_j = Gamma^k_ij x^i`.
    pub fn along(&self, x: &Vector) -> Matrix {
        let n = self.n;
        Matrix::from_fn(n, n, |k, j| (0..n).map(|i| self.get(k, i, j) * x[i]).sum())
    }
}

#[derive(Debug, Clone)]
pub struct Riemann {
    n: usize,
    data: Vec<f64>,
}

impl Riemann {
    pub fn get(&self, l: usize, i: usize, j: usize, k: usize) -> f64 {
        let n = self.n;
        self.data[((l * n + i) * n + j) * n + k]
    }

    /// `R_mijk = g_ml R^l_ijk`.
    pub fn lowered(&self, g: &Matrix, m: usize, i: usize, j: usize, k: usize) -> f64 {
        (0..self.n).map(|l| g[(m, l)] * self.get(l, i, j, k)).sum()
    }

    /// `R(x, y) z`.
    pub fn apply(&self, x: &Vector, y: &Vector, z: &Vector) -> Vector {
        let n = self.n;
        Vector::from_fn(n, |l, _| {
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        s += self.get(l, i, j, k) * z[i] * x[j] * y[k];
                    }
                }
            }
            s
        })
    }
}

/// Scalar function with cached first and second partials.
#[derive(Debug, Clone)]
pub struct ScalarField {
    expr: Expr,
    d1: Vec<Expr>,
    d2: Vec<Vec<Expr>>,
}

impl ScalarField {
    pub fn new(expr: Expr, dim: usize) -> Self {
        let d1: Vec<Expr> = (0..dim).map(|i| expr.differentiate(i)).collect();
        let d2 = d1.iter().map(|d| (0..dim).map(|j| d.differentiate(j)).collect()).collect();
        Self { expr, d1, d2 }
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn dim(&self) -> usize {
        self.d1.len()
    }

    pub fn value(&self, p: &[f64]) -> Result<f64> {
        eval(&self.expr, p)
    }

    pub fn partials(&self, p: &[f64]) -> Result<Vector> {
        let v: Result<Vec<f64>> = self.d1.iter().map(|e| eval(e, p)).collect();
        Ok(Vector::from_vec(v?))
    }

    pub fn second_partials(&self, p: &[f64]) -> Result<Matrix> {
        let n = self.dim();
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = eval(&self.d2[i][j], p)?;
            }
        }
        Ok(m)
    }

    /// Directional derivative `X(f)`.
    pub fn derivative_along(&self, p: &[f64], x: &Vector) -> Result<f64> {
        Ok(self.partials(p)?.dot(x))
    }

    pub fn shifted(&self, c: f64) -> Self {
        Self::new(self.expr.add(&Expr::constant(c)), self.dim())
    }
}

/// A vector field on a chart, either by components or as the gradient of a function.
#[derive(Debug, Clone)]
pub enum VectorField {
    Components { comps: Vec<Expr>, jac: Vec<Vec<Expr>> },
    Gradient(ScalarField),
}

impl VectorField {
    pub fn from_components(comps: Vec<Expr>) -> Self {
        let n = comps.len();
        let jac = comps.iter().map(|c| (0..n).map(|i| c.differentiate(i)).collect()).collect();
        VectorField::Components { comps, jac }
    }

    pub fn zero(n: usize) -> Self {
        Self::from_components(vec![Expr::zero(); n])
    }

    pub fn coordinate(n: usize, i: usize) -> Self {
        Self::from_components((0..n).map(|k| Expr::constant(if k == i { 1.0 } else { 0.0 })).collect())
    }

    pub fn gradient(f: ScalarField) -> Self {
        VectorField::Gradient(f)
    }

    pub fn value(&self, man: &ChartedManifold, p: &[f64]) -> Result<Vector> {
        match self {
            VectorField::Components { comps, .. } => {
                if comps.len() != man.dim() {
                    return Err(GeomError::DimensionMismatch { expected: man.dim(), got: comps.len() });
                }
                let v: Result<Vec<f64>> = comps.iter().map(|e| eval(e, p)).collect();
                Ok(Vector::from_vec(v?))
            }
            VectorField::Gradient(f) => man.gradient(f, p),
        }
    }

    /// Coordinate Jacobian `[k, i] = d_i Z^k`.
    pub fn jacobian(&self, man: &ChartedManifold, p: &[f64]) -> Result<Matrix> {
        let n = man.dim();
        match self {
            VectorField::Components { jac, .. } => {
                let mut m = Matrix::zeros(n, n);
                for k in 0..n {
                    for i in 0..n {
                        m[(k, i)] = eval(&jac[k][i], p)?;
                    }
                }
                Ok(m)
            }
            VectorField::Gradient(f) => {
                let ginv = man.inverse_metric_at(p)?;
                let dg = man.metric_derivatives(p)?;
                let df = f.partials(p)?;
                let hf = f.second_partials(p)?;
                let mut m = &ginv * hf;
                for i in 0..n {
                    let col = -&ginv * &dg[i] * &ginv * &df;
                    for k in 0..n {
                        m[(k, i)] += col[k];
                    }
                }
                Ok(m)
            }
        }
    }

    /// Matrix of `nabla Z`: column `i` is `nabla_{d_i} Z`.
    pub fn covariant_matrix(&self, man: &ChartedManifold, p: &[f64]) -> Result<Matrix> {
        let z = self.value(man, p)?;
        let gam = man.christoffel(p)?;
        Ok(self.jacobian(man, p)? + gam.along(&z))
    }

    pub fn covariant_derivative(&self, man: &ChartedManifold, p: &[f64], x: &Vector) -> Result<Vector> {
        Ok(self.covariant_matrix(man, p)? * x)
    }
}

/// `g(x, y)` at `p`.
pub fn metric_inner(man: &ChartedManifold, p: &[f64], x: &Vector, y: &Vector) -> Result<f64> {
    Ok(inner(&man.metric_at(p)?, x, y))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chart(coords: &[&str], metric: &[&str]) -> ChartedManifold {
        let names: Vec<String> = coords.iter().map(|s| s.to_string()).collect();
        let t = SymbolTable::new(&names);
        let n = names.len();
        let m = (0..n).map(|i| (0..n).map(|j| parse(metric[i * n + j], &t).unwrap()).collect()).collect();
        ChartedManifold::new("m", names, m).unwrap()
    }

    fn hyperbolic() -> ChartedManifold {
        chart(&["y1", "y2"], &["exp(2*y2)", "0", "0", "1"])
    }

    fn sphere() -> ChartedManifold {
        chart(&["th", "ph"], &["1", "0", "0", "sin(th)^2"])
    }

    /// Christoffel symbols from finite differences of the metric entries.
    fn fd_christoffel(m: &ChartedManifold, p: &[f64]) -> Vec<f64> {
        let n = m.dim();
        let h = 1e-6;
        let dg: Vec<Matrix> = (0..n)
            .map(|k| {
                let mut a = p.to_vec();
                let mut b = p.to_vec();
                a[k] += h;
                b[k] -= h;
                (m.metric_at(&a).unwrap() - m.metric_at(&b).unwrap()) / (2.0 * h)
            })
            .collect();
        let ginv = m.inverse_metric_at(p).unwrap();
        let mut out = vec![0.0; n * n * n];
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    out[(k * n + i) * n + j] = (0..n)
                        .map(|l| 0.5 * ginv[(k, l)] * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)]))
                        .sum();
                }
            }
        }
        out
    }

    #[test]
    fn christoffel_examples() {
        let e = ChartedManifold::euclidean("e", vec!["a".into(), "b".into()]);
        assert!(e.christoffel(&[0.3, 0.4]).unwrap().data.iter().all(|v| *v == 0.0));

        let h = hyperbolic();
        let p = [0.2, 0.7];
        let c = h.christoffel(&p).unwrap();
        let fd = fd_christoffel(&h, &p);
        for (a, b) in c.data.iter().zip(&fd) {
            assert!((a - b).abs() < 1e-8);
        }
        assert!((c.get(0, 0, 1) - 1.0).abs() < 1e-14);
        assert!((c.get(1, 0, 0) + (1.4f64).exp()).abs() < 1e-12);

        let s = sphere();
        let q = [std::f64::consts::FRAC_PI_3, 0.1];
        let c = s.christoffel(&q).unwrap();
        let fd = fd_christoffel(&s, &q);
        assert!((c.get(0, 1, 1) - fd[3]).abs() < 1e-8);
        assert!((c.get(0, 1, 1) + 0.4330127018922193).abs() < 1e-12);
    }

    #[test]
    fn curvature_examples() {
        // Gauss curvature of dy2^2 + f(y2)^2 dy1^2 is -f''/f.
        let h = hyperbolic();
        let p = [0.3, -0.4];
        let g = h.metric_at(&p).unwrap();
        let r = h.riemann(&p).unwrap();
        let k = r.lowered(&g, 0, 1, 0, 1) / g.determinant();
        assert!((k + 1.0).abs() < 1e-12);
        let ric = h.ricci(&p).unwrap();
        assert!((ric + &g).amax() < 1e-12);
        assert!((h.scalar_curvature(&p).unwrap() + 2.0).abs() < 1e-12);

        let s = sphere();
        let q = [1.1, 0.2];
        let g = s.metric_at(&q).unwrap();
        let r = s.riemann(&q).unwrap();
        assert!((r.lowered(&g, 0, 1, 0, 1) / g.determinant() - 1.0).abs() < 1e-12);
        assert!((s.ricci(&q).unwrap() - &g).amax() < 1e-12);
        assert!((s.scalar_curvature(&q).unwrap() - 2.0).abs() < 1e-12);

        let e = ChartedManifold::euclidean("e", vec!["a".into(), "b".into()]);
        assert_eq!(e.scalar_curvature(&[1.0, 2.0]).unwrap(), 0.0);
    }

    #[test]
    fn gradient_hessian_laplacian_examples() {
        let h = hyperbolic();
        let t = SymbolTable::new(h.coords());
        let f = ScalarField::new(parse("y2", &t).unwrap(), 2);
        let p = [0.5, 0.25];
        let grad = h.gradient(&f, &p).unwrap();
        assert_eq!(grad.as_slice(), &[0.0, 1.0]);
        let x = Vector::from_vec(vec![(-0.25f64).exp(), 0.0]);
        assert!((h.hessian(&f, &p, &x, &x).unwrap() - 1.0).abs() < 1e-12);
        assert!((h.laplacian(&f, &p).unwrap() - 1.0).abs() < 1e-12);

        let e = ChartedManifold::euclidean("e", vec!["y1".into(), "y2".into()]);
        let q = ScalarField::new(parse("y1^2 + y2^2", &t).unwrap(), 2);
        assert!((e.laplacian(&q, &p).unwrap() - 4.0).abs() < 1e-14);
        let y1 = ScalarField::new(parse("y1", &t).unwrap(), 2);
        assert_eq!(e.gradient(&y1, &p).unwrap().as_slice(), &[1.0, 0.0]);
    }

    #[test]
    fn lie_derivative_and_killing() {
        let h = hyperbolic();
        let p = [0.0, 0.3];
        let z = VectorField::coordinate(2, 1);
        let d1 = unit(2, 0);
        let l = h.lie_derivative_metric(&z, &p, &d1, &d1).unwrap();
        assert!((l - 2.0 * (0.6f64).exp()).abs() < 1e-12);
        let samples = vec![p.to_vec(), vec![1.0, -0.5]];
        assert!(!h.killing_check(&z, &samples, 1e-8).unwrap().passed());
        assert!(h.killing_check(&VectorField::coordinate(2, 0), &samples, 1e-8).unwrap().passed());

        let e = ChartedManifold::euclidean("e", vec!["y1".into(), "y2".into()]);
        let radial = VectorField::from_components(vec![Expr::var(0), Expr::var(1)]);
        let (rep, fs) = e.conformal_check(&radial, &samples, 1e-10).unwrap();
        assert!(rep.passed());
        assert!(fs.iter().all(|f| (f - 1.0).abs() < 1e-14));
    }

    #[test]
    fn gradient_field_jacobian_matches_finite_difference() {
        let h = hyperbolic();
        let t = SymbolTable::new(h.coords());
        let f = ScalarField::new(parse("y1*y2 + exp(y2)", &t).unwrap(), 2);
        let z = VectorField::gradient(f);
        let p = [0.4, -0.2];
        let j = z.jacobian(&h, &p).unwrap();
        for i in 0..2 {
            let mut a = p.to_vec();
            let mut b = p.to_vec();
            a[i] += 1e-6;
            b[i] -= 1e-6;
            let fd = (z.value(&h, &a).unwrap() - z.value(&h, &b).unwrap()) / 2e-6;
            for k in 0..2 {
                assert!((j[(k, i)] - fd[k]).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn rejects_bad_metrics() {
        let t = SymbolTable::new(&["a".into()]);
        let m = ChartedManifold::new("m", vec!["a".into()], vec![vec![parse("a", &t).unwrap()]]).unwrap();
        assert!(matches!(m.metric_at(&[-1.0]), Err(GeomError::NotPositiveDefinite { .. })));
        let t2 = SymbolTable::new(&["a".into(), "b".into()]);
        let asym = vec![
            vec![Expr::one(), parse("a", &t2).unwrap()],
            vec![parse("b", &t2).unwrap(), Expr::one()],
        ];
        assert!(ChartedManifold::new("m", vec!["a".into(), "b".into()], asym).is_err());
    }
}
