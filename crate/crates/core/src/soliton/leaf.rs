use crate::error::{GeomError, Result};
use crate::geometry::{eval, ChartedManifold};
use crate::linalg::{Matrix, Vector};
use crate::symexpr::Expr;

/// Which subbundle a leaf integrates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LeafKind {
    Range,
    Normal,
}

/// Parametrized leaf through a base point of the target.
///
/// `embedding` and `at` are expressions over the variables
/// `[params..., base target coordinates...]`; `at` gives the parameter
/// values of the base point.
#[derive(Debug, Clone)]
pub struct Leaf {
    pub name: String,
    pub kind: LeafKind,
    pub params: Vec<String>,
    pub embedding: Vec<Expr>,
    pub at: Vec<Expr>,
}

/// Induced geometry of a leaf at the parameter value of a base point.
#[derive(Debug)]
pub struct LeafAtPoint {
    pub chart: ChartedManifold,
    pub u0: Vec<f64>,
    /// Columns are the target images of the parameter coordinate vectors.
    pub tangent: Matrix,
}

impl Leaf {
    pub fn dim(&self) -> usize {
        self.params.len()
    }

    /// Pulls the target metric back to the leaf through `base`.
    pub fn at_point(&self, target: &ChartedManifold, base: &[f64]) -> Result<LeafAtPoint> {
        let k = self.dim();
        let n = target.dim();
        if self.embedding.len() != n || self.at.len() != k {
            return Err(GeomError::Invalid(format!("leaf '{}' has inconsistent dimensions", self.name)));
        }
        // freeze the base point, leaving only the parameters free
        let mut subs: Vec<Expr> = (0..k).map(Expr::var).collect();
        subs.extend(base.iter().map(|b| Expr::constant(*b)));
        let phi: Vec<Expr> = self.embedding.iter().map(|e| e.substitute(&subs)).collect();
        let mut full = vec![0.0; k];
        full.extend_from_slice(base);
        let u0 = self.at.iter().map(|e| eval(e, &full)).collect::<Result<Vec<f64>>>()?;
        let dphi: Vec<Vec<Expr>> = phi.iter().map(|f| (0..k).map(|a| f.differentiate(a)).collect()).collect();
        let g = target.metric_exprs();
        let mut metric = vec![vec![Expr::zero(); k]; k];
        for a in 0..k {
            for b in a..k {
                let mut acc = Expr::zero();
                for i in 0..n {
                    for j in 0..n {
                        let term = dphi[i][a].mul(&dphi[j][b]);
                        if term.is_zero() {
                            continue;
                        }
                        acc = acc.add(&g[i][j].substitute(&phi).mul(&term));
                    }
                }
                metric[a][b] = acc.clone();
                metric[b][a] = acc;
            }
        }
        let chart = ChartedManifold::new(self.name.clone(), self.params.clone(), metric)?;
        let mut tangent = Matrix::zeros(n, k);
        for i in 0..n {
            for a in 0..k {
                tangent[(i, a)] = eval(&dphi[i][a], &u0)?;
            }
        }
        let image = phi.iter().map(|e| eval(e, &u0)).collect::<Result<Vec<f64>>>()?;
        if image.iter().zip(base).any(|(a, b)| (a - b).abs() > 1e-9 * (1.0 + b.abs())) {
            return Err(GeomError::Invalid(format!("leaf '{}' does not pass through {base:?}", self.name)));
        }
        Ok(LeafAtPoint { chart, u0, tangent })
    }
}

impl LeafAtPoint {
    /// Leaf coordinates of a target vector tangent to the leaf, with the
    /// size of the part not captured by the leaf tangent space.
    pub fn pull_back(&self, v: &Vector) -> Result<(Vector, f64)> {
        let pinv = self.tangent.clone().pseudo_inverse(1e-12).map_err(|e| GeomError::Invalid(e.to_string()))?;
        let c = pinv * v;
        let miss = (&self.tangent * &c - v).amax();
        Ok((c, miss))
    }

    /// Leaf Ricci tensor evaluated on target vectors tangent to the leaf.
    pub fn ricci_on(&self, vs: &[Vector]) -> Result<(Matrix, f64)> {
        let ric = self.chart.ricci(&self.u0)?;
        let mut coords = Vec::with_capacity(vs.len());
        let mut miss = 0.0f64;
        for v in vs {
            let (c, m) = self.pull_back(v)?;
            miss = miss.max(m);
            coords.push(c);
        }
        let k = vs.len();
        let out = Matrix::from_fn(k, k, |i, j| coords[i].dot(&(&ric * &coords[j])));
        Ok((out, miss))
    }

    pub fn scalar_curvature(&self) -> Result<f64> {
        self.chart.scalar_curvature(&self.u0)
    }
}
