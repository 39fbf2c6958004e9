//! Small dense helpers shared by the geometric modules.

use nalgebra::{DMatrix, DVector};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

pub fn inner(g: &Matrix, u: &Vector, v: &Vector) -> f64 {
    u.dot(&(g * v))
}

pub fn norm(g: &Matrix, v: &Vector) -> f64 {
    inner(g, v, v).max(0.0).sqrt()
}

pub fn unit(n: usize, i: usize) -> Vector {
    let mut v = Vector::zeros(n);
    v[i] = 1.0;
    v
}

/// Flips `v` so that its largest-magnitude component is positive; ties go to the lowest index.
pub fn fix_sign(v: &mut Vector) {
    let max = v.amax();
    if max == 0.0 {
        return;
    }
    if let Some(c) = v.iter().find(|c| c.abs() >= max * (1.0 - 1e-9)) {
        if *c < 0.0 {
            v.neg_mut();
        }
    }
}

/// Gram-Schmidt under `g`: candidates are orthogonalized in order against `against`
/// (assumed orthonormal) and against each other; near-dependent ones are dropped.
pub fn gram_schmidt<I>(g: &Matrix, against: &[Vector], candidates: I, drop_tol: f64) -> Vec<Vector>
where
    I: IntoIterator<Item = Vector>,
{
    let mut basis: Vec<Vector> = against.to_vec();
    let skip = basis.len();
    for c in candidates {
        let scale = norm(g, &c);
        if scale == 0.0 {
            continue;
        }
        let mut w = c.clone();
        for _ in 0..2 {
            for b in &basis {
                let coef = inner(g, b, &w);
                w.axpy(-coef, b, 1.0);
            }
        }
        let n = norm(g, &w);
        if n > drop_tol * scale {
            basis.push(w / n);
        }
    }
    basis.split_off(skip)
}

/// g-orthogonal projection onto the span of an orthonormal basis.
pub fn project(g: &Matrix, basis: &[Vector], v: &Vector) -> Vector {
    let mut out = Vector::zeros(v.len());
    let gv = g * v;
    for b in basis {
        out.axpy(b.dot(&gv), b, 1.0);
    }
    out
}

/// Projector matrix onto the span of an orthonormal basis, orthogonal with respect to `g`.
pub fn projector(g: &Matrix, basis: &[Vector], n: usize) -> Matrix {
    let mut p = Matrix::zeros(n, n);
    for b in basis {
        p += b * (g * b).transpose();
    }
    p
}

pub fn columns(vs: &[Vector], n: usize) -> Matrix {
    if vs.is_empty() {
        return Matrix::zeros(n, 0);
    }
    Matrix::from_columns(vs)
}

/// Singular values in decreasing order, padded with zeros to the column count, and
/// the matching right singular vectors. Vectors come from the symmetric eigensystem
/// of `a^T a`, which stays accurate where nalgebra's vector-accumulating SVD does not.
pub fn singular_split(a: &Matrix) -> (Vec<f64>, Vec<Vector>) {
    let m = a.ncols();
    let mut values: Vec<f64> = a.singular_values().iter().copied().collect();
    values.sort_by(|x, y| y.total_cmp(x));
    values.resize(m, 0.0);
    let eig = (a.transpose() * a).symmetric_eigen();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let right = order.iter().map(|&k| eig.eigenvectors.column(k).into_owned()).collect();
    (values, right)
}

/// Minimum-norm least-squares solution, dropping singular values below `rel * max`.
pub fn least_squares(a: &Matrix, b: &Vector, rel: f64) -> Vector {
    let (values, right) = singular_split(a);
    let top = values.first().copied().unwrap_or(0.0);
    let mut x = Vector::zeros(a.ncols());
    for (s, v) in values.iter().zip(&right) {
        if *s > rel * top && *s > 0.0 {
            let u = a * v;
            x.axpy(u.dot(b) / (s * s), v, 1.0);
        }
    }
    x
}

pub fn min_eigenvalue(m: &Matrix) -> f64 {
    m.clone().symmetric_eigenvalues().min()
}
