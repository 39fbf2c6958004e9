//! Seeded random Riemannian maps, metrics and expressions, with the residuals
//! checked by the property suites.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{GeomError, Result};
use crate::geodesic::integrate_geodesic;
use crate::geometry::{domain, ChartedManifold};
use crate::linalg::{inner, norm, Matrix, Vector};
use crate::rmap::{richardson, SmoothMap};
use crate::symexpr::Expr;

/// A Riemannian map built so that the isometry condition holds by construction.
#[derive(Debug)]
pub struct RandomMap {
    pub map: SmoothMap,
    /// Rank, kernel dimension and corank.
    pub rank: usize,
    pub kernel: usize,
    pub corank: usize,
    pub points: Vec<Vec<f64>>,
}

#[derive(Debug)]
pub struct RandomMetric {
    pub manifold: ChartedManifold,
    pub points: Vec<Vec<f64>>,
}

fn names(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

fn linear(coef: &[f64], vars: &[Expr]) -> Expr {
    coef.iter().zip(vars).fold(Expr::zero(), |acc, (c, v)| acc.add(&Expr::constant(*c).mul(v)))
}

fn symmetric(n: usize, entry: impl Fn(usize, usize) -> Expr) -> Vec<Vec<Expr>> {
    let mut rows = vec![vec![Expr::zero(); n]; n];
    for i in 0..n {
        for j in i..n {
            let e = entry(i, j);
            rows[i][j] = e.clone();
            rows[j][i] = e;
        }
    }
    rows
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.gen_range(lo..hi)
}

fn near_identity(rng: &mut ChaCha8Rng, n: usize, spread: f64) -> Matrix {
    Matrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 } + uniform(rng, -spread, spread))
}

/// `P^T diag(exp(a_l . y)) P + bump(y) I`, positive definite everywhere.
struct Warped {
    p: Matrix,
    weights: Vec<Expr>,
    bump: Expr,
}

impl Warped {
    fn random(rng: &mut ChaCha8Rng, vars: &[Expr]) -> Self {
        let n = vars.len();
        let p = near_identity(rng, n, 0.3);
        let weights = (0..n)
            .map(|_| {
                let a: Vec<f64> = (0..n).map(|_| uniform(rng, -0.6, 0.6)).collect();
                linear(&a, vars).exp()
            })
            .collect();
        let w: Vec<f64> = (0..n).map(|_| uniform(rng, -1.0, 1.0)).collect();
        let bump = Expr::constant(uniform(rng, 0.0, 0.3)).mul(&linear(&w, vars).cos().powf(2.0));
        Self { p, weights, bump }
    }

    fn entries(&self) -> Vec<Vec<Expr>> {
        let n = self.weights.len();
        let id: Vec<Vec<Expr>> =
            (0..n).map(|i| (0..n).map(|j| Expr::constant(if i == j { 1.0 } else { 0.0 })).collect()).collect();
        self.pullback(&id, &(0..n).map(Expr::var).collect::<Vec<_>>())
    }

    /// Pullback under a map with components `phi` and partials `dphi[s][i]`.
    fn pullback(&self, dphi: &[Vec<Expr>], phi: &[Expr]) -> Vec<Vec<Expr>> {
        let n = self.weights.len();
        let m = dphi.first().map_or(0, Vec::len);
        let weights: Vec<Expr> = self.weights.iter().map(|w| w.substitute(phi)).collect();
        let bump = self.bump.substitute(phi);
        // rows of P dphi
        let pd: Vec<Vec<Expr>> = (0..n)
            .map(|l| {
                (0..m)
                    .map(|i| {
                        (0..n).fold(Expr::zero(), |acc, s| acc.add(&Expr::constant(self.p[(l, s)]).mul(&dphi[s][i])))
                    })
                    .collect()
            })
            .collect();
        symmetric(m, |i, j| {
            let mut e = Expr::zero();
            let mut flat = Expr::zero();
            for l in 0..n {
                e = e.add(&weights[l].mul(&pd[l][i]).mul(&pd[l][j]));
                flat = flat.add(&dphi[l][i].mul(&dphi[l][j]));
            }
            e.add(&bump.mul(&flat))
        })
    }
}

fn box_points(rng: &mut ChaCha8Rng, dim: usize, count: usize, half: f64) -> Vec<Vec<f64>> {
    (0..count).map(|_| (0..dim).map(|_| uniform(rng, -half, half)).collect()).collect()
}

/// Random metric on R^dim with sample points in `[-0.5, 0.5]^dim`.
pub fn random_metric(seed: u64, dim: usize) -> Result<RandomMetric> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vars: Vec<Expr> = (0..dim).map(Expr::var).collect();
    let metric = Warped::random(&mut rng, &vars).entries();
    let manifold = ChartedManifold::new("random", names("x", dim), metric)?;
    let points = box_points(&mut rng, dim, 4, 0.5);
    Ok(RandomMetric { manifold, points })
}

/// Random Riemannian map `F(u, v) = Phi(u)` with rank `r` in {1, 2}, kernel
/// dimension `k` in {0, 1} and corank `c` in {1, 2}.
///
/// The target metric is a warped metric on R^(r+c); `Phi(u) = L u + eps sin(w.u + phi)`
/// is an immersion; the source metric is `Phi* g2` on the `u` block and
/// `exp(b . x)` on the `v` block, written in coordinates `z = A^-1 x` for a
/// random well-conditioned `A`.
pub fn random_riemannian_map(seed: u64) -> Result<RandomMap> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = rng.gen_range(1..=2usize);
    let k = rng.gen_range(0..=1usize);
    let c = rng.gen_range(1..=2usize);
    let (m, n) = (r + k, r + c);

    let yv: Vec<Expr> = (0..n).map(Expr::var).collect();
    let g2 = Warped::random(&mut rng, &yv);
    let target = Arc::new(ChartedManifold::new("target", names("y", n), g2.entries())?);

    // x = A z
    let q = Matrix::from_fn(m, m, |_, _| uniform(&mut rng, -1.0, 1.0)).qr().q();
    let scales = Matrix::from_diagonal(&Vector::from_fn(m, |_, _| uniform(&mut rng, 0.7, 1.3)));
    let a = q * scales;
    let zv: Vec<Expr> = (0..m).map(Expr::var).collect();
    let xv: Vec<Expr> = (0..m).map(|i| linear(&a.row(i).iter().copied().collect::<Vec<_>>(), &zv)).collect();
    let u = &xv[..r];

    let lin = Matrix::from_fn(n, r, |i, j| if i == j { 1.0 } else { 0.0 } + uniform(&mut rng, -0.4, 0.4));
    let phi: Vec<Expr> = (0..n)
        .map(|i| {
            let eps = uniform(&mut rng, -0.15, 0.15);
            let w: Vec<f64> = (0..r).map(|_| uniform(&mut rng, -1.0, 1.0)).collect();
            let shift = uniform(&mut rng, 0.0, std::f64::consts::TAU);
            let row: Vec<f64> = lin.row(i).iter().copied().collect();
            linear(&row, u).add(&Expr::constant(eps).mul(&linear(&w, u).add(&Expr::constant(shift)).sin()))
        })
        .collect();

    // g_z = (Phi o u)* g2 + exp(b . x) dx_v^2, with dx_v = sum_j A_vj dz_j
    let dphi: Vec<Vec<Expr>> = phi.iter().map(|f| (0..m).map(|j| f.differentiate(j)).collect()).collect();
    let b: Vec<f64> = (0..m).map(|_| uniform(&mut rng, -0.5, 0.5)).collect();
    let fiber = linear(&b, &xv).exp();
    let pulled = g2.pullback(&dphi, &phi);
    let gz = symmetric(m, |i, j| {
        (r..m).fold(pulled[i][j].clone(), |acc, v| acc.add(&Expr::constant(a[(v, i)] * a[(v, j)]).mul(&fiber)))
    });
    let source = Arc::new(ChartedManifold::new("source", names("z", m), gz)?);
    let map = SmoothMap::new("random", source, target, phi)?;
    let points = box_points(&mut rng, m, 3, 0.5);
    Ok(RandomMap { map, rank: r, kernel: k, corank: c, points })
}

/// Random expression in `vars` variables whose evaluation stays finite on `[-1, 1]^vars`.
pub fn random_expression(seed: u64, vars: usize, depth: usize) -> Expr {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    grow(&mut rng, vars, depth)
}

fn grow(rng: &mut ChaCha8Rng, vars: usize, depth: usize) -> Expr {
    if depth == 0 || rng.gen_bool(0.2) {
        return if rng.gen_bool(0.7) {
            Expr::var(rng.gen_range(0..vars))
        } else {
            Expr::constant((uniform(rng, -2.0, 2.0) * 4.0).round() / 4.0)
        };
    }
    let a = grow(rng, vars, depth - 1);
    match rng.gen_range(0..9) {
        0 => a.add(&grow(rng, vars, depth - 1)),
        1 => a.sub(&grow(rng, vars, depth - 1)),
        2 => a.mul(&grow(rng, vars, depth - 1)),
        3 => a.sin(),
        4 => a.cos(),
        5 => a.sin().exp(),
        6 => Expr::one().add(&a.powf(2.0)).ln(),
        7 => a.powf(rng.gen_range(2..=3) as f64),
        _ => a.div(&Expr::constant(2.0).add(&grow(rng, vars, depth - 1).cos())),
    }
}

/// Largest `|(nabla F*)(X, Y) - (nabla F*)(Y, X)|` over the horizontal basis at `p`.
pub fn sff_symmetry_residual(map: &SmoothMap, p: &[f64]) -> Result<f64> {
    let s = map.split_unchecked(p)?;
    let mut worst = 0.0f64;
    for x in &s.horizontal {
        for y in &s.horizontal {
            let d = map.second_fundamental_form(p, x, y)? - map.second_fundamental_form(p, y, x)?;
            worst = worst.max(norm(&s.g2, &d));
        }
    }
    Ok(worst)
}

pub fn normality_residual(map: &SmoothMap, p: &[f64]) -> Result<f64> {
    map.normality_defect(&map.split_unchecked(p)?)
}

/// Largest defect of `g2(S_V F*X, F*Y) = g2((nabla F*)(X, Y), V)` and of
/// `g2(S_V F*X, F*Y) = g2(F*X, S_V F*Y)` over horizontal and normal bases.
pub fn shape_operator_residuals(map: &SmoothMap, p: &[f64]) -> Result<(f64, f64)> {
    let s = map.split_unchecked(p)?;
    let (mut duality, mut adjoint) = (0.0f64, 0.0f64);
    for v in &s.normal {
        let shaped: Vec<Vector> =
            s.horizontal.iter().map(|x| map.shape_operator_along(p, v, x)).collect::<Result<_>>()?;
        for (i, x) in s.horizontal.iter().enumerate() {
            for (j, y) in s.horizontal.iter().enumerate() {
                let lhs = inner(&s.g2, &shaped[i], &s.push(y));
                let rhs = inner(&s.g2, &map.sff_raw(p, x, y)?, v);
                duality = duality.max((lhs - rhs).abs());
                let swapped = inner(&s.g2, &s.push(x), &shaped[j]);
                adjoint = adjoint.max((lhs - swapped).abs());
            }
        }
    }
    Ok((duality, adjoint))
}

/// `|tau_direct - tau_lemma|` in the target metric.
pub fn tension_residual(map: &SmoothMap, p: &[f64]) -> Result<f64> {
    let t = map.tension_field(p)?;
    let g2 = map.target().metric_at(&map.apply(p)?)?;
    Ok(norm(&g2, &(t.direct - t.lemma)))
}

/// Largest `|d_k g_ij - g_lj Gamma^l_ki - g_il Gamma^l_kj|`.
pub fn metric_compatibility_residual(man: &ChartedManifold, p: &[f64]) -> Result<f64> {
    let n = man.dim();
    let g = man.metric_at(p)?;
    let dg = man.metric_derivatives(p)?;
    let gamma = man.christoffel(p)?;
    let mut worst = 0.0f64;
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut rhs = 0.0;
                for l in 0..n {
                    rhs += g[(l, j)] * gamma.get(l, k, i) + g[(i, l)] * gamma.get(l, k, j);
                }
                worst = worst.max((dg[k][(i, j)] - rhs).abs());
            }
        }
    }
    Ok(worst)
}

/// Ratio of endpoint errors at steps `h` and `h/2` against a `h/32` reference;
/// close to 16 for a fourth-order integrator.
pub fn rk4_order_factor(man: &ChartedManifold, p0: &[f64], v0: &[f64], t_end: f64, h: f64) -> Result<f64> {
    let end = |step: f64| -> Result<Vector> {
        let trace = integrate_geodesic(man, p0, v0, t_end, step)?;
        let last = trace.points.len() - 1;
        let state = trace.points[last].iter().chain(trace.velocities[last].iter()).copied();
        Ok(Vector::from_iterator(2 * p0.len(), state))
    };
    let reference = end(h / 32.0)?;
    let coarse = (end(h)? - &reference).norm();
    let fine = (end(h / 2.0)? - &reference).norm();
    if fine == 0.0 {
        return Err(GeomError::Invalid("step halving error vanished".into()));
    }
    Ok(coarse / fine)
}

/// Largest relative gap between symbolic partials and a Richardson difference,
/// `|sym - fd| / max(|sym|, 1)`.
pub fn derivative_residual(expr: &Expr, p: &[f64]) -> Result<f64> {
    let mut worst = 0.0f64;
    for i in 0..p.len() {
        let sym = expr.differentiate(i).evaluate(p).map_err(domain)?;
        let along = |t: f64| -> Result<Vector> {
            let mut q = p.to_vec();
            q[i] += t;
            Ok(Vector::from_element(1, expr.evaluate(&q).map_err(domain)?))
        };
        let fd = richardson(&along, 1e-3)?[0];
        worst = worst.max((sym - fd).abs() / sym.abs().max(1.0));
    }
    Ok(worst)
}
