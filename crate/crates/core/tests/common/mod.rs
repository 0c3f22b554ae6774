//! Independent reference computations for the integration and acceptance
//! tests. Nothing here calls the library routine it is used to check.

#![allow(dead_code)]

use mda_core::manifold::{grassmann_exp, grassmann_log, Subspace};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// Random subspace by Gram-Schmidt on a Gaussian matrix.
pub fn random_subspace(rng: &mut ChaCha8Rng, d: usize, k: usize) -> Subspace {
    let g = gaussian(rng, d, k);
    Subspace::new(gram_schmidt(&g)).unwrap()
}

pub fn gram_schmidt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut q = m.clone();
    for j in 0..q.ncols() {
        for _ in 0..2 {
            for i in 0..j {
                let proj = q.column(i).dot(&q.column(j));
                let ci = q.column(i).clone_owned();
                q.column_mut(j).axpy(-proj, &ci, 1.0);
            }
        }
        let n = q.column(j).norm();
        q.column_mut(j).scale_mut(1.0 / n);
    }
    q
}

pub fn relative_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

// ---------------------------------------------------------------------------
// Quadratic objective and its gradient, written term by term.

pub struct Quadratic<'a> {
    pub k: &'a DMatrix<f64>,
    pub m: &'a DMatrix<f64>,
    pub l: &'a DMatrix<f64>,
    pub source: &'a [bool],
    pub y: &'a DMatrix<f64>,
    pub lambda: f64,
    pub rho: f64,
    pub eta: f64,
}

impl Quadratic<'_> {
    fn mask(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| {
            if self.source[i] {
                m[(i, j)]
            } else {
                0.0
            }
        })
    }

    pub fn value(&self, beta: &DMatrix<f64>) -> f64 {
        let f = self.k * beta;
        let mut loss = 0.0;
        for i in 0..f.nrows() {
            if self.source[i] {
                for c in 0..f.ncols() {
                    loss += (self.y[(i, c)] - f[(i, c)]).powi(2);
                }
            }
        }
        let ridge = (beta.transpose() * self.k * beta).trace();
        let mmd = (f.transpose() * self.m * &f).trace();
        let lap = (f.transpose() * self.l * &f).trace();
        loss + self.eta * ridge + self.lambda * mmd + self.rho * lap
    }

    /// Gradient: `2 K [A (K beta - Y) + eta beta + lambda M K beta + rho L K beta]`
    /// (K, M, L symmetric).
    pub fn gradient(&self, beta: &DMatrix<f64>) -> DMatrix<f64> {
        let f = self.k * beta;
        let inner = self.mask(&(&f - self.y))
            + beta * self.eta
            + (self.m * &f) * self.lambda
            + (self.l * &f) * self.rho;
        (self.k * inner) * 2.0
    }

    /// Hessian applied to a direction: the gradient's linear part.
    fn hess(&self, dir: &DMatrix<f64>) -> DMatrix<f64> {
        let f = self.k * dir;
        let inner = self.mask(&f) + dir * self.eta + (self.m * &f) * self.lambda + (self.l * &f) * self.rho;
        (self.k * inner) * 2.0
    }

    /// Minimises the objective by conjugate-gradient descent with exact line
    /// search along each search direction, restarting every `n` steps.
    pub fn descend(&self, max_iters: usize) -> DMatrix<f64> {
        let (n, c) = self.y.shape();
        let mut beta = DMatrix::zeros(n, c);
        let mut g = self.gradient(&beta);
        let mut dir = -&g;
        let g0 = g.norm().max(1e-300);
        for it in 0..max_iters {
            let hd = self.hess(&dir);
            let curvature = dir.dot(&hd);
            if curvature <= 0.0 {
                break;
            }
            let step = -g.dot(&dir) / curvature;
            beta += &dir * step;
            let g_new = self.gradient(&beta);
            if g_new.norm() <= 1e-15 * g0 {
                break;
            }
            let restart = (it + 1) % n == 0;
            let coef = if restart {
                0.0
            } else {
                (g_new.dot(&(&g_new - &g)) / g.dot(&g)).max(0.0)
            };
            dir = -&g_new + dir * coef;
            g = g_new;
        }
        beta
    }
}

// ---------------------------------------------------------------------------
// GFK by numerical integration along the Grassmann geodesic.

/// `2 * sum_i Y(t_i) Y(t_i)' / steps` with midpoint times, where `Y(t)` is
/// the geodesic basis `exp_P(t log_P(Q))`. The projector is basis-free, so
/// this does not depend on how the closed form orients its factors.
pub fn gfk_by_integration(p: &Subspace, q: &Subspace, steps: usize) -> DMatrix<f64> {
    let delta = grassmann_log(p, q).unwrap();
    let d = p.ambient_dim();
    let mut acc = DMatrix::zeros(d, d);
    for i in 0..steps {
        let t = (i as f64 + 0.5) / steps as f64;
        let y = grassmann_exp(p, &(&delta * t)).unwrap();
        acc += y.basis() * y.basis().transpose();
    }
    acc * (2.0 / steps as f64)
}

// ---------------------------------------------------------------------------
// Brute-force baselines

pub fn brute_force_1nn(train: &DMatrix<f64>, labels: &[usize], query: &DMatrix<f64>) -> Vec<usize> {
    (0..query.nrows())
        .map(|i| {
            let mut best = (f64::INFINITY, usize::MAX);
            for j in 0..train.nrows() {
                let mut d = 0.0;
                for c in 0..train.ncols() {
                    d += (query[(i, c)] - train[(j, c)]).powi(2);
                }
                if d < best.0 {
                    best = (d, j);
                }
            }
            labels[best.1]
        })
        .collect()
}

pub fn accuracy(pred: &[usize], truth: &[usize]) -> f64 {
    pred.iter().zip(truth).filter(|(a, b)| a == b).count() as f64 / truth.len() as f64
}

/// Gaussian elimination with partial pivoting, written out by hand.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            let pivot_row = a[col].clone();
            for (x, p) in a[r][col..].iter_mut().zip(&pivot_row[col..]) {
                *x -= f * p;
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

/// Proxy A-distance using the primal ridge normal equations (bias included,
/// ridge 1.0 on every weight) and an exhaustive count of training errors.
pub fn a_distance_oracle(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let rows: Vec<(Vec<f64>, f64)> = a
        .iter()
        .map(|r| (r.clone(), 1.0))
        .chain(b.iter().map(|r| (r.clone(), -1.0)))
        .map(|(mut r, y)| {
            r.push(1.0);
            (r, y)
        })
        .collect();
    let d = rows[0].0.len();
    let mut gram = vec![vec![0.0; d]; d];
    let mut rhs = vec![0.0; d];
    for (r, y) in &rows {
        for i in 0..d {
            rhs[i] += r[i] * y;
            for j in 0..d {
                gram[i][j] += r[i] * r[j];
            }
        }
    }
    for (i, row) in gram.iter_mut().enumerate() {
        row[i] += 1.0;
    }
    let w = gauss_solve(gram, rhs);
    let mut wrong = 0;
    for (r, y) in &rows {
        let s: f64 = r.iter().zip(&w).map(|(a, b)| a * b).sum();
        let predicted = if s > 0.0 { 1.0 } else { -1.0 };
        if predicted != *y {
            wrong += 1;
        }
    }
    let err = wrong as f64 / rows.len() as f64;
    (2.0 * (1.0 - 2.0 * err)).clamp(0.0, 2.0)
}

pub fn mu_oracle(
    xs: &DMatrix<f64>,
    xt: &DMatrix<f64>,
    ys: &[usize],
    yt: &[usize],
    classes: usize,
) -> f64 {
    let rows = |m: &DMatrix<f64>, keep: &dyn Fn(usize) -> bool| -> Vec<Vec<f64>> {
        (0..m.nrows())
            .filter(|&i| keep(i))
            .map(|i| m.row(i).iter().copied().collect())
            .collect()
    };
    let d_m = a_distance_oracle(&rows(xs, &|_| true), &rows(xt, &|_| true));
    let mut d_c = 0.0;
    for c in 1..=classes {
        let a = rows(xs, &|i| ys[i] == c);
        let b = rows(xt, &|i| yt[i] == c);
        if !a.is_empty() && !b.is_empty() {
            d_c += a_distance_oracle(&a, &b);
        }
    }
    if d_m + d_c < 1e-12 {
        0.5
    } else {
        1.0 - d_m / (d_m + d_c)
    }
}

pub fn random_labels(rng: &mut ChaCha8Rng, n: usize, classes: usize) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(1..=classes)).collect()
}

// ---------------------------------------------------------------------------
// Random solver instances

pub struct Instance {
    pub x: DMatrix<f64>,
    pub k: DMatrix<f64>,
    pub m: DMatrix<f64>,
    pub l: DMatrix<f64>,
    pub source: Vec<bool>,
    pub y: DMatrix<f64>,
    pub source_labels: Vec<usize>,
    pub target_labels: Vec<usize>,
    pub classes: usize,
}

/// One-hot source labels with zero target rows.
pub fn one_hot(source_labels: &[usize], n_t: usize, classes: usize) -> DMatrix<f64> {
    let mut y = DMatrix::zeros(source_labels.len() + n_t, classes);
    for (i, &c) in source_labels.iter().enumerate() {
        y[(i, c - 1)] = 1.0;
    }
    y
}

/// Gaussian features in `d` dimensions with an RBF kernel at bandwidth
/// `gamma`, a random balance factor and a p-NN Laplacian.
pub fn random_instance(
    rng: &mut ChaCha8Rng,
    n_s: usize,
    n_t: usize,
    classes: usize,
    d: usize,
    gamma: f64,
) -> Instance {
    use mda_core::alignment::{build_laplacian, MmdOperator};
    use mda_core::kernels::{gram, KernelSpec};
    let x = gaussian(rng, n_s + n_t, d);
    let source_labels = random_labels(rng, n_s, classes);
    let target_labels = random_labels(rng, n_t, classes);
    let mu: f64 = rng.random_range(0.0..=1.0);
    let k = gram(&KernelSpec::Rbf { gamma }, &x, None).unwrap();
    let m = MmdOperator::new(&source_labels, &target_labels, classes, mu)
        .unwrap()
        .matrix();
    let p = 3.min(n_s + n_t - 1);
    let l = build_laplacian(&x, p).unwrap().matrix();
    let source = (0..n_s + n_t).map(|i| i < n_s).collect();
    let y = one_hot(&source_labels, n_t, classes);
    Instance {
        x,
        k,
        m,
        l,
        source,
        y,
        source_labels,
        target_labels,
        classes,
    }
}

impl Instance {
    pub fn quadratic(&self, lambda: f64, rho: f64, eta: f64) -> Quadratic<'_> {
        Quadratic {
            k: &self.k,
            m: &self.m,
            l: &self.l,
            source: &self.source,
            y: &self.y,
            lambda,
            rho,
            eta,
        }
    }

    /// `||((A + lambda M + rho L) K + eta I) beta - A Y|| / ||A Y||`, with
    /// every product formed explicitly.
    pub fn normal_residual(&self, beta: &DMatrix<f64>, lambda: f64, rho: f64, eta: f64) -> f64 {
        let n = self.k.nrows();
        let a = DMatrix::from_fn(n, n, |i, j| if i == j && self.source[i] { 1.0 } else { 0.0 });
        let lhs = (&a + &self.m * lambda + &self.l * rho) * &self.k * beta + beta * eta;
        let rhs = &a * &self.y;
        (lhs - &rhs).norm() / rhs.norm()
    }
}

// ---------------------------------------------------------------------------
// Feature-file fixtures

/// Writes three small Office-31-shaped domains (31 classes) under
/// `<dir>/office31/`. `W` is an exact copy of `A`.
pub fn write_office31_fixtures(dir: &std::path::Path) {
    use mda_core::features::save_binary;
    use mda_core::synthetic::gaussian_blobs;
    let root = dir.join("office31");
    std::fs::create_dir_all(&root).unwrap();
    let a = gaussian_blobs(2, 31, 8, 0.6, 0.0, 101, "A").unwrap();
    let d = gaussian_blobs(2, 31, 8, 0.6, 0.8, 202, "D").unwrap();
    save_binary(&a, root.join("A.mdaf")).unwrap();
    save_binary(&a.clone().with_domain_name("W"), root.join("W.mdaf")).unwrap();
    save_binary(&d, root.join("D.mdaf")).unwrap();
}
