//! Modified distribution alignment (MDA).
//!
//! The classifier `f(x) = sum_i beta_i k(x_i, x)` over all source and target
//! rows minimises
//!
//! ```text
//! ||A (Y - K beta)||^2 + eta tr(beta' K beta)
//!     + lambda tr(F' M F) + rho tr(F' L F),        F = K beta
//! ```
//!
//! where `A` masks source rows, `M` is the MMD matrix balancing marginal and
//! class-conditional discrepancy through `mu`, and `L` is the normalised
//! Laplacian of a cosine nearest-neighbour graph. Setting the gradient to
//! zero gives `((A + lambda M + rho L) K + eta I) beta = A Y`.
//!
//! Target pseudo-labels start from source 1-NN and are refreshed from the
//! classifier's argmax after every solve.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{DaTask, FeatureDataset};
use crate::kernels::{gram, rows_of, KernelChoice, KernelSpec};
use crate::linalg;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum MuMode {
    Adaptive,
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlignmentConfig {
    /// MMD weight.
    pub lambda: f64,
    /// Laplacian weight.
    pub rho: f64,
    /// Ridge weight on `||f||_K^2`.
    pub eta: f64,
    /// Neighbour count of the Laplacian graph.
    pub p: usize,
    /// Pseudo-label refinement iterations.
    pub iterations: usize,
    pub kernel: KernelChoice,
    pub mu_mode: MuMode,
}

impl Default for AlignmentConfig {
    fn default() -> Self {
        Self {
            lambda: 10.0,
            rho: 1.0,
            eta: 0.1,
            p: 10,
            iterations: 10,
            kernel: KernelChoice::default(),
            mu_mode: MuMode::Adaptive,
        }
    }
}

impl AlignmentConfig {
    pub fn validate(&self) -> Result<()> {
        let nonneg = |v: f64, name: &str| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be >= 0, got {v}")))
            }
        };
        nonneg(self.lambda, "lambda")?;
        nonneg(self.rho, "rho")?;
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return Err(Error::Config(format!("eta must be > 0, got {}", self.eta)));
        }
        if self.p < 1 {
            return Err(Error::Config("p must be >= 1".into()));
        }
        if self.iterations < 1 {
            return Err(Error::Config("iterations must be >= 1".into()));
        }
        if let KernelChoice::Rbf(crate::kernels::Bandwidth::Fixed(g)) = self.kernel {
            KernelSpec::rbf(g).map_err(|e| Error::Config(e.to_string()))?;
        }
        if let MuMode::Fixed(mu) = self.mu_mode {
            if !(0.0..=1.0).contains(&mu) {
                return Err(Error::Config(format!("fixed mu must lie in [0, 1], got {mu}")));
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// MMD

fn check_labels(labels: &[usize], class_count: usize) -> Result<()> {
    match labels.iter().find(|&&l| l == 0 || l > class_count) {
        Some(&l) => Err(Error::LabelOutOfRange {
            label: l as i64,
            classes: class_count,
        }),
        None => Ok(()),
    }
}

fn marginal_vector(n_s: usize, n_t: usize) -> DVector<f64> {
    let (a, b) = (1.0 / n_s as f64, -1.0 / n_t as f64);
    DVector::from_fn(n_s + n_t, |i, _| if i < n_s { a } else { b })
}

/// `e_c` with `M_c = e_c e_c'`, or `None` when class `c` is absent on
/// either side.
fn class_vector(source_labels: &[usize], target_labels: &[usize], c: usize) -> Option<DVector<f64>> {
    let ns_c = source_labels.iter().filter(|&&l| l == c).count();
    let nt_c = target_labels.iter().filter(|&&l| l == c).count();
    if ns_c == 0 || nt_c == 0 {
        return None;
    }
    let (a, b) = (1.0 / ns_c as f64, -1.0 / nt_c as f64);
    let v = source_labels
        .iter()
        .map(|&l| if l == c { a } else { 0.0 })
        .chain(target_labels.iter().map(|&l| if l == c { b } else { 0.0 }));
    Some(DVector::from_iterator(source_labels.len() + target_labels.len(), v))
}

/// Marginal MMD matrix `M0 = e e'`, `e = (1/n_s, ..., -1/n_t, ...)`.
pub fn marginal_mmd(n_s: usize, n_t: usize) -> Result<DMatrix<f64>> {
    if n_s == 0 || n_t == 0 {
        return Err(Error::invalid("marginal MMD needs both domains non-empty"));
    }
    let e = marginal_vector(n_s, n_t);
    Ok(&e * e.transpose())
}

/// Conditional MMD matrix for class `c` over source labels and target
/// pseudo-labels. Zero when `c` is missing from either domain.
pub fn conditional_mmd(
    source_labels: &[usize],
    target_labels: &[usize],
    c: usize,
    class_count: usize,
) -> Result<DMatrix<f64>> {
    check_labels(source_labels, class_count)?;
    check_labels(target_labels, class_count)?;
    if c == 0 || c > class_count {
        return Err(Error::LabelOutOfRange {
            label: c as i64,
            classes: class_count,
        });
    }
    let n = source_labels.len() + target_labels.len();
    Ok(match class_vector(source_labels, target_labels, c) {
        Some(e) => &e * e.transpose(),
        None => DMatrix::zeros(n, n),
    })
}

/// `M = (1 - mu) M0 + mu sum_c M_c`, kept in factored form. Every term is a
/// rank-one outer product, so `M K` costs `O((C + 1) n^2)`.
#[derive(Clone, Debug)]
pub struct MmdOperator {
    mu: f64,
    terms: Vec<(f64, DVector<f64>)>,
    n: usize,
}

impl MmdOperator {
    pub fn new(
        source_labels: &[usize],
        target_labels: &[usize],
        class_count: usize,
        mu: f64,
    ) -> Result<Self> {
        if source_labels.is_empty() || target_labels.is_empty() {
            return Err(Error::invalid("MMD needs both domains non-empty"));
        }
        if !(0.0..=1.0).contains(&mu) {
            return Err(Error::invalid(format!("mu must lie in [0, 1], got {mu}")));
        }
        check_labels(source_labels, class_count)?;
        check_labels(target_labels, class_count)?;
        let mut terms = vec![(
            1.0 - mu,
            marginal_vector(source_labels.len(), target_labels.len()),
        )];
        for c in 1..=class_count {
            if let Some(e) = class_vector(source_labels, target_labels, c) {
                terms.push((mu, e));
            }
        }
        Ok(Self {
            mu,
            terms,
            n: source_labels.len() + target_labels.len(),
        })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for (w, e) in &self.terms {
            m.ger(*w, e, e, 1.0);
        }
        m
    }

    /// `M * rhs`.
    pub fn apply(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.n, rhs.ncols());
        for (w, e) in &self.terms {
            let proj = e.transpose() * rhs;
            out.ger(*w, e, &proj.transpose(), 1.0);
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Balance factor

/// Ridge penalty of the least-squares domain separator.
pub const SEPARATOR_RIDGE: f64 = 1.0;
const MU_GUARD: f64 = 1e-12;

/// Training error of a ridge least-squares linear separator (with bias)
/// fitted to `+1` for rows of `a` and `-1` for rows of `b`. A score of
/// exactly zero counts as a `-1` prediction.
pub fn domain_separator_error(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    let (na, nb) = (a.nrows(), b.nrows());
    if na == 0 || nb == 0 {
        return Err(Error::invalid("domain separator needs both sides non-empty"));
    }
    if a.ncols() != b.ncols() {
        return Err(Error::DimensionMismatch {
            context: "domain separator feature dimension",
            left: a.ncols(),
            right: b.ncols(),
        });
    }
    let n = na + nb;
    let d = a.ncols() + 1;
    let mut z = DMatrix::from_element(n, d, 1.0);
    z.view_mut((0, 0), (na, d - 1)).copy_from(a);
    z.view_mut((na, 0), (nb, d - 1)).copy_from(b);
    let y = DMatrix::from_fn(n, 1, |i, _| if i < na { 1.0 } else { -1.0 });

    let scores = if d <= n {
        let mut gram = z.transpose() * &z;
        add_to_diagonal(&mut gram, SEPARATOR_RIDGE);
        let w = linalg::solve(gram, &(z.transpose() * &y))?;
        &z * w
    } else {
        let mut gram = &z * z.transpose();
        add_to_diagonal(&mut gram, SEPARATOR_RIDGE);
        let alpha = linalg::solve(gram, &y)?;
        &z * (z.transpose() * alpha)
    };
    let wrong = (0..n)
        .filter(|&i| (scores[(i, 0)] > 0.0) != (i < na))
        .count();
    Ok(wrong as f64 / n as f64)
}

fn add_to_diagonal(m: &mut DMatrix<f64>, v: f64) {
    for i in 0..m.nrows().min(m.ncols()) {
        m[(i, i)] += v;
    }
}

/// Proxy A-distance `2 (1 - 2 err)`, clamped to `[0, 2]`.
pub fn proxy_a_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    let err = domain_separator_error(a, b)?;
    Ok((2.0 * (1.0 - 2.0 * err)).clamp(0.0, 2.0))
}

fn select_rows(x: &DMatrix<f64>, labels: &[usize], c: usize) -> DMatrix<f64> {
    let idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
    x.select_rows(&idx)
}

fn class_distances(
    x_s: &DMatrix<f64>,
    x_t: &DMatrix<f64>,
    source_labels: &[usize],
    target_labels: &[usize],
    class_count: usize,
) -> Result<f64> {
    let mut total = 0.0;
    for c in 1..=class_count {
        let a = select_rows(x_s, source_labels, c);
        let b = select_rows(x_t, target_labels, c);
        if a.nrows() == 0 || b.nrows() == 0 {
            continue;
        }
        total += proxy_a_distance(&a, &b)?;
    }
    Ok(total)
}

fn mu_from_distances(marginal: f64, conditional: f64) -> f64 {
    let denom = marginal + conditional;
    if denom < MU_GUARD {
        0.5
    } else {
        (1.0 - marginal / denom).clamp(0.0, 1.0)
    }
}

/// Balance factor `mu = 1 - d_M / (d_M + sum_c d_c)` from proxy
/// A-distances of the whole domains and of each class present on both
/// sides. Falls back to `0.5` when every distance vanishes.
pub fn estimate_mu(
    x_s: &DMatrix<f64>,
    x_t: &DMatrix<f64>,
    source_labels: &[usize],
    target_labels: &[usize],
    class_count: usize,
) -> Result<f64> {
    if x_s.nrows() != source_labels.len() || x_t.nrows() != target_labels.len() {
        return Err(Error::DimensionMismatch {
            context: "label count vs rows",
            left: x_s.nrows() + x_t.nrows(),
            right: source_labels.len() + target_labels.len(),
        });
    }
    check_labels(source_labels, class_count)?;
    check_labels(target_labels, class_count)?;
    let marginal = proxy_a_distance(x_s, x_t)?;
    let conditional = class_distances(x_s, x_t, source_labels, target_labels, class_count)?;
    Ok(mu_from_distances(marginal, conditional))
}

// ---------------------------------------------------------------------------
// Graph Laplacian

/// Normalised Laplacian `I - D^-1/2 W D^-1/2` of the symmetrised p-nearest
/// neighbour graph under cosine similarity (negative similarities clamped
/// to 0). Isolated vertices have an all-zero row.
#[derive(Clone, Debug)]
pub struct GraphLaplacian {
    /// Normalised affinities `D^-1/2 W D^-1/2` per row, sparse.
    normalized: Vec<Vec<(usize, f64)>>,
    connected: Vec<bool>,
}

impl GraphLaplacian {
    pub fn n(&self) -> usize {
        self.connected.len()
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut l = DMatrix::zeros(n, n);
        for i in 0..n {
            if self.connected[i] {
                l[(i, i)] = 1.0;
            }
            for &(j, w) in &self.normalized[i] {
                l[(i, j)] -= w;
            }
        }
        l
    }

    /// `L * rhs` using the sparse affinities.
    pub fn apply(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.n();
        let cols = rhs.ncols();
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut out = vec![0.0; cols];
                if self.connected[i] {
                    for (c, o) in out.iter_mut().enumerate() {
                        *o = rhs[(i, c)];
                    }
                }
                for &(j, w) in &self.normalized[i] {
                    for (c, o) in out.iter_mut().enumerate() {
                        *o -= w * rhs[(j, c)];
                    }
                }
                out
            })
            .collect();
        DMatrix::from_fn(n, cols, |i, c| rows[i][c])
    }
}

pub fn build_laplacian(x: &DMatrix<f64>, p: usize) -> Result<GraphLaplacian> {
    let n = x.nrows();
    if n < 2 {
        return Err(Error::invalid(format!("Laplacian needs at least 2 rows, got {n}")));
    }
    if p < 1 {
        return Err(Error::invalid("p must be >= 1"));
    }
    let p = p.min(n - 1);
    let unit: Vec<Vec<f64>> = rows_of(x)
        .into_iter()
        .map(|r| {
            let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                r.iter().map(|v| v / norm).collect()
            } else {
                r
            }
        })
        .collect();

    // Directed p-NN lists: largest similarity first, ties by index.
    let neighbours: Vec<Vec<(usize, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut sims: Vec<(usize, f64)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    let s: f64 = unit[i].iter().zip(&unit[j]).map(|(a, b)| a * b).sum();
                    (j, s)
                })
                .collect();
            sims.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            sims.truncate(p);
            sims.into_iter()
                .filter_map(|(j, s)| (s > 0.0).then_some((j, s.min(1.0))))
                .collect()
        })
        .collect();

    // Symmetrise by max; adjacency kept sorted by column.
    let mut adj: Vec<std::collections::BTreeMap<usize, f64>> = vec![Default::default(); n];
    for (i, list) in neighbours.iter().enumerate() {
        for &(j, w) in list {
            for (a, b) in [(i, j), (j, i)] {
                let e = adj[a].entry(b).or_insert(0.0);
                *e = e.max(w);
            }
        }
    }
    let degree: Vec<f64> = adj.iter().map(|row| row.values().sum()).collect();
    let inv_sqrt: Vec<f64> = degree
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 })
        .collect();
    let normalized = adj
        .iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .map(|(&j, &w)| (j, w * (inv_sqrt[i.min(j)] * inv_sqrt[i.max(j)])))
                .collect()
        })
        .collect();
    Ok(GraphLaplacian {
        normalized,
        connected: degree.iter().map(|&d| d > 0.0).collect(),
    })
}

// ---------------------------------------------------------------------------
// Closed-form solve

fn check_square(m: &DMatrix<f64>, n: usize, what: &'static str) -> Result<()> {
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::DimensionMismatch {
            context: what,
            left: m.nrows().max(m.ncols()),
            right: n,
        });
    }
    Ok(())
}

/// Checks the label-matrix contract: target rows are zero, and source rows
/// all share one positive row sum (one-hot, possibly uniformly scaled).
fn check_label_matrix(source_mask: &[bool], y: &DMatrix<f64>) -> Result<()> {
    let mut common = None;
    for (i, &is_source) in source_mask.iter().enumerate() {
        let row = y.row(i);
        if !is_source {
            if row.iter().any(|&v| v != 0.0) {
                return Err(Error::invalid(format!("label row {i} is a target row but not zero")));
            }
            continue;
        }
        let s = row.sum();
        if s.is_nan() || s <= 0.0 {
            return Err(Error::invalid(format!("source label row {i} sums to {s}")));
        }
        match common {
            None => common = Some(s),
            Some(c) if (s - c).abs() > 1e-12 * c => {
                return Err(Error::invalid(format!(
                    "source label row {i} sums to {s}, expected {c}"
                )))
            }
            _ => {}
        }
    }
    Ok(())
}

fn masked(source_mask: &[bool], m: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| {
        if source_mask[i] {
            m[(i, j)]
        } else {
            0.0
        }
    })
}

/// `beta = ((A + lambda M + rho L) K + eta I)^-1 A Y` via LU.
#[allow(clippy::too_many_arguments)]
pub fn solve_beta(
    k: &DMatrix<f64>,
    m: &DMatrix<f64>,
    l: &DMatrix<f64>,
    source_mask: &[bool],
    y_onehot: &DMatrix<f64>,
    lambda: f64,
    rho: f64,
    eta: f64,
) -> Result<DMatrix<f64>> {
    let n = k.nrows();
    check_square(k, n, "kernel matrix")?;
    check_square(m, n, "MMD matrix")?;
    check_square(l, n, "Laplacian")?;
    if source_mask.len() != n || y_onehot.nrows() != n {
        return Err(Error::DimensionMismatch {
            context: "label rows vs kernel size",
            left: source_mask.len().min(y_onehot.nrows()),
            right: n,
        });
    }
    check_label_matrix(source_mask, y_onehot)?;
    let system = masked(source_mask, k) + (m * k) * lambda + (l * k) * rho;
    solve_system(system, eta, &masked(source_mask, y_onehot))
}

fn solve_system(mut system: DMatrix<f64>, eta: f64, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    add_to_diagonal(&mut system, eta);
    linalg::solve(system, rhs)
}

/// Value of the quadratic objective at `beta`.
#[allow(clippy::too_many_arguments)]
pub fn objective(
    k: &DMatrix<f64>,
    m: &DMatrix<f64>,
    l: &DMatrix<f64>,
    source_mask: &[bool],
    y_onehot: &DMatrix<f64>,
    lambda: f64,
    rho: f64,
    eta: f64,
    beta: &DMatrix<f64>,
) -> f64 {
    let f = k * beta;
    let resid = masked(source_mask, &(y_onehot - &f));
    let loss = resid.norm_squared();
    let ridge = (beta.transpose() * k * beta).trace();
    let mmd = (f.transpose() * m * &f).trace();
    let lap = (f.transpose() * l * &f).trace();
    loss + eta * ridge + lambda * mmd + rho * lap
}

// ---------------------------------------------------------------------------
// Fit / predict / evaluate

/// Row-wise argmax returning 1-based classes; ties go to the smallest id.
pub fn argmax_labels(scores: &DMatrix<f64>) -> Vec<usize> {
    scores
        .row_iter()
        .map(|row| {
            let mut best = 0;
            for c in 1..row.len() {
                if row[c] > row[best] {
                    best = c;
                }
            }
            best + 1
        })
        .collect()
}

/// Labels of the nearest training row (Euclidean; ties to the lowest index).
pub fn one_nn_labels(
    train: &DMatrix<f64>,
    train_labels: &[usize],
    query: &DMatrix<f64>,
) -> Result<Vec<usize>> {
    if train.ncols() != query.ncols() {
        return Err(Error::DimensionMismatch {
            context: "1-NN feature dimension",
            left: train.ncols(),
            right: query.ncols(),
        });
    }
    if train.nrows() == 0 || train.nrows() != train_labels.len() {
        return Err(Error::invalid("1-NN needs labeled training rows"));
    }
    let tr = rows_of(train);
    let qr = rows_of(query);
    Ok(qr
        .par_iter()
        .map(|q| {
            let mut best = (f64::INFINITY, 0);
            for (j, t) in tr.iter().enumerate() {
                let d: f64 = q.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum();
                if d < best.0 {
                    best = (d, j);
                }
            }
            train_labels[best.1]
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IterationDiagnostics {
    pub mu: f64,
    /// Target pseudo-labels that changed in this iteration.
    pub churn: usize,
    /// Target accuracy after this iteration, when target labels are known.
    pub accuracy: Option<f64>,
}

pub type Diagnostics = Vec<IterationDiagnostics>;

#[derive(Clone, Debug)]
pub struct TrainedAligner {
    beta: DMatrix<f64>,
    train_x: DMatrix<f64>,
    kernel: KernelSpec,
    class_count: usize,
    n_source: usize,
    initial_labels: Vec<usize>,
    target_labels: Vec<usize>,
    diagnostics: Diagnostics,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub labels: Vec<usize>,
    pub scores: DMatrix<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    /// `confusion[i][j]` counts true class `i + 1` predicted as `j + 1`.
    pub confusion: Vec<Vec<usize>>,
}

impl TrainedAligner {
    pub fn beta(&self) -> &DMatrix<f64> {
        &self.beta
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn training_rows(&self) -> &DMatrix<f64> {
        &self.train_x
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn n_source(&self) -> usize {
        self.n_source
    }

    pub fn diagnostics(&self) -> &Diagnostics {
        &self.diagnostics
    }

    /// Pseudo-labels from the source 1-NN initialiser.
    pub fn initial_target_labels(&self) -> &[usize] {
        &self.initial_labels
    }

    /// Target labels predicted by the final iteration.
    pub fn target_labels(&self) -> &[usize] {
        &self.target_labels
    }

    pub fn predict(&self, x_new: &DMatrix<f64>) -> Result<Prediction> {
        if x_new.ncols() != self.train_x.ncols() {
            return Err(Error::DimensionMismatch {
                context: "prediction feature dimension",
                left: x_new.ncols(),
                right: self.train_x.ncols(),
            });
        }
        let cross = gram(&self.kernel, x_new, Some(&self.train_x))?;
        let scores = cross * &self.beta;
        Ok(Prediction {
            labels: argmax_labels(&scores),
            scores,
        })
    }

    pub fn evaluate(&self, labeled_target: &FeatureDataset) -> Result<Evaluation> {
        let truth = labeled_target
            .labels()
            .ok_or(Error::MissingLabels("evaluation"))?;
        let pred = self.predict(labeled_target.x())?;
        evaluate_labels(&pred.labels, truth, self.class_count)
    }
}

pub fn evaluate_labels(predicted: &[usize], truth: &[usize], class_count: usize) -> Result<Evaluation> {
    if predicted.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            context: "predicted vs true label count",
            left: predicted.len(),
            right: truth.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::invalid("nothing to evaluate"));
    }
    check_labels(predicted, class_count)?;
    check_labels(truth, class_count)?;
    let mut confusion = vec![vec![0; class_count]; class_count];
    let mut correct = 0;
    for (&p, &t) in predicted.iter().zip(truth) {
        confusion[t - 1][p - 1] += 1;
        correct += usize::from(p == t);
    }
    Ok(Evaluation {
        accuracy: correct as f64 / truth.len() as f64,
        confusion,
    })
}

fn accuracy_of(pred: &[usize], truth: Option<&[usize]>) -> Option<f64> {
    truth.map(|t| {
        let hits = pred.iter().zip(t).filter(|(a, b)| a == b).count();
        hits as f64 / t.len() as f64
    })
}

pub fn fit(task: &DaTask, config: &AlignmentConfig) -> Result<TrainedAligner> {
    config.validate()?;
    let (ns, nt, c) = (task.n_source(), task.n_target(), task.class_count());
    let n = ns + nt;
    let source_labels = task.source_labels();
    let target_truth = task.target().labels();
    let x_s = task.source().x();
    let x_t = task.target().x();

    let x = task.stacked();
    let kernel = config.kernel.resolve(&x)?;
    let k = gram(&kernel, &x, None)?;
    let laplacian_k = if config.rho > 0.0 {
        Some(build_laplacian(&x, config.p)?.apply(&k))
    } else {
        None
    };

    let mut y = DMatrix::zeros(n, c);
    for (i, &l) in source_labels.iter().enumerate() {
        y[(i, l - 1)] = 1.0;
    }
    let mut base = DMatrix::zeros(n, n);
    base.rows_mut(0, ns).copy_from(&k.rows(0, ns));
    if let Some(lk) = &laplacian_k {
        base += lk * config.rho;
    }
    let target_k = k.rows(ns, nt).into_owned();

    let initial = one_nn_labels(x_s, source_labels, x_t)?;
    let marginal_distance = match config.mu_mode {
        MuMode::Adaptive => Some(proxy_a_distance(x_s, x_t)?),
        MuMode::Fixed(_) => None,
    };

    let mut pseudo = initial.clone();
    let mut beta = DMatrix::zeros(n, c);
    let mut diagnostics = Vec::with_capacity(config.iterations);
    for _ in 0..config.iterations {
        let mu = match (config.mu_mode, marginal_distance) {
            (MuMode::Fixed(mu), _) => mu,
            (MuMode::Adaptive, Some(d_m)) => {
                let d_c = class_distances(x_s, x_t, source_labels, &pseudo, c)?;
                mu_from_distances(d_m, d_c)
            }
            (MuMode::Adaptive, None) => unreachable!(),
        };
        let mut system = base.clone();
        if config.lambda > 0.0 {
            let mmd = MmdOperator::new(source_labels, &pseudo, c, mu)?;
            system += mmd.apply(&k) * config.lambda;
        }
        beta = solve_system(system, config.eta, &y)?;
        let next = argmax_labels(&(&target_k * &beta));
        let churn = next.iter().zip(&pseudo).filter(|(a, b)| a != b).count();
        pseudo = next;
        diagnostics.push(IterationDiagnostics {
            mu,
            churn,
            accuracy: accuracy_of(&pseudo, target_truth),
        });
        log::debug!(
            "iteration {}: mu={mu:.4} churn={churn}",
            diagnostics.len()
        );
    }

    Ok(TrainedAligner {
        beta,
        train_x: x,
        kernel,
        class_count: c,
        n_source: ns,
        initial_labels: initial,
        target_labels: pseudo,
        diagnostics,
    })
}
