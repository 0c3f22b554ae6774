//! Gram matrices for the kernelised classifier.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelSpec {
    Linear,
    Rbf { gamma: f64 },
}

impl KernelSpec {
    pub fn rbf(gamma: f64) -> Result<Self> {
        if gamma.is_finite() && gamma > 0.0 {
            Ok(Self::Rbf { gamma })
        } else {
            Err(Error::invalid(format!("rbf bandwidth must be positive, got {gamma}")))
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Linear => Ok(()),
            Self::Rbf { gamma } => Self::rbf(gamma).map(|_| ()),
        }
    }

    #[inline]
    fn eval(&self, x: &[f64], z: &[f64]) -> f64 {
        match *self {
            Self::Linear => x.iter().zip(z).map(|(a, b)| a * b).sum(),
            Self::Rbf { gamma } => {
                let sq: f64 = x.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum();
                (-gamma * sq).exp()
            }
        }
    }
}

/// How the rbf bandwidth is chosen when a kernel is resolved against data.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Bandwidth {
    Fixed(f64),
    Median,
}

/// Kernel family plus bandwidth rule, resolved to a [`KernelSpec`] once the
/// training rows are known.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KernelChoice {
    Linear,
    Rbf(Bandwidth),
}

impl Default for KernelChoice {
    fn default() -> Self {
        Self::Rbf(Bandwidth::Median)
    }
}

impl KernelChoice {
    pub fn resolve(&self, x: &DMatrix<f64>) -> Result<KernelSpec> {
        match *self {
            Self::Linear => Ok(KernelSpec::Linear),
            Self::Rbf(Bandwidth::Fixed(g)) => KernelSpec::rbf(g),
            Self::Rbf(Bandwidth::Median) => KernelSpec::rbf(median_bandwidth(x)?),
        }
    }
}

impl From<KernelSpec> for KernelChoice {
    fn from(spec: KernelSpec) -> Self {
        match spec {
            KernelSpec::Linear => Self::Linear,
            KernelSpec::Rbf { gamma } => Self::Rbf(Bandwidth::Fixed(gamma)),
        }
    }
}

/// Rows of `m` as contiguous vectors.
pub(crate) fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    let t = m.transpose();
    t.column_iter().map(|c| c.iter().copied().collect()).collect()
}

fn check_finite(m: &DMatrix<f64>) -> Result<()> {
    for c in 0..m.ncols() {
        for r in 0..m.nrows() {
            if !m[(r, c)].is_finite() {
                return Err(Error::NonFinite { row: r, col: c });
            }
        }
    }
    Ok(())
}

/// `K[i][j] = k(x_i, z_j)`; `z = None` means `z = x`, in which case the
/// result is exactly symmetric.
///
/// Each entry is an ordered dot product or squared distance over the two
/// rows, so `gram(linear, x, z)` is bitwise the transpose of
/// `gram(linear, z, x)`.
pub fn gram(spec: &KernelSpec, x: &DMatrix<f64>, z: Option<&DMatrix<f64>>) -> Result<DMatrix<f64>> {
    spec.validate()?;
    check_finite(x)?;
    let xr = rows_of(x);
    match z {
        None => {
            let n = xr.len();
            let upper: Vec<Vec<f64>> = (0..n)
                .into_par_iter()
                .map(|i| (i..n).map(|j| spec.eval(&xr[i], &xr[j])).collect())
                .collect();
            let mut k = DMatrix::zeros(n, n);
            for (i, row) in upper.iter().enumerate() {
                for (off, &v) in row.iter().enumerate() {
                    let j = i + off;
                    k[(i, j)] = v;
                    k[(j, i)] = v;
                }
            }
            Ok(k)
        }
        Some(z) => {
            if z.ncols() != x.ncols() {
                return Err(Error::DimensionMismatch {
                    context: "gram feature dimension",
                    left: x.ncols(),
                    right: z.ncols(),
                });
            }
            check_finite(z)?;
            let zr = rows_of(z);
            let rows: Vec<Vec<f64>> = xr
                .par_iter()
                .map(|xi| zr.iter().map(|zj| spec.eval(xi, zj)).collect())
                .collect();
            Ok(DMatrix::from_fn(xr.len(), zr.len(), |i, j| rows[i][j]))
        }
    }
}

pub const MEDIAN_SUBSAMPLE: usize = 1000;
const MEDIAN_SEED: u64 = 0x4d44_4120_6277;
const MIN_MEDIAN_SQ_DIST: f64 = 1e-12;

/// Rbf bandwidth `1 / median(||x_i - x_j||^2)` over all pairs of a seeded
/// subsample of at most [`MEDIAN_SUBSAMPLE`] rows. The median is floored at
/// `1e-12`, so identical points give `gamma = 1e12`.
pub fn median_bandwidth(x: &DMatrix<f64>) -> Result<f64> {
    let n = x.nrows();
    if n < 2 {
        return Err(Error::invalid(format!(
            "median bandwidth needs at least 2 rows, got {n}"
        )));
    }
    check_finite(x)?;
    let rows = rows_of(x);
    let picked: Vec<usize> = if n <= MEDIAN_SUBSAMPLE {
        (0..n).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(MEDIAN_SEED);
        let mut idx = rand::seq::index::sample(&mut rng, n, MEDIAN_SUBSAMPLE).into_vec();
        idx.sort_unstable();
        idx
    };
    let mut dists: Vec<f64> = picked
        .par_iter()
        .enumerate()
        .flat_map_iter(|(a, &i)| {
            let rows = &rows;
            picked[a + 1..].iter().map(move |&j| {
                rows[i]
                    .iter()
                    .zip(&rows[j])
                    .map(|(p, q)| (p - q) * (p - q))
                    .sum::<f64>()
            })
        })
        .collect();
    dists.sort_by(f64::total_cmp);
    let m = dists.len();
    let median = if m % 2 == 1 {
        dists[m / 2]
    } else {
        0.5 * (dists[m / 2 - 1] + dists[m / 2])
    };
    Ok(1.0 / median.max(MIN_MEDIAN_SQ_DIST))
}
