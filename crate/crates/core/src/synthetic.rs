//! Seeded toy domain-adaptation tasks.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::Result;
use crate::features::{make_task, DaTask, FeatureDataset};

/// Two isotropic Gaussian classes in the plane; the target domain is the
/// same mixture translated by `shift`.
#[derive(Clone, Debug, PartialEq)]
pub struct CovariateShift {
    pub n_source: usize,
    pub n_target: usize,
    pub class_means: [[f64; 2]; 2],
    pub std_dev: f64,
    pub shift: [f64; 2],
    pub seed: u64,
}

impl Default for CovariateShift {
    fn default() -> Self {
        Self {
            n_source: 200,
            n_target: 200,
            class_means: [[-1.0, 0.0], [1.0, 0.0]],
            std_dev: 0.4,
            shift: [1.5, 1.5],
            seed: 7,
        }
    }
}

impl CovariateShift {
    fn sample(&self, rng: &mut ChaCha8Rng, n: usize, offset: [f64; 2]) -> (DMatrix<f64>, Vec<usize>) {
        let noise = Normal::new(0.0, self.std_dev).expect("std_dev must be finite and >= 0");
        let labels: Vec<usize> = (0..n).map(|i| i % 2 + 1).collect();
        let mut x = DMatrix::zeros(n, 2);
        for (i, &l) in labels.iter().enumerate() {
            for j in 0..2 {
                x[(i, j)] = self.class_means[l - 1][j] + offset[j] + noise.sample(rng);
            }
        }
        (x, labels)
    }

    /// Source and target both carry labels; target labels are only used for
    /// evaluation.
    pub fn task(&self) -> Result<DaTask> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let (xs, ys) = self.sample(&mut rng, self.n_source, [0.0, 0.0]);
        let (xt, yt) = self.sample(&mut rng, self.n_target, self.shift);
        let source = FeatureDataset::new(xs, Some(ys), "source", 2)?;
        let target = FeatureDataset::new(xt, Some(yt), "target", 2)?;
        make_task(source, target)
    }
}

/// Gaussian clusters in `d` dimensions, one per class, with a per-domain
/// offset. Used for multi-class fixtures and benchmarks.
pub fn gaussian_blobs(
    n_per_class: usize,
    classes: usize,
    d: usize,
    spread: f64,
    offset: f64,
    seed: u64,
    name: &str,
) -> Result<FeatureDataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).expect("valid normal");
    // class centres come from a fixed stream so every domain shares them
    let mut centre_rng = ChaCha8Rng::seed_from_u64(0xc1a55);
    let centres: Vec<Vec<f64>> = (0..classes)
        .map(|_| (0..d).map(|_| 3.0 * unit.sample(&mut centre_rng)).collect())
        .collect();
    let n = n_per_class * classes;
    let mut x = DMatrix::zeros(n, d);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % classes;
        labels.push(c + 1);
        for j in 0..d {
            x[(i, j)] = centres[c][j] + offset + spread * unit.sample(&mut rng);
        }
    }
    FeatureDataset::new(x, Some(labels), name, classes)
}
