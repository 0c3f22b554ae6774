//! Unsupervised domain adaptation over pre-extracted deep features.
//!
//! The crate is organised around a single classifier, modified distribution
//! alignment (MDA): a kernel ridge classifier trained on labeled source rows
//! whose predictions are additionally pulled towards matching marginal and
//! class-conditional distributions across domains (MMD) and towards
//! smoothness on a nearest-neighbour graph over all rows (Laplacian).
//! Target pseudo-labels are refined over a fixed number of iterations.
//!
//! Alongside it live:
//!
//! * [`features`]: datasets, the MDAF binary format, CSV I/O, normalisation.
//! * [`kernels`]: linear and RBF Gram matrices.
//! * [`manifold`]: principal angles, Grassmann exp/log, the geodesic flow
//!   kernel (used by the MEDA-IR baseline) and sphere/shape geodesic demos.
//! * [`harness`]: benchmark suites, methods, config loading, result tables.
//! * [`synthetic`]: seeded toy tasks used by tests and benchmarks.

pub mod alignment;
pub mod error;
pub mod features;
pub mod harness;
pub mod kernels;
pub mod linalg;
pub mod manifold;
pub mod synthetic;

pub use alignment::{
    AlignmentConfig, Diagnostics, GraphLaplacian, MmdOperator, MuMode, Prediction, TrainedAligner,
};
pub use error::{Error, Result};
pub use features::{DaTask, FeatureDataset, NormalizeMode};
pub use harness::{HarnessConfig, Method, ResultTable, SuiteSpec};
pub use kernels::KernelSpec;
pub use manifold::{GfkKernel, PrincipalAngles, Subspace};
