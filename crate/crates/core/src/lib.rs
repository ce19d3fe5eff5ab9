//! Differentially private regularized empirical risk minimization.
//!
//! The crate trains binary linear classifiers under an epsilon-differential-
//! privacy budget via two mechanisms — output perturbation (noise added to
//! the exact minimizer) and objective perturbation (a random linear term
//! added to the objective before minimizing) — extends both to Gaussian-kernel
//! classification through data-independent random Fourier features, and
//! selects regularization parameters privately with the exponential
//! mechanism. The [`audit`] module empirically falsifies the privacy-critical
//! claims; [`experiment`] reproduces privacy-accuracy tradeoff and
//! learning-curve protocols at desk scale.

pub mod audit;
pub mod dataset;
pub mod erm;
pub mod error;
pub mod experiment;
pub mod kernel;
pub mod linalg;
pub mod loss;
pub mod noise;
pub mod optimizer;
pub mod rng;
pub mod stats;
pub mod tuning;

pub use erm::{Dataset, Example, PrivacyParams, Prediction, TrainMethod, TrainedModel};
pub use error::{Error, Result};
pub use kernel::{NormMode, RandomFeatureMap};
pub use loss::{LossKind, LossSpec};
pub use optimizer::{GradTolerance, SolverConfig};
pub use rng::RngStream;
