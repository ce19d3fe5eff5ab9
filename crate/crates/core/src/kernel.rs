//! Random Fourier features: reduce Gaussian-kernel ERM to the linear case.
//!
//! The map draws `D` frequency/phase pairs `(omega_j, psi_j)` independently of
//! any data — frequencies from `N(0, 2 gamma I_d)`, phases uniform on
//! `[-pi, pi]` — and sends `x` to `v(x)` with
//! `v_j = s * sqrt(2/D) * cos(omega_j^T x + psi_j)`.
//!
//! In `raw` mode (`s = 1`) inner products `v(x)^T v(x')` estimate the Gaussian
//! kernel `exp(-gamma ||x - x'||^2)` but `||v||` can reach `sqrt(2)`, outside
//! the unit ball the linear trainers require. The default `rescale_half` mode
//! (`s = 1/sqrt(2)`) keeps `||v|| <= 1` at the cost of estimating `k/2`; raw
//! mode is retained for kernel-approximation checks only.
//!
//! Releasing the sampled map together with the trained weights is part of the
//! output and carries no additional privacy cost, because the map never sees
//! the data.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::erm::{
    train_nonprivate, train_objective_perturbed, train_output_perturbed, Dataset, TrainMethod,
    TrainedModel,
};
use crate::error::{Error, Result};
use crate::linalg;
use crate::loss::LossSpec;
use crate::optimizer::SolverConfig;
use crate::rng::RngStream;

/// Whether feature vectors are shrunk to fit the unit ball.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormMode {
    /// `s = 1/sqrt(2)`: `||v(x)|| <= 1` always; inner products estimate `k/2`.
    RescaleHalf,
    /// `s = 1`: inner products estimate `k`; `||v||` may exceed 1.
    Raw,
}

impl NormMode {
    fn scale(self) -> f64 {
        match self {
            NormMode::RescaleHalf => std::f64::consts::FRAC_1_SQRT_2,
            NormMode::Raw => 1.0,
        }
    }
}

/// A sampled Gaussian-kernel random feature map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomFeatureMap {
    /// Number of random features.
    #[serde(rename = "D")]
    pub feature_dim: usize,
    /// Input dimension.
    #[serde(rename = "d")]
    pub input_dim: usize,
    /// Gaussian kernel width: `k(x, x') = exp(-gamma ||x - x'||^2)`.
    pub gamma: f64,
    pub norm_mode: NormMode,
    /// `D` frequency vectors in `R^d`.
    pub frequencies: Vec<Vec<f64>>,
    /// `D` phases in `[-pi, pi]`.
    pub phases: Vec<f64>,
}

impl RandomFeatureMap {
    pub fn feature_dimension(&self) -> usize {
        self.feature_dim
    }

    /// `v(x)`; errors when `x` has the wrong dimension.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                got: x.len(),
            });
        }
        let amp = self.norm_mode.scale() * (2.0 / self.feature_dim as f64).sqrt();
        Ok(self
            .frequencies
            .iter()
            .zip(&self.phases)
            .map(|(omega, psi)| amp * (linalg::dot(omega, x) + psi).cos())
            .collect())
    }
}

/// Sample a Gaussian-kernel feature map: frequencies iid `N(0, 2 gamma I_d)`,
/// phases iid `Uniform[-pi, pi]`. Independent of any dataset by construction.
pub fn sample_gaussian_features<R: Rng + ?Sized>(
    input_dim: usize,
    feature_dim: usize,
    gamma: f64,
    norm_mode: NormMode,
    rng: &mut R,
) -> Result<RandomFeatureMap> {
    if input_dim == 0 || feature_dim == 0 {
        return Err(Error::InvalidParam(
            "feature map dimensions must be >= 1".into(),
        ));
    }
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::InvalidParam(format!(
            "kernel width gamma must be positive, got {gamma}"
        )));
    }
    let normal = Normal::new(0.0, (2.0 * gamma).sqrt()).expect("valid std");
    let frequencies: Vec<Vec<f64>> = (0..feature_dim)
        .map(|_| (0..input_dim).map(|_| rng.sample(normal)).collect())
        .collect();
    let phases: Vec<f64> = (0..feature_dim).map(|_| rng.gen_range(-PI..PI)).collect();
    Ok(RandomFeatureMap {
        feature_dim,
        input_dim,
        gamma,
        norm_mode,
        frequencies,
        phases,
    })
}

/// Closed-form Gaussian kernel, the target of the feature approximation.
pub fn gaussian_kernel(gamma: f64, x: &[f64], y: &[f64]) -> f64 {
    let d = linalg::dist(x, y);
    (-gamma * d * d).exp()
}

/// Kernel ERM by reduction: sample a map, push the data through it, and run
/// the requested linear trainer on the feature-space dataset. The returned
/// model carries the map, so [`crate::erm::predict`] composes it
/// automatically.
#[allow(clippy::too_many_arguments)]
pub fn train_kernel_private(
    data: &Dataset,
    loss: LossSpec,
    lambda: f64,
    epsilon_p: f64,
    feature_dim: usize,
    gamma: f64,
    method: TrainMethod,
    norm_mode: NormMode,
    solver: &SolverConfig,
    rng: &mut RngStream,
) -> Result<TrainedModel> {
    let map = sample_gaussian_features(data.dimension(), feature_dim, gamma, norm_mode, rng)?;
    let mapped = data.map_features(&map)?;
    let mut model = match method {
        TrainMethod::Output => {
            train_output_perturbed(&mapped, loss, lambda, epsilon_p, solver, rng)?
        }
        TrainMethod::Objective => {
            train_objective_perturbed(&mapped, loss, lambda, epsilon_p, solver, rng)?
        }
        TrainMethod::Nonprivate => {
            return Err(Error::InvalidParam(
                "private kernel training requires output or objective method".into(),
            ))
        }
    };
    model.seed = rng.seed();
    model.feature_map = Some(map);
    Ok(model)
}

/// Non-private kernel ERM through the same reduction (the map is still
/// random, so a stream is required).
#[allow(clippy::too_many_arguments)]
pub fn train_kernel_nonprivate(
    data: &Dataset,
    loss: LossSpec,
    lambda: f64,
    feature_dim: usize,
    gamma: f64,
    norm_mode: NormMode,
    solver: &SolverConfig,
    rng: &mut RngStream,
) -> Result<TrainedModel> {
    let map = sample_gaussian_features(data.dimension(), feature_dim, gamma, norm_mode, rng)?;
    let mapped = data.map_features(&map)?;
    let mut model = train_nonprivate(&mapped, loss, lambda, solver)?;
    model.seed = rng.seed();
    model.feature_map = Some(map);
    Ok(model)
}
