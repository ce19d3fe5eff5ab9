//! Regularized ERM over linear predictors, with output- and
//! objective-perturbation trainers.
//!
//! The objective is `J(f, D) = (1/n) sum_i l(y_i f^T x_i) + (lambda/2)||f||^2`.
//! Both private trainers draw a noise vector with density `∝ e^{-beta ||b||}`:
//!
//! * output perturbation releases `argmin J + b` at `beta = n lambda eps / 2`;
//! * objective perturbation releases `argmin J + (1/n) b^T f + (Delta/2)||f||^2`
//!   at `beta = eps'/2`, where the slack `eps' = eps - log(1 + 2c/(n lambda)
//!   + c^2/(n lambda)^2)` and the fallback ridge `Delta` come from
//!   [`compute_slack`].
//!
//! The privacy preconditions (`||x|| <= 1`, labels in {-1, +1}) are enforced at
//! [`Example`] construction rather than rescaled away silently; preprocessing
//! is the designated place for scaling.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::RandomFeatureMap;
use crate::linalg;
use crate::loss::LossSpec;
use crate::noise::{sample_noise, NoiseParams};
use crate::optimizer::{minimize, Objective, SolverConfig};
use crate::rng::RngStream;

/// Slack on the unit-ball check: examples with `||x|| <= 1 + NORM_SLACK` are
/// accepted, anything larger is rejected.
pub const NORM_SLACK: f64 = 1e-12;

/// A labeled example on the unit ball.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    features: Vec<f64>,
    label: f64,
}

impl Example {
    pub fn new(features: Vec<f64>, label: f64) -> Result<Self> {
        if !linalg::all_finite(&features) {
            return Err(Error::NonFinite("example features".into()));
        }
        let norm = linalg::norm(&features);
        if norm > 1.0 + NORM_SLACK {
            return Err(Error::NormBound { norm });
        }
        if label != 1.0 && label != -1.0 {
            return Err(Error::BadLabel(label));
        }
        Ok(Self { features, label })
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn label(&self) -> f64 {
        self.label
    }
}

/// An ordered collection of examples of a common dimension.
///
/// May be empty (splits can produce empty parts); the trainers reject empty
/// input themselves.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    examples: Vec<Example>,
    dimension: usize,
}

impl Dataset {
    pub fn new(examples: Vec<Example>, dimension: usize) -> Result<Self> {
        for (i, ex) in examples.iter().enumerate() {
            if ex.features.len() != dimension {
                return Err(Error::DimensionMismatch {
                    expected: dimension,
                    got: ex.features.len(),
                });
            }
            let _ = i;
        }
        Ok(Self {
            examples,
            dimension,
        })
    }

    /// Infer the dimension from the first example; errors on empty input.
    pub fn from_examples(examples: Vec<Example>) -> Result<Self> {
        let dimension = examples
            .first()
            .map(|e| e.features.len())
            .ok_or_else(|| Error::EmptyDataset("cannot infer dimension".into()))?;
        Self::new(examples, dimension)
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    /// New dataset holding the examples at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            examples: indices.iter().map(|&i| self.examples[i].clone()).collect(),
            dimension: self.dimension,
        }
    }

    /// Map every example through a feature map, producing a dataset in the
    /// feature space. Fails if a mapped example leaves the unit ball (raw-mode
    /// maps can reach norm sqrt(2)).
    pub fn map_features(&self, map: &RandomFeatureMap) -> Result<Dataset> {
        let mut mapped = Vec::with_capacity(self.len());
        for ex in &self.examples {
            let v = map.apply(ex.features())?;
            mapped.push(Example::new(v, ex.label)?);
        }
        Dataset::new(mapped, map.feature_dimension())
    }
}

/// Which trainer produced a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainMethod {
    Nonprivate,
    Output,
    Objective,
}

impl std::fmt::Display for TrainMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            TrainMethod::Nonprivate => "nonprivate",
            TrainMethod::Output => "output",
            TrainMethod::Objective => "objective",
        };
        f.write_str(name)
    }
}

/// Privacy budget and the derived quantities actually used when drawing noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyParams {
    pub epsilon_p: f64,
    /// Slack-adjusted budget (objective perturbation only).
    pub epsilon_p_prime: Option<f64>,
    /// Additional ridge term Delta (objective perturbation only; zero when the
    /// slack leaves a positive budget).
    pub delta_reg: f64,
    /// Inverse scale of the noise density `∝ e^{-beta ||b||}`.
    pub derived_beta: f64,
}

impl PrivacyParams {
    /// Output perturbation: `beta = n lambda eps / 2`.
    pub fn for_output(n: usize, lambda: f64, epsilon_p: f64) -> Result<Self> {
        require_positive("epsilon_p", epsilon_p)?;
        require_positive("lambda", lambda)?;
        Ok(Self {
            epsilon_p,
            epsilon_p_prime: None,
            delta_reg: 0.0,
            derived_beta: n as f64 * lambda * epsilon_p / 2.0,
        })
    }
}

/// Objective-perturbation slack: spend part of the budget on the Jacobian
/// density ratio, and when the curvature term eats the whole budget, add the
/// ridge `Delta` instead.
pub fn compute_slack(n: usize, lambda: f64, c: f64, epsilon_p: f64) -> Result<PrivacyParams> {
    if n == 0 {
        return Err(Error::InvalidParam("n must be positive".into()));
    }
    require_positive("lambda", lambda)?;
    require_positive("c", c)?;
    require_positive("epsilon_p", epsilon_p)?;

    let n_f = n as f64;
    // log(1 + 2c/(n lambda) + c^2/(n lambda)^2) = 2 log(1 + c/(n lambda)),
    // computed via log1p to stay exact when c/(n lambda) is tiny.
    let slack = 2.0 * (c / (n_f * lambda)).ln_1p();
    let mut epsilon_p_prime = epsilon_p - slack;
    let delta_reg = if epsilon_p_prime > 0.0 {
        0.0
    } else {
        epsilon_p_prime = epsilon_p / 2.0;
        c / (n_f * (epsilon_p / 4.0).exp_m1()) - lambda
    };
    Ok(PrivacyParams {
        epsilon_p,
        epsilon_p_prime: Some(epsilon_p_prime),
        delta_reg,
        derived_beta: epsilon_p_prime / 2.0,
    })
}

/// Extra provenance recorded when tuning selected the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningProvenance {
    pub lambda_candidates: Vec<f64>,
    pub chosen_index: usize,
    /// Per-candidate mistake counts. Only populated in audit mode: the privacy
    /// argument covers releasing the trained models and the chosen index, not
    /// the raw validation scores.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub scores: Option<Vec<u64>>,
}

/// A trained linear predictor with full provenance.
///
/// Serializes to a stable JSON document; `serde_json` emits shortest-round-trip
/// float literals, so serialize/deserialize is bit-exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub method: TrainMethod,
    pub loss: LossSpec,
    pub lambda: f64,
    pub epsilon_p: Option<f64>,
    /// Seed of the random stream consumed by training; 0 for the deterministic
    /// non-private trainer.
    pub seed: u64,
    /// Absolute gradient-norm tolerance certified by the solver.
    pub solver_tol: f64,
    pub weights: Vec<f64>,
    pub feature_map: Option<RandomFeatureMap>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub privacy: Option<PrivacyParams>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub tuning: Option<TuningProvenance>,
    /// Set when the privacy guarantee carries a caveat (Huber loss under
    /// objective perturbation is twice differentiable only off a measure-zero
    /// set).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub caveat: Option<String>,
}

impl TrainedModel {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// The regularized ERM objective, optionally with a linear perturbation
/// `(1/n) b^T f` and an extra ridge `(delta/2)||f||^2`.
pub struct ErmObjective<'a> {
    data: &'a Dataset,
    loss: LossSpec,
    lambda: f64,
    linear: Option<Vec<f64>>,
    extra_ridge: f64,
}

impl<'a> ErmObjective<'a> {
    pub fn new(data: &'a Dataset, loss: LossSpec, lambda: f64) -> Self {
        Self {
            data,
            loss,
            lambda,
            linear: None,
            extra_ridge: 0.0,
        }
    }

    /// Add the perturbation term `(1/n) b^T f`.
    pub fn with_linear_term(mut self, b: Vec<f64>) -> Self {
        assert_eq!(b.len(), self.data.dimension());
        self.linear = Some(b);
        self
    }

    /// Add `(delta/2) ||f||^2` on top of the lambda ridge.
    pub fn with_extra_ridge(mut self, delta: f64) -> Self {
        self.extra_ridge = delta;
        self
    }
}

impl Objective for ErmObjective<'_> {
    fn dimension(&self) -> usize {
        self.data.dimension()
    }

    fn value(&self, w: &[f64]) -> f64 {
        let n = self.data.len() as f64;
        let mut total = 0.0;
        for ex in self.data.examples() {
            total += self.loss.value(ex.label() * linalg::dot(w, ex.features()));
        }
        let mut value = total / n + 0.5 * (self.lambda + self.extra_ridge) * linalg::dot(w, w);
        if let Some(b) = &self.linear {
            value += linalg::dot(b, w) / n;
        }
        value
    }

    fn gradient(&self, w: &[f64]) -> Vec<f64> {
        let n = self.data.len() as f64;
        let ridge = self.lambda + self.extra_ridge;
        let mut g: Vec<f64> = w.iter().map(|wi| ridge * wi).collect();
        for ex in self.data.examples() {
            let z = ex.label() * linalg::dot(w, ex.features());
            let coeff = ex.label() * self.loss.deriv(z) / n;
            linalg::axpy(coeff, ex.features(), &mut g);
        }
        if let Some(b) = &self.linear {
            linalg::axpy(1.0 / n, b, &mut g);
        }
        g
    }

    fn strong_convexity(&self) -> f64 {
        self.lambda + self.extra_ridge
    }
}

fn require_positive(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParam(format!(
            "{name} must be positive and finite, got {value}"
        )))
    }
}

fn require_trainable(data: &Dataset, lambda: f64) -> Result<()> {
    if data.is_empty() {
        return Err(Error::EmptyDataset("training requires examples".into()));
    }
    require_positive("lambda", lambda)
}

/// Exact (to solver tolerance) regularized ERM.
pub fn train_nonprivate(
    data: &Dataset,
    loss: LossSpec,
    lambda: f64,
    solver: &SolverConfig,
) -> Result<TrainedModel> {
    require_trainable(data, lambda)?;
    let out = minimize(&ErmObjective::new(data, loss, lambda), solver)?;
    Ok(TrainedModel {
        method: TrainMethod::Nonprivate,
        loss,
        lambda,
        epsilon_p: None,
        seed: 0,
        solver_tol: out.tolerance,
        weights: out.weights,
        feature_map: None,
        privacy: None,
        tuning: None,
        caveat: None,
    })
}

/// Output perturbation: the exact minimizer plus noise at
/// `beta = n lambda eps / 2`.
pub fn train_output_perturbed(
    data: &Dataset,
    loss: LossSpec,
    lambda: f64,
    epsilon_p: f64,
    solver: &SolverConfig,
    rng: &mut RngStream,
) -> Result<TrainedModel> {
    require_trainable(data, lambda)?;
    let params = PrivacyParams::for_output(data.len(), lambda, epsilon_p)?;
    let base = minimize(&ErmObjective::new(data, loss, lambda), solver)?;
    let noise_params = NoiseParams::new(data.dimension(), params.derived_beta)?;
    let noise = sample_noise(&noise_params, rng);
    let weights: Vec<f64> = base
        .weights
        .iter()
        .zip(&noise)
        .map(|(w, b)| w + b)
        .collect();
    Ok(TrainedModel {
        method: TrainMethod::Output,
        loss,
        lambda,
        epsilon_p: Some(epsilon_p),
        seed: rng.seed(),
        solver_tol: base.tolerance,
        weights,
        feature_map: None,
        privacy: Some(params),
        tuning: None,
        caveat: None,
    })
}

/// Objective perturbation with an explicit noise vector. The public trainer
/// draws `b` from the calibrated density; audits pass a fixed `b` (e.g. zero)
/// to isolate the optimization path.
pub fn train_objective_perturbed_with_noise(
    data: &Dataset,
    loss: LossSpec,
    lambda: f64,
    epsilon_p: f64,
    b: Vec<f64>,
    solver: &SolverConfig,
    seed: u64,
) -> Result<TrainedModel> {
    require_trainable(data, lambda)?;
    if b.len() != data.dimension() {
        return Err(Error::DimensionMismatch {
            expected: data.dimension(),
            got: b.len(),
        });
    }
    let params = compute_slack(data.len(), lambda, loss.curvature_bound_c(), epsilon_p)?;
    let objective = ErmObjective::new(data, loss, lambda)
        .with_linear_term(b)
        .with_extra_ridge(params.delta_reg);
    let out = minimize(&objective, solver)?;
    let caveat = if loss.globally_twice_differentiable() {
        None
    } else {
        Some("huber: measure-zero differentiability caveat".to_string())
    };
    Ok(TrainedModel {
        method: TrainMethod::Objective,
        loss,
        lambda,
        epsilon_p: Some(epsilon_p),
        seed,
        solver_tol: out.tolerance,
        weights: out.weights,
        feature_map: None,
        privacy: Some(params),
        tuning: None,
        caveat,
    })
}

/// Objective perturbation: minimize `J + (1/n) b^T f + (Delta/2)||f||^2` with
/// `b` drawn at `beta = eps'/2`.
pub fn train_objective_perturbed(
    data: &Dataset,
    loss: LossSpec,
    lambda: f64,
    epsilon_p: f64,
    solver: &SolverConfig,
    rng: &mut RngStream,
) -> Result<TrainedModel> {
    require_trainable(data, lambda)?;
    let params = compute_slack(data.len(), lambda, loss.curvature_bound_c(), epsilon_p)?;
    let noise_params = NoiseParams::new(data.dimension(), params.derived_beta)?;
    let b = sample_noise(&noise_params, rng);
    train_objective_perturbed_with_noise(data, loss, lambda, epsilon_p, b, solver, rng.seed())
}

/// A classifier output: the raw score `w^T x` and its sign (ties to +1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub score: f64,
    pub label: f64,
}

/// Score a point with a trained model, applying the model's feature map first
/// when one is present.
pub fn predict(model: &TrainedModel, x: &[f64]) -> Result<Prediction> {
    let score = match &model.feature_map {
        Some(map) => {
            let v = map.apply(x)?;
            if v.len() != model.weights.len() {
                return Err(Error::DimensionMismatch {
                    expected: model.weights.len(),
                    got: v.len(),
                });
            }
            linalg::dot(&model.weights, &v)
        }
        None => {
            if x.len() != model.weights.len() {
                return Err(Error::DimensionMismatch {
                    expected: model.weights.len(),
                    got: x.len(),
                });
            }
            linalg::dot(&model.weights, x)
        }
    };
    let label = if score >= 0.0 { 1.0 } else { -1.0 };
    Ok(Prediction { score, label })
}
