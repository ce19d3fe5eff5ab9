//! End-to-end private selection of the regularization parameter.
//!
//! The dataset is split into `m + 1` equal disjoint portions; one model is
//! trained per candidate lambda on its own portion with the full per-model
//! budget, each model is scored by its mistake count `z_i` on the last
//! portion, and the released model is drawn with probability proportional to
//! `e^{-eps z_i / 2}` (the exponential mechanism). Candidate lists must be
//! chosen independently of the private data.
//!
//! By default the released provenance carries the candidate list and the
//! chosen index but not the raw scores: the privacy argument covers releasing
//! the trained models and the selected index, and says nothing about the
//! `z_i` themselves. Audit mode opts into recording them.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::erm::{predict, Dataset, TrainedModel, TuningProvenance};
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Candidate grid and budget for [`tune`].
#[derive(Debug, Clone)]
pub struct TuningConfig {
    /// Dataset-independent candidate regularization parameters.
    pub lambda_candidates: Vec<f64>,
    /// Privacy budget; passed unchanged to each per-split training run and to
    /// the selection step.
    pub epsilon_p: f64,
    /// Record per-candidate mistake counts in the model provenance.
    pub record_scores: bool,
}

impl TuningConfig {
    pub fn new(lambda_candidates: Vec<f64>, epsilon_p: f64) -> Result<Self> {
        if lambda_candidates.is_empty() {
            return Err(Error::InvalidParam(
                "tuning requires at least one candidate lambda".into(),
            ));
        }
        if !(epsilon_p.is_finite() && epsilon_p > 0.0) {
            return Err(Error::InvalidParam(format!(
                "epsilon_p must be positive, got {epsilon_p}"
            )));
        }
        Ok(Self {
            lambda_candidates,
            epsilon_p,
            record_scores: false,
        })
    }
}

/// Split into `parts` disjoint datasets of equal size `floor(n / parts)` via a
/// seeded permutation. Remainder examples are dropped, keeping the portions
/// exactly equal.
pub fn split_disjoint(data: &Dataset, parts: usize, rng: &mut RngStream) -> Result<Vec<Dataset>> {
    if parts == 0 {
        return Err(Error::InvalidParam("parts must be >= 1".into()));
    }
    if data.len() < parts {
        return Err(Error::InsufficientData {
            needed: parts,
            have: data.len(),
        });
    }
    let per_part = data.len() / parts;
    let mut indices: Vec<usize> = (0..data.len()).collect();
    indices.shuffle(rng);
    Ok((0..parts)
        .map(|p| data.subset(&indices[p * per_part..(p + 1) * per_part]))
        .collect())
}

/// Number of validation examples the model labels incorrectly.
///
/// Panics if the model and validation dimensions do not match.
pub fn count_mistakes(model: &TrainedModel, validation: &Dataset) -> u64 {
    validation
        .examples()
        .iter()
        .filter(|ex| {
            let pred = predict(model, ex.features()).expect("dimension mismatch");
            pred.label != ex.label()
        })
        .count() as u64
}

/// Exponential-mechanism selection probabilities
/// `q_i = e^{-eps z_i / 2} / sum_j e^{-eps z_j / 2}`, computed with a max
/// shift so large mistake counts cannot underflow everything to zero. The
/// shift leaves the probabilities exactly invariant: they depend on the scores
/// only through the differences `z_i - min z`.
pub fn exponential_weights(mistakes: &[u64], epsilon_p: f64) -> Vec<f64> {
    assert!(!mistakes.is_empty(), "empty score list");
    assert!(epsilon_p > 0.0, "epsilon_p must be positive");
    let z_min = *mistakes.iter().min().expect("nonempty");
    let raw: Vec<f64> = mistakes
        .iter()
        .map(|&z| (-epsilon_p * (z - z_min) as f64 / 2.0).exp())
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// Draw an index with probability exactly `q_i`.
///
/// Panics on an empty score list.
pub fn select_exponential<R: Rng + ?Sized>(mistakes: &[u64], epsilon_p: f64, rng: &mut R) -> usize {
    let weights = exponential_weights(mistakes, epsilon_p);
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}

/// Train-and-select with end-to-end privacy: the whole procedure, including
/// the choice among candidates, is `epsilon_p`-differentially private when
/// `trainer` is.
///
/// `trainer` maps `(split, lambda, stream)` to a trained model; each candidate
/// gets an independent child stream, so the trainings may be reordered or
/// parallelized without changing the result.
pub fn tune<F>(
    data: &Dataset,
    config: &TuningConfig,
    trainer: F,
    rng: &mut RngStream,
) -> Result<TrainedModel>
where
    F: Fn(&Dataset, f64, &mut RngStream) -> Result<TrainedModel>,
{
    let m = config.lambda_candidates.len();
    if m == 0 {
        return Err(Error::InvalidParam("no candidate lambdas".into()));
    }
    if data.len() < m + 1 {
        return Err(Error::InsufficientData {
            needed: m + 1,
            have: data.len(),
        });
    }
    let splits = split_disjoint(data, m + 1, rng)?;
    let validation = &splits[m];

    let mut models = Vec::with_capacity(m);
    let mut mistakes = Vec::with_capacity(m);
    for (i, &lambda) in config.lambda_candidates.iter().enumerate() {
        let mut stream = rng.child(i as u64 + 1);
        let model = trainer(&splits[i], lambda, &mut stream)?;
        mistakes.push(count_mistakes(&model, validation));
        models.push(model);
    }

    let chosen = select_exponential(&mistakes, config.epsilon_p, rng);
    let mut model = models.swap_remove(chosen);
    model.tuning = Some(TuningProvenance {
        lambda_candidates: config.lambda_candidates.clone(),
        chosen_index: chosen,
        scores: config.record_scores.then(|| mistakes.clone()),
    });
    Ok(model)
}
