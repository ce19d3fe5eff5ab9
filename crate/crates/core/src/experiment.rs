//! Experiment harness: privacy-accuracy grids, learning curves, and
//! plot-ready result files.
//!
//! Grid cells are embarrassingly parallel. Every cell draws its randomness
//! from a child stream keyed by the cell's index in the (deterministically
//! enumerated) grid, so the worker count never changes the results, and a run
//! with a fixed seed emits byte-identical files. Per-cell wall time is
//! recorded in memory for profiling but deliberately kept out of the emitted
//! files and out of record equality, which would otherwise destroy that
//! determinism.
//!
//! For learning-curve results the `fold` column indexes the training-set-size
//! schedule instead of a cross-validation fold.

use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::erm::{
    predict, train_nonprivate, train_objective_perturbed, train_output_perturbed, Dataset, Example,
    TrainMethod, TrainedModel,
};
use crate::error::{Error, Result};
use crate::linalg;
use crate::loss::{LossKind, LossSpec};
use crate::optimizer::SolverConfig;
use crate::rng::RngStream;
use crate::tuning::{tune, TuningConfig};

pub const SCHEMA_VERSION: u32 = 1;

/// The full cross product to evaluate.
#[derive(Debug, Clone)]
pub struct ExperimentGrid {
    pub methods: Vec<TrainMethod>,
    pub losses: Vec<LossSpec>,
    /// Privacy budgets; applied to private methods only.
    pub epsilons: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub folds: usize,
    /// Randomized-training repeats per private cell; non-private cells are
    /// deterministic and run once.
    pub repeats: usize,
    pub seed: u64,
    pub workers: usize,
    /// Optional wall-clock budget. When it expires, remaining cells are
    /// skipped and the result is marked partial (and is then no longer
    /// deterministic).
    pub time_budget: Option<Duration>,
}

impl ExperimentGrid {
    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() || self.losses.is_empty() || self.lambdas.is_empty() {
            return Err(Error::InvalidParam(
                "experiment grid must include methods, losses and lambdas".into(),
            ));
        }
        let has_private = self.methods.iter().any(|m| *m != TrainMethod::Nonprivate);
        if has_private && self.epsilons.is_empty() {
            return Err(Error::InvalidParam(
                "private methods require an epsilon grid".into(),
            ));
        }
        if self.folds < 2 {
            return Err(Error::InvalidParam("need at least 2 folds".into()));
        }
        if self.repeats < 1 {
            return Err(Error::InvalidParam("repeats must be >= 1".into()));
        }
        Ok(())
    }

    /// Record count the cross product will produce (private methods run
    /// epsilons x repeats, non-private once per lambda and fold).
    pub fn expected_records(&self) -> usize {
        let private_methods = self
            .methods
            .iter()
            .filter(|m| **m != TrainMethod::Nonprivate)
            .count();
        let nonprivate = if self.methods.contains(&TrainMethod::Nonprivate) {
            self.losses.len() * self.lambdas.len() * self.folds
        } else {
            0
        };
        nonprivate
            + private_methods
                * self.losses.len()
                * self.epsilons.len()
                * self.lambdas.len()
                * self.folds
                * self.repeats
    }
}

/// One grid cell's measured outcome.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub method: TrainMethod,
    pub loss: LossKind,
    pub h: Option<f64>,
    pub epsilon_p: Option<f64>,
    pub lambda: f64,
    pub fold: usize,
    pub repeat: usize,
    pub test_error: f64,
    pub false_pos_rate: f64,
    pub false_neg_rate: f64,
    /// Training wall time; profiling only. Never serialized and excluded from
    /// equality so fixed-seed runs stay reproducible.
    #[serde(skip)]
    pub wall_time_ms: f64,
}

impl PartialEq for ExperimentRecord {
    fn eq(&self, other: &Self) -> bool {
        self.method == other.method
            && self.loss == other.loss
            && self.h == other.h
            && self.epsilon_p == other.epsilon_p
            && self.lambda == other.lambda
            && self.fold == other.fold
            && self.repeat == other.repeat
            && self.test_error == other.test_error
            && self.false_pos_rate == other.false_pos_rate
            && self.false_neg_rate == other.false_neg_rate
    }
}

fn method_rank(m: TrainMethod) -> u8 {
    match m {
        TrainMethod::Nonprivate => 0,
        TrainMethod::Output => 1,
        TrainMethod::Objective => 2,
    }
}

fn loss_rank(l: LossKind) -> u8 {
    match l {
        LossKind::Logistic => 0,
        LossKind::Huber => 1,
        LossKind::SmoothedHinge => 2,
    }
}

fn record_key(r: &ExperimentRecord) -> impl Ord {
    (
        method_rank(r.method),
        loss_rank(r.loss),
        r.epsilon_p.map(f64::to_bits).unwrap_or(0),
        r.lambda.to_bits(),
        r.fold,
        r.repeat,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub schema_version: u32,
    /// True when a time budget expired and cells were skipped.
    pub partial: bool,
    pub records: Vec<ExperimentRecord>,
}

/// Misclassification rates of a model on a dataset. All three rates share the
/// denominator `|data|`, so `error = false_pos + false_neg` holds exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorRates {
    pub test_error: f64,
    pub false_pos_rate: f64,
    pub false_neg_rate: f64,
}

pub fn evaluate(model: &TrainedModel, data: &Dataset) -> Result<ErrorRates> {
    if data.is_empty() {
        return Err(Error::EmptyDataset("evaluation set".into()));
    }
    let mut false_pos = 0usize;
    let mut false_neg = 0usize;
    for ex in data.examples() {
        let pred = predict(model, ex.features())?;
        if pred.label != ex.label() {
            if ex.label() < 0.0 {
                false_pos += 1;
            } else {
                false_neg += 1;
            }
        }
    }
    let n = data.len() as f64;
    let false_pos_rate = false_pos as f64 / n;
    let false_neg_rate = false_neg as f64 / n;
    Ok(ErrorRates {
        // Defined as the sum so the decomposition identity holds bitwise.
        test_error: false_pos_rate + false_neg_rate,
        false_pos_rate,
        false_neg_rate,
    })
}

/// Seeded k-fold partition: fold `i` is the `i`-th contiguous chunk of a
/// seeded permutation (remainder spread over the leading folds).
pub fn cross_validation_folds(
    data: &Dataset,
    folds: usize,
    rng: &mut RngStream,
) -> Result<Vec<(Dataset, Dataset)>> {
    if data.len() < folds {
        return Err(Error::InsufficientData {
            needed: folds,
            have: data.len(),
        });
    }
    let mut indices: Vec<usize> = (0..data.len()).collect();
    indices.shuffle(rng);
    let base = data.len() / folds;
    let extra = data.len() % folds;
    let mut out = Vec::with_capacity(folds);
    let mut start = 0;
    for f in 0..folds {
        let size = base + usize::from(f < extra);
        let test_idx = &indices[start..start + size];
        let train_idx: Vec<usize> = indices[..start]
            .iter()
            .chain(&indices[start + size..])
            .copied()
            .collect();
        out.push((data.subset(&train_idx), data.subset(test_idx)));
        start += size;
    }
    Ok(out)
}

struct Cell {
    index: u64,
    method: TrainMethod,
    loss: LossSpec,
    epsilon_p: Option<f64>,
    lambda: f64,
    fold: usize,
    repeat: usize,
}

/// Cross-validated, repeat-averaged error over the whole grid.
pub fn run_privacy_accuracy(
    data: &Dataset,
    grid: &ExperimentGrid,
    solver: &SolverConfig,
) -> Result<ExperimentResult> {
    grid.validate()?;
    let root = RngStream::from_seed(grid.seed);
    let folds = cross_validation_folds(data, grid.folds, &mut root.child(0))?;

    let mut cells = Vec::new();
    let mut index = 0u64;
    for &method in &grid.methods {
        let private = method != TrainMethod::Nonprivate;
        let epsilons: Vec<Option<f64>> = if private {
            grid.epsilons.iter().copied().map(Some).collect()
        } else {
            vec![None]
        };
        let repeats = if private { grid.repeats } else { 1 };
        for &loss in &grid.losses {
            for &epsilon_p in &epsilons {
                for &lambda in &grid.lambdas {
                    for fold in 0..grid.folds {
                        for repeat in 0..repeats {
                            cells.push(Cell {
                                index,
                                method,
                                loss,
                                epsilon_p,
                                lambda,
                                fold,
                                repeat,
                            });
                            index += 1;
                        }
                    }
                }
            }
        }
    }

    let started = Instant::now();
    let expired = AtomicBool::new(false);
    let run_cell = |cell: &Cell| -> Result<Option<ExperimentRecord>> {
        if let Some(budget) = grid.time_budget {
            if expired.load(Ordering::Relaxed) || started.elapsed() > budget {
                expired.store(true, Ordering::Relaxed);
                return Ok(None);
            }
        }
        let (train, test) = &folds[cell.fold];
        let clock = Instant::now();
        let model = match cell.method {
            TrainMethod::Nonprivate => train_nonprivate(train, cell.loss, cell.lambda, solver)?,
            TrainMethod::Output => train_output_perturbed(
                train,
                cell.loss,
                cell.lambda,
                cell.epsilon_p.expect("private cell"),
                solver,
                &mut root.child(1 + cell.index),
            )?,
            TrainMethod::Objective => train_objective_perturbed(
                train,
                cell.loss,
                cell.lambda,
                cell.epsilon_p.expect("private cell"),
                solver,
                &mut root.child(1 + cell.index),
            )?,
        };
        let wall_time_ms = clock.elapsed().as_secs_f64() * 1e3;
        let rates = evaluate(&model, test)?;
        Ok(Some(ExperimentRecord {
            method: cell.method,
            loss: cell.loss.kind,
            h: cell.loss.h,
            epsilon_p: cell.epsilon_p,
            lambda: cell.lambda,
            fold: cell.fold,
            repeat: cell.repeat,
            test_error: rates.test_error,
            false_pos_rate: rates.false_pos_rate,
            false_neg_rate: rates.false_neg_rate,
            wall_time_ms,
        }))
    };

    let outcomes: Vec<Result<Option<ExperimentRecord>>> = if grid.workers > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(grid.workers)
            .build()
            .map_err(|e| Error::InvalidParam(format!("worker pool: {e}")))?;
        pool.install(|| {
            use rayon::prelude::*;
            cells.par_iter().map(run_cell).collect()
        })
    } else {
        cells.iter().map(run_cell).collect()
    };

    let mut records = Vec::with_capacity(cells.len());
    let mut partial = false;
    for outcome in outcomes {
        match outcome? {
            Some(record) => records.push(record),
            None => partial = true,
        }
    }
    records.sort_by_key(record_key);
    Ok(ExperimentResult {
        schema_version: SCHEMA_VERSION,
        partial,
        records,
    })
}

/// Pick the lambda with the fewest validation mistakes; ties go to the
/// smallest lambda.
pub fn select_lambda_validation(
    train: &Dataset,
    validation: &Dataset,
    lambdas: &[f64],
    loss: LossSpec,
    solver: &SolverConfig,
) -> Result<(f64, TrainedModel)> {
    if lambdas.is_empty() {
        return Err(Error::InvalidParam("no candidate lambdas".into()));
    }
    let mut sorted = lambdas.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut best: Option<(u64, f64, TrainedModel)> = None;
    for &lambda in &sorted {
        let model = train_nonprivate(train, loss, lambda, solver)?;
        let mistakes = crate::tuning::count_mistakes(&model, validation);
        let better = match &best {
            None => true,
            Some((best_mistakes, _, _)) => mistakes < *best_mistakes,
        };
        if better {
            best = Some((mistakes, lambda, model));
        }
    }
    let (_, lambda, model) = best.expect("nonempty candidates");
    Ok((lambda, model))
}

/// Error versus training-set size. Private methods are tuned end-to-end with
/// the exponential mechanism; the non-private baseline compares candidate
/// lambdas directly on a held-out validation set. The `fold` column of the
/// output indexes `n_schedule`.
pub fn run_learning_curve(
    data: &Dataset,
    grid: &ExperimentGrid,
    n_schedule: &[usize],
    val_fraction: f64,
    test_fraction: f64,
    solver: &SolverConfig,
) -> Result<ExperimentResult> {
    grid.validate()?;
    if n_schedule.is_empty() {
        return Err(Error::InvalidParam("empty n schedule".into()));
    }
    let n_max = *n_schedule.iter().max().expect("nonempty");
    let root = RngStream::from_seed(grid.seed);
    let solver = *solver;

    let mut records = Vec::new();
    for repeat in 0..grid.repeats {
        let mut perm_rng = root.child(repeat as u64);
        let n_val = (val_fraction * data.len() as f64).floor() as usize;
        let n_test = (test_fraction * data.len() as f64).floor() as usize;
        if n_max + n_val + n_test > data.len() {
            return Err(Error::InsufficientData {
                needed: n_max + n_val + n_test,
                have: data.len(),
            });
        }
        let mut indices: Vec<usize> = (0..data.len()).collect();
        indices.shuffle(&mut perm_rng);
        let test = data.subset(&indices[..n_test]);
        let validation = data.subset(&indices[n_test..n_test + n_val]);
        let pool = &indices[n_test + n_val..];

        for (schedule_idx, &n) in n_schedule.iter().enumerate() {
            let train = data.subset(&pool[..n]);
            for &loss in &grid.losses {
                for &method in &grid.methods {
                    match method {
                        TrainMethod::Nonprivate => {
                            let clock = Instant::now();
                            let (lambda, model) = select_lambda_validation(
                                &train,
                                &validation,
                                &grid.lambdas,
                                loss,
                                &solver,
                            )?;
                            let rates = evaluate(&model, &test)?;
                            records.push(ExperimentRecord {
                                method,
                                loss: loss.kind,
                                h: loss.h,
                                epsilon_p: None,
                                lambda,
                                fold: schedule_idx,
                                repeat,
                                test_error: rates.test_error,
                                false_pos_rate: rates.false_pos_rate,
                                false_neg_rate: rates.false_neg_rate,
                                wall_time_ms: clock.elapsed().as_secs_f64() * 1e3,
                            });
                        }
                        TrainMethod::Output | TrainMethod::Objective => {
                            for &epsilon_p in &grid.epsilons {
                                let clock = Instant::now();
                                let config = TuningConfig::new(grid.lambdas.clone(), epsilon_p)?;
                                let trainer =
                                    |split: &Dataset,
                                     lambda: f64,
                                     stream: &mut RngStream|
                                     -> Result<TrainedModel> {
                                        match method {
                                            TrainMethod::Output => train_output_perturbed(
                                                split, loss, lambda, epsilon_p, &solver, stream,
                                            ),
                                            _ => train_objective_perturbed(
                                                split, loss, lambda, epsilon_p, &solver, stream,
                                            ),
                                        }
                                    };
                                let mut tune_rng = root
                                    .child(0x1000_0000 + records.len() as u64 * 31 + repeat as u64);
                                let model = tune(&train, &config, trainer, &mut tune_rng)?;
                                let rates = evaluate(&model, &test)?;
                                records.push(ExperimentRecord {
                                    method,
                                    loss: loss.kind,
                                    h: loss.h,
                                    epsilon_p: Some(epsilon_p),
                                    lambda: model.lambda,
                                    fold: schedule_idx,
                                    repeat,
                                    test_error: rates.test_error,
                                    false_pos_rate: rates.false_pos_rate,
                                    false_neg_rate: rates.false_neg_rate,
                                    wall_time_ms: clock.elapsed().as_secs_f64() * 1e3,
                                });
                            }
                        }
                    }
                }
            }
        }
    }
    records.sort_by_key(record_key);
    Ok(ExperimentResult {
        schema_version: SCHEMA_VERSION,
        partial: false,
        records,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::InvalidParam(format!("unknown format {other:?}"))),
        }
    }
}

const CSV_HEADER: &str = "schema_version,method,loss,h,epsilon_p,lambda,fold,repeat,test_error,false_pos_rate,false_neg_rate";

fn loss_name(kind: LossKind) -> &'static str {
    match kind {
        LossKind::Logistic => "logistic",
        LossKind::Huber => "huber",
        LossKind::SmoothedHinge => "smoothed_hinge",
    }
}

/// Write records sorted and bit-stable: floats are emitted with `{}`, the
/// shortest form that parses back to the identical f64.
pub fn emit_results(result: &ExperimentResult, path: &Path, format: OutputFormat) -> Result<()> {
    if result.records.is_empty() {
        return Err(Error::EmptyDataset("no records to emit".into()));
    }
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    match format {
        OutputFormat::Json => {
            serde_json::to_writer_pretty(&mut w, result)?;
            writeln!(w)?;
        }
        OutputFormat::Csv => {
            writeln!(w, "{CSV_HEADER}")?;
            for r in &result.records {
                let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
                writeln!(
                    w,
                    "{},{},{},{},{},{},{},{},{},{},{}",
                    result.schema_version,
                    r.method,
                    loss_name(r.loss),
                    opt(r.h),
                    opt(r.epsilon_p),
                    r.lambda,
                    r.fold,
                    r.repeat,
                    r.test_error,
                    r.false_pos_rate,
                    r.false_neg_rate,
                )?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Read a result file written by [`emit_results`].
pub fn load_results(path: &Path, format: OutputFormat) -> Result<ExperimentResult> {
    match format {
        OutputFormat::Json => {
            let text = std::fs::read_to_string(path)?;
            Ok(serde_json::from_str(&text)?)
        }
        OutputFormat::Csv => {
            let file = std::fs::File::open(path)?;
            let reader = std::io::BufReader::new(file);
            let mut lines = reader.lines();
            let header = lines.next().transpose()?.ok_or_else(|| Error::Parse {
                line: 1,
                msg: "empty file".into(),
            })?;
            if header != CSV_HEADER {
                return Err(Error::Parse {
                    line: 1,
                    msg: format!("unexpected header {header:?}"),
                });
            }
            let mut schema_version = SCHEMA_VERSION;
            let mut records = Vec::new();
            for (idx, line) in lines.enumerate() {
                let line = line?;
                if line.is_empty() {
                    continue;
                }
                let line_no = idx + 2;
                let parse_err = |msg: &str| Error::Parse {
                    line: line_no,
                    msg: msg.to_string(),
                };
                let cells: Vec<&str> = line.split(',').collect();
                if cells.len() != 11 {
                    return Err(parse_err("wrong column count"));
                }
                schema_version = cells[0].parse().map_err(|_| parse_err("schema_version"))?;
                let method = match cells[1] {
                    "nonprivate" => TrainMethod::Nonprivate,
                    "output" => TrainMethod::Output,
                    "objective" => TrainMethod::Objective,
                    _ => return Err(parse_err("method")),
                };
                let loss = match cells[2] {
                    "logistic" => LossKind::Logistic,
                    "huber" => LossKind::Huber,
                    "smoothed_hinge" => LossKind::SmoothedHinge,
                    _ => return Err(parse_err("loss")),
                };
                let opt_f64 = |s: &str, what: &str| -> Result<Option<f64>> {
                    if s.is_empty() {
                        Ok(None)
                    } else {
                        s.parse::<f64>().map(Some).map_err(|_| Error::Parse {
                            line: line_no,
                            msg: what.to_string(),
                        })
                    }
                };
                records.push(ExperimentRecord {
                    method,
                    loss,
                    h: opt_f64(cells[3], "h")?,
                    epsilon_p: opt_f64(cells[4], "epsilon_p")?,
                    lambda: cells[5].parse().map_err(|_| parse_err("lambda"))?,
                    fold: cells[6].parse().map_err(|_| parse_err("fold"))?,
                    repeat: cells[7].parse().map_err(|_| parse_err("repeat"))?,
                    test_error: cells[8].parse().map_err(|_| parse_err("test_error"))?,
                    false_pos_rate: cells[9].parse().map_err(|_| parse_err("false_pos_rate"))?,
                    false_neg_rate: cells[10].parse().map_err(|_| parse_err("false_neg_rate"))?,
                    wall_time_ms: 0.0,
                });
            }
            Ok(ExperimentResult {
                schema_version,
                partial: false,
                records,
            })
        }
    }
}

/// Gaussian class-conditional mixture with configurable label imbalance,
/// projected into the unit ball.
#[derive(Debug, Clone, Copy)]
pub struct SyntheticConfig {
    pub n: usize,
    pub d: usize,
    /// P(label = +1); 0.25 mirrors the demographic benchmark's imbalance.
    pub positive_fraction: f64,
    /// Distance of each class mean from the origin.
    pub separation: f64,
    /// Isotropic within-class standard deviation.
    pub noise: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n: 1000,
            d: 10,
            positive_fraction: 0.25,
            separation: 0.35,
            noise: 0.25,
        }
    }
}

pub fn synthetic_dataset(config: &SyntheticConfig, rng: &mut RngStream) -> Result<Dataset> {
    if config.d == 0 || config.n == 0 {
        return Err(Error::InvalidParam("synthetic data needs n, d >= 1".into()));
    }
    if !(0.0..=1.0).contains(&config.positive_fraction) {
        return Err(Error::InvalidParam(
            "positive_fraction must lie in [0, 1]".into(),
        ));
    }
    let mean_coord = config.separation / (config.d as f64).sqrt();
    let examples: Vec<Example> = (0..config.n)
        .map(|_| {
            let label: f64 = if rng.gen::<f64>() < config.positive_fraction {
                1.0
            } else {
                -1.0
            };
            let mut x: Vec<f64> = (0..config.d)
                .map(|_| label * mean_coord + config.noise * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let norm = linalg::norm(&x);
            if norm > 1.0 {
                for v in &mut x {
                    *v /= norm;
                }
                while linalg::norm(&x) > 1.0 {
                    for v in &mut x {
                        *v *= 1.0 - 1e-15;
                    }
                }
            }
            Example::new(x, label)
        })
        .collect::<Result<_>>()?;
    Dataset::new(examples, config.d)
}
