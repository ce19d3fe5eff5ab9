//! `dperm` — train, tune and audit differentially private linear classifiers.
//!
//! Exit codes: 0 success, 1 runtime failure (I/O, non-convergence), 2
//! precondition violation (bad flags, malformed data), 3 audit failure.

use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use dperm_core::audit::{
    audit_det_identity, audit_dp_ratio, audit_sensitivity, objective_mechanism, output_mechanism,
    AuditReport, NeighborPair,
};
use dperm_core::dataset::{load_table, preprocess, read_vectors, TableSchema};
use dperm_core::erm::{
    predict, train_nonprivate, train_objective_perturbed, train_output_perturbed, Dataset,
    TrainMethod, TrainedModel,
};
use dperm_core::error::Error;
use dperm_core::experiment::{
    emit_results, run_learning_curve, run_privacy_accuracy, synthetic_dataset, ExperimentGrid,
    OutputFormat, SyntheticConfig,
};
use dperm_core::kernel::{train_kernel_nonprivate, train_kernel_private, NormMode};
use dperm_core::loss::LossSpec;
use dperm_core::optimizer::{GradTolerance, SolverConfig};
use dperm_core::rng::RngStream;
use dperm_core::tuning::{tune, TuningConfig};

#[derive(Parser)]
#[command(
    name = "dperm",
    version,
    about = "Differentially private regularized ERM toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a single model and write it as JSON.
    Train(TrainArgs),
    /// Score a dataset with a trained model.
    Predict(PredictArgs),
    /// Privately select the regularization parameter (exponential mechanism).
    Tune(TuneArgs),
    /// Run empirical privacy audits.
    Audit(AuditArgs),
    /// Run experiment grids and emit plot-ready tables.
    Experiment(ExperimentArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Nonprivate,
    Output,
    Objective,
}

impl From<MethodArg> for TrainMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Nonprivate => TrainMethod::Nonprivate,
            MethodArg::Output => TrainMethod::Output,
            MethodArg::Objective => TrainMethod::Objective,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum NormModeArg {
    RescaleHalf,
    Raw,
}

impl From<NormModeArg> for NormMode {
    fn from(m: NormModeArg) -> Self {
        match m {
            NormModeArg::RescaleHalf => NormMode::RescaleHalf,
            NormModeArg::Raw => NormMode::Raw,
        }
    }
}

#[derive(Args, Clone)]
struct DataArgs {
    /// Input data: delimiter-separated text with --schema, or plain
    /// `label x1 .. xd` vector rows without it.
    #[arg(long)]
    data: PathBuf,
    /// JSON schema file for tabular input.
    #[arg(long)]
    schema: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct SolverArgs {
    /// Gradient tolerance, relative to the gradient norm at zero.
    #[arg(long, default_value_t = 1e-10)]
    grad_tol: f64,
    #[arg(long, default_value_t = 100_000)]
    max_iters: usize,
}

impl SolverArgs {
    fn config(&self) -> SolverConfig {
        SolverConfig {
            tolerance: GradTolerance::RelativeToInit(self.grad_tol),
            max_iters: self.max_iters,
            accelerated: true,
        }
    }
}

#[derive(Args, Clone)]
struct LossArgs {
    /// logistic | huber | smoothed_hinge
    #[arg(long, default_value = "logistic")]
    loss: String,
    /// Smoothing half-width for huber / smoothed_hinge.
    #[arg(long)]
    h: Option<f64>,
}

impl LossArgs {
    fn spec(&self) -> Result<LossSpec, Error> {
        LossSpec::from_name(&self.loss, self.h)
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_enum, default_value_t = MethodArg::Nonprivate)]
    method: MethodArg,
    #[command(flatten)]
    loss: LossArgs,
    #[arg(long)]
    lambda: f64,
    /// Privacy budget (required for output / objective methods).
    #[arg(long)]
    epsilon: Option<f64>,
    /// Gaussian kernel width; enables the random-feature kernel path.
    #[arg(long)]
    kernel_gamma: Option<f64>,
    /// Random-feature count for the kernel path.
    #[arg(long = "features-D", default_value_t = 500)]
    features_d: usize,
    #[arg(long, value_enum, default_value_t = NormModeArg::RescaleHalf)]
    norm_mode: NormModeArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    solver: SolverArgs,
    /// Output model path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    /// Output path for `label score` rows (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TuneArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_enum, default_value_t = MethodArg::Objective)]
    method: MethodArg,
    #[command(flatten)]
    loss: LossArgs,
    /// Candidate regularization parameters (must not depend on the data).
    #[arg(long = "lambda", num_args = 1.., required = true)]
    lambdas: Vec<f64>,
    #[arg(long)]
    epsilon: f64,
    #[arg(long)]
    kernel_gamma: Option<f64>,
    #[arg(long = "features-D", default_value_t = 500)]
    features_d: usize,
    #[arg(long, value_enum, default_value_t = NormModeArg::RescaleHalf)]
    norm_mode: NormModeArg,
    /// Record per-candidate mistake counts in provenance (audit mode; the
    /// privacy argument does not cover releasing them).
    #[arg(long)]
    record_scores: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AuditTest {
    Sensitivity,
    DpRatio,
    DetIdentity,
    All,
}

#[derive(Args)]
struct AuditArgs {
    /// Which audit to run.
    #[arg(long, value_enum, default_value_t = AuditTest::All)]
    test: AuditTest,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Neighbor pairs per loss for the sensitivity audit.
    #[arg(long, default_value_t = 200)]
    pairs: usize,
    #[arg(long, default_value_t = 0.1)]
    lambda: f64,
    /// Privacy budget for the ratio audit.
    #[arg(long, default_value_t = 2.0)]
    epsilon: f64,
    #[arg(long, default_value_t = 100_000)]
    repeats: usize,
    #[arg(long, default_value_t = 50)]
    bins: usize,
    /// Scale applied to the output-perturbation noise in the ratio audit.
    /// 1.0 audits the calibrated mechanism; smaller values are deliberate
    /// negative controls that should fail (exit code 3).
    #[arg(long, default_value_t = 1.0)]
    noise_scale: f64,
    /// Trials for the determinant-identity audit.
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 6)]
    dim: usize,
    /// Output path for the JSON report array (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ExperimentMode {
    PrivacyAccuracy,
    LearningCurve,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Preset {
    /// folds = 10, repeats = 50.
    Paper,
    /// folds = 5, repeats = 10 (widened tolerances documented in the README).
    Desk,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Tabular or vector input; omit and pass --synthetic to generate data.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Generate a synthetic class-imbalanced Gaussian mixture task.
    #[arg(long)]
    synthetic: bool,
    #[arg(long, default_value_t = 2000)]
    synthetic_n: usize,
    #[arg(long, default_value_t = 10)]
    synthetic_d: usize,
    #[arg(long, value_enum, default_value_t = ExperimentMode::PrivacyAccuracy)]
    mode: ExperimentMode,
    #[arg(long = "method", value_enum, num_args = 1.., default_values_t = [MethodArg::Nonprivate, MethodArg::Output, MethodArg::Objective])]
    methods: Vec<MethodArg>,
    #[command(flatten)]
    loss: LossArgs,
    #[arg(long = "epsilon", num_args = 1.., default_values_t = [0.1])]
    epsilons: Vec<f64>,
    #[arg(long = "lambda", num_args = 1.., required = true)]
    lambdas: Vec<f64>,
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    repeats: Option<usize>,
    /// Training-set sizes for learning-curve mode.
    #[arg(long = "n-schedule", num_args = 1..)]
    n_schedule: Vec<usize>,
    #[arg(long, default_value_t = 0.15)]
    val_fraction: f64,
    #[arg(long, default_value_t = 0.2)]
    test_fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Wall-clock budget in seconds; exceeding it yields partial results.
    #[arg(long)]
    time_budget_secs: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    /// csv | json
    #[arg(long, default_value = "csv")]
    format: String,
    #[command(flatten)]
    solver: SolverArgs,
}

fn main() {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            exit_code_for(&err)
        }
    };
    std::process::exit(code);
}

fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::InvalidParam(_)
        | Error::EmptyDataset(_)
        | Error::DimensionMismatch { .. }
        | Error::NormBound { .. }
        | Error::BadLabel(_)
        | Error::InsufficientData { .. }
        | Error::Parse { .. }
        | Error::UnknownCategory { .. } => 2,
        _ => 1,
    }
}

fn run(cli: Cli) -> Result<i32, Error> {
    match cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Predict(args) => cmd_predict(args),
        Command::Tune(args) => cmd_tune(args),
        Command::Audit(args) => cmd_audit(args),
        Command::Experiment(args) => cmd_experiment(args),
    }
}

fn load_dataset(data: &Path, schema: Option<&Path>) -> Result<Dataset, Error> {
    match schema {
        Some(schema_path) => {
            let schema = TableSchema::from_json_file(schema_path)?;
            let table = load_table(data, &schema)?;
            let (dataset, report) = preprocess(&table)?;
            eprintln!(
                "preprocessed: {} examples, {} features, {} rows dropped (missing), {} rows rescaled",
                dataset.len(),
                report.output_dimension,
                report.rows_dropped_missing,
                report.rows_rescaled
            );
            Ok(dataset)
        }
        None => read_vectors(data),
    }
}

fn write_or_print(out: Option<&Path>, content: &str) -> Result<(), Error> {
    match out {
        Some(path) => std::fs::write(path, content)?,
        None => println!("{content}"),
    }
    Ok(())
}

fn require_epsilon(method: TrainMethod, epsilon: Option<f64>) -> Result<f64, Error> {
    epsilon.ok_or_else(|| Error::InvalidParam(format!("--epsilon is required for method {method}")))
}

fn cmd_train(args: TrainArgs) -> Result<i32, Error> {
    let dataset = load_dataset(&args.data.data, args.data.schema.as_deref())?;
    let loss = args.loss.spec()?;
    let solver = args.solver.config();
    let method: TrainMethod = args.method.into();
    let mut rng = RngStream::from_seed(args.seed);

    let model = match args.kernel_gamma {
        Some(gamma) => match method {
            TrainMethod::Nonprivate => train_kernel_nonprivate(
                &dataset,
                loss,
                args.lambda,
                args.features_d,
                gamma,
                args.norm_mode.into(),
                &solver,
                &mut rng,
            )?,
            _ => train_kernel_private(
                &dataset,
                loss,
                args.lambda,
                require_epsilon(method, args.epsilon)?,
                args.features_d,
                gamma,
                method,
                args.norm_mode.into(),
                &solver,
                &mut rng,
            )?,
        },
        None => match method {
            TrainMethod::Nonprivate => train_nonprivate(&dataset, loss, args.lambda, &solver)?,
            TrainMethod::Output => train_output_perturbed(
                &dataset,
                loss,
                args.lambda,
                require_epsilon(method, args.epsilon)?,
                &solver,
                &mut rng,
            )?,
            TrainMethod::Objective => train_objective_perturbed(
                &dataset,
                loss,
                args.lambda,
                require_epsilon(method, args.epsilon)?,
                &solver,
                &mut rng,
            )?,
        },
    };
    write_or_print(args.out.as_deref(), &model.to_json()?)?;
    Ok(0)
}

fn cmd_predict(args: PredictArgs) -> Result<i32, Error> {
    let model = TrainedModel::from_json(&std::fs::read_to_string(&args.model)?)?;
    let dataset = load_dataset(&args.data.data, args.data.schema.as_deref())?;
    let mut lines = String::new();
    let mut mistakes = 0usize;
    for ex in dataset.examples() {
        let pred = predict(&model, ex.features())?;
        if pred.label != ex.label() {
            mistakes += 1;
        }
        lines.push_str(&format!("{} {}\n", pred.label, pred.score));
    }
    write_or_print(args.out.as_deref(), lines.trim_end())?;
    eprintln!(
        "error rate: {:.4} ({mistakes}/{} mistakes)",
        mistakes as f64 / dataset.len() as f64,
        dataset.len()
    );
    Ok(0)
}

fn cmd_tune(args: TuneArgs) -> Result<i32, Error> {
    let dataset = load_dataset(&args.data.data, args.data.schema.as_deref())?;
    let loss = args.loss.spec()?;
    let solver = args.solver.config();
    let method: TrainMethod = args.method.into();
    if method == TrainMethod::Nonprivate {
        return Err(Error::InvalidParam(
            "tuning requires a private method; compare lambdas on a public holdout for non-private models".into(),
        ));
    }
    let mut config = TuningConfig::new(args.lambdas.clone(), args.epsilon)?;
    config.record_scores = args.record_scores;
    let gamma = args.kernel_gamma;
    let features_d = args.features_d;
    let norm_mode: NormMode = args.norm_mode.into();
    let epsilon = args.epsilon;

    let trainer = move |split: &Dataset, lambda: f64, stream: &mut RngStream| match gamma {
        Some(g) => train_kernel_private(
            split, loss, lambda, epsilon, features_d, g, method, norm_mode, &solver, stream,
        ),
        None => match method {
            TrainMethod::Output => {
                train_output_perturbed(split, loss, lambda, epsilon, &solver, stream)
            }
            _ => train_objective_perturbed(split, loss, lambda, epsilon, &solver, stream),
        },
    };
    let mut rng = RngStream::from_seed(args.seed);
    let model = tune(&dataset, &config, trainer, &mut rng)?;
    write_or_print(args.out.as_deref(), &model.to_json()?)?;
    Ok(0)
}

fn cmd_audit(args: AuditArgs) -> Result<i32, Error> {
    let mut reports: Vec<AuditReport> = Vec::new();
    let solver = SolverConfig::with_absolute_tol(1e-12);

    if matches!(args.test, AuditTest::Sensitivity | AuditTest::All) {
        let mut rng = RngStream::from_seed(args.seed);
        for loss in [
            LossSpec::logistic(),
            LossSpec::huber(0.5)?,
            LossSpec::smoothed_hinge(0.5)?,
        ] {
            let pairs: Vec<NeighborPair> = (0..args.pairs)
                .map(|i| NeighborPair::random(if i % 2 == 0 { 10 } else { 50 }, 3, &mut rng))
                .collect::<Result<_, _>>()?;
            let mut report = audit_sensitivity(loss, args.lambda, &pairs, &solver)?;
            report.test = format!("sensitivity[{}]", loss.kind);
            reports.push(report);
        }
    }

    if matches!(args.test, AuditTest::DpRatio | AuditTest::All) {
        let pair = NeighborPair::toy_1d()?;
        let ratio_solver = SolverConfig::with_relative_tol(1e-9);
        let rng = RngStream::from_seed(args.seed ^ 0xD9);
        let output = output_mechanism(
            LossSpec::logistic(),
            args.lambda,
            args.epsilon,
            args.noise_scale,
            ratio_solver,
        );
        let mut report =
            audit_dp_ratio(&output, &pair, args.epsilon, args.repeats, args.bins, &rng)?;
        report.test = format!("dp_ratio[output, noise_scale={}]", args.noise_scale);
        reports.push(report);
        // The objective mechanism has no scale knob; audit it only on the
        // calibrated run.
        if args.noise_scale == 1.0 {
            let objective = objective_mechanism(
                LossSpec::logistic(),
                args.lambda,
                args.epsilon,
                ratio_solver,
            );
            let mut report = audit_dp_ratio(
                &objective,
                &pair,
                args.epsilon,
                args.repeats,
                args.bins,
                &rng,
            )?;
            report.test = "dp_ratio[objective]".into();
            reports.push(report);
        }
    }

    if matches!(args.test, AuditTest::DetIdentity | AuditTest::All) {
        let mut rng = RngStream::from_seed(args.seed ^ 0xDE7);
        reports.push(audit_det_identity(args.dim, args.trials, &mut rng)?);
    }

    let all_passed = reports.iter().all(|r| r.pass);
    for r in &reports {
        eprintln!(
            "{}: {} (worst slack {:.4}{})",
            r.test,
            if r.pass { "PASS" } else { "FAIL" },
            r.worst_slack,
            r.note
                .as_deref()
                .map(|n| format!("; {n}"))
                .unwrap_or_default()
        );
    }
    write_or_print(
        args.out.as_deref(),
        &serde_json::to_string_pretty(&reports)?,
    )?;
    Ok(if all_passed { 0 } else { 3 })
}

fn cmd_experiment(args: ExperimentArgs) -> Result<i32, Error> {
    let dataset = if args.synthetic {
        synthetic_dataset(
            &SyntheticConfig {
                n: args.synthetic_n,
                d: args.synthetic_d,
                ..SyntheticConfig::default()
            },
            &mut RngStream::from_seed(args.seed ^ 0x5D),
        )?
    } else {
        let data = args
            .data
            .as_deref()
            .ok_or_else(|| Error::InvalidParam("provide --data or --synthetic".into()))?;
        load_dataset(data, args.schema.as_deref())?
    };

    let (default_folds, default_repeats) = match args.preset {
        Some(Preset::Desk) => (5, 10),
        _ => (10, 50),
    };
    let grid = ExperimentGrid {
        methods: args.methods.iter().copied().map(Into::into).collect(),
        losses: vec![args.loss.spec()?],
        epsilons: args.epsilons.clone(),
        lambdas: args.lambdas.clone(),
        folds: args.folds.unwrap_or(default_folds),
        repeats: args.repeats.unwrap_or(default_repeats),
        seed: args.seed,
        workers: args.workers,
        time_budget: args.time_budget_secs.map(Duration::from_secs),
    };
    let solver = args.solver.config();
    let result = match args.mode {
        ExperimentMode::PrivacyAccuracy => run_privacy_accuracy(&dataset, &grid, &solver)?,
        ExperimentMode::LearningCurve => {
            if args.n_schedule.is_empty() {
                return Err(Error::InvalidParam(
                    "--n-schedule is required in learning-curve mode".into(),
                ));
            }
            run_learning_curve(
                &dataset,
                &grid,
                &args.n_schedule,
                args.val_fraction,
                args.test_fraction,
                &solver,
            )?
        }
    };
    let format: OutputFormat = args.format.parse()?;
    emit_results(&result, &args.out, format)?;
    eprintln!(
        "wrote {} records to {}{}",
        result.records.len(),
        args.out.display(),
        if result.partial {
            " (PARTIAL: time budget exceeded)"
        } else {
            ""
        }
    );
    Ok(0)
}
