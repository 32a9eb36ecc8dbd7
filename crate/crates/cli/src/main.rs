//! Command-line front end: dataset validation, propensity fitting, Γ
//! calibration, single training runs, sweeps and the toy example.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use robust_defer::data::read_csv_parts;
use robust_defer::harness::{
    emit_report, routing_fractions, run_experiment, ExperimentConfig, Method,
};
use robust_defer::msm::weight_bounds;
use robust_defer::objective::{plugin_regret, worst_case_regret, worst_case_regret_vs_human};
use robust_defer::propensity::{
    calibrate_gamma, fit_assignment, fit_nominal_propensity, AssignmentMode,
};
use robust_defer::synth::{
    generate_synthetic, generate_toy, oracle_evaluate, SyntheticTruth, ToyTruth,
};
use robust_defer::train::{
    evaluate_human_only, train_ao, train_confao, train_confhai, train_confhai_personalized,
    train_hai, HaiVariant, TrainConfig, TrainedSystem,
};
use robust_defer::{
    BaselinePolicy, CostModel, Error, GammaSpec, LinearPolicy, LoggedDataset, ObjectiveKind, Router,
};
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "robust-defer",
    version,
    about = "Confounding-robust human/algorithm deferral learning"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a logged-data CSV against the x0..x{d-1},t,y[,h] schema.
    Validate { csv: PathBuf },
    /// Fit the nominal propensity model and print it as JSON.
    FitPropensity {
        csv: PathBuf,
        #[arg(long, default_value_t = robust_defer::propensity::DEFAULT_EPSILON)]
        epsilon: f64,
        #[arg(long, default_value_t = 1e-4)]
        regularization: f64,
        /// Write the model here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reference Γ from dropping the covariates in --z-cols.
    CalibrateGamma {
        csv: PathBuf,
        /// Zero-based covariate indices, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        z_cols: Vec<usize>,
        #[arg(long, default_value_t = 0.95)]
        quantile: f64,
        #[arg(long, default_value_t = robust_defer::propensity::DEFAULT_EPSILON)]
        epsilon: f64,
        #[arg(long, default_value_t = 1e-4)]
        regularization: f64,
    },
    /// Train one system on a CSV log or a synthetic draw.
    Train(TrainArgs),
    /// Run a method × Γ × seed grid from a JSON config.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Population and estimated values of the single-context example.
    Toy {
        #[arg(long, default_value_t = 0.3)]
        gamma: f64,
        #[arg(long, default_value_t = 50_000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum BaselineArg {
    NeverTreat,
    CsvPolicy,
}

#[derive(clap::Args)]
struct TrainArgs {
    /// Logged data; omit together with --synthetic.
    #[arg(required_unless_present = "synthetic", conflicts_with = "synthetic")]
    csv: Option<PathBuf>,
    /// Draw training (and oracle test) data from the synthetic process.
    #[arg(long)]
    synthetic: bool,
    /// Synthetic training rows.
    #[arg(long, default_value_t = 2_000)]
    n: usize,
    /// Synthetic oracle test rows.
    #[arg(long, default_value_t = 20_000)]
    n_test: usize,
    /// True log Γ per synthetic expert, comma separated.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "2.5",
        allow_negative_numbers = true
    )]
    true_log_gamma: Vec<f64>,
    #[arg(long, value_parser = parse_method)]
    method: Method,
    /// Sensitivity level Γ ≥ 1.
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// Γ per expert, comma separated; overrides --gamma.
    #[arg(long, value_delimiter = ',')]
    gamma_per_expert: Option<Vec<f64>>,
    /// Constant human cost per deferred instance.
    #[arg(long, default_value_t = 0.0)]
    cost: f64,
    #[arg(long, value_enum, default_value_t = BaselineArg::NeverTreat)]
    baseline: BaselineArg,
    /// Baseline policy weights for --baseline csv-policy.
    #[arg(long, required_if_eq("baseline", "csv-policy"))]
    baseline_weights: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 2_000)]
    iterations: usize,
    #[arg(long, default_value_t = 0.05)]
    learning_rate: f64,
    #[arg(long, value_parser = parse_objective, default_value = "vs-baseline")]
    objective: ObjectiveKind,
    #[arg(long, value_parser = parse_variant, default_value = "ipw")]
    hai_variant: HaiVariant,
    #[arg(long, default_value_t = robust_defer::propensity::DEFAULT_EPSILON)]
    epsilon: f64,
    #[arg(long, default_value_t = 1e-4)]
    regularization: f64,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_objective(s: &str) -> Result<ObjectiveKind, String> {
    serde_json::from_value(json!(s))
        .map_err(|_| format!("expected vs-baseline or vs-human, got {s:?}"))
}

fn parse_variant(s: &str) -> Result<HaiVariant, String> {
    serde_json::from_value(json!(s)).map_err(|_| format!("expected ipw or hajek, got {s:?}"))
}

/// Failure classes mapped to the process exit code.
enum Failure {
    Validation(anyhow::Error),
    Runtime(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Self::Validation(_) => 1,
            Self::Runtime(_) => 2,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidData(_)
            | Error::InvalidArgument(_)
            | Error::DimensionMismatch { .. }
            | Error::InvalidPropensity { .. }
            | Error::Csv(_)
            | Error::Json(_)
            | Error::MissingTruth(_) => Self::Validation(e.into()),
            _ => Self::Runtime(e.into()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Self::Runtime(e)
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Validate { csv } => validate(&csv),
        Command::FitPropensity {
            csv,
            epsilon,
            regularization,
            out,
        } => fit_propensity(&csv, epsilon, regularization, out.as_deref()),
        Command::CalibrateGamma {
            csv,
            z_cols,
            quantile,
            epsilon,
            regularization,
        } => calibrate(&csv, &z_cols, quantile, epsilon, regularization),
        Command::Train(args) => train(&args),
        Command::Sweep { config, out } => sweep(&config, out),
        Command::Toy { gamma, n, seed } => toy(gamma, n, seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let code = f.code();
            let (Failure::Validation(e) | Failure::Runtime(e)) = f;
            eprintln!("error: {e:#}");
            ExitCode::from(code)
        }
    }
}

fn load(csv: &Path) -> Result<LoggedDataset, Failure> {
    let file = fs::File::open(csv)
        .with_context(|| format!("cannot open {}", csv.display()))
        .map_err(Failure::Validation)?;
    Ok(LoggedDataset::read_csv(file)?)
}

fn print_json(value: &impl serde::Serialize) -> Outcome {
    println!(
        "{}",
        serde_json::to_string_pretty(value).map_err(Error::from)?
    );
    Ok(())
}

fn validate(csv: &Path) -> Outcome {
    let file = fs::File::open(csv)
        .with_context(|| format!("cannot open {}", csv.display()))
        .map_err(Failure::Validation)?;
    let parts = read_csv_parts(file)?;
    let report = parts.validate();
    for w in &report.warnings {
        println!("warning: {w}");
    }
    for v in &report.violations {
        println!("violation: {v}");
    }
    if !report.is_ok() {
        return Err(Failure::Validation(anyhow!(
            "{} violation(s)",
            report.violations.len()
        )));
    }
    let data = LoggedDataset::try_from(parts)?;
    println!(
        "ok: {} rows, {} covariates, {} arms, {} experts",
        data.n(),
        data.dim(),
        data.n_arms(),
        data.expert_ids().map_or(0, |_| data.n_experts())
    );
    Ok(())
}

fn fit_propensity(csv: &Path, epsilon: f64, regularization: f64, out: Option<&Path>) -> Outcome {
    let data = load(csv)?;
    let model = fit_nominal_propensity(&data, regularization, epsilon)?;
    match out {
        Some(path) => {
            fs::write(
                path,
                serde_json::to_string_pretty(&model).map_err(Error::from)?,
            )
            .with_context(|| format!("cannot write {}", path.display()))?;
            eprintln!("wrote {}", path.display());
            Ok(())
        }
        None => print_json(&model),
    }
}

fn calibrate(
    csv: &Path,
    z_cols: &[usize],
    quantile: f64,
    epsilon: f64,
    regularization: f64,
) -> Outcome {
    let data = load(csv)?;
    print_json(&calibrate_gamma(
        &data,
        z_cols,
        quantile,
        regularization,
        epsilon,
    )?)
}

/// All numbers in a comma or newline separated file; non-numeric fields
/// (a header) are skipped.
fn read_weights(path: &Path) -> Result<Vec<f64>, Failure> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(Failure::Validation)?;
    let weights: Vec<f64> = text
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter_map(|f| f.parse().ok())
        .collect();
    if weights.is_empty() {
        return Err(Failure::Validation(anyhow!(
            "no weights in {}",
            path.display()
        )));
    }
    Ok(weights)
}

fn train(args: &TrainArgs) -> Outcome {
    let (data, test) = if args.synthetic {
        let gammas: Vec<f64> = args.true_log_gamma.iter().map(|g| g.exp()).collect();
        let (train, _) = generate_synthetic(args.n, &gammas, args.seed, None)?;
        let test = generate_synthetic(
            args.n_test,
            &gammas,
            args.seed.wrapping_add(0x9E37_79B9_7F4A_7C15),
            None,
        )?;
        (train, Some(test))
    } else {
        (load(args.csv.as_deref().expect("clap requires csv"))?, None)
    };
    let cost = CostModel::constant(args.cost)?;
    let baseline = match args.baseline {
        BaselineArg::NeverTreat => BaselinePolicy::never_treat(data.n_arms()),
        BaselineArg::CsvPolicy => {
            let weights = read_weights(
                args.baseline_weights
                    .as_deref()
                    .expect("clap requires weights"),
            )?;
            BaselinePolicy::Linear(LinearPolicy::from_weights(
                data.n_arms(),
                data.dim(),
                weights,
            )?)
        }
    };
    let gamma = match &args.gamma_per_expert {
        Some(gs) => GammaSpec::per_expert(gs.clone())?,
        None => GammaSpec::scalar(args.gamma)?,
    };
    let config = TrainConfig {
        iterations: args.iterations,
        learning_rate: args.learning_rate,
        seed: args.seed,
        objective: args.objective,
        ..TrainConfig::default()
    };
    config.validate()?;

    let propensity = fit_nominal_propensity(&data, args.regularization, args.epsilon)?;
    let nominal = propensity.logged_propensities(&data);
    let homogeneous = weight_bounds(&nominal, &GammaSpec::Scalar(gamma.max()), None)?;
    eprintln!("training {} on {} rows", args.method.name(), data.n());
    let system: Option<TrainedSystem> = match args.method {
        Method::Human => None,
        Method::Ao => Some(train_ao(&data, &propensity, &config)?),
        Method::Confao => Some(train_confao(
            &data,
            &homogeneous,
            &baseline,
            &cost,
            &config,
        )?),
        Method::Hai => Some(train_hai(
            &data,
            &propensity,
            &cost,
            args.hai_variant,
            &config,
        )?),
        Method::Confhai => Some(train_confhai(
            &data,
            &homogeneous,
            &baseline,
            &cost,
            &config,
        )?),
        Method::ConfhaiPerson => {
            let per_expert = match &gamma {
                GammaSpec::Scalar(g) => GammaSpec::PerExpert(vec![*g; data.n_experts()]),
                g => g.clone(),
            };
            let bounds = weight_bounds(&nominal, &per_expert, data.expert_ids())?;
            let assignment = fit_assignment(
                &data,
                AssignmentMode::Empirical,
                args.regularization,
                args.epsilon,
            )?;
            Some(train_confhai_personalized(
                &data,
                &bounds,
                &baseline,
                &cost,
                &assignment,
                &config,
            )?)
        }
    };

    let (policy, router) = match &system {
        Some(s) => (s.policy.clone(), s.router.clone()),
        None => (
            LinearPolicy::zeros(data.n_arms(), data.dim()),
            Router::always_human(),
        ),
    };
    let mut summary = json!({
        "method": args.method.name(),
        "gamma": gamma,
        "n": data.n(),
        "human_only_risk": evaluate_human_only(&data, &cost)?,
        "routing_fractions": routing_fractions(&router, &data),
    });
    if router.n_experts() == 1 {
        let vs_baseline =
            worst_case_regret(&data, &policy, &router, &baseline, &cost, &homogeneous)?.total;
        let vs_human =
            worst_case_regret_vs_human(&data, &policy, &router, &cost, &homogeneous)?.total;
        summary["certificate_vs_baseline"] = json!(vs_baseline);
        summary["certificate_vs_human"] = json!(vs_human);
    } else if let Some(c) = system.as_ref().and_then(|s| s.certificates) {
        summary["certificate_vs_baseline"] = json!(c.vs_baseline);
        summary["certificate_vs_human"] = json!(c.vs_human);
    }
    if let Some(s) = &system {
        summary["objective"] = json!(s.objective());
        summary["best_iteration"] = json!(s.best_iteration);
    }
    if let Some((test_data, truth)) = &test {
        let eval = oracle_evaluate(&policy, &router, test_data, truth, &baseline, &cost)?;
        summary["oracle"] = serde_json::to_value(eval).map_err(Error::from)?;
    }

    fs::create_dir_all(&args.out)
        .with_context(|| format!("cannot create {}", args.out.display()))?;
    if let Some(s) = &system {
        write(&args.out.join("system.json"), &s.to_json()?)?;
    }
    write(&args.out.join("propensity.json"), &to_pretty(&propensity)?)?;
    write(&args.out.join("summary.json"), &to_pretty(&summary)?)?;
    if args.synthetic {
        let mut buf = Vec::new();
        data.write_csv(&mut buf)?;
        fs::write(args.out.join("data.csv"), buf).context("cannot write data.csv")?;
    }
    if let Some((_, truth)) = &test {
        let mut buf = Vec::new();
        truth.write_csv(&mut buf)?;
        fs::write(args.out.join("truth.csv"), buf).context("cannot write truth.csv")?;
    }
    print_json(&summary)
}

fn to_pretty(value: &impl serde::Serialize) -> Result<String, Failure> {
    Ok(serde_json::to_string_pretty(value).map_err(Error::from)?)
}

fn write(path: &Path, contents: &str) -> Outcome {
    fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

fn sweep(config_path: &Path, out: Option<PathBuf>) -> Outcome {
    let mut config = ExperimentConfig::from_path(config_path)?;
    if out.is_some() {
        config.output_dir = out;
    }
    config.validate()?;
    let report = run_experiment(&config)?;
    for entry in report.summary() {
        println!(
            "{:<15} {:<24} n={:<3} failed={:<3} mean={} std={}",
            entry.method.name(),
            entry.gamma,
            entry.n,
            entry.failed,
            entry.mean.map_or("-".into(), |m| format!("{m:.4}")),
            entry.std.map_or("-".into(), |s| format!("{s:.4}")),
        );
    }
    if let Some(dir) = &config.output_dir {
        let files = emit_report(&report, dir)?;
        eprintln!("wrote {}", files.results_csv.display());
    }
    if report.is_partial() {
        return Err(Failure::Runtime(anyhow!(
            "{} cell(s) failed; see the error column",
            report.failed()
        )));
    }
    Ok(())
}

fn toy(gamma: f64, n: usize, seed: u64) -> Outcome {
    let (data, truth): (LoggedDataset, ToyTruth) = generate_toy(n, gamma, seed)?;
    let implied = truth.implied_gamma;
    let nominal = vec![0.5; data.n()];
    let weights = vec![2.0; data.n()];
    let bounds = weight_bounds(&nominal, &GammaSpec::Scalar(implied), None)?;
    let always = BaselinePolicy::Arm { arm: 1, n_arms: 2 };
    let never = BaselinePolicy::never_treat(2);
    let cost = CostModel::default();
    let nominal_value = plugin_regret(
        &data,
        &always,
        &Router::never_defer(),
        &never,
        &cost,
        &weights,
    )?;
    let worst = worst_case_regret(
        &data,
        &always,
        &Router::never_defer(),
        &never,
        &cost,
        &bounds,
    )?;
    let certificate =
        worst_case_regret_vs_human(&data, &always, &Router::never_defer(), &cost, &bounds)?;
    let sample: &SyntheticTruth = &truth.truth;
    print_json(&json!({
        "gamma": gamma,
        "implied_msm_gamma": implied,
        "n": n,
        "population": {
            "human_risk": truth.human_risk(),
            "treat_risk": ToyTruth::arm_risk(1),
            "no_treat_risk": ToyTruth::arm_risk(0),
        },
        "estimates": {
            "human_risk": evaluate_human_only(&data, &cost)?,
            "nominal_always_treat": nominal_value.per_arm_terms[1],
            "worst_case_always_treat": worst.per_arm_terms[1],
            "always_treat_vs_human_certificate": certificate.total,
            "latent_share": sample.u.iter().filter(|&&u| u).count() as f64 / n as f64,
        },
    }))
}
