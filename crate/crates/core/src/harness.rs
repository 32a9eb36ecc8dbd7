//! Γ-sweep experiments over methods and seeds, with CSV/JSON reports.
//!
//! A run is a grid of cells `(method, Γ spec, seed)`. Cells share nothing
//! but the per-seed data, run in parallel, and are reduced into rows sorted
//! by method, grid position and seed. Synthetic sources are scored by
//! oracle regret on a fresh test draw; CSV sources carry worst-case
//! certificates on a held-out split instead.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{CostModel, GammaSpec, LogGammaSpec, LoggedDataset};
use crate::error::{Error, Result};
use crate::msm::weight_bounds;
use crate::policy::{BaselinePolicy, Destination, LinearPolicy, Router};
use crate::propensity::{
    fit_assignment, fit_nominal_propensity, AssignmentMode, DEFAULT_EPSILON, DEFAULT_REGULARIZATION,
};
use crate::synth::{generate_synthetic, generate_toy, oracle_evaluate, SyntheticTruth, DIM};
use crate::train::{
    certify, certify_personalized, train_ao, train_confao, train_confhai,
    train_confhai_personalized, train_hai, Certificates, HaiVariant, TrainConfig,
};

/// Seed offset separating test draws from training draws.
const TEST_SEED_OFFSET: u64 = 0x9E37_79B9_7F4A_7C15;
pub const DEFAULT_HOLDOUT_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Human,
    Ao,
    Confao,
    Hai,
    Confhai,
    ConfhaiPerson,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Human,
        Method::Ao,
        Method::Confao,
        Method::Hai,
        Method::Confhai,
        Method::ConfhaiPerson,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Human => "human",
            Self::Ao => "ao",
            Self::Confao => "confao",
            Self::Hai => "hai",
            Self::Confhai => "confhai",
            Self::ConfhaiPerson => "confhai-person",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DataSource {
    /// Confounded synthetic process; one expert per entry of `log_gamma_true`.
    Synthetic {
        n_train: usize,
        n_test: usize,
        log_gamma_true: LogGammaSpec,
        /// Number of experts when `log_gamma_true` is a scalar.
        #[serde(default)]
        n_experts: Option<usize>,
        #[serde(default)]
        beta0: Option<[f64; DIM]>,
    },
    /// Single-context example with confounding strength `gamma`.
    Toy {
        n_train: usize,
        n_test: usize,
        gamma: f64,
    },
    /// Logged data without ground truth.
    Csv {
        path: PathBuf,
        #[serde(default = "default_holdout")]
        holdout_fraction: f64,
    },
}

fn default_holdout() -> f64 {
    DEFAULT_HOLDOUT_FRACTION
}

impl DataSource {
    fn expert_gammas(&self) -> Result<Vec<f64>> {
        match self {
            Self::Synthetic {
                log_gamma_true,
                n_experts,
                ..
            } => {
                let spec = GammaSpec::from_log(log_gamma_true)?;
                Ok(match spec {
                    GammaSpec::Scalar(g) => vec![g; n_experts.unwrap_or(1)],
                    GammaSpec::PerExpert(gs) => {
                        if let Some(k) = n_experts {
                            if *k != gs.len() {
                                return Err(Error::InvalidArgument(format!(
                                    "n_experts {k} disagrees with {} true gammas",
                                    gs.len()
                                )));
                            }
                        }
                        gs
                    }
                })
            }
            _ => Ok(Vec::new()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BaselineSpec {
    NeverTreat,
    /// Linear softmax weights, `(m-1) × (d+1)` row-major.
    Linear {
        weights: Vec<f64>,
    },
}

impl BaselineSpec {
    pub fn build(&self, n_arms: usize, dim: usize) -> Result<BaselinePolicy> {
        match self {
            Self::NeverTreat => Ok(BaselinePolicy::never_treat(n_arms)),
            Self::Linear { weights } => Ok(BaselinePolicy::Linear(LinearPolicy::from_weights(
                n_arms,
                dim,
                weights.clone(),
            )?)),
        }
    }
}

fn default_baseline() -> BaselineSpec {
    BaselineSpec::NeverTreat
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

fn default_regularization() -> f64 {
    DEFAULT_REGULARIZATION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataSource,
    pub methods: Vec<Method>,
    /// Specified sensitivity levels on the log scale.
    pub log_gamma_grid: Vec<LogGammaSpec>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub cost: CostModel,
    #[serde(default = "default_baseline")]
    pub baseline: BaselineSpec,
    #[serde(default)]
    pub hai_variant: HaiVariant,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_regularization")]
    pub regularization: f64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() || self.log_gamma_grid.is_empty() || self.seeds.is_empty() {
            return Err(Error::InvalidArgument(
                "methods, gamma grid and seeds must be nonempty".into(),
            ));
        }
        self.train.validate()?;
        self.cost.validate(None)?;
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            return Err(Error::InvalidArgument(format!(
                "epsilon must lie in (0, 0.5), got {}",
                self.epsilon
            )));
        }
        if !(self.regularization >= 0.0 && self.regularization.is_finite()) {
            return Err(Error::InvalidArgument(
                "regularization must be finite and >= 0".into(),
            ));
        }
        for spec in &self.log_gamma_grid {
            let gamma = GammaSpec::from_log(spec)?;
            if let (GammaSpec::PerExpert(gs), DataSource::Synthetic { .. }) = (&gamma, &self.data) {
                let k = self.data.expert_gammas()?.len();
                if gs.len() != k {
                    return Err(Error::InvalidArgument(format!(
                        "gamma spec {} has {} entries but the data has {k} experts",
                        spec.label(),
                        gs.len()
                    )));
                }
            }
            if gamma.is_per_expert() && matches!(self.data, DataSource::Toy { .. }) {
                return Err(Error::InvalidArgument(
                    "the toy source has no experts".into(),
                ));
            }
        }
        match &self.data {
            DataSource::Synthetic {
                n_train, n_test, ..
            }
            | DataSource::Toy {
                n_train, n_test, ..
            } => {
                if *n_train == 0 || *n_test == 0 {
                    return Err(Error::InvalidArgument(
                        "n_train and n_test must be positive".into(),
                    ));
                }
                self.data.expert_gammas()?;
            }
            DataSource::Csv {
                holdout_fraction, ..
            } => {
                if !(*holdout_fraction > 0.0 && *holdout_fraction < 1.0) {
                    return Err(Error::InvalidArgument(
                        "holdout fraction must lie in (0, 1)".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// One `(method, Γ spec, seed)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub method: Method,
    pub gamma: String,
    pub seed: u64,
    /// Oracle regret on synthetic data, the vs-baseline certificate on CSV data.
    pub regret: Option<f64>,
    pub certificate_vs_baseline: Option<f64>,
    pub certificate_vs_human: Option<f64>,
    /// `[expert_0, …, algorithm]` shares of the evaluation rows.
    pub routing_fractions: Vec<f64>,
    pub wall_time_secs: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// `"oracle"` or `"certificate"`.
    pub regret_kind: String,
    pub rows: Vec<ReportRow>,
}

impl EvalReport {
    pub fn failed(&self) -> usize {
        self.rows.iter().filter(|r| r.error.is_some()).count()
    }

    pub fn is_partial(&self) -> bool {
        self.failed() > 0
    }

    /// Regrets of successful rows for one method and Γ label.
    pub fn regrets(&self, method: Method, gamma: &str) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.method == method && r.gamma == gamma)
            .filter_map(|r| r.regret)
            .collect()
    }

    pub fn summary(&self) -> Vec<SummaryEntry> {
        let mut groups: BTreeMap<(Method, usize), (String, Vec<f64>, usize)> = BTreeMap::new();
        let mut order: Vec<String> = Vec::new();
        for row in &self.rows {
            let pos = order
                .iter()
                .position(|g| *g == row.gamma)
                .unwrap_or_else(|| {
                    order.push(row.gamma.clone());
                    order.len() - 1
                });
            let entry = groups
                .entry((row.method, pos))
                .or_insert_with(|| (row.gamma.clone(), Vec::new(), 0));
            match row.regret {
                Some(v) if row.error.is_none() => entry.1.push(v),
                _ => entry.2 += 1,
            }
        }
        groups
            .into_iter()
            .map(|((method, _), (gamma, values, failed))| {
                let (mean, std) = mean_std(&values);
                SummaryEntry {
                    method,
                    gamma,
                    n: values.len(),
                    failed,
                    mean,
                    std,
                }
            })
            .collect()
    }
}

/// Mean and sample standard deviation (0 for fewer than two values).
pub fn mean_std(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    (Some(mean), Some(std))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryEntry {
    pub method: Method,
    pub gamma: String,
    pub n: usize,
    pub failed: usize,
    pub mean: Option<f64>,
    pub std: Option<f64>,
}

/// Training and evaluation data for one seed.
struct SeedData {
    train: LoggedDataset,
    eval: LoggedDataset,
    /// Ground truth of `eval`, synthetic sources only.
    truth: Option<SyntheticTruth>,
}

fn load_seed_data(
    config: &ExperimentConfig,
    seed: u64,
    csv: Option<&LoggedDataset>,
) -> Result<SeedData> {
    let test_seed = seed.wrapping_add(TEST_SEED_OFFSET);
    match &config.data {
        DataSource::Synthetic {
            n_train,
            n_test,
            beta0,
            ..
        } => {
            let gammas = config.data.expert_gammas()?;
            let (train, _) = generate_synthetic(*n_train, &gammas, seed, *beta0)?;
            let (eval, truth) = generate_synthetic(*n_test, &gammas, test_seed, *beta0)?;
            Ok(SeedData {
                train,
                eval,
                truth: Some(truth),
            })
        }
        DataSource::Toy {
            n_train,
            n_test,
            gamma,
        } => {
            let (train, _) = generate_toy(*n_train, *gamma, seed)?;
            let (eval, toy) = generate_toy(*n_test, *gamma, test_seed)?;
            Ok(SeedData {
                train,
                eval,
                truth: Some(toy.truth),
            })
        }
        DataSource::Csv {
            holdout_fraction, ..
        } => {
            let data = csv.expect("csv loaded");
            let (train_idx, eval_idx) = holdout_split(data.n(), *holdout_fraction, seed)?;
            Ok(SeedData {
                train: data.subset(&train_idx)?,
                eval: data.subset(&eval_idx)?,
                truth: None,
            })
        }
    }
}

/// Seeded random split into (train, held-out) index sets.
pub fn holdout_split(n: usize, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    let n_eval = ((n as f64) * fraction).round() as usize;
    if n_eval == 0 || n_eval >= n {
        return Err(Error::InvalidData(format!(
            "cannot hold out {fraction} of {n} rows"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut eval = idx.split_off(n - n_eval);
    idx.sort_unstable();
    eval.sort_unstable();
    Ok((idx, eval))
}

struct CellOutcome {
    regret: Option<f64>,
    certificates: Option<Certificates>,
    routing_fractions: Vec<f64>,
}

fn homogeneous_gamma(spec: &GammaSpec) -> GammaSpec {
    GammaSpec::Scalar(spec.max())
}

fn run_cell(
    config: &ExperimentConfig,
    method: Method,
    log_gamma: &LogGammaSpec,
    seed: u64,
    data: &SeedData,
) -> Result<CellOutcome> {
    let train = &data.train;
    let cost = &config.cost;
    let baseline = config.baseline.build(train.n_arms(), train.dim())?;
    let gamma = GammaSpec::from_log(log_gamma)?;
    let propensity = fit_nominal_propensity(train, config.regularization, config.epsilon)?;
    let nominal = propensity.logged_propensities(train);
    let homogeneous = weight_bounds(&nominal, &homogeneous_gamma(&gamma), None)?;
    let mut tc = config.train.clone();
    tc.seed = seed;
    if tc.objective == crate::objective::ObjectiveKind::Personalized {
        tc.objective = crate::objective::ObjectiveKind::VsBaseline;
    }

    let (policy, router) = match method {
        Method::Human => (
            LinearPolicy::zeros(train.n_arms(), train.dim()),
            Router::always_human(),
        ),
        Method::Ao => {
            let sys = train_ao(train, &propensity, &tc)?;
            (sys.policy, sys.router)
        }
        Method::Confao => {
            let sys = train_confao(train, &homogeneous, &baseline, cost, &tc)?;
            (sys.policy, sys.router)
        }
        Method::Hai => {
            let sys = train_hai(train, &propensity, cost, config.hai_variant, &tc)?;
            (sys.policy, sys.router)
        }
        Method::Confhai => {
            let sys = train_confhai(train, &homogeneous, &baseline, cost, &tc)?;
            (sys.policy, sys.router)
        }
        Method::ConfhaiPerson => {
            let k = train.n_experts();
            if train.expert_ids().is_none() {
                return Err(Error::InvalidData("confhai-person needs expert ids".into()));
            }
            let per_expert = match &gamma {
                GammaSpec::Scalar(g) => GammaSpec::PerExpert(vec![*g; k]),
                g => g.clone(),
            };
            let bounds = weight_bounds(&nominal, &per_expert, train.expert_ids())?;
            let assignment = fit_assignment(
                train,
                AssignmentMode::Empirical,
                config.regularization,
                config.epsilon,
            )?;
            let sys =
                train_confhai_personalized(train, &bounds, &baseline, cost, &assignment, &tc)?;
            (sys.policy, sys.router)
        }
    };

    match &data.truth {
        Some(truth) => {
            let eval = oracle_evaluate(&policy, &router, &data.eval, truth, &baseline, cost)?;
            let certificates = if router.n_experts() == 1 {
                Some(certify(
                    train,
                    &policy,
                    &router,
                    &homogeneous,
                    &baseline,
                    cost,
                )?)
            } else {
                None
            };
            Ok(CellOutcome {
                regret: Some(eval.regret),
                certificates,
                routing_fractions: eval.routing_fractions,
            })
        }
        None => {
            let eval = &data.eval;
            let eval_nominal = propensity.logged_propensities(eval);
            let eval_cost = match cost {
                CostModel::Constant(c) => CostModel::Constant(*c),
                CostModel::PerRow(_) => {
                    return Err(Error::InvalidArgument(
                        "per-row costs are not supported in sweeps".into(),
                    ))
                }
            };
            let certificates = if router.n_experts() == 1 {
                let bounds = weight_bounds(&eval_nominal, &homogeneous_gamma(&gamma), None)?;
                certify(eval, &policy, &router, &bounds, &baseline, &eval_cost)?
            } else {
                let k = eval.n_experts();
                let per_expert = match &gamma {
                    GammaSpec::Scalar(g) => GammaSpec::PerExpert(vec![*g; k]),
                    g => g.clone(),
                };
                let bounds = weight_bounds(&eval_nominal, &per_expert, eval.expert_ids())?;
                let assignment = fit_assignment(
                    train,
                    AssignmentMode::Empirical,
                    config.regularization,
                    config.epsilon,
                )?;
                certify_personalized(
                    eval,
                    &policy,
                    &router,
                    &bounds,
                    &baseline,
                    &eval_cost,
                    &assignment,
                )?
            };
            Ok(CellOutcome {
                regret: Some(certificates.vs_baseline),
                certificates: Some(certificates),
                routing_fractions: routing_fractions(&router, eval),
            })
        }
    }
}

/// Share of rows sent to each destination by the deployed router.
pub fn routing_fractions(router: &Router, data: &LoggedDataset) -> Vec<f64> {
    let k = router.n_experts();
    let mut counts = vec![0usize; k + 1];
    for x in data.rows() {
        match router.decide(x) {
            Destination::Expert(h) => counts[h] += 1,
            Destination::Algorithm => counts[k] += 1,
        }
    }
    counts.iter().map(|&c| c as f64 / data.n() as f64).collect()
}

/// Runs every cell of the grid. Cell failures are recorded in their rows.
pub fn run_experiment(config: &ExperimentConfig) -> Result<EvalReport> {
    config.validate()?;
    let csv = match &config.data {
        DataSource::Csv { path, .. } => Some(LoggedDataset::from_csv_path(path)?),
        _ => None,
    };
    let seed_data: Vec<(u64, Result<SeedData>)> = config
        .seeds
        .par_iter()
        .map(|&s| (s, load_seed_data(config, s, csv.as_ref())))
        .collect();

    let mut cells = Vec::new();
    for (mi, &method) in config.methods.iter().enumerate() {
        for (gi, spec) in config.log_gamma_grid.iter().enumerate() {
            for (si, _) in config.seeds.iter().enumerate() {
                cells.push((mi, gi, si, method, spec));
            }
        }
    }
    let mut rows: Vec<((Method, usize, u64), ReportRow)> = cells
        .par_iter()
        .map(|&(_, gi, si, method, spec)| {
            let (seed, data) = &seed_data[si];
            let start = Instant::now();
            let outcome = match data {
                Ok(d) => run_cell(config, method, spec, *seed, d),
                Err(e) => Err(Error::InvalidData(format!("data for seed {seed}: {e}"))),
            };
            let wall_time_secs = start.elapsed().as_secs_f64();
            let row = match outcome {
                Ok(o) if o.regret.is_none_or(f64::is_finite) => ReportRow {
                    method,
                    gamma: spec.label(),
                    seed: *seed,
                    regret: o.regret,
                    certificate_vs_baseline: o.certificates.map(|c| c.vs_baseline),
                    certificate_vs_human: o.certificates.map(|c| c.vs_human),
                    routing_fractions: o.routing_fractions,
                    wall_time_secs,
                    error: None,
                },
                Ok(_) => failed_row(
                    method,
                    spec,
                    *seed,
                    wall_time_secs,
                    "non-finite regret".into(),
                ),
                Err(e) => failed_row(method, spec, *seed, wall_time_secs, e.to_string()),
            };
            ((method, gi, *seed), row)
        })
        .collect();
    rows.sort_by_key(|r| r.0);
    Ok(EvalReport {
        regret_kind: if csv.is_some() {
            "certificate"
        } else {
            "oracle"
        }
        .into(),
        rows: rows.into_iter().map(|(_, r)| r).collect(),
    })
}

fn failed_row(
    method: Method,
    spec: &LogGammaSpec,
    seed: u64,
    wall_time_secs: f64,
    error: String,
) -> ReportRow {
    ReportRow {
        method,
        gamma: spec.label(),
        seed,
        regret: None,
        certificate_vs_baseline: None,
        certificate_vs_human: None,
        routing_fractions: Vec::new(),
        wall_time_secs,
        error: Some(error),
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Paths written by [`emit_report`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReportFiles {
    pub results_csv: PathBuf,
    pub summary_json: PathBuf,
    pub timings_csv: PathBuf,
}

/// Writes `results.csv`, `summary.json` and `timings.csv` into `dir`.
/// Wall times only go to `timings.csv`, so the other two files are
/// byte-identical across reruns of the same configuration.
pub fn emit_report(report: &EvalReport, dir: impl AsRef<Path>) -> Result<ReportFiles> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let files = ReportFiles {
        results_csv: dir.join("results.csv"),
        summary_json: dir.join("summary.json"),
        timings_csv: dir.join("timings.csv"),
    };
    let destinations = report
        .rows
        .iter()
        .map(|r| r.routing_fractions.len())
        .max()
        .unwrap_or(0);

    let mut w = csv::Writer::from_path(&files.results_csv)?;
    let mut header: Vec<String> = [
        "method",
        "gamma",
        "seed",
        "regret_kind",
        "regret",
        "cert_vs_baseline",
        "cert_vs_human",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for d in 0..destinations {
        header.push(if d + 1 == destinations {
            "route_algorithm".into()
        } else {
            format!("route_expert_{d}")
        });
    }
    header.push("error".into());
    w.write_record(&header)?;
    for row in &report.rows {
        let mut record = vec![
            row.method.name().to_string(),
            row.gamma.clone(),
            row.seed.to_string(),
            report.regret_kind.clone(),
            fmt_opt(row.regret),
            fmt_opt(row.certificate_vs_baseline),
            fmt_opt(row.certificate_vs_human),
        ];
        // Rows with fewer destinations (homogeneous routers) fill the expert
        // columns from the left and always end in the algorithm column.
        let fr = &row.routing_fractions;
        for d in 0..destinations {
            let value = if fr.is_empty() {
                None
            } else if d + 1 == destinations {
                fr.last().copied()
            } else if d + 1 < fr.len() {
                Some(fr[d])
            } else {
                None
            };
            record.push(fmt_opt(value));
        }
        record.push(row.error.clone().unwrap_or_default());
        w.write_record(&record)?;
    }
    w.flush()?;

    #[derive(Serialize)]
    struct Summary<'a> {
        regret_kind: &'a str,
        partial: bool,
        groups: Vec<SummaryEntry>,
    }
    let summary = Summary {
        regret_kind: &report.regret_kind,
        partial: report.is_partial(),
        groups: report.summary(),
    };
    fs::write(
        &files.summary_json,
        serde_json::to_string_pretty(&summary)? + "\n",
    )?;

    let mut t = csv::Writer::from_path(&files.timings_csv)?;
    t.write_record(["method", "gamma", "seed", "wall_time_secs"])?;
    for row in &report.rows {
        t.write_record(&[
            row.method.name().to_string(),
            row.gamma.clone(),
            row.seed.to_string(),
            row.wall_time_secs.to_string(),
        ])?;
    }
    t.flush()?;
    Ok(files)
}
