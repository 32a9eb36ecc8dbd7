//! Minimax training of deferral systems and the comparison methods.
//!
//! Every trainer runs the same loop: solve the inner maximization at the
//! current parameters, record the objective, take one optimizer step with
//! the weights held fixed, and finally return the iterate with the lowest
//! recorded objective.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{CostModel, LoggedDataset};
use crate::error::{Error, Result};
use crate::msm::{weight_bounds, WeightBounds};
use crate::objective::{Comparison, Objective, ObjectiveKind, Routing, Weighting};
use crate::policy::{BaselinePolicy, LinearPolicy, LinearRouter, Router};
use crate::propensity::{AssignmentModel, PropensityModel};

/// Objective values above this abort training.
pub const DIVERGENCE_THRESHOLD: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Optimizer {
    PlainGd,
    Adam {
        beta1: f64,
        beta2: f64,
        epsilon: f64,
    },
}

impl Optimizer {
    pub fn adam() -> Self {
        Self::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl Default for Optimizer {
    fn default() -> Self {
        Self::adam()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Init {
    #[default]
    Zeros,
    Gaussian {
        std: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub iterations: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    pub seed: u64,
    pub init: Init,
    pub objective: ObjectiveKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iterations: 2000,
            learning_rate: 0.05,
            optimizer: Optimizer::default(),
            seed: 0,
            init: Init::Zeros,
            objective: ObjectiveKind::VsBaseline,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidArgument(
                "iterations must be at least 1".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if let Optimizer::Adam {
            beta1,
            beta2,
            epsilon,
        } = self.optimizer
        {
            if !(0.0..1.0).contains(&beta1)
                || !(0.0..1.0).contains(&beta2)
                || epsilon.is_nan()
                || epsilon <= 0.0
            {
                return Err(Error::InvalidArgument(
                    "adam needs β₁, β₂ in [0, 1) and ε > 0".into(),
                ));
            }
        }
        if let Init::Gaussian { std } = self.init {
            if !(std > 0.0 && std.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "init std must be positive, got {std}"
                )));
            }
        }
        Ok(())
    }
}

/// Worst-case regret estimates at the returned parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certificates {
    pub vs_baseline: f64,
    pub vs_human: f64,
}

impl Certificates {
    /// Both certificates negative: improvement over the baseline and the human.
    pub fn certifies_improvement(&self) -> bool {
        self.vs_baseline < 0.0 && self.vs_human < 0.0
    }
}

/// Output of a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedSystem {
    pub policy: LinearPolicy,
    pub router: Router,
    /// Training objective at each iterate, before its step.
    pub objective_trace: Vec<f64>,
    pub best_iteration: usize,
    /// Certificates for methods trained against an MSM box.
    pub certificates: Option<Certificates>,
}

/// Serialized form of a [`TrainedSystem`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemRecord {
    pub policy_weights: Vec<f64>,
    pub router_weights: Vec<f64>,
    pub objective_trace: Vec<f64>,
    pub certificates: Option<Certificates>,
}

impl TrainedSystem {
    /// Objective at the returned parameters.
    pub fn objective(&self) -> f64 {
        self.objective_trace[self.best_iteration]
    }

    pub fn record(&self) -> SystemRecord {
        SystemRecord {
            policy_weights: self.policy.weights().to_vec(),
            router_weights: match &self.router {
                Router::Linear(r) => r.weights().to_vec(),
                Router::Constant(p) => p.clone(),
            },
            objective_trace: self.objective_trace.clone(),
            certificates: self.certificates,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.record())?)
    }
}

/// Result of the bare optimization loop.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedRun {
    pub policy: LinearPolicy,
    pub router: Router,
    pub objective_trace: Vec<f64>,
    pub best_iteration: usize,
}

struct Stepper {
    optimizer: Optimizer,
    lr: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Stepper {
    fn new(optimizer: Optimizer, lr: f64, len: usize) -> Self {
        Self {
            optimizer,
            lr,
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    /// Applies one step to `params[offset..]` segments flattened as one vector.
    fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) {
        self.t += 1;
        let mut idx = 0;
        for (p, g) in params.iter_mut().zip(grads) {
            for (w, &gi) in p.iter_mut().zip(g.iter()) {
                match self.optimizer {
                    Optimizer::PlainGd => *w -= self.lr * gi,
                    Optimizer::Adam {
                        beta1,
                        beta2,
                        epsilon,
                    } => {
                        self.m[idx] = beta1 * self.m[idx] + (1.0 - beta1) * gi;
                        self.v[idx] = beta2 * self.v[idx] + (1.0 - beta2) * gi * gi;
                        let m_hat = self.m[idx] / (1.0 - beta1.powi(self.t));
                        let v_hat = self.v[idx] / (1.0 - beta2.powi(self.t));
                        *w -= self.lr * m_hat / (v_hat.sqrt() + epsilon);
                    }
                }
                idx += 1;
            }
        }
    }
}

fn initial_params(
    n_arms: usize,
    dim: usize,
    router_experts: Option<usize>,
    config: &TrainConfig,
) -> (LinearPolicy, Option<LinearRouter>) {
    let mut policy = LinearPolicy::zeros(n_arms, dim);
    let mut router = router_experts.map(|k| LinearRouter::zeros(k, dim));
    if let Init::Gaussian { std } = config.init {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let normal = Normal::new(0.0, std).expect("validated std");
        for w in policy.weights_mut() {
            *w = normal.sample(&mut rng);
        }
        if let Some(r) = router.as_mut() {
            for w in r.weights_mut() {
                *w = normal.sample(&mut rng);
            }
        }
    }
    (policy, router)
}

fn diverged(iteration: usize, value: f64, trace: &[f64]) -> Error {
    Error::Divergence {
        iteration,
        value,
        trace_prefix: trace.to_vec(),
    }
}

/// Runs the alternating loop from the given parameters. A constant router is
/// kept frozen.
pub fn optimize(
    objective: &Objective<'_>,
    policy: LinearPolicy,
    router: Router,
    config: &TrainConfig,
) -> Result<TrainedRun> {
    config.validate()?;
    let mut policy = policy;
    let mut router = router;
    let router_len = match &router {
        Router::Linear(r) => r.weights().len(),
        Router::Constant(_) => 0,
    };
    let mut stepper = Stepper::new(
        config.optimizer,
        config.learning_rate,
        policy.weights().len() + router_len,
    );
    let mut trace = Vec::with_capacity(config.iterations);
    let mut best: Option<(f64, usize, LinearPolicy, Router)> = None;
    for k in 0..config.iterations {
        let (value, grad) = match objective.value_and_gradient(&policy, &router) {
            Ok(v) => v,
            Err(Error::NonFinite { .. }) => return Err(diverged(k, f64::NAN, &trace)),
            Err(e) => return Err(e),
        };
        let total = value.total;
        if !total.is_finite() || total > DIVERGENCE_THRESHOLD {
            return Err(diverged(k, total, &trace));
        }
        trace.push(total);
        if best.as_ref().is_none_or(|(b, ..)| total < *b) {
            best = Some((total, k, policy.clone(), router.clone()));
        }
        match &mut router {
            Router::Linear(r) => stepper.step(
                &mut [policy.weights_mut(), r.weights_mut()],
                &[&grad.policy, &grad.router],
            ),
            Router::Constant(_) => stepper.step(&mut [policy.weights_mut()], &[&grad.policy]),
        }
        if policy.weights().iter().any(|w| !w.is_finite()) {
            return Err(diverged(k, total, &trace));
        }
    }
    let (_, best_iteration, policy, router) = best.expect("at least one iteration");
    Ok(TrainedRun {
        policy,
        router,
        objective_trace: trace,
        best_iteration,
    })
}

fn into_system(run: TrainedRun, certificates: Option<Certificates>) -> TrainedSystem {
    TrainedSystem {
        policy: run.policy,
        router: run.router,
        objective_trace: run.objective_trace,
        best_iteration: run.best_iteration,
        certificates,
    }
}

/// Worst-case regrets against `baseline` and the human under homogeneous routing.
pub fn certify(
    data: &LoggedDataset,
    policy: &LinearPolicy,
    router: &Router,
    bounds: &WeightBounds,
    baseline: &BaselinePolicy,
    cost: &CostModel,
) -> Result<Certificates> {
    let objective = |comparison| Objective {
        data,
        cost,
        comparison,
        routing: Routing::Homogeneous,
        weighting: Weighting::WorstCase(bounds),
    };
    Ok(Certificates {
        vs_baseline: objective(Comparison::Baseline(baseline))
            .evaluate(policy, router)?
            .total,
        vs_human: objective(Comparison::Human).evaluate(policy, router)?.total,
    })
}

/// Worst-case regrets with expert-specific routing.
pub fn certify_personalized(
    data: &LoggedDataset,
    policy: &LinearPolicy,
    router: &Router,
    bounds: &WeightBounds,
    baseline: &BaselinePolicy,
    cost: &CostModel,
    assignment: &AssignmentModel,
) -> Result<Certificates> {
    let objective = |comparison| Objective {
        data,
        cost,
        comparison,
        routing: Routing::Personalized(assignment),
        weighting: Weighting::WorstCase(bounds),
    };
    Ok(Certificates {
        vs_baseline: objective(Comparison::Baseline(baseline))
            .evaluate(policy, router)?
            .total,
        vs_human: objective(Comparison::Human).evaluate(policy, router)?.total,
    })
}

fn homogeneous_comparison<'a>(
    config: &TrainConfig,
    baseline: &'a BaselinePolicy,
) -> Result<Comparison<'a>> {
    match config.objective {
        ObjectiveKind::VsBaseline => Ok(Comparison::Baseline(baseline)),
        ObjectiveKind::VsHuman => Ok(Comparison::Human),
        ObjectiveKind::Personalized => Err(Error::InvalidArgument(
            "homogeneous training needs a vs-baseline or vs-human objective".into(),
        )),
    }
}

/// Jointly learns a policy and a homogeneous deferral router against the
/// worst case in `bounds`.
pub fn train_confhai(
    data: &LoggedDataset,
    bounds: &WeightBounds,
    baseline: &BaselinePolicy,
    cost: &CostModel,
    config: &TrainConfig,
) -> Result<TrainedSystem> {
    let (policy, router) = initial_params(data.n_arms(), data.dim(), Some(1), config);
    let router = Router::Linear(router.expect("router requested"));
    train_confhai_from(data, bounds, baseline, cost, config, policy, router)
}

/// [`train_confhai`] from explicit starting parameters.
pub fn train_confhai_from(
    data: &LoggedDataset,
    bounds: &WeightBounds,
    baseline: &BaselinePolicy,
    cost: &CostModel,
    config: &TrainConfig,
    policy: LinearPolicy,
    router: Router,
) -> Result<TrainedSystem> {
    let objective = Objective {
        data,
        cost,
        comparison: homogeneous_comparison(config, baseline)?,
        routing: Routing::Homogeneous,
        weighting: Weighting::WorstCase(bounds),
    };
    let run = optimize(&objective, policy, router, config)?;
    let certificates = certify(data, &run.policy, &run.router, bounds, baseline, cost)?;
    Ok(into_system(run, Some(certificates)))
}

/// Learns a policy and a router over the individual experts plus the
/// algorithm, with expert-specific bounds.
pub fn train_confhai_personalized(
    data: &LoggedDataset,
    bounds: &WeightBounds,
    baseline: &BaselinePolicy,
    cost: &CostModel,
    assignment: &AssignmentModel,
    config: &TrainConfig,
) -> Result<TrainedSystem> {
    if data.expert_ids().is_none() {
        return Err(Error::InvalidData(
            "personalized training needs expert ids".into(),
        ));
    }
    let (policy, router) =
        initial_params(data.n_arms(), data.dim(), Some(data.n_experts()), config);
    let router = Router::Linear(router.expect("router requested"));
    train_confhai_personalized_from(
        data, bounds, baseline, cost, assignment, config, policy, router,
    )
}

/// [`train_confhai_personalized`] from explicit starting parameters.
#[allow(clippy::too_many_arguments)]
pub fn train_confhai_personalized_from(
    data: &LoggedDataset,
    bounds: &WeightBounds,
    baseline: &BaselinePolicy,
    cost: &CostModel,
    assignment: &AssignmentModel,
    config: &TrainConfig,
    policy: LinearPolicy,
    router: Router,
) -> Result<TrainedSystem> {
    let comparison = match config.objective {
        ObjectiveKind::VsHuman => Comparison::Human,
        _ => Comparison::Baseline(baseline),
    };
    let objective = Objective {
        data,
        cost,
        comparison,
        routing: Routing::Personalized(assignment),
        weighting: Weighting::WorstCase(bounds),
    };
    let run = optimize(&objective, policy, router, config)?;
    let certificates = certify_personalized(
        data,
        &run.policy,
        &run.router,
        bounds,
        baseline,
        cost,
        assignment,
    )?;
    Ok(into_system(run, Some(certificates)))
}

/// Policy-only minimax against `baseline`; the router is frozen at `φ ≡ 0`.
pub fn train_confao(
    data: &LoggedDataset,
    bounds: &WeightBounds,
    baseline: &BaselinePolicy,
    cost: &CostModel,
    config: &TrainConfig,
) -> Result<TrainedSystem> {
    let (policy, _) = initial_params(data.n_arms(), data.dim(), None, config);
    let objective = Objective {
        data,
        cost,
        comparison: Comparison::Baseline(baseline),
        routing: Routing::Homogeneous,
        weighting: Weighting::WorstCase(bounds),
    };
    let run = optimize(&objective, policy, Router::never_defer(), config)?;
    let certificates = certify(data, &run.policy, &run.router, bounds, baseline, cost)?;
    Ok(into_system(run, Some(certificates)))
}

/// Inverse propensity weights `1/π̂₀(t_i|x_i)` of the logged arms.
pub fn nominal_weights(data: &LoggedDataset, propensity: &PropensityModel) -> Vec<f64> {
    propensity
        .logged_propensities(data)
        .iter()
        .map(|p| 1.0 / p)
        .collect()
}

/// Policy-only learning with unnormalized inverse propensity weighting.
pub fn train_ao(
    data: &LoggedDataset,
    propensity: &PropensityModel,
    config: &TrainConfig,
) -> Result<TrainedSystem> {
    let weights = nominal_weights(data, propensity);
    let (policy, _) = initial_params(data.n_arms(), data.dim(), None, config);
    let cost = CostModel::default();
    let objective = Objective {
        data,
        cost: &cost,
        comparison: Comparison::Absolute,
        routing: Routing::Homogeneous,
        weighting: Weighting::Ipw(&weights),
    };
    Ok(into_system(
        optimize(&objective, policy, Router::never_defer(), config)?,
        None,
    ))
}

/// Normalization of the joint unconfounded objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum HaiVariant {
    /// Inverse propensity weights divided by `n`.
    #[default]
    Ipw,
    /// Weights self-normalized per arm.
    Hajek,
}

/// Jointly learns a policy and router assuming no unobserved confounding.
pub fn train_hai(
    data: &LoggedDataset,
    propensity: &PropensityModel,
    cost: &CostModel,
    variant: HaiVariant,
    config: &TrainConfig,
) -> Result<TrainedSystem> {
    let weights = nominal_weights(data, propensity);
    let (policy, router) = initial_params(data.n_arms(), data.dim(), Some(1), config);
    let objective = Objective {
        data,
        cost,
        comparison: Comparison::Absolute,
        routing: Routing::Homogeneous,
        weighting: match variant {
            HaiVariant::Ipw => Weighting::Ipw(&weights),
            HaiVariant::Hajek => Weighting::Hajek(&weights),
        },
    };
    let run = optimize(
        &objective,
        policy,
        Router::Linear(router.expect("router requested")),
        config,
    )?;
    Ok(into_system(run, None))
}

/// Mean of `y_i + c_i`: the incumbent humans deciding every instance.
pub fn evaluate_human_only(data: &LoggedDataset, cost: &CostModel) -> Result<f64> {
    if data.n() == 0 {
        return Err(Error::InvalidData("empty dataset".into()));
    }
    cost.validate(Some(data.n()))?;
    let sum: f64 = data
        .risks()
        .iter()
        .enumerate()
        .map(|(i, y)| y + cost.at(i))
        .sum();
    Ok(sum / data.n() as f64)
}

/// Bounds at `Γ = 1`, i.e. the nominal weights as a degenerate box.
pub fn nominal_bounds(nominal: &[f64]) -> Result<WeightBounds> {
    weight_bounds(nominal, &crate::data::GammaSpec::Scalar(1.0), None)
}
