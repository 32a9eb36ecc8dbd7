//! Empirical team-risk and regret estimators and their parameter gradients.
//!
//! Every estimator here has the same shape: a human term that does not
//! depend on the inverse-propensity weights, plus one weighted mean per
//! treatment arm,
//!
//! ```text
//! total = (1/n) Σ_i (g_i - δ)(y_i + c_i) + Σ_t  Σ_{i: t_i = t} κ_i r_i
//! r_i   = (s_i π(t_i|x_i) - b_i) y_i
//! ```
//!
//! where `g_i` is the mass routed to the logged row's human, `s_i` the mass
//! routed to the algorithm, `b_i` the baseline's probability of the logged
//! arm (or 0) and `δ` is 1 when comparing against the incumbent human. The
//! per-row coefficients `κ_i` come from the weighting scheme: the worst-case
//! maximizer over the MSM box (self-normalized per arm), fixed Hájek weights,
//! or unnormalized inverse-propensity weights.
//!
//! Gradients treat the weights as fixed at the returned maximizer, which is a
//! valid supergradient of the pointwise maximum.

use serde::{Deserialize, Serialize};

use crate::data::{CostModel, LoggedDataset};
use crate::error::{Error, Result};
use crate::msm::{solve_rows, WeightBounds};
use crate::policy::{BaselinePolicy, LinearPolicy, Router, TreatmentPolicy};
use crate::propensity::AssignmentModel;

/// What the system is compared against.
#[derive(Debug, Clone, Copy)]
pub enum Comparison<'a> {
    Baseline(&'a BaselinePolicy),
    /// The incumbent human, i.e. the router `φ ≡ 1`.
    Human,
    /// No comparison: plain team risk.
    Absolute,
}

#[derive(Debug, Clone, Copy)]
pub enum Routing<'a> {
    /// One pooled human destination chosen at random.
    Homogeneous,
    /// Routing to specific experts, reweighted by the logging assignment `d₀`.
    Personalized(&'a AssignmentModel),
}

#[derive(Debug, Clone, Copy)]
pub enum Weighting<'a> {
    /// Worst case over the MSM box, self-normalized per arm.
    WorstCase(&'a WeightBounds),
    /// Fixed weights, self-normalized per arm.
    Hajek(&'a [f64]),
    /// Fixed weights, unnormalized (`1/n`).
    Ipw(&'a [f64]),
}

/// Named objective families used for training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveKind {
    VsBaseline,
    VsHuman,
    Personalized,
}

/// Value of an estimator with its decomposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveValue {
    pub total: f64,
    pub human_term: f64,
    pub per_arm_terms: Vec<f64>,
    /// Weights the arm terms were computed with (the inner maximizer for
    /// worst-case objectives).
    pub worst_case_weights: Vec<f64>,
}

/// Gradients with respect to the policy and (learned) router weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gradient {
    pub policy: Vec<f64>,
    pub router: Vec<f64>,
}

/// A fully specified estimator on one dataset.
#[derive(Debug, Clone, Copy)]
pub struct Objective<'a> {
    pub data: &'a LoggedDataset,
    pub cost: &'a CostModel,
    pub comparison: Comparison<'a>,
    pub routing: Routing<'a>,
    pub weighting: Weighting<'a>,
}

/// Per-row quantities shared by evaluation and differentiation.
struct RowTerms {
    policy_probs: Vec<f64>,
    router_probs: Vec<f64>,
    /// `d₀(h_i|x_i)`, 1 for homogeneous routing.
    assign: Vec<f64>,
    human: Vec<f64>,
    share: Vec<f64>,
    r: Vec<f64>,
}

impl<'a> Objective<'a> {
    fn n_destinations(&self) -> usize {
        match self.routing {
            Routing::Homogeneous => 2,
            Routing::Personalized(_) => self.data.n_experts() + 1,
        }
    }

    fn check(&self, policy: &dyn TreatmentPolicy, router: &Router) -> Result<()> {
        let n = self.data.n();
        let m = self.data.n_arms();
        if policy.n_arms() != m {
            return Err(Error::DimensionMismatch {
                what: "policy arms",
                expected: m,
                got: policy.n_arms(),
            });
        }
        if let Comparison::Baseline(b) = self.comparison {
            if b.n_arms() != m {
                return Err(Error::DimensionMismatch {
                    what: "baseline arms",
                    expected: m,
                    got: b.n_arms(),
                });
            }
        }
        router.validate()?;
        if let Router::Linear(r) = router {
            if r.dim() != self.data.dim() {
                return Err(Error::DimensionMismatch {
                    what: "router input dimension",
                    expected: self.data.dim(),
                    got: r.dim(),
                });
            }
        }
        match self.routing {
            Routing::Homogeneous => {
                if router.n_experts() != 1 {
                    return Err(Error::InvalidArgument(format!(
                        "homogeneous objectives need a single deferral output, router has {} experts",
                        router.n_experts()
                    )));
                }
                if let Weighting::WorstCase(b) = self.weighting {
                    if b.is_per_expert() {
                        return Err(Error::InvalidArgument(
                            "per-expert bounds passed to a homogeneous objective".into(),
                        ));
                    }
                }
            }
            Routing::Personalized(assign) => {
                if self.data.expert_ids().is_none() {
                    return Err(Error::InvalidData(
                        "personalized objective needs expert ids".into(),
                    ));
                }
                let k = self.data.n_experts();
                if router.n_experts() != k || assign.n_experts() != k {
                    return Err(Error::InvalidArgument(format!(
                        "expert count mismatch: data {k}, router {}, assignment {}",
                        router.n_experts(),
                        assign.n_experts()
                    )));
                }
            }
        }
        let weights_len = match self.weighting {
            Weighting::WorstCase(b) => b.len(),
            Weighting::Hajek(w) | Weighting::Ipw(w) => {
                if let Some(i) = w.iter().position(|v| !(*v > 0.0 && v.is_finite())) {
                    return Err(Error::InvalidArgument(format!(
                        "row {i}: weights must be positive"
                    )));
                }
                w.len()
            }
        };
        if weights_len != n {
            return Err(Error::DimensionMismatch {
                what: "weights",
                expected: n,
                got: weights_len,
            });
        }
        self.cost.validate(Some(n))
    }

    fn row_terms(&self, policy: &dyn TreatmentPolicy, router: &Router) -> Result<RowTerms> {
        self.check(policy, router)?;
        let n = self.data.n();
        let m = self.data.n_arms();
        let dests = self.n_destinations();
        let mut policy_probs = vec![0.0; n * m];
        let mut router_probs = vec![0.0; n * dests];
        let mut base = vec![0.0; m];
        let mut terms = RowTerms {
            policy_probs: Vec::new(),
            router_probs: Vec::new(),
            assign: vec![1.0; n],
            human: vec![0.0; n],
            share: vec![0.0; n],
            r: vec![0.0; n],
        };
        let ids = self.data.expert_ids();
        for (i, x) in self.data.rows().enumerate() {
            let t = self.data.treatments()[i];
            let pp = &mut policy_probs[i * m..(i + 1) * m];
            policy.probs(x, pp);
            let rp = &mut router_probs[i * dests..(i + 1) * dests];
            router.probs(x, rp);
            let (human, share) = match self.routing {
                Routing::Homogeneous => (rp[0], rp[1]),
                Routing::Personalized(assign) => {
                    let h = ids.expect("checked")[i];
                    let d0 = assign.prob(x, h);
                    terms.assign[i] = d0;
                    (rp[h] / d0, rp[dests - 1])
                }
            };
            let b = match self.comparison {
                Comparison::Baseline(bp) => {
                    bp.probs(x, &mut base);
                    base[t]
                }
                _ => 0.0,
            };
            let r = (share * pp[t] - b) * self.data.risks()[i];
            if !(r.is_finite() && human.is_finite()) {
                return Err(Error::NonFinite {
                    row: i,
                    what: "objective term",
                });
            }
            terms.human[i] = human;
            terms.share[i] = share;
            terms.r[i] = r;
        }
        terms.policy_probs = policy_probs;
        terms.router_probs = router_probs;
        Ok(terms)
    }

    /// Per-arm weighting: returns (per-arm terms, weights used, κ).
    fn arm_terms(
        &self,
        r: &[f64],
        fixed_weights: Option<&[f64]>,
    ) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let n = self.data.n();
        let m = self.data.n_arms();
        let treatments = self.data.treatments();
        let mut by_arm: Vec<Vec<usize>> = vec![Vec::new(); m];
        for (i, &t) in treatments.iter().enumerate() {
            by_arm[t].push(i);
        }
        let mut per_arm = vec![0.0; m];
        let mut weights = vec![0.0; n];
        let mut kappa = vec![0.0; n];
        let weighting = match fixed_weights {
            Some(w) => Weighting::Hajek(w),
            None => self.weighting,
        };
        for (t, rows) in by_arm.iter().enumerate() {
            if rows.is_empty() {
                continue;
            }
            match weighting {
                Weighting::WorstCase(bounds) => {
                    let (value, _) =
                        solve_rows(r, bounds.lower(), bounds.upper(), rows, &mut weights);
                    let total: f64 = rows.iter().map(|&i| weights[i]).sum();
                    for &i in rows {
                        kappa[i] = weights[i] / total;
                    }
                    per_arm[t] = value;
                }
                Weighting::Hajek(w) => {
                    let total: f64 = rows.iter().map(|&i| w[i]).sum();
                    let mut acc = 0.0;
                    for &i in rows {
                        weights[i] = w[i];
                        kappa[i] = w[i] / total;
                        acc += w[i] * r[i];
                    }
                    per_arm[t] = acc / total;
                }
                Weighting::Ipw(w) => {
                    let mut acc = 0.0;
                    for &i in rows {
                        weights[i] = w[i];
                        kappa[i] = w[i] / n as f64;
                        acc += w[i] * r[i];
                    }
                    per_arm[t] = acc / n as f64;
                }
            }
        }
        Ok((per_arm, weights, kappa))
    }

    fn human_term(&self, terms: &RowTerms) -> f64 {
        let offset = if matches!(self.comparison, Comparison::Human) {
            1.0
        } else {
            0.0
        };
        let n = self.data.n();
        let sum: f64 = (0..n)
            .map(|i| (terms.human[i] - offset) * (self.data.risks()[i] + self.cost.at(i)))
            .sum();
        sum / n as f64
    }

    fn assemble(
        &self,
        terms: &RowTerms,
        fixed: Option<&[f64]>,
    ) -> Result<(ObjectiveValue, Vec<f64>)> {
        let (per_arm_terms, weights, kappa) = self.arm_terms(&terms.r, fixed)?;
        let human_term = self.human_term(terms);
        let total = human_term + per_arm_terms.iter().sum::<f64>();
        Ok((
            ObjectiveValue {
                total,
                human_term,
                per_arm_terms,
                worst_case_weights: weights,
            },
            kappa,
        ))
    }

    /// Evaluates the estimator (solving the inner maximization if any).
    pub fn evaluate(
        &self,
        policy: &dyn TreatmentPolicy,
        router: &Router,
    ) -> Result<ObjectiveValue> {
        let terms = self.row_terms(policy, router)?;
        Ok(self.assemble(&terms, None)?.0)
    }

    /// Evaluates with the arm weights held at `weights` (self-normalized).
    pub fn evaluate_at_weights(
        &self,
        policy: &dyn TreatmentPolicy,
        router: &Router,
        weights: &[f64],
    ) -> Result<ObjectiveValue> {
        let terms = self.row_terms(policy, router)?;
        self.check_weights(weights)?;
        let fixed = match self.weighting {
            Weighting::Ipw(_) => None,
            _ => Some(weights),
        };
        Ok(self.assemble(&terms, fixed)?.0)
    }

    fn check_weights(&self, weights: &[f64]) -> Result<()> {
        if weights.len() != self.data.n() {
            return Err(Error::DimensionMismatch {
                what: "weights",
                expected: self.data.n(),
                got: weights.len(),
            });
        }
        if let Some(i) = weights.iter().position(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidArgument(format!(
                "row {i}: weights must be positive"
            )));
        }
        Ok(())
    }

    fn gradient_from(
        &self,
        policy: &LinearPolicy,
        router: &Router,
        terms: &RowTerms,
        kappa: &[f64],
    ) -> Result<Gradient> {
        let n = self.data.n();
        let m = self.data.n_arms();
        let dests = self.n_destinations();
        let mut grad_policy = vec![0.0; policy.weights().len()];
        let mut grad_router = match router {
            Router::Linear(r) => vec![0.0; r.weights().len()],
            Router::Constant(_) => Vec::new(),
        };
        let mut up_policy = vec![0.0; m];
        let mut up_router = vec![0.0; dests];
        let ids = self.data.expert_ids();
        for (i, x) in self.data.rows().enumerate() {
            let t = self.data.treatments()[i];
            let y = self.data.risks()[i];
            let pp = &terms.policy_probs[i * m..(i + 1) * m];
            up_policy.fill(0.0);
            up_policy[t] = kappa[i] * terms.share[i] * y;
            policy.accumulate_grad(pp, &up_policy, x, &mut grad_policy);
            if let Router::Linear(r) = router {
                let rp = &terms.router_probs[i * dests..(i + 1) * dests];
                up_router.fill(0.0);
                let human_idx = match self.routing {
                    Routing::Homogeneous => 0,
                    Routing::Personalized(_) => ids.expect("checked")[i],
                };
                up_router[human_idx] = (y + self.cost.at(i)) / (n as f64 * terms.assign[i]);
                up_router[dests - 1] = kappa[i] * pp[t] * y;
                r.accumulate_grad(rp, &up_router, x, &mut grad_router);
            }
            if !(up_policy[t].is_finite() && up_router.iter().all(|v| v.is_finite())) {
                return Err(Error::NonFinite {
                    row: i,
                    what: "gradient",
                });
            }
        }
        if let Some(pos) = grad_policy
            .iter()
            .chain(&grad_router)
            .position(|g| !g.is_finite())
        {
            return Err(Error::NonFinite {
                row: pos,
                what: "gradient accumulator",
            });
        }
        Ok(Gradient {
            policy: grad_policy,
            router: grad_router,
        })
    }

    /// Gradient with the arm weights held at `weights`.
    pub fn gradient(
        &self,
        policy: &LinearPolicy,
        router: &Router,
        weights: &[f64],
    ) -> Result<Gradient> {
        let terms = self.row_terms(policy, router)?;
        self.check_weights(weights)?;
        let fixed = match self.weighting {
            Weighting::Ipw(_) => None,
            _ => Some(weights),
        };
        let (_, kappa) = self.assemble(&terms, fixed)?;
        self.gradient_from(policy, router, &terms, &kappa)
    }

    /// Inner maximization followed by the gradient at the maximizer.
    pub fn value_and_gradient(
        &self,
        policy: &LinearPolicy,
        router: &Router,
    ) -> Result<(ObjectiveValue, Gradient)> {
        let terms = self.row_terms(policy, router)?;
        let (value, kappa) = self.assemble(&terms, None)?;
        let grad = self.gradient_from(policy, router, &terms, &kappa)?;
        Ok((value, grad))
    }
}

/// Self-normalized team risk with fixed weights; homogeneous router.
pub fn team_risk(
    data: &LoggedDataset,
    policy: &dyn TreatmentPolicy,
    router: &Router,
    cost: &CostModel,
    weights: &[f64],
) -> Result<f64> {
    Objective {
        data,
        cost,
        comparison: Comparison::Absolute,
        routing: Routing::Homogeneous,
        weighting: Weighting::Hajek(weights),
    }
    .evaluate(policy, router)
    .map(|v| v.total)
}

/// Worst-case regret against `baseline` over the MSM box.
pub fn worst_case_regret(
    data: &LoggedDataset,
    policy: &dyn TreatmentPolicy,
    router: &Router,
    baseline: &BaselinePolicy,
    cost: &CostModel,
    bounds: &WeightBounds,
) -> Result<ObjectiveValue> {
    Objective {
        data,
        cost,
        comparison: Comparison::Baseline(baseline),
        routing: Routing::Homogeneous,
        weighting: Weighting::WorstCase(bounds),
    }
    .evaluate(policy, router)
}

/// Worst-case regret against the incumbent human (`φ ≡ 1`).
pub fn worst_case_regret_vs_human(
    data: &LoggedDataset,
    policy: &dyn TreatmentPolicy,
    router: &Router,
    cost: &CostModel,
    bounds: &WeightBounds,
) -> Result<ObjectiveValue> {
    Objective {
        data,
        cost,
        comparison: Comparison::Human,
        routing: Routing::Homogeneous,
        weighting: Weighting::WorstCase(bounds),
    }
    .evaluate(policy, router)
}

/// Worst-case regret with expert-specific routing and Γ.
pub fn personalized_worst_case_regret(
    data: &LoggedDataset,
    policy: &dyn TreatmentPolicy,
    router: &Router,
    baseline: &BaselinePolicy,
    cost: &CostModel,
    bounds: &WeightBounds,
    assignment: &AssignmentModel,
) -> Result<ObjectiveValue> {
    Objective {
        data,
        cost,
        comparison: Comparison::Baseline(baseline),
        routing: Routing::Personalized(assignment),
        weighting: Weighting::WorstCase(bounds),
    }
    .evaluate(policy, router)
}

/// Plug-in regret against `baseline` with fixed (nominal) Hájek weights.
pub fn plugin_regret(
    data: &LoggedDataset,
    policy: &dyn TreatmentPolicy,
    router: &Router,
    baseline: &BaselinePolicy,
    cost: &CostModel,
    weights: &[f64],
) -> Result<ObjectiveValue> {
    Objective {
        data,
        cost,
        comparison: Comparison::Baseline(baseline),
        routing: Routing::Homogeneous,
        weighting: Weighting::Hajek(weights),
    }
    .evaluate(policy, router)
}
