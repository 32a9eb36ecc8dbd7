//! Linear treatment policies and routers.
//!
//! Both are softmax models over `[1; x]` with one logit pinned at zero. For
//! two outputs this is exactly the sigmoid parameterization: a policy over two
//! arms has `π(1|x) = σ(w·[1; x])`, a homogeneous router has
//! `φ(x) = σ(v·[1; x])` as the probability of deferring to a human.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `w·[1; x]`.
#[inline]
pub(crate) fn affine(w: &[f64], x: &[f64]) -> f64 {
    debug_assert_eq!(w.len(), x.len() + 1);
    w[0] + w[1..].iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
}

/// Softmax over `out.len()` outputs where output `pinned` has logit 0 and the
/// others take their logits, in order, from the rows of `weights`.
pub(crate) fn pinned_softmax(weights: &[f64], x: &[f64], pinned: usize, out: &mut [f64]) {
    if out.len() == 2 {
        let z = affine(weights, x);
        // σ(z) for the free output, evaluated without overflow.
        let p = if z >= 0.0 {
            1.0 / (1.0 + (-z).exp())
        } else {
            let e = z.exp();
            e / (1.0 + e)
        };
        out[1 - pinned] = p;
        out[pinned] = 1.0 - p;
        return;
    }
    let stride = x.len() + 1;
    let mut free = weights.chunks_exact(stride);
    let mut max = f64::NEG_INFINITY;
    for (j, o) in out.iter_mut().enumerate() {
        *o = if j == pinned {
            0.0
        } else {
            affine(free.next().expect("weight rows"), x)
        };
        max = max.max(*o);
    }
    let mut total = 0.0;
    for o in out.iter_mut() {
        *o = (*o - max).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

/// Adds the gradient of `Σ_j upstream_j · p_j(x)` with respect to the free
/// weight rows into `grad` (same layout as the weights).
pub(crate) fn accumulate_pinned_softmax_grad(
    probs: &[f64],
    upstream: &[f64],
    x: &[f64],
    pinned: usize,
    grad: &mut [f64],
) {
    let mean: f64 = probs.iter().zip(upstream).map(|(p, u)| p * u).sum();
    let stride = x.len() + 1;
    let mut rows = grad.chunks_exact_mut(stride);
    for (k, (&p, &u)) in probs.iter().zip(upstream).enumerate() {
        if k == pinned {
            continue;
        }
        let row = rows.next().expect("grad rows");
        let dz = p * (u - mean);
        if dz == 0.0 {
            continue;
        }
        row[0] += dz;
        for (g, xj) in row[1..].iter_mut().zip(x) {
            *g += dz * xj;
        }
    }
}

/// Anything that maps covariates to a distribution over treatment arms.
pub trait TreatmentPolicy {
    fn n_arms(&self) -> usize;

    /// Writes `π(·|x)` into `out` (length `n_arms`).
    fn probs(&self, x: &[f64], out: &mut [f64]);

    fn prob(&self, x: &[f64], arm: usize) -> f64 {
        let mut buf = vec![0.0; self.n_arms()];
        self.probs(x, &mut buf);
        buf[arm]
    }
}

/// Softmax policy with arm 0's logit pinned at zero; `(m-1) × (d+1)` weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearPolicy {
    n_arms: usize,
    dim: usize,
    weights: Vec<f64>,
}

impl LinearPolicy {
    pub fn zeros(n_arms: usize, dim: usize) -> Self {
        Self {
            n_arms,
            dim,
            weights: vec![0.0; n_arms.saturating_sub(1) * (dim + 1)],
        }
    }

    pub fn from_weights(n_arms: usize, dim: usize, weights: Vec<f64>) -> Result<Self> {
        if n_arms == 0 {
            return Err(Error::InvalidArgument(
                "policy needs at least one arm".into(),
            ));
        }
        let expected = (n_arms - 1) * (dim + 1);
        if weights.len() != expected {
            return Err(Error::DimensionMismatch {
                what: "policy weights",
                expected,
                got: weights.len(),
            });
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidArgument(
                "policy weights must be finite".into(),
            ));
        }
        Ok(Self {
            n_arms,
            dim,
            weights,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub(crate) fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    /// Gradient of `Σ_j upstream_j π(j|x)`, accumulated into `grad`.
    pub(crate) fn accumulate_grad(
        &self,
        probs: &[f64],
        upstream: &[f64],
        x: &[f64],
        grad: &mut [f64],
    ) {
        accumulate_pinned_softmax_grad(probs, upstream, x, 0, grad);
    }
}

impl TreatmentPolicy for LinearPolicy {
    fn n_arms(&self) -> usize {
        self.n_arms
    }

    fn probs(&self, x: &[f64], out: &mut [f64]) {
        pinned_softmax(&self.weights, x, 0, out);
    }
}

/// The policy the learned system has to improve on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselinePolicy {
    /// Deterministically picks `arm`.
    Arm {
        arm: usize,
        n_arms: usize,
    },
    Linear(LinearPolicy),
}

impl BaselinePolicy {
    /// `π_c(0|x) = 1`.
    pub fn never_treat(n_arms: usize) -> Self {
        Self::Arm { arm: 0, n_arms }
    }
}

impl TreatmentPolicy for BaselinePolicy {
    fn n_arms(&self) -> usize {
        match self {
            Self::Arm { n_arms, .. } => *n_arms,
            Self::Linear(p) => p.n_arms(),
        }
    }

    fn probs(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Self::Arm { arm, .. } => {
                out.fill(0.0);
                out[*arm] = 1.0;
            }
            Self::Linear(p) => p.probs(x, out),
        }
    }
}

/// Where a routed instance goes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Destination {
    Expert(usize),
    Algorithm,
}

/// Softmax router over `K` experts plus the algorithm, the algorithm's logit
/// pinned at zero. With `K = 1` the expert output is the homogeneous
/// deferral probability `φ(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearRouter {
    n_experts: usize,
    dim: usize,
    weights: Vec<f64>,
}

impl LinearRouter {
    pub fn zeros(n_experts: usize, dim: usize) -> Self {
        Self {
            n_experts,
            dim,
            weights: vec![0.0; n_experts * (dim + 1)],
        }
    }

    pub fn from_weights(n_experts: usize, dim: usize, weights: Vec<f64>) -> Result<Self> {
        if n_experts == 0 {
            return Err(Error::InvalidArgument(
                "router needs at least one expert output".into(),
            ));
        }
        let expected = n_experts * (dim + 1);
        if weights.len() != expected {
            return Err(Error::DimensionMismatch {
                what: "router weights",
                expected,
                got: weights.len(),
            });
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidArgument(
                "router weights must be finite".into(),
            ));
        }
        Ok(Self {
            n_experts,
            dim,
            weights,
        })
    }

    pub fn n_experts(&self) -> usize {
        self.n_experts
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub(crate) fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn probs(&self, x: &[f64], out: &mut [f64]) {
        pinned_softmax(&self.weights, x, self.n_experts, out);
    }

    pub(crate) fn accumulate_grad(
        &self,
        probs: &[f64],
        upstream: &[f64],
        x: &[f64],
        grad: &mut [f64],
    ) {
        accumulate_pinned_softmax_grad(probs, upstream, x, self.n_experts, grad);
    }
}

/// A router is either learned or a fixed distribution over destinations
/// (`[expert_0, …, expert_{K-1}, algorithm]`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Router {
    Linear(LinearRouter),
    Constant(Vec<f64>),
}

impl Router {
    /// Homogeneous φ ≡ 1.
    pub fn always_human() -> Self {
        Self::Constant(vec![1.0, 0.0])
    }

    /// Homogeneous φ ≡ 0.
    pub fn never_defer() -> Self {
        Self::Constant(vec![0.0, 1.0])
    }

    /// Homogeneous φ ≡ `p`.
    pub fn constant_human(p: f64) -> Self {
        Self::Constant(vec![p, 1.0 - p])
    }

    pub fn n_experts(&self) -> usize {
        match self {
            Self::Linear(r) => r.n_experts(),
            Self::Constant(p) => p.len() - 1,
        }
    }

    pub fn n_destinations(&self) -> usize {
        self.n_experts() + 1
    }

    pub fn is_learned(&self) -> bool {
        matches!(self, Self::Linear(_))
    }

    pub fn probs(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Self::Linear(r) => r.probs(x, out),
            Self::Constant(p) => out.copy_from_slice(p),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Self::Constant(p) = self {
            let total: f64 = p.iter().sum();
            if p.len() < 2
                || p.iter().any(|v| !(0.0..=1.0).contains(v))
                || (total - 1.0).abs() > 1e-12
            {
                return Err(Error::InvalidArgument(format!(
                    "constant router must be a distribution over at least two destinations, got {p:?}"
                )));
            }
        }
        Ok(())
    }

    /// Deterministic deployment rule: the most probable destination, ties
    /// going to the algorithm. For one expert this is "defer iff φ(x) > 0.5".
    pub fn decide(&self, x: &[f64]) -> Destination {
        let mut probs = vec![0.0; self.n_destinations()];
        self.probs(x, &mut probs);
        let k = self.n_experts();
        let mut best = Destination::Algorithm;
        let mut best_p = probs[k];
        for (h, &p) in probs[..k].iter().enumerate() {
            if p > best_p {
                best = Destination::Expert(h);
                best_p = p;
            }
        }
        best
    }
}
