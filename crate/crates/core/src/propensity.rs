//! Nominal propensity and expert-assignment models, and data-driven Γ
//! calibration.
//!
//! All fits are L2-regularized multinomial logistic regressions on
//! standardized covariates, solved by damped Newton iterations. Coefficients
//! are reported on the original covariate scale with class 0's logit pinned
//! at zero, so a two-class fit reads as `P(1|x) = σ(β·[1; x])`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::LoggedDataset;
use crate::error::{Error, Result};
use crate::policy::pinned_softmax;

pub const DEFAULT_EPSILON: f64 = 0.01;
pub const DEFAULT_REGULARIZATION: f64 = 1e-4;
pub const DEFAULT_QUANTILE: f64 = 0.95;
const MAX_ITERATIONS: usize = 5000;
const GRAD_TOL: f64 = 1e-8;

/// Clamps a distribution to `[eps, 1 - eps]` coordinatewise and rescales the
/// unclamped mass so the result still sums to one.
pub fn clip_distribution(probs: &mut [f64], eps: f64) {
    if probs.len() < 2 {
        return;
    }
    let mut fixed = vec![false; probs.len()];
    loop {
        let n_fixed = fixed.iter().filter(|&&f| f).count();
        let free_mass: f64 = probs
            .iter()
            .zip(&fixed)
            .filter(|(_, &f)| !f)
            .map(|(p, _)| *p)
            .sum();
        let target = 1.0 - n_fixed as f64 * eps;
        let mut changed = false;
        for (p, f) in probs.iter_mut().zip(fixed.iter_mut()) {
            if *f {
                *p = eps;
                continue;
            }
            *p *= target / free_mass;
            if *p < eps {
                *f = true;
                changed = true;
            }
        }
        if !changed {
            for (p, &f) in probs.iter_mut().zip(&fixed) {
                if f {
                    *p = eps;
                }
            }
            return;
        }
    }
}

/// Fitted multinomial logistic model over `n_classes` labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub n_classes: usize,
    pub dim: usize,
    /// `(n_classes - 1) × (dim + 1)` coefficients on the original scale.
    pub coefficients: Vec<f64>,
    pub epsilon: f64,
    pub regularization: f64,
    pub iterations: usize,
    /// Mean unclipped training log-loss.
    pub train_log_loss: f64,
}

impl LogisticModel {
    /// Unclipped class probabilities.
    pub fn raw_probs(&self, x: &[f64], out: &mut [f64]) {
        pinned_softmax(&self.coefficients, x, 0, out);
    }

    /// Clipped, renormalized class probabilities.
    pub fn predict(&self, x: &[f64], out: &mut [f64]) {
        self.raw_probs(x, out);
        clip_distribution(out, self.epsilon);
    }

    pub fn prob(&self, x: &[f64], class: usize) -> f64 {
        let mut buf = vec![0.0; self.n_classes];
        self.predict(x, &mut buf);
        buf[class]
    }

    /// Mean log-loss of the clipped predictions on `(rows, labels)`.
    pub fn log_loss<'a>(&self, rows: impl Iterator<Item = &'a [f64]>, labels: &[usize]) -> f64 {
        let mut buf = vec![0.0; self.n_classes];
        let mut total = 0.0;
        for (x, &y) in rows.zip(labels) {
            self.predict(x, &mut buf);
            total -= buf[y].ln();
        }
        total / labels.len() as f64
    }
}

/// Nominal propensity `π̃₀(t|x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropensityModel {
    pub model: LogisticModel,
}

impl PropensityModel {
    pub fn n_arms(&self) -> usize {
        self.model.n_classes
    }

    pub fn predict(&self, x: &[f64], out: &mut [f64]) {
        self.model.predict(x, out);
    }

    pub fn prob(&self, x: &[f64], arm: usize) -> f64 {
        self.model.prob(x, arm)
    }

    /// `π̃₀(T_i|X_i)` for every row of `dataset`.
    pub fn logged_propensities(&self, dataset: &LoggedDataset) -> Vec<f64> {
        let mut buf = vec![0.0; self.n_arms()];
        dataset
            .rows()
            .zip(dataset.treatments())
            .map(|(x, &t)| {
                self.predict(x, &mut buf);
                buf[t]
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssignmentMode {
    Empirical,
    Logistic,
}

/// Expert-assignment distribution `d₀(h|x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssignmentModel {
    Empirical { frequencies: Vec<f64>, epsilon: f64 },
    Logistic(LogisticModel),
}

impl AssignmentModel {
    /// Fixed distribution, e.g. a known uniform assignment.
    pub fn known(frequencies: Vec<f64>) -> Result<Self> {
        let total: f64 = frequencies.iter().sum();
        if frequencies.is_empty()
            || frequencies.iter().any(|f| f.is_nan() || *f <= 0.0)
            || (total - 1.0).abs() > 1e-9
        {
            return Err(Error::InvalidArgument(format!(
                "assignment frequencies must be positive and sum to 1, got {frequencies:?}"
            )));
        }
        Ok(Self::Empirical {
            frequencies,
            epsilon: 0.0,
        })
    }

    pub fn n_experts(&self) -> usize {
        match self {
            Self::Empirical { frequencies, .. } => frequencies.len(),
            Self::Logistic(m) => m.n_classes,
        }
    }

    pub fn predict(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Self::Empirical { frequencies, .. } => out.copy_from_slice(frequencies),
            Self::Logistic(m) => m.predict(x, out),
        }
    }

    pub fn prob(&self, x: &[f64], expert: usize) -> f64 {
        match self {
            Self::Empirical { frequencies, .. } => frequencies[expert],
            Self::Logistic(m) => m.prob(x, expert),
        }
    }
}

/// Standardized design matrix with a leading intercept column.
struct Design {
    rows: Vec<f64>,
    width: usize,
    n: usize,
    kept: Vec<usize>,
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Design {
    fn new<'a>(rows: impl Iterator<Item = &'a [f64]> + Clone, dim: usize) -> Self {
        let n = rows.clone().count();
        let mut mean = vec![0.0; dim];
        for x in rows.clone() {
            for (m, v) in mean.iter_mut().zip(x) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut var = vec![0.0; dim];
        for x in rows.clone() {
            for ((s, v), m) in var.iter_mut().zip(x).zip(&mean) {
                *s += (v - m).powi(2);
            }
        }
        let scale: Vec<f64> = var.iter().map(|s| (s / n as f64).sqrt()).collect();
        let kept: Vec<usize> = (0..dim)
            .filter(|&j| scale[j] > 1e-12 * (1.0 + mean[j].abs()))
            .collect();
        let width = kept.len() + 1;
        let mut data = Vec::with_capacity(n * width);
        for x in rows {
            data.push(1.0);
            data.extend(kept.iter().map(|&j| (x[j] - mean[j]) / scale[j]));
        }
        Self {
            rows: data,
            width,
            n,
            kept,
            mean,
            scale,
        }
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.width..(i + 1) * self.width]
    }

    /// Maps standardized coefficients back to the original covariates.
    fn unstandardize(&self, w: &[f64], classes: usize, dim: usize) -> Vec<f64> {
        let mut out = vec![0.0; (classes - 1) * (dim + 1)];
        for k in 0..classes - 1 {
            let src = &w[k * self.width..(k + 1) * self.width];
            let dst = &mut out[k * (dim + 1)..(k + 1) * (dim + 1)];
            dst[0] = src[0];
            for (pos, &j) in self.kept.iter().enumerate() {
                let b = src[pos + 1] / self.scale[j];
                dst[j + 1] = b;
                dst[0] -= b * self.mean[j];
            }
        }
        out
    }
}

/// Penalized mean negative log-likelihood, optionally with gradient and Hessian.
fn evaluate(
    design: &Design,
    labels: &[usize],
    classes: usize,
    reg: f64,
    w: &[f64],
    derivatives: Option<(&mut DVector<f64>, &mut DMatrix<f64>)>,
) -> f64 {
    let p = design.width;
    let free = classes - 1;
    let mut logits = vec![0.0; classes];
    let mut probs = vec![0.0; classes];
    let mut loss = 0.0;
    let mut derivs = derivatives;
    if let Some((g, h)) = derivs.as_mut() {
        g.fill(0.0);
        h.fill(0.0);
    }
    for i in 0..design.n {
        let x = design.row(i);
        logits[0] = 0.0;
        for k in 1..classes {
            let wk = &w[(k - 1) * p..k * p];
            logits[k] = wk.iter().zip(x).map(|(a, b)| a * b).sum();
        }
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
        loss += lse - logits[labels[i]];
        if let Some((g, h)) = derivs.as_mut() {
            for (pk, z) in probs.iter_mut().zip(&logits) {
                *pk = (z - lse).exp();
            }
            for k in 1..classes {
                let resid = probs[k] - f64::from(u8::from(labels[i] == k));
                for a in 0..p {
                    g[(k - 1) * p + a] += resid * x[a];
                }
                for l in 1..classes {
                    let c = probs[k] * (f64::from(u8::from(k == l)) - probs[l]);
                    if c == 0.0 {
                        continue;
                    }
                    for a in 0..p {
                        let ca = c * x[a];
                        for b in 0..p {
                            h[((k - 1) * p + a, (l - 1) * p + b)] += ca * x[b];
                        }
                    }
                }
            }
        }
    }
    let n = design.n as f64;
    loss /= n;
    let mut penalty = 0.0;
    for k in 0..free {
        for a in 1..p {
            penalty += w[k * p + a].powi(2);
        }
    }
    loss += 0.5 * reg * penalty;
    if let Some((g, h)) = derivs {
        *g /= n;
        *h /= n;
        for k in 0..free {
            for a in 1..p {
                let idx = k * p + a;
                g[idx] += reg * w[idx];
                h[(idx, idx)] += reg;
            }
        }
    }
    loss
}

/// Fits a multinomial logistic regression of `labels` on `rows`.
pub fn fit_logistic<'a>(
    rows: impl Iterator<Item = &'a [f64]> + Clone,
    dim: usize,
    labels: &[usize],
    classes: usize,
    regularization: f64,
    epsilon: f64,
) -> Result<LogisticModel> {
    if !(regularization >= 0.0 && regularization.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "regularization must be >= 0, got {regularization}"
        )));
    }
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must lie in (0, 0.5), got {epsilon}"
        )));
    }
    let design = Design::new(rows, dim);
    if design.n != labels.len() {
        return Err(Error::DimensionMismatch {
            what: "labels",
            expected: design.n,
            got: labels.len(),
        });
    }
    let mut counts = vec![0usize; classes];
    for &y in labels {
        counts[y] += 1;
    }
    if let Some(empty) = counts.iter().position(|&c| c == 0) {
        return Err(Error::InvalidData(format!("class {empty} has no rows")));
    }

    let size = (classes - 1) * design.width;
    let mut w = vec![0.0; size];
    let mut grad = DVector::zeros(size);
    let mut hess = DMatrix::zeros(size, size);
    let mut loss = evaluate(
        &design,
        labels,
        classes,
        regularization,
        &w,
        Some((&mut grad, &mut hess)),
    );
    let mut iterations = 0;
    while grad.norm() > GRAD_TOL {
        if iterations >= MAX_ITERATIONS {
            return Err(Error::NonConvergence {
                iterations,
                grad_norm: grad.norm(),
            });
        }
        iterations += 1;
        let direction = hess
            .clone()
            .cholesky()
            .map(|c| c.solve(&grad))
            .filter(|d| d.iter().all(|v| v.is_finite()))
            .unwrap_or_else(|| grad.clone());
        let slope = grad.dot(&direction);
        if 0.5 * slope <= 1e-12 * (1.0 + loss.abs()) {
            // Pure Newton phase: the predicted decrease is below loss resolution.
            for (a, d) in w.iter_mut().zip(direction.iter()) {
                *a -= d;
            }
            loss = evaluate(
                &design,
                labels,
                classes,
                regularization,
                &w,
                Some((&mut grad, &mut hess)),
            );
            continue;
        }
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<f64> = w
                .iter()
                .zip(direction.iter())
                .map(|(a, d)| a - step * d)
                .collect();
            let trial_loss = evaluate(&design, labels, classes, regularization, &trial, None);
            if trial_loss <= loss - 1e-4 * step * slope {
                w = trial;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // No representable descent left along the Newton direction.
            if grad.norm() <= 1e3 * GRAD_TOL {
                break;
            }
            return Err(Error::NonConvergence {
                iterations,
                grad_norm: grad.norm(),
            });
        }
        loss = evaluate(
            &design,
            labels,
            classes,
            regularization,
            &w,
            Some((&mut grad, &mut hess)),
        );
    }
    let coefficients = design.unstandardize(&w, classes, dim);
    let unpenalized = evaluate(&design, labels, classes, 0.0, &w, None);
    Ok(LogisticModel {
        n_classes: classes,
        dim,
        coefficients,
        epsilon,
        regularization,
        iterations,
        train_log_loss: unpenalized,
    })
}

/// Fits `π̃₀(t|x)` on the logged treatments.
pub fn fit_nominal_propensity(
    dataset: &LoggedDataset,
    regularization: f64,
    epsilon: f64,
) -> Result<PropensityModel> {
    let model = fit_logistic(
        dataset.rows(),
        dataset.dim(),
        dataset.treatments(),
        dataset.n_arms(),
        regularization,
        epsilon,
    )?;
    Ok(PropensityModel { model })
}

/// Fits `d₀(h|x)` from the logged expert ids.
pub fn fit_assignment(
    dataset: &LoggedDataset,
    mode: AssignmentMode,
    regularization: f64,
    epsilon: f64,
) -> Result<AssignmentModel> {
    let ids = dataset
        .expert_ids()
        .ok_or_else(|| Error::InvalidData("dataset has no expert ids".into()))?;
    let counts = dataset.expert_counts().unwrap_or_default();
    if let Some(empty) = counts.iter().position(|&c| c == 0) {
        return Err(Error::InvalidData(format!("expert {empty} has no rows")));
    }
    match mode {
        AssignmentMode::Empirical => {
            let n = dataset.n() as f64;
            let mut frequencies: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
            clip_distribution(&mut frequencies, epsilon);
            Ok(AssignmentModel::Empirical {
                frequencies,
                epsilon,
            })
        }
        AssignmentMode::Logistic => Ok(AssignmentModel::Logistic(fit_logistic(
            dataset.rows(),
            dataset.dim(),
            ids,
            dataset.n_experts(),
            regularization,
            epsilon,
        )?)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioSummary {
    pub min: f64,
    pub median: f64,
    pub max: f64,
}

/// Output of [`calibrate_gamma`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub gamma_ref: f64,
    pub quantile: f64,
    pub per_row_ratio_summary: RatioSummary,
}

/// Nearest-rank quantile of the symmetrized ratios `max(r, 1/r)`.
pub fn aggregate_ratios(ratios: &[f64], quantile: f64) -> Result<CalibrationReport> {
    if ratios.is_empty() {
        return Err(Error::InvalidArgument("no odds ratios to aggregate".into()));
    }
    if !(quantile > 0.0 && quantile <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "quantile must lie in (0, 1], got {quantile}"
        )));
    }
    let mut sym: Vec<f64> = ratios.iter().map(|&r| r.max(1.0 / r)).collect();
    if sym.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateFit("non-finite odds ratio".into()));
    }
    sym.sort_by(f64::total_cmp);
    let n = sym.len();
    let rank = ((quantile * n as f64).ceil() as usize).clamp(1, n);
    let median = if n % 2 == 1 {
        sym[n / 2]
    } else {
        0.5 * (sym[n / 2 - 1] + sym[n / 2])
    };
    Ok(CalibrationReport {
        gamma_ref: sym[rank - 1],
        quantile,
        per_row_ratio_summary: RatioSummary {
            min: sym[0],
            median,
            max: sym[n - 1],
        },
    })
}

/// Reference Γ from the odds-ratio impact of dropping the covariates
/// `z_columns` from the nominal propensity model.
pub fn calibrate_gamma(
    dataset: &LoggedDataset,
    z_columns: &[usize],
    quantile: f64,
    regularization: f64,
    epsilon: f64,
) -> Result<CalibrationReport> {
    let d = dataset.dim();
    let mut z: Vec<usize> = z_columns.to_vec();
    z.sort_unstable();
    z.dedup();
    if z.is_empty() || z.len() != z_columns.len() || z.iter().any(|&c| c >= d) || z.len() >= d {
        return Err(Error::InvalidArgument(format!(
            "z_columns must be a nonempty strict subset of 0..{d} without repeats, got {z_columns:?}"
        )));
    }
    let rest: Vec<usize> = (0..d).filter(|c| !z.contains(c)).collect();
    let full = fit_nominal_propensity(dataset, regularization, epsilon)?;
    let reduced_data = dataset.select_columns(&rest)?;
    let reduced = fit_nominal_propensity(&reduced_data, regularization, epsilon)?;
    let p_full = full.logged_propensities(dataset);
    let p_red = reduced.logged_propensities(&reduced_data);
    let tol = 1e-12;
    if p_full
        .iter()
        .all(|&p| p <= epsilon + tol || p >= 1.0 - epsilon - tol)
    {
        return Err(Error::DegenerateFit(
            "every full-model prediction is clipped".into(),
        ));
    }
    let ratios: Vec<f64> = p_full
        .iter()
        .zip(&p_red)
        .map(|(&pf, &pr)| (1.0 - pr) * pf / (pr * (1.0 - pf)))
        .collect();
    aggregate_ratios(&ratios, quantile)
}
