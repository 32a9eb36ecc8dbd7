//! Marginal sensitivity model weight intervals and the worst-case
//! self-normalized mean over them.
//!
//! Under a sensitivity level Γ the unknown inverse propensity of row `i` lies
//! in `[1 + (W̃_i - 1)/Γ, 1 + Γ(W̃_i - 1)]` where `W̃_i` is the nominal inverse
//! propensity. Maximizing `Σ r_i W_i / Σ W_i` over that box is a linear
//! fractional program whose optimum sits at a corner with a threshold
//! structure: sorted by `r`, rows below some cut take their lower bound and
//! the rest take their upper bound. [`solve_lfp`] scans every cut with prefix
//! sums in `O(n log n)`.

use serde::{Deserialize, Serialize};

use crate::data::GammaSpec;
use crate::error::{Error, Result};

/// Per-row interval `[lower_i, upper_i]` on the true inverse propensity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightBounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
    per_expert: bool,
}

impl WeightBounds {
    /// Bounds from explicit intervals; requires `1 <= lower <= upper`.
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                what: "upper bounds",
                expected: lower.len(),
                got: upper.len(),
            });
        }
        for (i, (&a, &b)) in lower.iter().zip(&upper).enumerate() {
            if !(a.is_finite() && b.is_finite() && 1.0 <= a && a <= b) {
                return Err(Error::InvalidArgument(format!(
                    "row {i}: weight interval [{a}, {b}] violates 1 <= a <= b"
                )));
            }
        }
        Ok(Self {
            lower,
            upper,
            per_expert: false,
        })
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Whether the rows' Γ came from a per-expert specification.
    pub fn is_per_expert(&self) -> bool {
        self.per_expert
    }

    /// Both ends multiplied by `factor > 0` (no longer `>= 1` in general, so
    /// this is only meaningful for testing the ratio objective's invariance).
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            lower: self.lower.iter().map(|a| a * factor).collect(),
            upper: self.upper.iter().map(|b| b * factor).collect(),
            per_expert: self.per_expert,
        }
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            lower: indices.iter().map(|&i| self.lower[i]).collect(),
            upper: indices.iter().map(|&i| self.upper[i]).collect(),
            per_expert: self.per_expert,
        }
    }
}

/// MSM intervals for nominal propensities `π̃₀(T_i|X_i)`.
pub fn weight_bounds(
    nominal: &[f64],
    gamma: &GammaSpec,
    expert_ids: Option<&[usize]>,
) -> Result<WeightBounds> {
    gamma.validate()?;
    if let (GammaSpec::PerExpert(_), None) = (gamma, expert_ids) {
        return Err(Error::InvalidArgument(
            "per-expert gamma requires expert ids".into(),
        ));
    }
    if let Some(ids) = expert_ids {
        if ids.len() != nominal.len() {
            return Err(Error::DimensionMismatch {
                what: "expert ids",
                expected: nominal.len(),
                got: ids.len(),
            });
        }
    }
    let mut lower = Vec::with_capacity(nominal.len());
    let mut upper = Vec::with_capacity(nominal.len());
    for (i, &p) in nominal.iter().enumerate() {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::InvalidPropensity { row: i, value: p });
        }
        let g = match gamma {
            GammaSpec::Scalar(g) => *g,
            GammaSpec::PerExpert(gs) => {
                let h = expert_ids.expect("checked above")[i];
                *gs.get(h).ok_or_else(|| {
                    Error::InvalidArgument(format!("row {i}: no gamma for expert {h}"))
                })?
            }
        };
        let excess = 1.0 / p - 1.0;
        lower.push(1.0 + excess / g);
        upper.push(1.0 + g * excess);
    }
    Ok(WeightBounds {
        lower,
        upper,
        per_expert: gamma.is_per_expert(),
    })
}

/// Maximizer of the linear fractional program.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LfpSolution {
    /// Optimal weights in the original row order.
    pub weights: Vec<f64>,
    pub value: f64,
    /// Number of rows (in ascending-`r` order) held at their lower bound.
    pub threshold: usize,
}

impl LfpSolution {
    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }
}

fn check_inputs(r: &[f64], lower: &[f64], upper: &[f64]) -> Result<()> {
    if r.is_empty() {
        return Err(Error::InvalidArgument(
            "linear fractional program needs n >= 1".into(),
        ));
    }
    if r.len() != lower.len() || r.len() != upper.len() {
        return Err(Error::DimensionMismatch {
            what: "objective coefficients vs bounds",
            expected: lower.len(),
            got: r.len(),
        });
    }
    if let Some(i) = r.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            row: i,
            what: "lfp coefficient",
        });
    }
    Ok(())
}

/// `max Σ r_i W_i / Σ W_i` subject to `lower_i <= W_i <= upper_i`.
///
/// Returns `max_k λ(k)` over all cuts `k ∈ {0, …, n}` where the `k` smallest
/// `r` take their lower bound. Ties in `r` keep the original row order; among
/// equal `λ(k)` the cut with the most lower bounds wins.
pub fn solve_lfp_with(r: &[f64], lower: &[f64], upper: &[f64]) -> Result<LfpSolution> {
    check_inputs(r, lower, upper)?;
    let rows: Vec<usize> = (0..r.len()).collect();
    let mut weights = vec![0.0; r.len()];
    let (value, threshold) = solve_rows(r, lower, upper, &rows, &mut weights);
    Ok(LfpSolution {
        weights,
        value,
        threshold,
    })
}

/// Solves the program restricted to `rows` (ascending), writing the optimal
/// weights into `weights[i]` for each `i` in `rows`. Returns the value and
/// the number of rows at their lower bound. Inputs are assumed valid.
pub(crate) fn solve_rows(
    r: &[f64],
    lower: &[f64],
    upper: &[f64],
    rows: &[usize],
    weights: &mut [f64],
) -> (f64, usize) {
    let mut order: Vec<(f64, usize)> = rows.iter().map(|&i| (r[i], i)).collect();
    order.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    // Start with every weight at its upper bound (k = 0) and move one row at a
    // time from upper to lower.
    let mut num: f64 = order.iter().map(|&(v, i)| upper[i] * v).sum();
    let mut den: f64 = order.iter().map(|&(_, i)| upper[i]).sum();
    let mut best_value = num / den;
    let mut best_cut = 0;
    for (pos, &(v, i)) in order.iter().enumerate() {
        num += (lower[i] - upper[i]) * v;
        den += lower[i] - upper[i];
        let value = num / den;
        if value >= best_value {
            best_value = value;
            best_cut = pos + 1;
        }
    }

    for (pos, &(_, i)) in order.iter().enumerate() {
        weights[i] = if pos < best_cut { lower[i] } else { upper[i] };
    }
    // Recompute from the chosen corner so the value is exactly its weighted mean.
    let (mut num, mut den) = (0.0, 0.0);
    for &i in rows {
        num += weights[i] * r[i];
        den += weights[i];
    }
    (num / den, best_cut)
}

pub fn solve_lfp(r: &[f64], bounds: &WeightBounds) -> Result<LfpSolution> {
    solve_lfp_with(r, bounds.lower(), bounds.upper())
}

pub const BRUTE_FORCE_MAX_ROWS: usize = 20;

/// Enumerates all `2^n` corners; a test-scale oracle for [`solve_lfp`].
pub fn solve_lfp_bruteforce(r: &[f64], bounds: &WeightBounds) -> Result<LfpSolution> {
    let (lower, upper) = (bounds.lower(), bounds.upper());
    check_inputs(r, lower, upper)?;
    let n = r.len();
    if n > BRUTE_FORCE_MAX_ROWS {
        return Err(Error::OracleTooLarge {
            max: BRUTE_FORCE_MAX_ROWS,
            got: n,
        });
    }
    let mut best: Option<(f64, u32)> = None;
    for mask in 0u32..(1u32 << n) {
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..n {
            let w = if mask >> i & 1 == 1 {
                upper[i]
            } else {
                lower[i]
            };
            num += w * r[i];
            den += w;
        }
        let value = num / den;
        if best.is_none_or(|(v, _)| value > v) {
            best = Some((value, mask));
        }
    }
    let (value, mask) = best.expect("at least one corner");
    let weights: Vec<f64> = (0..n)
        .map(|i| {
            if mask >> i & 1 == 1 {
                upper[i]
            } else {
                lower[i]
            }
        })
        .collect();
    Ok(LfpSolution {
        weights,
        value,
        threshold: (0..n).filter(|i| mask >> i & 1 == 0).count(),
    })
}
