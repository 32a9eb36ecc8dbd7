//! Logged decision data, sensitivity levels and human cost models.
//!
//! A [`LoggedDataset`] holds the observational log `(x, t, y[, h])` that every
//! estimator in this crate consumes. Construction goes through
//! [`DatasetParts`], which can be validated into a report without failing so
//! that malformed inputs can be inspected before they are rejected.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Unvalidated dataset columns, as read from a file or assembled by hand.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DatasetParts {
    pub covariates: Vec<Vec<f64>>,
    pub treatments: Vec<i64>,
    pub risks: Vec<f64>,
    pub expert_ids: Option<Vec<i64>>,
    /// Number of treatment arms. `None` infers `max(t) + 1`.
    pub n_arms: Option<usize>,
    /// Number of experts. `None` infers `max(h) + 1` when expert ids exist.
    pub n_experts: Option<usize>,
}

/// Outcome of [`DatasetParts::validate`]. Violations make a dataset unusable;
/// warnings (such as an unpopulated arm) do not.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<String>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl DatasetParts {
    fn inferred_arms(&self) -> usize {
        self.n_arms.unwrap_or_else(|| {
            self.treatments
                .iter()
                .copied()
                .max()
                .map_or(0, |t| (t.max(0) + 1) as usize)
        })
    }

    fn inferred_experts(&self) -> usize {
        match (&self.expert_ids, self.n_experts) {
            (None, _) => 0,
            (Some(_), Some(k)) => k,
            (Some(h), None) => h
                .iter()
                .copied()
                .max()
                .map_or(0, |v| (v.max(0) + 1) as usize),
        }
    }

    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        let n = self.covariates.len();
        if n == 0 {
            report.violations.push("dataset is empty".to_string());
            return report;
        }
        let d = self.covariates[0].len();
        if d == 0 {
            report
                .violations
                .push("covariate dimension must be at least 1".to_string());
        }
        for (i, row) in self.covariates.iter().enumerate() {
            if row.len() != d {
                report.violations.push(format!(
                    "row {i}: covariate dimension {} differs from {d}",
                    row.len()
                ));
            }
            if row.iter().any(|v| !v.is_finite()) {
                report
                    .violations
                    .push(format!("row {i}: non-finite covariate"));
            }
        }
        if self.treatments.len() != n {
            report.violations.push(format!(
                "treatment column has {} rows, expected {n}",
                self.treatments.len()
            ));
        }
        if self.risks.len() != n {
            report.violations.push(format!(
                "risk column has {} rows, expected {n}",
                self.risks.len()
            ));
        }
        let m = self.inferred_arms();
        if m == 0 {
            report
                .violations
                .push("treatment arm count must be at least 1".to_string());
        }
        let mut arm_counts = vec![0usize; m];
        for (i, &t) in self.treatments.iter().enumerate() {
            if t < 0 || t as usize >= m {
                report.violations.push(format!(
                    "row {i}: treatment out of range ({t} not in 0..{m})"
                ));
            } else {
                arm_counts[t as usize] += 1;
            }
        }
        for (i, y) in self.risks.iter().enumerate() {
            if !y.is_finite() {
                report.violations.push(format!("row {i}: non-finite risk"));
            }
        }
        for (arm, &count) in arm_counts.iter().enumerate() {
            if count == 0 {
                report.warnings.push(format!("empty treatment arm {arm}"));
            }
        }
        if let Some(ids) = &self.expert_ids {
            let k = self.inferred_experts();
            if ids.len() != n {
                report.violations.push(format!(
                    "expert column has {} rows, expected {n}",
                    ids.len()
                ));
            }
            if k == 0 {
                report
                    .violations
                    .push("expert count must be at least 1".to_string());
            }
            let mut expert_counts = vec![0usize; k];
            for (i, &h) in ids.iter().enumerate() {
                if h < 0 || h as usize >= k {
                    report.violations.push(format!(
                        "row {i}: expert id out of range ({h} not in 0..{k})"
                    ));
                } else {
                    expert_counts[h as usize] += 1;
                }
            }
            for (h, &count) in expert_counts.iter().enumerate() {
                if count == 0 {
                    report.warnings.push(format!("empty expert {h}"));
                }
            }
        }
        report
    }
}

/// Validated observational log. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct LoggedDataset {
    covariates: Vec<f64>,
    n: usize,
    d: usize,
    treatments: Vec<usize>,
    risks: Vec<f64>,
    expert_ids: Option<Vec<usize>>,
    n_arms: usize,
    n_experts: usize,
}

impl TryFrom<DatasetParts> for LoggedDataset {
    type Error = Error;

    fn try_from(parts: DatasetParts) -> Result<Self> {
        let report = parts.validate();
        if !report.is_ok() {
            return Err(Error::InvalidData(report.violations.join("; ")));
        }
        let n_arms = parts.inferred_arms();
        let n_experts = parts.inferred_experts();
        let n = parts.covariates.len();
        let d = parts.covariates[0].len();
        Ok(Self {
            covariates: parts.covariates.into_iter().flatten().collect(),
            n,
            d,
            treatments: parts.treatments.into_iter().map(|t| t as usize).collect(),
            risks: parts.risks,
            expert_ids: parts
                .expert_ids
                .map(|ids| ids.into_iter().map(|h| h as usize).collect()),
            n_arms,
            n_experts,
        })
    }
}

impl LoggedDataset {
    /// Builds a dataset from row-major covariates. Panics are never used for
    /// bad input; every invariant violation is returned as an error.
    pub fn new(
        covariates: Vec<Vec<f64>>,
        treatments: Vec<usize>,
        risks: Vec<f64>,
        expert_ids: Option<Vec<usize>>,
        n_arms: usize,
        n_experts: Option<usize>,
    ) -> Result<Self> {
        DatasetParts {
            covariates,
            treatments: treatments.into_iter().map(|t| t as i64).collect(),
            risks,
            expert_ids: expert_ids.map(|ids| ids.into_iter().map(|h| h as i64).collect()),
            n_arms: Some(n_arms),
            n_experts,
        }
        .try_into()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn n_arms(&self) -> usize {
        self.n_arms
    }

    /// Number of experts; zero when the log carries no expert ids.
    pub fn n_experts(&self) -> usize {
        self.n_experts
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.covariates[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + Clone + '_ {
        self.covariates.chunks_exact(self.d)
    }

    pub fn treatments(&self) -> &[usize] {
        &self.treatments
    }

    pub fn risks(&self) -> &[f64] {
        &self.risks
    }

    pub fn expert_ids(&self) -> Option<&[usize]> {
        self.expert_ids.as_deref()
    }

    pub fn arm_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_arms];
        for &t in &self.treatments {
            counts[t] += 1;
        }
        counts
    }

    pub fn expert_counts(&self) -> Option<Vec<usize>> {
        self.expert_ids.as_ref().map(|ids| {
            let mut counts = vec![0; self.n_experts];
            for &h in ids {
                counts[h] += 1;
            }
            counts
        })
    }

    pub fn to_parts(&self) -> DatasetParts {
        DatasetParts {
            covariates: self.rows().map(<[f64]>::to_vec).collect(),
            treatments: self.treatments.iter().map(|&t| t as i64).collect(),
            risks: self.risks.clone(),
            expert_ids: self
                .expert_ids
                .as_ref()
                .map(|ids| ids.iter().map(|&h| h as i64).collect()),
            n_arms: Some(self.n_arms),
            n_experts: self.expert_ids.as_ref().map(|_| self.n_experts),
        }
    }

    /// Rows at `indices`, keeping the arm and expert counts of the parent.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let parts = DatasetParts {
            covariates: indices.iter().map(|&i| self.row(i).to_vec()).collect(),
            treatments: indices.iter().map(|&i| self.treatments[i] as i64).collect(),
            risks: indices.iter().map(|&i| self.risks[i]).collect(),
            expert_ids: self
                .expert_ids
                .as_ref()
                .map(|ids| indices.iter().map(|&i| ids[i] as i64).collect()),
            n_arms: Some(self.n_arms),
            n_experts: self.expert_ids.as_ref().map(|_| self.n_experts),
        };
        parts.try_into()
    }

    /// Same rows restricted to the covariate columns in `columns`.
    pub fn select_columns(&self, columns: &[usize]) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::InvalidArgument("no columns selected".into()));
        }
        if let Some(&bad) = columns.iter().find(|&&c| c >= self.d) {
            return Err(Error::InvalidArgument(format!(
                "column {bad} out of range for dimension {}",
                self.d
            )));
        }
        let mut parts = self.to_parts();
        parts.covariates = self
            .rows()
            .map(|row| columns.iter().map(|&c| row[c]).collect())
            .collect();
        parts.try_into()
    }

    /// Same data with expert ids dropped (homogeneous mode).
    pub fn without_experts(&self) -> Self {
        Self {
            expert_ids: None,
            n_experts: 0,
            ..self.clone()
        }
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        read_csv_parts(reader)?.try_into()
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    /// Writes the `x0,…,x{d-1},t,y[,h]` schema.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (0..self.d).map(|j| format!("x{j}")).collect();
        header.push("t".into());
        header.push("y".into());
        if self.expert_ids.is_some() {
            header.push("h".into());
        }
        w.write_record(&header)?;
        for i in 0..self.n {
            let mut record: Vec<String> = self.row(i).iter().map(|v| v.to_string()).collect();
            record.push(self.treatments[i].to_string());
            record.push(self.risks[i].to_string());
            if let Some(ids) = &self.expert_ids {
                record.push(ids[i].to_string());
            }
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Parses the CSV schema into unvalidated parts, so that range problems can
/// be reported by [`DatasetParts::validate`] rather than as parse errors.
pub fn read_csv_parts<R: Read>(reader: R) -> Result<DatasetParts> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut x_cols: Vec<(usize, usize)> = Vec::new();
    let (mut t_col, mut y_col, mut h_col) = (None, None, None);
    for (pos, name) in headers.iter().enumerate() {
        match name {
            "t" => t_col = Some(pos),
            "y" => y_col = Some(pos),
            "h" => h_col = Some(pos),
            other => {
                let idx = other
                    .strip_prefix('x')
                    .and_then(|s| s.parse::<usize>().ok())
                    .ok_or_else(|| Error::InvalidData(format!("unexpected column {other:?}")))?;
                x_cols.push((idx, pos));
            }
        }
    }
    let t_col = t_col.ok_or_else(|| Error::InvalidData("missing column t".into()))?;
    let y_col = y_col.ok_or_else(|| Error::InvalidData("missing column y".into()))?;
    x_cols.sort_unstable();
    if x_cols.is_empty() || x_cols.iter().enumerate().any(|(k, &(idx, _))| k != idx) {
        return Err(Error::InvalidData(
            "covariate columns must be x0..x{d-1} with no gaps".into(),
        ));
    }

    let mut parts = DatasetParts {
        expert_ids: h_col.map(|_| Vec::new()),
        ..Default::default()
    };
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        let field = |pos: usize| record.get(pos).unwrap_or("");
        let parse_f = |pos: usize| -> Result<f64> {
            field(pos).parse::<f64>().map_err(|_| {
                Error::InvalidData(format!("line {}: cannot parse {:?}", line + 2, field(pos)))
            })
        };
        let parse_i = |pos: usize| -> Result<i64> {
            let raw = field(pos);
            raw.parse::<i64>()
                .or_else(|_| match raw.parse::<f64>() {
                    Ok(v) if v.fract() == 0.0 => Ok(v as i64),
                    _ => Err(()),
                })
                .map_err(|_| Error::InvalidData(format!("line {}: cannot parse {raw:?}", line + 2)))
        };
        parts.covariates.push(
            x_cols
                .iter()
                .map(|&(_, pos)| parse_f(pos))
                .collect::<Result<_>>()?,
        );
        parts.treatments.push(parse_i(t_col)?);
        parts.risks.push(parse_f(y_col)?);
        if let (Some(pos), Some(ids)) = (h_col, parts.expert_ids.as_mut()) {
            ids.push(parse_i(pos)?);
        }
    }
    Ok(parts)
}

/// Report-style validation of an already constructed dataset; only warnings
/// can appear since construction enforces the hard invariants.
pub fn validate(dataset: &LoggedDataset) -> ValidationReport {
    dataset.to_parts().validate()
}

/// Sensitivity level: one Γ for every row, or one Γ per expert.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GammaSpec {
    Scalar(f64),
    PerExpert(Vec<f64>),
}

impl GammaSpec {
    pub fn scalar(gamma: f64) -> Result<Self> {
        check_gamma(gamma)?;
        Ok(Self::Scalar(gamma))
    }

    pub fn per_expert(gammas: Vec<f64>) -> Result<Self> {
        if gammas.is_empty() {
            return Err(Error::InvalidArgument(
                "per-expert gamma needs at least one expert".into(),
            ));
        }
        for &g in &gammas {
            check_gamma(g)?;
        }
        Ok(Self::PerExpert(gammas))
    }

    /// Γ = exp(log Γ) for each entry.
    pub fn from_log(spec: &LogGammaSpec) -> Result<Self> {
        match spec {
            LogGammaSpec::Scalar(l) => Self::scalar(l.exp()),
            LogGammaSpec::PerExpert(ls) => Self::per_expert(ls.iter().map(|l| l.exp()).collect()),
        }
    }

    pub fn is_per_expert(&self) -> bool {
        matches!(self, Self::PerExpert(_))
    }

    pub fn max(&self) -> f64 {
        match self {
            Self::Scalar(g) => *g,
            Self::PerExpert(gs) => gs.iter().copied().fold(1.0, f64::max),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Scalar(g) => check_gamma(*g),
            Self::PerExpert(gs) => Self::per_expert(gs.clone()).map(|_| ()),
        }
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma.is_finite() && gamma >= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "gamma must be finite and >= 1, got {gamma}"
        )));
    }
    Ok(())
}

/// A Γ specification on the log scale, as used in experiment grids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LogGammaSpec {
    Scalar(f64),
    PerExpert(Vec<f64>),
}

impl LogGammaSpec {
    pub fn label(&self) -> String {
        match self {
            Self::Scalar(l) => format!("{l}"),
            Self::PerExpert(ls) => {
                let parts: Vec<String> = ls.iter().map(|l| format!("{l}")).collect();
                format!("[{}]", parts.join(";"))
            }
        }
    }
}

/// Per-query human cost C(x).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CostModel {
    Constant(f64),
    PerRow(Vec<f64>),
}

impl Default for CostModel {
    fn default() -> Self {
        Self::Constant(0.0)
    }
}

impl CostModel {
    pub fn constant(cost: f64) -> Result<Self> {
        let model = Self::Constant(cost);
        model.validate(None)?;
        Ok(model)
    }

    /// Checks non-negativity and, for per-row costs, the row count.
    pub fn validate(&self, n: Option<usize>) -> Result<()> {
        let values: &[f64] = match self {
            Self::Constant(c) => std::slice::from_ref(c),
            Self::PerRow(cs) => {
                if let Some(n) = n {
                    if cs.len() != n {
                        return Err(Error::DimensionMismatch {
                            what: "per-row costs",
                            expected: n,
                            got: cs.len(),
                        });
                    }
                }
                cs
            }
        };
        if let Some(bad) = values.iter().find(|c| !(c.is_finite() && **c >= 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "cost must be finite and >= 0, got {bad}"
            )));
        }
        Ok(())
    }

    pub fn at(&self, row: usize) -> f64 {
        match self {
            Self::Constant(c) => *c,
            Self::PerRow(cs) => cs[row],
        }
    }

    /// Costs for the rows at `indices` (constant costs are unchanged).
    pub fn subset(&self, indices: &[usize]) -> Self {
        match self {
            Self::Constant(c) => Self::Constant(*c),
            Self::PerRow(cs) => Self::PerRow(indices.iter().map(|&i| cs[i]).collect()),
        }
    }
}
