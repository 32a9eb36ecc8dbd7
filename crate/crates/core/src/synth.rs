//! Synthetic confounded logs with ground truth, and oracle evaluation.
//!
//! [`generate_synthetic`] draws a binary-treatment log where each human
//! expert's true propensity sits exactly on the MSM boundary of its Γ: the
//! expert treats more often when treatment is better for the row (`U = 1`).
//! [`generate_toy`] draws the single-context two-outcome example. Both keep
//! the potential outcomes so that learned systems can be scored exactly.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{CostModel, LoggedDataset};
use crate::error::{Error, Result};
use crate::policy::{Destination, Router, TreatmentPolicy};

pub const DIM: usize = 5;
pub const BETA_TREAT: [f64; DIM] = [1.5, 1.0, 1.5, 1.0, 0.5];
pub const MU_X: [f64; DIM] = [1.0, 0.5, 1.0, 0.0, 1.0];
pub const ETA: f64 = 2.5;
pub const ALPHA: f64 = -2.0;
pub const W_XI: f64 = 1.5;
/// Nominal propensity coefficients over `[1; x]`.
pub const BETA_NOMINAL: [f64; DIM + 1] = [0.0, 0.75, 0.5, 0.0, 1.0, 0.0];

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// True propensity of arm 1 for a row with nominal propensity `nominal`,
/// confounder `u` and sensitivity `gamma`. Its odds are exactly `Γ` (u) or
/// `1/Γ` (not u) times the nominal odds.
pub fn tilted_propensity(nominal: f64, u: bool, gamma: f64) -> f64 {
    let u = f64::from(u8::from(u));
    (gamma * u + 1.0 - u) * nominal
        / ((1.0 + 2.0 * (gamma - 1.0) * nominal - gamma) * u + gamma + (1.0 - gamma) * nominal)
}

/// Latent and counterfactual quantities of a synthetic draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTruth {
    pub y0: Vec<f64>,
    pub y1: Vec<f64>,
    pub xi: Vec<u8>,
    pub u: Vec<bool>,
    /// Nominal `π̃₀(1|x)`.
    pub pnominal: Vec<f64>,
    /// True `π₀(1|x, U)` of the expert that logged the row.
    pub ptrue: Vec<f64>,
    pub expert: Vec<usize>,
    /// True Γ of each expert.
    pub expert_gammas: Vec<f64>,
}

impl SyntheticTruth {
    pub fn len(&self) -> usize {
        self.y0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y0.is_empty()
    }

    pub fn outcome(&self, row: usize, arm: usize) -> f64 {
        if arm == 1 {
            self.y1[row]
        } else {
            self.y0[row]
        }
    }

    /// `π₀(1|x, U)` for an arbitrary expert.
    pub fn propensity(&self, row: usize, expert: usize) -> f64 {
        tilted_propensity(self.pnominal[row], self.u[row], self.expert_gammas[expert])
    }

    /// `E[Y | x, U]` when `expert` decides the row.
    pub fn expert_risk(&self, row: usize, expert: usize) -> f64 {
        let p = self.propensity(row, expert);
        p * self.y1[row] + (1.0 - p) * self.y0[row]
    }

    /// Human risk with the expert drawn uniformly at random.
    pub fn random_human_risk(&self, row: usize) -> f64 {
        let k = self.expert_gammas.len();
        (0..k).map(|e| self.expert_risk(row, e)).sum::<f64>() / k as f64
    }

    /// Side-car CSV `y0,y1,xi,u,pnominal,ptrue,h`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["y0", "y1", "xi", "u", "pnominal", "ptrue", "h"])?;
        for i in 0..self.len() {
            w.write_record(&[
                self.y0[i].to_string(),
                self.y1[i].to_string(),
                self.xi[i].to_string(),
                u8::from(self.u[i]).to_string(),
                self.pnominal[i].to_string(),
                self.ptrue[i].to_string(),
                self.expert[i].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the side-car CSV; expert Γs are not part of the file.
    pub fn read_csv<R: Read>(reader: R, expert_gammas: Vec<f64>) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            y0: f64,
            y1: f64,
            xi: u8,
            u: u8,
            pnominal: f64,
            ptrue: f64,
            h: usize,
        }
        let mut truth = Self {
            y0: Vec::new(),
            y1: Vec::new(),
            xi: Vec::new(),
            u: Vec::new(),
            pnominal: Vec::new(),
            ptrue: Vec::new(),
            expert: Vec::new(),
            expert_gammas,
        };
        for row in csv::Reader::from_reader(reader).deserialize() {
            let row: Row = row?;
            truth.y0.push(row.y0);
            truth.y1.push(row.y1);
            truth.xi.push(row.xi);
            truth.u.push(row.u == 1);
            truth.pnominal.push(row.pnominal);
            truth.ptrue.push(row.ptrue);
            truth.expert.push(row.h);
        }
        Ok(truth)
    }
}

/// Settings of the confounded synthetic process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    /// True Γ of each expert (not log scale).
    pub gamma_true: Vec<f64>,
    /// Non-treatment covariate effect; zero when absent.
    #[serde(default)]
    pub beta0: Option<[f64; DIM]>,
}

/// Draws `n` rows; expert ids are uniform over `gamma_true.len()` experts.
pub fn generate_synthetic(
    n: usize,
    gamma_true: &[f64],
    seed: u64,
    beta0: Option<[f64; DIM]>,
) -> Result<(LoggedDataset, SyntheticTruth)> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    if gamma_true.is_empty() {
        return Err(Error::InvalidArgument(
            "need at least one expert gamma".into(),
        ));
    }
    if let Some(g) = gamma_true.iter().find(|g| !(g.is_finite() && **g >= 1.0)) {
        return Err(Error::InvalidArgument(format!(
            "gamma must be >= 1, got {g}"
        )));
    }
    let beta0 = beta0.unwrap_or([0.0; DIM]);
    let k = gamma_true.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xs = Vec::with_capacity(n);
    let mut ts = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    let mut hs = Vec::with_capacity(n);
    let mut truth = SyntheticTruth {
        y0: Vec::with_capacity(n),
        y1: Vec::with_capacity(n),
        xi: Vec::with_capacity(n),
        u: Vec::with_capacity(n),
        pnominal: Vec::with_capacity(n),
        ptrue: Vec::with_capacity(n),
        expert: Vec::with_capacity(n),
        expert_gammas: gamma_true.to_vec(),
    };
    for _ in 0..n {
        let xi = u8::from(rng.gen::<f64>() < 0.5);
        let xif = f64::from(xi);
        let x: Vec<f64> = MU_X
            .iter()
            .map(|mu| {
                (2.0 * xif - 1.0) * mu + {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    z
                }
            })
            .collect();
        let noise: f64 = StandardNormal.sample(&mut rng);
        let dot = |b: &[f64]| b.iter().zip(&x).map(|(a, c)| a * c).sum::<f64>();
        let y0 = dot(&beta0) + ETA + W_XI * xif + noise;
        let y1 = y0 + dot(&BETA_TREAT) + 0.5 * ALPHA * xif;
        let u = y1 < y0;
        let pnominal = sigmoid(crate::policy::affine(&BETA_NOMINAL, &x));
        let h = rng.gen_range(0..k);
        let ptrue = tilted_propensity(pnominal, u, gamma_true[h]);
        let t = usize::from(rng.gen::<f64>() < ptrue);
        ys.push(if t == 1 { y1 } else { y0 });
        ts.push(t);
        hs.push(h);
        xs.push(x);
        truth.y0.push(y0);
        truth.y1.push(y1);
        truth.xi.push(xi);
        truth.u.push(u);
        truth.pnominal.push(pnominal);
        truth.ptrue.push(ptrue);
        truth.expert.push(h);
    }
    let data = LoggedDataset::new(xs, ts, ys, Some(hs), 2, Some(k))?;
    Ok((data, truth))
}

/// The single-context example with confounding strength `γ ∈ [0, 0.5)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyTruth {
    pub gamma: f64,
    /// `Γ = (0.5 + γ) / (0.5 - γ)`.
    pub implied_gamma: f64,
    pub truth: SyntheticTruth,
}

impl ToyTruth {
    pub fn implied_gamma(gamma: f64) -> f64 {
        (0.5 + gamma) / (0.5 - gamma)
    }

    /// Population `E[Y]` under the human behavior policy.
    pub fn human_risk(&self) -> f64 {
        -0.75 - 1.5 * self.gamma
    }

    /// Population `E[Y(t)]`.
    pub fn arm_risk(arm: usize) -> f64 {
        if arm == 1 {
            -1.0
        } else {
            -0.5
        }
    }

    pub fn conditional_risks(&self) -> ConditionalRisks {
        ConditionalRisks {
            human: self.human_risk(),
            arms: vec![Self::arm_risk(0), Self::arm_risk(1)],
        }
    }
}

pub fn generate_toy(n: usize, gamma: f64, seed: u64) -> Result<(LoggedDataset, ToyTruth)> {
    if !(0.0..0.5).contains(&gamma) {
        return Err(Error::InvalidArgument(format!(
            "toy gamma must lie in [0, 0.5), got {gamma}"
        )));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ts = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    let mut truth = SyntheticTruth {
        y0: Vec::with_capacity(n),
        y1: Vec::with_capacity(n),
        xi: vec![0; n],
        u: Vec::with_capacity(n),
        pnominal: vec![0.5; n],
        ptrue: Vec::with_capacity(n),
        expert: vec![0; n],
        expert_gammas: vec![ToyTruth::implied_gamma(gamma)],
    };
    for _ in 0..n {
        let u = rng.gen::<f64>() < 0.5;
        let (y1, y0) = if u { (-2.0, 0.0) } else { (0.0, -1.0) };
        let p1 = if u { 0.5 + gamma } else { 0.5 - gamma };
        let t = usize::from(rng.gen::<f64>() < p1);
        ts.push(t);
        ys.push(if t == 1 { y1 } else { y0 });
        truth.y0.push(y0);
        truth.y1.push(y1);
        truth.u.push(u);
        truth.ptrue.push(p1);
    }
    let data = LoggedDataset::new(vec![vec![1.0]; n], ts, ys, None, 2, None)?;
    Ok((
        data,
        ToyTruth {
            gamma,
            implied_gamma: ToyTruth::implied_gamma(gamma),
            truth,
        },
    ))
}

/// Ground-truth score of a deployed system on a test draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleEvaluation {
    /// Mean risk minus the baseline's mean risk.
    pub regret: f64,
    pub team_risk: f64,
    pub baseline_risk: f64,
    /// Fraction of rows per destination `[expert_0, …, algorithm]`.
    pub routing_fractions: Vec<f64>,
}

/// Scores `(policy, router)` with the router deployed deterministically.
/// Deferred rows incur the deciding expert's expected risk given `(x, U)`
/// plus the human cost; a single-output router picks the expert uniformly.
pub fn oracle_evaluate(
    policy: &dyn TreatmentPolicy,
    router: &Router,
    data: &LoggedDataset,
    truth: &SyntheticTruth,
    baseline: &dyn TreatmentPolicy,
    cost: &CostModel,
) -> Result<OracleEvaluation> {
    let n = data.n();
    if truth.len() != n {
        return Err(Error::MissingTruth(format!(
            "truth has {} rows, test data has {n}",
            truth.len()
        )));
    }
    if data.n_arms() != 2 {
        return Err(Error::InvalidArgument(
            "oracle evaluation supports two arms".into(),
        ));
    }
    cost.validate(Some(n))?;
    let k = router.n_experts();
    let personalized = k > 1;
    if personalized && k != truth.expert_gammas.len() {
        return Err(Error::InvalidArgument(format!(
            "router routes to {k} experts, truth has {}",
            truth.expert_gammas.len()
        )));
    }
    let mut counts = vec![0usize; k + 1];
    let (mut team, mut base) = (0.0, 0.0);
    let mut pp = [0.0; 2];
    let mut bp = [0.0; 2];
    for (i, x) in data.rows().enumerate() {
        baseline.probs(x, &mut bp);
        base += bp[0] * truth.y0[i] + bp[1] * truth.y1[i];
        team += match router.decide(x) {
            Destination::Expert(h) => {
                counts[h] += 1;
                let risk = if personalized {
                    truth.expert_risk(i, h)
                } else {
                    truth.random_human_risk(i)
                };
                risk + cost.at(i)
            }
            Destination::Algorithm => {
                counts[k] += 1;
                policy.probs(x, &mut pp);
                pp[0] * truth.y0[i] + pp[1] * truth.y1[i]
            }
        };
    }
    let nf = n as f64;
    Ok(OracleEvaluation {
        regret: (team - base) / nf,
        team_risk: team / nf,
        baseline_risk: base / nf,
        routing_fractions: counts.iter().map(|&c| c as f64 / nf).collect(),
    })
}

pub fn oracle_regret(
    policy: &dyn TreatmentPolicy,
    router: &Router,
    data: &LoggedDataset,
    truth: &SyntheticTruth,
    baseline: &dyn TreatmentPolicy,
    cost: &CostModel,
) -> Result<f64> {
    oracle_evaluate(policy, router, data, truth, baseline, cost).map(|e| e.regret)
}

/// Conditional expected risks at one covariate value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalRisks {
    /// `E_{U, T∼π₀}[Y | x]` of the human.
    pub human: f64,
    /// `E[Y(t) | x]` per arm.
    pub arms: Vec<f64>,
}

/// Routes to the human exactly when its expected risk plus cost is strictly
/// below the policy's expected risk.
pub fn oracle_route(risks: &ConditionalRisks, policy_probs: &[f64], cost: f64) -> Destination {
    let algorithm: f64 = policy_probs
        .iter()
        .zip(&risks.arms)
        .map(|(p, y)| p * y)
        .sum();
    if risks.human + cost < algorithm {
        Destination::Expert(0)
    } else {
        Destination::Algorithm
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::BaselinePolicy;

    fn odds(p: f64) -> f64 {
        p / (1.0 - p)
    }

    #[test]
    fn tilt_at_gamma_one_is_identity() {
        for &p in &[0.01, 0.3, 0.5, 0.77, 0.99] {
            for u in [false, true] {
                assert!((tilted_propensity(p, u, 1.0) - p).abs() <= 1e-15);
            }
        }
    }

    #[test]
    fn generated_rows_sit_on_msm_boundary() {
        let gammas = [1.5f64.exp(), 2.5f64.exp(), 4f64.exp()];
        let (_, truth) = generate_synthetic(2000, &gammas, 9, None).unwrap();
        for i in 0..truth.len() {
            let g = gammas[truth.expert[i]];
            let ratio = odds(truth.ptrue[i]) / odds(truth.pnominal[i]);
            let target = if truth.u[i] { g } else { 1.0 / g };
            assert!(
                (ratio / target - 1.0).abs() < 1e-9,
                "row {i}: {ratio} vs {target}"
            );
            assert_eq!(truth.u[i], truth.y1[i] < truth.y0[i]);
        }
    }

    #[test]
    fn reproducible_and_seed_sensitive() {
        let a = generate_synthetic(300, &[2.0], 5, None).unwrap();
        let b = generate_synthetic(300, &[2.0], 5, None).unwrap();
        let c = generate_synthetic(300, &[2.0], 6, None).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.0, c.0);
    }

    #[test]
    fn covariate_means() {
        let n = 1000;
        let (data, truth) = generate_synthetic(n, &[1.0], 1, None).unwrap();
        let xi_bar = truth.xi.iter().map(|&v| f64::from(v)).sum::<f64>() / n as f64;
        assert!((0.45..=0.55).contains(&xi_bar));
        for j in 0..DIM {
            let mean = data.rows().map(|x| x[j]).sum::<f64>() / n as f64;
            let expected = (2.0 * xi_bar - 1.0) * MU_X[j];
            // Var of x_j is 1 + mu_j^2 (xi mixes the two mean shifts).
            let sd = (1.0 + MU_X[j] * MU_X[j]).sqrt();
            assert!(
                (mean - expected).abs() <= 3.0 * sd / (n as f64).sqrt(),
                "column {j}"
            );
        }
    }

    #[test]
    fn rejects_gamma_below_one() {
        assert!(generate_synthetic(10, &[0.9], 0, None).is_err());
        assert!(generate_toy(10, 0.5, 0).is_err());
        assert!(generate_toy(10, -0.1, 0).is_err());
    }

    #[test]
    fn toy_implied_gamma() {
        assert!((ToyTruth::implied_gamma(0.3) - 4.0).abs() < 1e-12);
        assert_eq!(ToyTruth::implied_gamma(0.0), 1.0);
    }

    #[test]
    fn toy_tilt_matches_direct_propensities() {
        let (_, toy) = generate_toy(100, 0.3, 2).unwrap();
        for i in 0..100 {
            assert!((toy.truth.propensity(i, 0) - toy.truth.ptrue[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn baseline_against_itself_has_zero_regret() {
        let (data, truth) = generate_synthetic(200, &[3.0], 3, None).unwrap();
        let never = BaselinePolicy::never_treat(2);
        let cost = CostModel::default();
        assert_eq!(
            oracle_regret(&never, &Router::never_defer(), &data, &truth, &never, &cost).unwrap(),
            0.0
        );
    }

    #[test]
    fn truth_sidecar_round_trip() {
        let (_, truth) = generate_synthetic(20, &[2.0, 3.0], 4, None).unwrap();
        let mut buf = Vec::new();
        truth.write_csv(&mut buf).unwrap();
        let back = SyntheticTruth::read_csv(buf.as_slice(), truth.expert_gammas.clone()).unwrap();
        assert_eq!(back, truth);
    }

    #[test]
    fn oracle_routing_rule() {
        let never = [1.0, 0.0];
        let always = [0.0, 1.0];
        let toy = |g: f64| ToyTruth {
            gamma: g,
            implied_gamma: ToyTruth::implied_gamma(g),
            truth: generate_toy(1, g, 0).unwrap().1.truth,
        };
        assert_eq!(
            oracle_route(&toy(0.3).conditional_risks(), &always, 0.0),
            Destination::Expert(0)
        );
        assert_eq!(
            oracle_route(&toy(0.0).conditional_risks(), &never, 0.0),
            Destination::Expert(0)
        );
        for g in [0.0, 0.1, 0.3, 0.45] {
            for p in [never, always, [0.5, 0.5]] {
                assert_eq!(
                    oracle_route(&toy(g).conditional_risks(), &p, 10.0),
                    Destination::Algorithm
                );
            }
        }
    }
}
