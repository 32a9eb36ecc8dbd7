//! Confounding-robust policy learning with human-AI deferral.
//!
//! Learns a treatment policy together with a router that decides, per
//! context, whether a human expert or the policy acts. Learning is
//! minimax over the marginal sensitivity model: the logged propensities are
//! only known up to a factor `Γ` in odds, and the system is trained against
//! the worst-case inverse propensity weights.

pub mod data;
pub mod error;
pub mod harness;
pub mod msm;
pub mod objective;
pub mod policy;
pub mod propensity;
pub mod synth;
pub mod train;

pub use data::{CostModel, DatasetParts, GammaSpec, LogGammaSpec, LoggedDataset, ValidationReport};
pub use error::{Error, Result};
pub use harness::{
    emit_report, run_experiment, BaselineSpec, DataSource, EvalReport, ExperimentConfig, Method,
    ReportRow,
};
pub use msm::{solve_lfp, solve_lfp_bruteforce, weight_bounds, LfpSolution, WeightBounds};
pub use objective::{Comparison, Objective, ObjectiveKind, ObjectiveValue, Routing, Weighting};
pub use policy::{
    BaselinePolicy, Destination, LinearPolicy, LinearRouter, Router, TreatmentPolicy,
};
pub use propensity::{
    calibrate_gamma, fit_assignment, fit_nominal_propensity, AssignmentMode, AssignmentModel,
    CalibrationReport, PropensityModel,
};
pub use synth::{generate_synthetic, generate_toy, oracle_regret, SyntheticTruth, ToyTruth};
pub use train::{
    evaluate_human_only, train_ao, train_confao, train_confhai, train_confhai_personalized,
    train_hai, Certificates, HaiVariant, TrainConfig, TrainedSystem,
};
