//! Bayesian D-optimal partial-profile designs for discrete choice
//! experiments.
//!
//! A partial-profile design presents respondents with choice sets in which a
//! fixed number of attributes is held constant, reducing cognitive burden at
//! the cost of statistical information. This crate constructs such designs
//! under the multinomial logit model by maximizing the Bayesian D-criterion
//! (the prior-averaged log-determinant of the Fisher information matrix),
//! using a simulated-annealing search whose exploration rule preserves the
//! constant-attribute structure. A two-stage coordinate-exchange baseline, a
//! model-robust composite criterion, and a respondent-simulation harness for
//! EMSE comparisons are included, along with a small CLI
//! (`generate` / `evaluate` / `simulate` / `benchmark`).
//!
//! Start with [`space::DesignSpace`] to describe the experiment,
//! [`scenario`] for priors and ready-made study setups, [`sa::anneal`] or
//! [`ce::two_stage_ce`] to optimize, and [`simulation::compare_designs`] to
//! validate. The `examples/` directory walks through each capability.

pub mod ce;
pub mod criterion;
pub mod design;
pub mod error;
pub mod linalg;
pub mod master;
pub mod model;
pub mod prior;
pub mod runner;
pub mod sa;
pub mod scenario;
pub mod simulation;
pub mod space;

pub use ce::{two_stage_ce, CeConfig};
pub use criterion::{
    d_criterion, db_criterion, relative_db_efficiency, CriterionSpec, ModelTag,
};
pub use design::{random_design, validate_design, Design};
pub use error::{Error, Result};
pub use model::ModelSpec;
pub use prior::{sample_prior, PriorDraws, PriorSpec};
pub use sa::{anneal, SaConfig, Stopping};
pub use space::DesignSpace;
