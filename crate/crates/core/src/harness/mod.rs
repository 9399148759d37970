//! Configuration, initial data, experiment orchestration and the
//! acceptance suite.

pub mod acceptance;
pub mod config;
mod experiment;
pub mod io;
mod initial;

pub use acceptance::{acceptance_suite, AcceptOptions, AcceptanceReport, CriterionResult, Outcome};
pub use config::{Command, ExperimentConfig};
pub use experiment::{flow_config, initial_spec, run_experiment, wente_ensemble, RunSummary, WenteEnsemble};
pub use initial::{
    bubble_pullback_value, eval_trig, make_initial, random_trig, trig_coeffs, InitialDataSpec,
    InitialKind, PERTURBATION_MODES,
};
