//! Monte Carlo experiments, configuration and persistence.
//!
//! Every trial is a pure function of the configuration and its index:
//! potentials are drawn per site from the master seed, so records do not
//! depend on the number of workers or the order trials finish in.

pub mod config;
pub mod experiments;
pub mod records;
pub mod runner;
pub mod stats;

pub use config::{desk_exponents, ExperimentConfig, ExperimentKind};
pub use experiments::{
    buffered_decay_check, estimate_localizing_probability, green_twobox_experiment, high_disorder_threshold,
    induction_experiment, level_spacing_experiment, lifshitz_experiment,
};
pub use records::{SummaryRow, TrialRecord};
pub use runner::{collect, run, run_file};
pub use stats::ProbabilityEstimate;
