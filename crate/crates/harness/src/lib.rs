//! Experiment plumbing for the LTV learners: interval regret against
//! best-in-class comparators, a seed-parallel Monte-Carlo driver, JSON
//! experiment configs, and the `ltv` command-line front end built on them.

pub mod config;
pub mod error;
pub mod experiment;
pub mod montecarlo;
pub mod regret;

pub use config::{AlgorithmSpec, ComparatorSpec, ExperimentConfig, InstanceSpec, TargetSpec};
pub use error::{HarnessError, Result, EXIT_NUMERICAL, EXIT_VALIDATION};
pub use experiment::{run_experiment, run_seed, ExperimentOutput, IntervalRow, StepRow, Summary};
pub use montecarlo::{config_hash, monte_carlo, monte_carlo_collect, Aggregate, MonteCarloRun, SeedRecord};
pub use regret::{adaptive_regret, best_in_class, dyadic_intervals, grid_intervals, ClassSpec, ComparatorMethod, IntervalGrid, RegretRecord, RegretReport};
