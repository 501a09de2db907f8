//! Online learners for linear time-varying control.
//!
//! [`oco`] holds gradient descent with memory and the known-system DRC-OGD
//! controller, [`estimation`] the costly-oracle estimators, [`control`] the
//! exploration/exploitation controller for unknown systems, and [`bandit`]
//! exponentially weighted feedback control.

pub mod bandit;
pub mod control;
pub mod error;
pub mod estimation;
pub mod oco;

pub use bandit::{epsilon_cover, exp3_control_run, CoverSpec, Exp3Config, Exp3Run, GainRegion};
pub use control::{ada_ctrl_run, AdaCtrlConfig, AdaCtrlRun, EstimatorMode};
pub use error::{LearnError, Result};
pub use estimation::{ada_pred_interval_bound, ada_pred_run, working_set, working_set_audit, AdaPred, AdaPredConfig, BaseEstimator, CostlyOracle, EstimationAudit, NoisyOracle, PredictionRun, Projection, RademacherBlocks};
pub use oco::{drc_ogd_run, DecisionSet, DrcOgd, DrcOgdConfig, MemOgd};
