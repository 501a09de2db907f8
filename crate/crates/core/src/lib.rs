//! Linear time-varying systems: instances, simulation, Markov operators,
//! policy classes and the assumption audits shared by the learning crates.

pub mod assumptions;
pub mod cost;
pub mod error;
pub mod instance;
pub mod json;
pub mod linalg;
pub mod operator;
pub mod policy;
pub mod rng;
pub mod sim;
pub mod variability;

pub use assumptions::{cost_growth_audit, verify_assumptions, AssumptionReport, AssumptionViolation};
pub use cost::{CostFn, CustomCost, LiteralSign, PenaltyShape, QuadraticCost, SatCost, SeparationCost};
pub use error::{LtvError, Result};
pub use instance::{Interval, LtvInstance};
pub use linalg::{Matrix, Vector};
pub use operator::{markov_operator, markov_operator_padded, markov_operators, nature_x, phi, psi, MarkovOperator};
pub use policy::{driving_signal, policy_action, rollout_policy, PolicyKind, PolicyParam};
pub use sim::{simulate, History, Simulator, Trace};
pub use variability::{total_variability, variability, vector_variability};
