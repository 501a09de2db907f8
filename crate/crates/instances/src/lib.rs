//! Lower-bound and class-separation instance generators, and the MAX-3SAT
//! compiler with both directions of its gain/assignment correspondence.

pub mod dsigma;
pub mod error;
pub mod kswitch;
pub mod sat;
pub mod separation;
pub mod unstable;

pub use dsigma::{gen_dsigma, DsigmaInstance, DsigmaParams};
pub use error::{InstanceError, Result};
pub use kswitch::{gen_kswitch_lqr, switch_segments};
pub use sat::{assignment_to_k, compile_max3sat, k_to_assignment, parse_dimacs, CnfFormula, Literal, Rounding};
pub use separation::{gen_separation, SeparationInstance, SeparationKind};
pub use unstable::{gen_unstable_scalar, UnstableScalar};
