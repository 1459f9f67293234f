//! Point-vortex dynamics for the generalized SQG family.
//!
//! * [`kernel`]: interaction law, equations of motion, conserved quantities.
//! * [`integrator`]: adaptive Dormand–Prince integration with collapse detection.
//! * [`selfsimilar`]: self-similar triples and their rates.
//! * [`stability`]: the linearized 4×4 matrix and its eigenvalue test.
//! * [`search`]: reduced side-length parametrization and the α sweep.
//! * [`burst`]: bursts among background vortices and reversed collapses.

pub mod burst;
pub mod integrator;
pub mod kernel;
pub mod linalg;
pub mod search;
pub mod selfsimilar;
pub mod stability;

pub use kernel::VortexState;
pub use selfsimilar::{SelfSimilarMotion, TripleConfig};

/// Crate version recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
