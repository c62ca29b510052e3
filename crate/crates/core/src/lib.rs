//! Exact versus approximate counting, operationally.
//!
//! This crate implements the constructive machinery that connects exact
//! counting oracles, approximate counting, and interactive proofs:
//!
//! * [`field`]: prime-field arithmetic and Lagrange interpolation;
//! * [`cnf`]: CNF formulas, DIMACS I/O, tensor powers, XOR augmentation;
//! * [`oracles`]: exact permanent (Ryser), exact #SAT, a deterministic
//!   DPLL SAT oracle with witnesses, and a fault-injecting wrapper;
//! * [`reduction`]: non-adaptive random reductions: single-batch query
//!   discipline, error boosting, composition, and distribution probes;
//! * [`perm_rsr`]: the permanent's random self-reduction over a random
//!   line, with interpolation recovery;
//! * [`approx`]: one-parallel-round approximate counting by nested XOR
//!   hashing, and the post-selected ratio estimator;
//! * [`am`]: an Arthur-Merlin protocol simulator with advice, honest and
//!   adversarial provers, and closed-form bound audits;
//! * [`fixtures`]: synthetic reductions with plantable instances for the
//!   protocol and composition experiments.

pub mod am;
pub mod approx;
pub mod cnf;
pub mod dpll;
pub mod error;
pub mod field;
pub mod fixtures;
pub mod oracles;
pub mod perm_rsr;
pub mod randomness;
pub mod reduction;
pub mod reference;

pub use error::{Error, Result};
