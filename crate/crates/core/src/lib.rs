//! Operational non-Markovianity witnesses for open qubit dynamics.
//!
//! Three-measurement joint probabilities `P(z, y, x)` and the conditional
//! past-future (CPF) correlation, computed two ways: from exact references
//! (Gaussian dephasing statistics, Monte Carlo over colored noise, a
//! pseudomode embedding of a Lorentzian bosonic bath) and from a projector
//! perturbation series organised around the reduced propagator `Λ`.

pub mod error;
pub mod bath;
pub mod measurement;
pub mod oracle;
pub mod operator;
pub mod report;
pub mod series;

pub use error::{Error, Result};
