//! Perturbative expansion of the joint distribution in bath correlation
//! functions.

pub mod appendix;
pub mod contraction;
pub mod engine;
pub mod quadrature;

pub use contraction::{Branch, ContractionTable, ContractionTerm, Insertion, TermKey, Window};
pub use engine::{default_propagator, SeriesEngine, SeriesOptions, SeriesResult, MAX_ORDER};
pub use quadrature::{Axis, QuadratureOptions};
pub use appendix::{appendix_convergence, appendix_identity_check, AppendixConvergence, AppendixReport, ExchangeModel};
