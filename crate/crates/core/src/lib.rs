//! Multilayer decoupling of multivariate polynomial functions through
//! constrained ParaTuck-L decompositions of their Jacobian tensors.

pub mod basis;
pub mod error;
pub mod harness;
pub mod model;
pub mod par;
pub mod solver;
pub mod tensor;
pub mod tuner;

pub use error::{Error, Result};
pub use model::DecoupledModel;
pub use par::Execution;
pub use solver::{fit, fit_from, FitReport, SolverConfig, SolverState, Strategy};
pub use tuner::{tune, TunerConfig, TunerReport};
