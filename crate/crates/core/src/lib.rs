pub mod appendix;
pub mod closed_form;
pub mod concavity;
pub mod data;
pub mod error;
pub mod instance;
pub mod lp;
pub mod pricing;

pub use error::{Error, Result, SolverError};
pub use instance::MatchingInstance;
pub use lp::{cost, solve_fluid_lp, FluidSolution};
