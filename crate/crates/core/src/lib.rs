pub mod baselines;
pub mod config;
pub mod coupling;
pub mod datasets;
pub mod diffusion;
pub mod error;
pub mod eval;
pub mod io;
pub mod ladb;
pub mod nd;
pub mod pipeline;
pub mod schedule;

pub use error::{Error, Result};
