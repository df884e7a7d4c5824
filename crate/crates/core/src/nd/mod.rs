//! Numerical kernel: parameters, the MLP noise predictor, Adam and the seeded RNG.

pub mod adam;
pub mod mlp;
pub mod params;
pub mod rng;

pub use adam::{adam_step, AdamConfig, AdamState, StepOutcome};
pub use mlp::{time_embedding, Activation, ForwardCache, MlpSpec, ScoreNet};
pub use params::{ParamBlock, ParamVector};
pub use rng::Rng;
