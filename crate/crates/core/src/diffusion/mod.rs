//! Score-matching training, the probability-flow drift and the ODE integrators
//! shared by every model in the crate.

pub mod flow;
pub mod ode;
pub mod predictor;
pub mod train;

pub use flow::{
    cycle, drift, flow_solve, flow_solve_batch, posterior_mean, ProbabilityFlow, DEFAULT_T_MIN,
};
pub use ode::{
    ode_solve, ode_solve_batch, Direction, OdeConfig, OdeMethod, Trajectory, VectorField,
};
pub use predictor::{GaussianScore, NoisePredictor, ScoreModel, ZeroPredictor};
pub use train::{
    dsm_train, CoupledDraw, CouplingSampler, LrDecay, Provenance, TrainConfig, TrainReport,
    Weighting,
};
