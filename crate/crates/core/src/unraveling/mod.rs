//! Monte Carlo unravelings of the linear filtering equations.

mod ensemble;
mod grid;
mod model;
pub mod rng;
mod simulate;

pub use ensemble::{
    ensemble, ensemble_with_threads, threads_from_env, EnsembleResult, Observable, ObservableStats, THREADS_ENV,
};
pub use grid::TimeGrid;
pub use model::{damped_qubit, from_general_model, Channel, Kind, TrajectoryModel, FLAG_TOL};
pub use rng::StreamId;
pub use simulate::{
    flow_value, simulate_diffusive, simulate_diffusive_with_increments, simulate_jump, simulate_jump_with_times,
    weights, NoiseRecord, Trajectory,
};
