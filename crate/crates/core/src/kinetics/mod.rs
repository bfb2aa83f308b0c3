//! Deterministic side: gain operators, time evolution of the density,
//! steady states and relaxation times.

mod evolution;
mod gain;
mod relaxation;
mod steady;

pub use evolution::{advance, advance_with, evolution_rate, EvolutionState, Integrator, MAX_CLIPPED_MASS};
pub use gain::{
    gain_angle, gain_angle_nodes, gain_pure, gain_pure_nodes, gain_saving, gain_saving_nodes, raw_total_gain,
    steady_map, total_gain,
};
pub use relaxation::{
    oscillatory_perturbation, relaxation_time, relaxation_time_with, RelaxationFit, RelaxationOptions, DISTANCE_FLOOR,
    MIN_FIT_SAMPLES,
};
pub use steady::{default_seed, preset_grid, solve_steady, FixedPointReport};
