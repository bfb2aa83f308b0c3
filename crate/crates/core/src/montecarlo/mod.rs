//! Agent-based engine: random pairs of agents trade under an exchange rule
//! and the wealth distribution is estimated from histograms.

mod ensemble;
mod histogram;
mod population;
mod rng;

pub use ensemble::{run_ensemble, run_replica, EnsembleConfig, EnsembleOutcome, ReplicaOutcome, BURN_IN_SWEEPS};
pub use histogram::{histogram, WealthHistogram, DEFAULT_BINS, DEFAULT_RANGE};
pub use population::{init_population, InitialCondition, Population};
pub use rng::{derive_seed, open_unit, uniform_below, RngStream};
