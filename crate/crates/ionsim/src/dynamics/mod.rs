//! Closed transverse-field Ising dynamics and the open single-mode spin-boson model.

pub mod lanczos;
pub mod ode;
pub mod ramp;
pub mod reversal;
pub mod spin_boson;
pub mod state;
pub mod tfim;

pub use ramp::{Direction, RampSchedule};
pub use reversal::{run_reversal_experiment, ReversalEngine, ReversalResult};
pub use spin_boson::{evolve_spin_boson, evolve_spin_boson_pure, NoiseModel, SpinBosonParams, SpinBosonTrajectory};
pub use state::{Basis, QuantumState};
pub use tfim::{evolve_tfim, ground_state_tfim, initial_state_for_sign, EvolveOptions, GroundState, Trajectory};
