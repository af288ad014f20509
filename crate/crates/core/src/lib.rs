//! Spin-vector Langevin model of quantum-annealing dynamics.
//!
//! Chains (or arbitrary graphs) of classical planar rotors are driven through
//! an annealing schedule under Langevin dynamics. The crate provides
//!
//! - [`model`]: the annealing Hamiltonian, schedules, problem graphs, bath;
//! - [`integrator`]: the order-2.0 weak predictor-corrector and trajectory driver;
//! - [`observables`]: kink counting, order parameter, cumulant statistics;
//! - [`equilibrium`]: transfer-operator statics and the Gaussian closed forms;
//! - [`analysis`]: Kibble-Zurek predictions and power-law fits.

pub mod analysis;
pub mod equilibrium;
pub mod error;
pub mod integrator;
pub mod model;
pub mod observables;

pub use error::{Result, SvlError};
pub use integrator::{
    drift, initialize_state, simulate_trajectory, weak2_step, InitStrategy, IntegrationParams, NoiseStream,
};
pub use model::{
    AnnealSchedule, AnnealingHamiltonian, BathParams, Boundary, Coupling, FrozenSchedule, IsingProblem,
    PhaseSpaceState, Potential, Schedule,
};
pub use observables::{count_kinks, cumulants, histogram, order_parameter, KinkAccumulator, KinkStatistics};
