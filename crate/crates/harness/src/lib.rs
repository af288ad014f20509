//! Experiment orchestration for spin-vector Langevin annealing: TOML
//! configuration, parallel ensembles over a `(γ, t_a)` grid with
//! deterministic seeding, resumable sweeps and the result files.

pub mod config;
pub mod ensemble;
pub mod error;
pub mod output;
pub mod sweep;
pub mod tables;
pub mod validate;

pub use config::ExperimentConfig;
pub use ensemble::{build_pool, cell_seed, run_ensemble, CellResult, CellSpec};
pub use error::{HarnessError, Result};
pub use output::{emit_results, preflight, read_results_csv, ResultRow};
pub use sweep::{run_sweep, CellStore, RunRecord, SweepReport};
