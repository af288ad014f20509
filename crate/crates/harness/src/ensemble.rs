//! One `(γ, t_a)` cell: an ensemble of independent anneals.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use svl_core::integrator::simulate;
use svl_core::model::AnnealingHamiltonian;
use svl_core::observables::bond_count;
use svl_core::{
    count_kinks, initialize_state, order_parameter, simulate_trajectory, FrozenSchedule, KinkAccumulator,
    KinkStatistics, NoiseStream, PhaseSpaceState, SvlError,
};

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};

/// Trajectories per work item. Fixed so the reduction order, and therefore
/// every floating-point sum, is independent of the worker count.
pub const BATCH: u64 = 8;

/// Noise seed of one grid cell, from `(master_seed, γ index, t_a index)`.
/// Trajectory `k` of the cell draws from stream `k` of this seed, so adding
/// cells or trajectories never changes existing ones.
pub fn cell_seed(master_seed: u64, gamma_index: usize, ta_index: usize) -> u64 {
    let mut h = Sha256::new();
    h.update(b"svl-cell");
    h.update(master_seed.to_le_bytes());
    h.update((gamma_index as u64).to_le_bytes());
    h.update((ta_index as u64).to_le_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellSpec {
    pub gamma_index: usize,
    pub ta_index: usize,
    pub gamma: f64,
    pub t_a: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimePoint {
    pub t: f64,
    pub mz_mean: f64,
    pub kinks_mean: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryFailure {
    pub trajectory: u64,
    pub step: u64,
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub cell: CellSpec,
    pub seed: u64,
    pub n_requested: u64,
    pub dt: f64,
    /// `None` when fewer than three trajectories survived.
    pub stats: Option<KinkStatistics>,
    pub time_series: Vec<TimePoint>,
    pub failures: Vec<TrajectoryFailure>,
    pub wall_seconds: f64,
}

impl CellResult {
    /// Accepted for analysis only if no trajectory blew up.
    pub fn is_valid(&self) -> bool {
        self.failures.is_empty() && self.stats.is_some()
    }
}

#[derive(Default)]
struct BatchOutcome {
    acc: KinkAccumulator,
    /// per record time: (t, Σ M_z, Σ kinks)
    series: Vec<(f64, f64, f64)>,
    series_count: u64,
    failures: Vec<TrajectoryFailure>,
}

impl BatchOutcome {
    fn absorb_series(&mut self, samples: &[(f64, f64, f64)]) -> Result<()> {
        if self.series.is_empty() {
            self.series = samples.iter().map(|&(t, _, _)| (t, 0.0, 0.0)).collect();
        }
        if self.series.len() != samples.len() {
            return Err(HarnessError::Numerical("trajectories recorded different time grids".into()));
        }
        for (acc, s) in self.series.iter_mut().zip(samples) {
            acc.1 += s.1;
            acc.2 += s.2;
        }
        self.series_count += 1;
        Ok(())
    }

    fn merge(&mut self, other: BatchOutcome) -> Result<()> {
        self.acc.merge(&other.acc);
        if other.series_count > 0 {
            if self.series.is_empty() {
                self.series = other.series;
            } else {
                if self.series.len() != other.series.len() {
                    return Err(HarnessError::Numerical("trajectories recorded different time grids".into()));
                }
                for (a, b) in self.series.iter_mut().zip(&other.series) {
                    a.1 += b.1;
                    a.2 += b.2;
                }
            }
            self.series_count += other.series_count;
        }
        self.failures.extend(other.failures);
        Ok(())
    }
}

/// Run every trajectory of one cell on `pool` and reduce the results.
pub fn run_ensemble(config: &ExperimentConfig, cell: CellSpec, pool: &rayon::ThreadPool) -> Result<CellResult> {
    let start = Instant::now();
    let problem = config.build_problem()?;
    let bath = config.bath(cell.gamma)?;
    let schedule = config.schedule(cell.t_a)?;
    let params = config.integration(cell.t_a)?;
    let recording = config.integration.record_stride.is_some();
    let relax = config.integration.relax_after;
    let init_strategy = config.integration.init;
    let boundary = config.problem.boundary;
    let seed = cell_seed(config.ensemble.master_seed, cell.gamma_index, cell.ta_index);
    let n_traj = config.ensemble.n_trajectories;
    let n_batches = n_traj.div_ceil(BATCH);

    let run_batch = |batch: u64| -> Result<BatchOutcome> {
        let mut out = BatchOutcome::default();
        for k in batch * BATCH..((batch + 1) * BATCH).min(n_traj) {
            let mut noise = NoiseStream::new(seed, k);
            let mut samples = Vec::new();
            let observe = |state: &PhaseSpaceState| -> (f64, f64) {
                let kinks = count_kinks(&state.theta, boundary).map_or(f64::NAN, |c| c as f64);
                (order_parameter(&state.theta), kinks)
            };
            let outcome = initialize_state(&problem, &bath, init_strategy, &mut noise).and_then(|init| {
                simulate_trajectory(&init, &problem, &schedule, &bath, &params, &mut noise, |t, s| {
                    if recording {
                        let (mz, kinks) = observe(s);
                        samples.push((t, mz, kinks));
                    }
                })
            });
            let outcome = outcome.and_then(|fin| {
                let measured = (count_kinks(&fin.theta, boundary)?, order_parameter(&fin.theta));
                if let (true, Some(duration)) = (recording, relax) {
                    let frozen = FrozenSchedule::new(0.0, 1.0, duration)?;
                    let potential = AnnealingHamiltonian::new(&problem, &frozen);
                    let mut restart = fin.clone();
                    restart.t = 0.0;
                    simulate(&restart, &potential, duration, &bath, &params, &mut noise, |t, s| {
                        let (mz, kinks) = observe(s);
                        samples.push((cell.t_a + t, mz, kinks));
                    })?;
                }
                Ok(measured)
            });
            match outcome {
                Ok((kinks, mz)) => {
                    out.acc.push(kinks, mz);
                    if recording {
                        out.absorb_series(&samples)?;
                    }
                }
                Err(SvlError::Blowup { step, time, .. }) => out.failures.push(TrajectoryFailure {
                    trajectory: k,
                    step,
                    time,
                }),
                Err(e) => return Err(e.into()),
            }
        }
        Ok(out)
    };

    let batches: Vec<Result<BatchOutcome>> = pool.install(|| (0..n_batches).into_par_iter().map(run_batch).collect());
    let mut total = BatchOutcome::default();
    for b in batches {
        total.merge(b?)?;
    }

    let bonds = bond_count(config.problem.n, boundary);
    let stats = if total.acc.len() >= 3 {
        Some(total.acc.finish(cell.t_a, bonds)?)
    } else {
        None
    };
    let count = total.series_count as f64;
    let time_series = total
        .series
        .iter()
        .map(|&(t, mz, kinks)| TimePoint {
            t,
            mz_mean: mz / count,
            kinks_mean: kinks / count,
        })
        .collect();
    Ok(CellResult {
        cell,
        seed,
        n_requested: n_traj,
        dt: params.dt,
        stats,
        time_series,
        failures: total.failures,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

pub fn build_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| HarnessError::Config(format!("cannot start {workers} workers: {e}")))
}
