use svl_harness::config::{BathSpec, EnsembleSpec, IntegrationSpec, OutputSpec, ProblemSpec, SweepSpec, TaGrid};
use svl_harness::ExperimentConfig;
use svl_core::model::ScheduleForm;
use svl_core::{Boundary, InitStrategy};

/// Small chain, short anneals: a few hundred milliseconds per cell.
pub fn small_config(gammas: Vec<f64>, t_a: Vec<f64>, n_trajectories: u64) -> ExperimentConfig {
    ExperimentConfig {
        problem: ProblemSpec {
            n: 24,
            j: 1.0,
            g: 0.0,
            boundary: Boundary::Open,
        },
        schedule: ScheduleForm::Linear,
        bath: BathSpec {
            gammas,
            temperature: 0.01,
            mass: 1.0,
        },
        integration: IntegrationSpec {
            dt: Some(0.05),
            record_stride: None,
            init: InitStrategy::Thermal,
            relax_after: None,
        },
        ensemble: EnsembleSpec {
            n_trajectories,
            master_seed: 42,
        },
        sweep: SweepSpec { t_a: TaGrid::List(t_a) },
        output: OutputSpec::default(),
        equilibrium: None,
    }
}
