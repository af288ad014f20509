//! Experiment configuration, read from TOML.
//!
//! ```toml
//! [problem]
//! n = 256
//! j = 1.0
//! boundary = "open"
//!
//! [schedule]
//! form = "linear"
//!
//! [bath]
//! gammas = [0.01, 5.0]
//! temperature = 0.01
//!
//! [integration]
//! dt = 0.1
//! record_stride = 100
//!
//! [ensemble]
//! n_trajectories = 1000
//! master_seed = 7
//!
//! [sweep]
//! t_a = { min = 100.0, max = 10000.0, points = 8 }
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use svl_core::model::ScheduleForm;
use svl_core::{AnnealSchedule, BathParams, Boundary, InitStrategy, IntegrationParams, IsingProblem};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    #[serde(default = "linear_form")]
    pub schedule: ScheduleForm,
    pub bath: BathSpec,
    #[serde(default)]
    pub integration: IntegrationSpec,
    pub ensemble: EnsembleSpec,
    pub sweep: SweepSpec,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub equilibrium: Option<EquilibriumSpec>,
}

fn linear_form() -> ScheduleForm {
    ScheduleForm::Linear
}

/// Uniform chain with coupling `j` and field `g` on every site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub n: usize,
    #[serde(default = "one")]
    pub j: f64,
    #[serde(default)]
    pub g: f64,
    #[serde(default)]
    pub boundary: Boundary,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathSpec {
    pub gammas: Vec<f64>,
    pub temperature: f64,
    #[serde(default = "one")]
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct IntegrationSpec {
    /// Fixed timestep; `min(0.01, t_a/1000)` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    /// Steps between time-series samples; no time series when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_stride: Option<u64>,
    #[serde(default)]
    pub init: InitStrategy,
    /// Keep recording for this long under the final Hamiltonian after `t_a`.
    /// Only the time series sees these samples.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relax_after: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    pub n_trajectories: u64,
    pub master_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub t_a: TaGrid,
}

/// Annealing times, either listed or log-spaced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TaGrid {
    List(Vec<f64>),
    Log { min: f64, max: f64, points: usize },
}

impl TaGrid {
    pub fn values(&self) -> Vec<f64> {
        match self {
            TaGrid::List(v) => v.clone(),
            TaGrid::Log { min, max, points } => log_spaced(*min, *max, *points),
        }
    }
}

/// `points` values from `min` to `max` inclusive, uniform in `ln`.
pub fn log_spaced(min: f64, max: f64, points: usize) -> Vec<f64> {
    match points {
        0 => vec![],
        1 => vec![min],
        _ => {
            let ratio = (max / min).ln() / (points - 1) as f64;
            (0..points)
                .map(|k| if k + 1 == points { max } else { min * (ratio * k as f64).exp() })
                .collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default = "yes")]
    pub histograms: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            histograms: true,
        }
    }
}

fn default_dir() -> PathBuf {
    PathBuf::from("results")
}

fn yes() -> bool {
    true
}

/// Grid for the transfer-operator tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquilibriumSpec {
    pub betas: Vec<f64>,
    pub epsilon_min: f64,
    pub epsilon_max: f64,
    pub epsilon_points: usize,
    /// Quadrature nodes; the β-dependent default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    /// Also tabulate the saddle-point closed forms where they apply.
    #[serde(default = "yes")]
    pub gaussian: bool,
}

impl Default for EquilibriumSpec {
    fn default() -> Self {
        Self {
            betas: vec![10.0, 100.0, 1000.0],
            epsilon_min: -0.9,
            epsilon_max: 0.9,
            epsilon_points: 181,
            grid: None,
            gaussian: true,
        }
    }
}

/// Ensembles smaller than this are rejected for statistics-producing runs.
pub const MIN_TRAJECTORIES: u64 = 100;
/// Ensembles smaller than this draw a warning.
pub const RECOMMENDED_TRAJECTORIES: u64 = 1000;
/// Density of a multi-point annealing-time grid, in points per decade.
pub const MIN_POINTS_PER_DECADE: f64 = 4.0;

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn t_a_grid(&self) -> Vec<f64> {
        self.sweep.t_a.values()
    }

    pub fn build_problem(&self) -> Result<IsingProblem> {
        let p = &self.problem;
        let chain = IsingProblem::uniform_chain(p.n, p.j, p.boundary)?;
        Ok(IsingProblem::new(p.n, chain.edges().to_vec(), vec![p.g; p.n], p.boundary)?)
    }

    pub fn bath(&self, gamma: f64) -> Result<BathParams> {
        Ok(BathParams::new(gamma, self.bath.temperature, self.bath.mass)?)
    }

    pub fn schedule(&self, t_a: f64) -> Result<AnnealSchedule> {
        Ok(AnnealSchedule::from_form(t_a, self.schedule.clone())?)
    }

    pub fn integration(&self, t_a: f64) -> Result<IntegrationParams> {
        let dt = self.integration.dt.unwrap_or_else(|| IntegrationParams::default_dt(t_a));
        let params = IntegrationParams::new(dt, self.integration.record_stride.unwrap_or(u64::MAX))?;
        params.step_count(t_a)?;
        Ok(params)
    }

    /// Check every field; returns warnings that do not stop a run.
    pub fn validate(&self) -> Result<Vec<String>> {
        let mut warnings = Vec::new();
        self.build_problem()?;
        if self.bath.gammas.is_empty() {
            return Err(HarnessError::Config("bath.gammas is empty".into()));
        }
        for &g in &self.bath.gammas {
            self.bath(g)?;
        }
        if let Some(stride) = self.integration.record_stride {
            if stride == 0 {
                return Err(HarnessError::Config("integration.record_stride must be >= 1".into()));
            }
        }
        if let Some(r) = self.integration.relax_after {
            if !(r > 0.0 && r.is_finite()) {
                return Err(HarnessError::Config("integration.relax_after must be positive".into()));
            }
        }
        let n = self.ensemble.n_trajectories;
        if n < MIN_TRAJECTORIES {
            return Err(HarnessError::Config(format!(
                "ensemble.n_trajectories = {n}; at least {MIN_TRAJECTORIES} are needed"
            )));
        }
        if n < RECOMMENDED_TRAJECTORIES {
            warnings.push(format!(
                "ensemble.n_trajectories = {n} is below {RECOMMENDED_TRAJECTORIES}; error bars will be wide"
            ));
        }
        let grid = self.t_a_grid();
        if grid.is_empty() {
            return Err(HarnessError::Config("sweep.t_a is empty".into()));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(HarnessError::Config("sweep.t_a must be strictly increasing".into()));
        }
        if grid.len() > 1 {
            let decades = (grid[grid.len() - 1] / grid[0]).log10();
            let density = grid.len() as f64 / decades;
            if density < MIN_POINTS_PER_DECADE {
                return Err(HarnessError::Config(format!(
                    "sweep.t_a has {density:.2} points per decade; scaling runs need {MIN_POINTS_PER_DECADE}"
                )));
            }
        }
        for &t_a in &grid {
            self.schedule(t_a)?;
            self.integration(t_a)?;
        }
        if let Some(eq) = &self.equilibrium {
            validate_equilibrium(eq)?;
        }
        Ok(warnings)
    }

    /// SHA-256 over everything that affects the numbers (output settings excluded).
    pub fn hash(&self) -> String {
        #[derive(Serialize)]
        struct Physics<'a> {
            problem: &'a ProblemSpec,
            schedule: &'a ScheduleForm,
            bath: &'a BathSpec,
            integration: &'a IntegrationSpec,
            ensemble: &'a EnsembleSpec,
            t_a: Vec<f64>,
        }
        let view = Physics {
            problem: &self.problem,
            schedule: &self.schedule,
            bath: &self.bath,
            integration: &self.integration,
            ensemble: &self.ensemble,
            t_a: self.t_a_grid(),
        };
        let bytes = serde_json::to_vec(&view).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

pub fn validate_equilibrium(eq: &EquilibriumSpec) -> Result<()> {
    if eq.betas.is_empty() || eq.betas.iter().any(|b| !(*b > 0.0 && b.is_finite())) {
        return Err(HarnessError::Config("equilibrium.betas must be positive".into()));
    }
    if !(eq.epsilon_min >= -1.0 && eq.epsilon_max <= 1.0 && eq.epsilon_min <= eq.epsilon_max) {
        return Err(HarnessError::Config("equilibrium epsilon range must lie in [-1, 1]".into()));
    }
    if eq.epsilon_points == 0 {
        return Err(HarnessError::Config("equilibrium.epsilon_points must be >= 1".into()));
    }
    Ok(())
}
