//! Explicit order-2.0 weak predictor-corrector for the rotor Langevin equations.
//!
//! The state is ordered `Y = (θ₁..θ_N, p₁..p_N)` and evolves as
//!
//! ```text
//! dθᵢ = pᵢ/m dt
//! dpᵢ = −(∂H/∂θᵢ + (γ/m) pᵢ) dt + √(2D) dWᵢ,     D = γT
//! ```
//!
//! Because the diffusion matrix is constant the scheme reduces to
//!
//! ```text
//! Γ      = Y + A(Y, t) Δt + B·ΔΩ
//! Y_next = Y + ½[A(Γ, t+Δt) + A(Y, t)] Δt + B·ΔΩ
//! ```
//!
//! with `ΔΩ = (0, √Δt·G)`, `G ~ N(0, 1)` per rotor, and the same `ΔΩ` in both
//! stages.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{contract, domain, Result, SvlError};
use crate::model::{
    AnnealingHamiltonian, BathParams, FrozenSchedule, IsingProblem, PhaseSpaceState, Potential,
    Schedule,
};

/// Relative tolerance used when deciding whether a step lands on `t_a`.
const STEP_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegrationParams {
    pub dt: f64,
    pub record_stride: u64,
}

impl IntegrationParams {
    pub fn new(dt: f64, record_stride: u64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(domain(format!("timestep must be positive, got {dt}")));
        }
        if record_stride == 0 {
            return Err(contract("record stride must be at least 1"));
        }
        Ok(Self { dt, record_stride })
    }

    /// `dt = min(0.01, t_a/1000)`.
    pub fn default_dt(t_a: f64) -> f64 {
        (t_a / 1000.0).min(0.01)
    }

    /// Number of steps needed to reach `duration`; the last one may be shorter than `dt`.
    pub fn step_count(&self, duration: f64) -> Result<u64> {
        if self.dt > duration * (1.0 + STEP_SLACK) {
            return Err(domain(format!(
                "timestep {} exceeds the run duration {duration}",
                self.dt
            )));
        }
        let raw = duration / self.dt;
        let steps = (raw - STEP_SLACK * raw.max(1.0)).ceil().max(1.0);
        Ok(steps as u64)
    }
}

/// Deterministic Gaussian stream keyed by `(seed, trajectory_index)`.
///
/// Backed by ChaCha8 with the trajectory index as the stream id, so every
/// trajectory gets a disjoint counter-based sequence.
#[derive(Debug, Clone)]
pub struct NoiseStream {
    seed: u64,
    trajectory_index: u64,
    rng: ChaCha8Rng,
}

impl NoiseStream {
    pub fn new(seed: u64, trajectory_index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(trajectory_index);
        Self {
            seed,
            trajectory_index,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn trajectory_index(&self) -> u64 {
        self.trajectory_index
    }

    pub fn gaussian(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    pub fn fill(&mut self, out: &mut [f64]) {
        for x in out {
            *x = self.rng.sample(StandardNormal);
        }
    }
}

/// Deterministic part of the 2N-dimensional SDE, `A(Y)`.
pub fn drift<S: Schedule>(
    state: &PhaseSpaceState,
    problem: &IsingProblem,
    schedule: &S,
    bath: &BathParams,
) -> Result<Vec<f64>> {
    drift_of(&AnnealingHamiltonian::new(problem, schedule), bath, state)
}

/// [`drift`] for an arbitrary potential.
pub fn drift_of<P: Potential>(potential: &P, bath: &BathParams, state: &PhaseSpaceState) -> Result<Vec<f64>> {
    let n = potential.dim();
    check_state(state, n)?;
    let mut work = vec![0.0; n];
    let mut grad = vec![0.0; n];
    potential.gradient(&state.theta, state.t, &mut work, &mut grad)?;
    let inv_m = 1.0 / bath.mass();
    let friction = bath.gamma() * inv_m;
    let mut out = Vec::with_capacity(2 * n);
    out.extend(state.p.iter().map(|p| p * inv_m));
    out.extend(grad.iter().zip(&state.p).map(|(g, p)| -(g + friction * p)));
    Ok(out)
}

fn check_state(state: &PhaseSpaceState, n: usize) -> Result<()> {
    if state.theta.len() != n || state.p.len() != n {
        return Err(contract(format!(
            "state has ({}, {}) components, potential expects {n}",
            state.theta.len(),
            state.p.len()
        )));
    }
    Ok(())
}

/// Reusable scratch space for the predictor-corrector.
#[derive(Debug, Clone)]
pub struct Weak2Stepper {
    work: Vec<f64>,
    grad: Vec<f64>,
    momentum_drift: Vec<f64>,
    predicted_theta: Vec<f64>,
    predicted_p: Vec<f64>,
    kick: Vec<f64>,
}

impl Weak2Stepper {
    pub fn new(n: usize) -> Self {
        Self {
            work: vec![0.0; n],
            grad: vec![0.0; n],
            momentum_drift: vec![0.0; n],
            predicted_theta: vec![0.0; n],
            predicted_p: vec![0.0; n],
            kick: vec![0.0; n],
        }
    }

    /// Advance `state` by `dt` in place using the supplied standard normals
    /// (one per rotor). `step` is only used to label a blowup.
    pub fn step_with<P: Potential>(
        &mut self,
        potential: &P,
        bath: &BathParams,
        state: &mut PhaseSpaceState,
        dt: f64,
        gaussians: &[f64],
        step: u64,
    ) -> Result<()> {
        let n = potential.dim();
        check_state(state, n)?;
        if gaussians.len() != n || self.kick.len() != n {
            return Err(contract("noise vector and scratch must match the rotor count"));
        }
        let inv_m = 1.0 / bath.mass();
        let friction = bath.gamma() * inv_m;
        let kick_scale = (2.0 * bath.diffusion()).sqrt() * dt.sqrt();

        for (k, g) in self.kick.iter_mut().zip(gaussians) {
            *k = kick_scale * g;
        }

        // A(Y, t) and the predictor Γ
        potential.gradient(&state.theta, state.t, &mut self.work, &mut self.grad)?;
        for i in 0..n {
            let p = state.p[i];
            let fp = -(self.grad[i] + friction * p);
            self.momentum_drift[i] = fp;
            self.predicted_theta[i] = state.theta[i] + p * inv_m * dt;
            self.predicted_p[i] = p + fp * dt + self.kick[i];
        }

        // A(Γ, t + Δt) and the corrector
        let t_next = state.t + dt;
        potential.gradient(&self.predicted_theta, t_next, &mut self.work, &mut self.grad)?;
        let mut finite = true;
        for i in 0..n {
            let p = state.p[i];
            let gp = self.predicted_p[i];
            let gfp = -(self.grad[i] + friction * gp);
            let theta = state.theta[i] + 0.5 * (p + gp) * inv_m * dt;
            let p_next = p + 0.5 * (self.momentum_drift[i] + gfp) * dt + self.kick[i];
            finite &= theta.is_finite() && p_next.is_finite();
            state.theta[i] = theta;
            state.p[i] = p_next;
        }
        state.t = t_next;
        if !finite {
            return Err(SvlError::Blowup {
                step,
                time: t_next,
                trajectory: None,
            });
        }
        Ok(())
    }
}

/// One step of the scheme from `state.t` to `state.t + params.dt`.
pub fn weak2_step<S: Schedule>(
    state: &PhaseSpaceState,
    params: &IntegrationParams,
    noise: &mut NoiseStream,
    problem: &IsingProblem,
    schedule: &S,
    bath: &BathParams,
) -> Result<PhaseSpaceState> {
    let slack = STEP_SLACK * schedule.duration().max(1.0);
    if state.t + params.dt > schedule.duration() + slack {
        return Err(domain(format!(
            "step from t = {} by {} overruns the schedule end {}",
            state.t,
            params.dt,
            schedule.duration()
        )));
    }
    let potential = AnnealingHamiltonian::new(problem, schedule);
    let mut next = state.clone();
    let mut gaussians = vec![0.0; problem.n()];
    noise.fill(&mut gaussians);
    let step = (state.t / params.dt).round() as u64;
    Weak2Stepper::new(problem.n()).step_with(&potential, bath, &mut next, params.dt, &gaussians, step)?;
    Ok(next)
}

/// How the ensemble starts at `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum InitStrategy {
    /// `θ = 0, p = 0`.
    Cold,
    /// `θ = 0, pᵢ ~ N(0, mT)`.
    Thermal,
    /// Thermal start relaxed under `A = 1, B = 0` for `duration`.
    BurnIn { duration: f64, dt: f64 },
}

impl Default for InitStrategy {
    fn default() -> Self {
        InitStrategy::Thermal
    }
}

pub const DEFAULT_BURN_IN: f64 = 50.0;

pub fn initialize_state(
    problem: &IsingProblem,
    bath: &BathParams,
    strategy: InitStrategy,
    noise: &mut NoiseStream,
) -> Result<PhaseSpaceState> {
    let n = problem.n();
    match strategy {
        InitStrategy::Cold => Ok(PhaseSpaceState::at_rest(n)),
        InitStrategy::Thermal => {
            let sigma = (bath.mass() * bath.temperature()).sqrt();
            let mut state = PhaseSpaceState::at_rest(n);
            for p in &mut state.p {
                *p = sigma * noise.gaussian();
            }
            Ok(state)
        }
        InitStrategy::BurnIn { duration, dt } => {
            let thermal = initialize_state(problem, bath, InitStrategy::Thermal, noise)?;
            let frozen = FrozenSchedule::new(1.0, 0.0, duration)?;
            let params = IntegrationParams::new(dt.min(duration), u64::MAX)?;
            let mut relaxed = simulate_trajectory(&thermal, problem, &frozen, bath, &params, noise, |_, _| {})?;
            relaxed.t = 0.0;
            Ok(relaxed)
        }
    }
}

/// Integrate from `init` (at `t = 0`) to the end of `schedule`.
///
/// `recorder` sees `(t, state)` after every `record_stride`-th step and after
/// the final step, which lands exactly on `t_a`.
pub fn simulate_trajectory<S, R>(
    init: &PhaseSpaceState,
    problem: &IsingProblem,
    schedule: &S,
    bath: &BathParams,
    params: &IntegrationParams,
    noise: &mut NoiseStream,
    recorder: R,
) -> Result<PhaseSpaceState>
where
    S: Schedule,
    R: FnMut(f64, &PhaseSpaceState),
{
    let potential = AnnealingHamiltonian::new(problem, schedule);
    simulate(init, &potential, schedule.duration(), bath, params, noise, recorder)
}

/// [`simulate_trajectory`] for an arbitrary potential over `[0, duration]`.
pub fn simulate<P, R>(
    init: &PhaseSpaceState,
    potential: &P,
    duration: f64,
    bath: &BathParams,
    params: &IntegrationParams,
    noise: &mut NoiseStream,
    mut recorder: R,
) -> Result<PhaseSpaceState>
where
    P: Potential,
    R: FnMut(f64, &PhaseSpaceState),
{
    let n = potential.dim();
    check_state(init, n)?;
    if init.t != 0.0 {
        return Err(contract(format!("trajectory must start at t = 0, got {}", init.t)));
    }
    if !init.is_finite() {
        return Err(SvlError::Blowup {
            step: 0,
            time: 0.0,
            trajectory: Some(noise.trajectory_index()),
        });
    }
    let steps = params.step_count(duration)?;
    let mut state = init.clone();
    let mut stepper = Weak2Stepper::new(n);
    let mut gaussians = vec![0.0; n];
    for k in 1..=steps {
        let last = k == steps;
        let dt = if last {
            duration - (k - 1) as f64 * params.dt
        } else {
            params.dt
        };
        noise.fill(&mut gaussians);
        stepper
            .step_with(potential, bath, &mut state, dt, &gaussians, k)
            .map_err(|e| match e {
                SvlError::Blowup { step, time, .. } => SvlError::Blowup {
                    step,
                    time,
                    trajectory: Some(noise.trajectory_index()),
                },
                other => other,
            })?;
        // pin the clock to the grid so rounding does not accumulate
        state.t = if last { duration } else { k as f64 * params.dt };
        if last || k % params.record_stride == 0 {
            recorder(state.t, &state);
        }
    }
    Ok(state)
}
