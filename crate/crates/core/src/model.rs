//! Annealing Hamiltonian over planar rotors.
//!
//! Each qubit is replaced by a classical rotor angle `θ`, with `σᶻ → sin θ`
//! and `σˣ → cos θ`. The time-dependent energy is
//!
//! ```text
//! H(θ, t) = A(t)·(−Σᵢ cos θᵢ) + B(t)·(−Σ_(i,j) J_ij sin θᵢ sin θⱼ − Σᵢ gᵢ sin θᵢ)
//! ```
//!
//! Angles are never wrapped; every term is 2π-periodic so the dynamics can
//! treat them as unbounded reals.

use serde::{Deserialize, Serialize};

use crate::error::{contract, domain, Result, SvlError};

/// Relative slack allowed when a time lands a rounding error past `t_a`.
const TIME_SLACK: f64 = 1e-9;

/// Source of the `(A, B)` weights as a function of time.
pub trait Schedule: Sync {
    /// Total duration covered by the schedule.
    fn duration(&self) -> f64;

    /// Evaluate `(A(t), B(t))` for `t ∈ [0, duration]`.
    fn eval(&self, t: f64) -> Result<(f64, f64)>;
}

/// One row of a tabulated schedule, on the normalized coordinate `s = t/t_a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchedulePoint {
    pub s: f64,
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum ScheduleForm {
    Linear,
    Tabulated { table: Vec<SchedulePoint> },
}

/// The interpolation `H(t) = A(t)H₀ + B(t)H_P` with `A(0)=1, B(0)=0, A(t_a)=0, B(t_a)=1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnnealSchedule {
    t_a: f64,
    form: ScheduleForm,
}

impl AnnealSchedule {
    pub fn linear(t_a: f64) -> Result<Self> {
        check_duration(t_a)?;
        Ok(Self {
            t_a,
            form: ScheduleForm::Linear,
        })
    }

    /// Piecewise-linear schedule through `table`, which must start at `s = 0`
    /// with `(1, 0)` and end at `s = 1` with `(0, 1)`.
    pub fn tabulated(t_a: f64, table: Vec<SchedulePoint>) -> Result<Self> {
        check_duration(t_a)?;
        if table.len() < 2 {
            return Err(contract("tabulated schedule needs at least two samples"));
        }
        const EDGE_TOL: f64 = 1e-12;
        let first = table[0];
        let last = table[table.len() - 1];
        if first.s.abs() > EDGE_TOL || (last.s - 1.0).abs() > EDGE_TOL {
            return Err(contract("tabulated schedule must span s = 0 to s = 1"));
        }
        if (first.a - 1.0).abs() > EDGE_TOL || first.b.abs() > EDGE_TOL {
            return Err(contract("tabulated schedule must start at A = 1, B = 0"));
        }
        if last.a.abs() > EDGE_TOL || (last.b - 1.0).abs() > EDGE_TOL {
            return Err(contract("tabulated schedule must end at A = 0, B = 1"));
        }
        if table.windows(2).any(|w| !(w[1].s > w[0].s)) {
            return Err(contract("tabulated schedule abscissae must be strictly increasing"));
        }
        if table
            .iter()
            .any(|p| !(p.s.is_finite() && p.a.is_finite() && p.b.is_finite()))
        {
            return Err(contract("tabulated schedule contains non-finite values"));
        }
        Ok(Self {
            t_a,
            form: ScheduleForm::Tabulated { table },
        })
    }

    pub fn from_form(t_a: f64, form: ScheduleForm) -> Result<Self> {
        match form {
            ScheduleForm::Linear => Self::linear(t_a),
            ScheduleForm::Tabulated { table } => Self::tabulated(t_a, table),
        }
    }

    pub fn t_a(&self) -> f64 {
        self.t_a
    }

    pub fn form(&self) -> &ScheduleForm {
        &self.form
    }
}

impl Schedule for AnnealSchedule {
    fn duration(&self) -> f64 {
        self.t_a
    }

    fn eval(&self, t: f64) -> Result<(f64, f64)> {
        let s = normalized_time(t, self.t_a)?;
        match &self.form {
            ScheduleForm::Linear => Ok((1.0 - s, s)),
            ScheduleForm::Tabulated { table } => {
                // first sample with abscissa >= s; table[0].s == 0 so idx >= 1 unless s == 0
                let idx = table.partition_point(|p| p.s < s);
                if idx == 0 {
                    return Ok((table[0].a, table[0].b));
                }
                let idx = idx.min(table.len() - 1);
                let (lo, hi) = (table[idx - 1], table[idx]);
                let w = (s - lo.s) / (hi.s - lo.s);
                Ok((lo.a + w * (hi.a - lo.a), lo.b + w * (hi.b - lo.b)))
            }
        }
    }
}

/// Schedule stub holding `(A, B)` fixed for a duration. Used for static
/// (equilibrium) runs and burn-in; it does not satisfy the annealing
/// boundary conditions and is deliberately a separate type.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrozenSchedule {
    pub a: f64,
    pub b: f64,
    pub duration: f64,
}

impl FrozenSchedule {
    pub fn new(a: f64, b: f64, duration: f64) -> Result<Self> {
        check_duration(duration)?;
        if !(a.is_finite() && b.is_finite()) {
            return Err(contract("frozen schedule weights must be finite"));
        }
        Ok(Self { a, b, duration })
    }
}

impl Schedule for FrozenSchedule {
    fn duration(&self) -> f64 {
        self.duration
    }

    fn eval(&self, t: f64) -> Result<(f64, f64)> {
        normalized_time(t, self.duration)?;
        Ok((self.a, self.b))
    }
}

fn check_duration(t_a: f64) -> Result<()> {
    if !(t_a.is_finite() && t_a > 0.0) {
        return Err(domain(format!("schedule duration must be positive, got {t_a}")));
    }
    Ok(())
}

fn normalized_time(t: f64, t_a: f64) -> Result<f64> {
    let slack = TIME_SLACK * t_a.max(1.0);
    if !(t >= -slack && t <= t_a + slack) {
        return Err(domain(format!("time {t} outside [0, {t_a}]")));
    }
    Ok((t / t_a).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    #[default]
    Open,
    Periodic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    pub i: usize,
    pub j: usize,
    pub strength: f64,
}

/// Ising problem graph: couplings `J_ij` on undirected edges and local fields `gᵢ`.
#[derive(Debug, Clone, PartialEq)]
pub struct IsingProblem {
    n: usize,
    edges: Vec<Coupling>,
    fields: Vec<f64>,
    boundary: Boundary,
    // CSR adjacency, both directions of every edge
    offsets: Vec<usize>,
    neighbors: Vec<(usize, f64)>,
}

impl IsingProblem {
    pub fn new(n: usize, edges: Vec<Coupling>, fields: Vec<f64>, boundary: Boundary) -> Result<Self> {
        if n == 0 {
            return Err(contract("problem must have at least one vertex"));
        }
        if fields.len() != n {
            return Err(contract(format!(
                "expected {n} local fields, got {}",
                fields.len()
            )));
        }
        let mut seen = std::collections::HashSet::with_capacity(edges.len());
        for e in &edges {
            if e.i >= n || e.j >= n {
                return Err(contract(format!("edge ({}, {}) out of range for n = {n}", e.i, e.j)));
            }
            if e.i == e.j {
                return Err(contract(format!("self-edge on vertex {}", e.i)));
            }
            if !e.strength.is_finite() {
                return Err(contract("coupling strengths must be finite"));
            }
            if !seen.insert((e.i.min(e.j), e.i.max(e.j))) {
                return Err(contract(format!("duplicate edge ({}, {})", e.i, e.j)));
            }
        }
        if fields.iter().any(|g| !g.is_finite()) {
            return Err(contract("local fields must be finite"));
        }

        let mut degree = vec![0usize; n];
        for e in &edges {
            degree[e.i] += 1;
            degree[e.j] += 1;
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut fill = offsets[..n].to_vec();
        let mut neighbors = vec![(0usize, 0.0); offsets[n]];
        for e in &edges {
            neighbors[fill[e.i]] = (e.j, e.strength);
            fill[e.i] += 1;
            neighbors[fill[e.j]] = (e.i, e.strength);
            fill[e.j] += 1;
        }

        Ok(Self {
            n,
            edges,
            fields,
            boundary,
            offsets,
            neighbors,
        })
    }

    /// Homogeneous ferromagnetic chain with coupling `j` and no local fields.
    pub fn uniform_chain(n: usize, j: f64, boundary: Boundary) -> Result<Self> {
        if n < 2 {
            return Err(contract("a chain needs at least two rotors"));
        }
        if boundary == Boundary::Periodic && n < 3 {
            return Err(contract("a periodic chain needs at least three rotors"));
        }
        let mut edges: Vec<Coupling> = (0..n - 1)
            .map(|i| Coupling {
                i,
                j: i + 1,
                strength: j,
            })
            .collect();
        if boundary == Boundary::Periodic {
            edges.push(Coupling {
                i: n - 1,
                j: 0,
                strength: j,
            });
        }
        Self::new(n, edges, vec![0.0; n], boundary)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[Coupling] {
        &self.edges
    }

    pub fn fields(&self) -> &[f64] {
        &self.fields
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    fn neighbors_of(&self, i: usize) -> &[(usize, f64)] {
        &self.neighbors[self.offsets[i]..self.offsets[i + 1]]
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n {
            return Err(contract(format!(
                "state has {len} rotors but the problem has {}",
                self.n
            )));
        }
        Ok(())
    }

    /// `H = A·(−Σ cos θᵢ) + B·(−Σ J_ij sin θᵢ sin θⱼ − Σ gᵢ sin θᵢ)`.
    pub fn energy(&self, theta: &[f64], a: f64, b: f64) -> Result<f64> {
        self.check_len(theta.len())?;
        let transverse: f64 = theta.iter().map(|t| t.cos()).sum();
        let bonds: f64 = self
            .edges
            .iter()
            .map(|e| e.strength * theta[e.i].sin() * theta[e.j].sin())
            .sum();
        let longitudinal: f64 = theta
            .iter()
            .zip(&self.fields)
            .map(|(t, g)| g * t.sin())
            .sum();
        Ok(-a * transverse - b * (bonds + longitudinal))
    }

    /// `∂H/∂θᵢ = −B·Σⱼ J_ij cos θᵢ sin θⱼ − B·gᵢ cos θᵢ + A·sin θᵢ`.
    pub fn gradient(&self, theta: &[f64], a: f64, b: f64) -> Result<Vec<f64>> {
        let mut work = vec![0.0; self.n];
        let mut grad = vec![0.0; self.n];
        self.gradient_into(theta, a, b, &mut work, &mut grad)?;
        Ok(grad)
    }

    /// Allocation-free gradient; `work` receives `sin θ` and must have length `n`.
    pub fn gradient_into(
        &self,
        theta: &[f64],
        a: f64,
        b: f64,
        work: &mut [f64],
        grad: &mut [f64],
    ) -> Result<()> {
        self.check_len(theta.len())?;
        self.check_len(work.len())?;
        self.check_len(grad.len())?;
        // grad temporarily holds cos θ
        for ((s, c), t) in work.iter_mut().zip(grad.iter_mut()).zip(theta) {
            (*s, *c) = t.sin_cos();
        }
        for i in 0..self.n {
            let local: f64 = self
                .neighbors_of(i)
                .iter()
                .map(|&(j, coupling)| coupling * work[j])
                .sum::<f64>()
                + self.fields[i];
            grad[i] = a * work[i] - b * grad[i] * local;
        }
        Ok(())
    }
}

/// Anything that supplies a potential energy and its angle gradient at time `t`.
///
/// The integrator is written against this trait so the same scheme can be
/// exercised on analytically solvable force laws.
pub trait Potential: Sync {
    fn dim(&self) -> usize;

    fn energy(&self, theta: &[f64], t: f64) -> Result<f64>;

    /// Write `∂H/∂θ` into `grad`. `work` is scratch space of length `dim()`.
    fn gradient(&self, theta: &[f64], t: f64, work: &mut [f64], grad: &mut [f64]) -> Result<()>;
}

/// The problem graph driven by a schedule.
#[derive(Debug, Clone, Copy)]
pub struct AnnealingHamiltonian<'a, S: Schedule> {
    pub problem: &'a IsingProblem,
    pub schedule: &'a S,
}

impl<'a, S: Schedule> AnnealingHamiltonian<'a, S> {
    pub fn new(problem: &'a IsingProblem, schedule: &'a S) -> Self {
        Self { problem, schedule }
    }
}

impl<S: Schedule> Potential for AnnealingHamiltonian<'_, S> {
    fn dim(&self) -> usize {
        self.problem.n()
    }

    fn energy(&self, theta: &[f64], t: f64) -> Result<f64> {
        let (a, b) = self.schedule.eval(t)?;
        self.problem.energy(theta, a, b)
    }

    fn gradient(&self, theta: &[f64], t: f64, work: &mut [f64], grad: &mut [f64]) -> Result<()> {
        let (a, b) = self.schedule.eval(t)?;
        self.problem.gradient_into(theta, a, b, work, grad)
    }
}

/// Bath coupling: damping `γ`, temperature `T` (with `k_B = 1`) and rotor inertia `m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BathParams {
    gamma: f64,
    temperature: f64,
    mass: f64,
}

impl BathParams {
    pub fn new(gamma: f64, temperature: f64, mass: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(domain(format!("damping must be non-negative, got {gamma}")));
        }
        if !(temperature.is_finite() && temperature >= 0.0) {
            return Err(domain(format!("temperature must be non-negative, got {temperature}")));
        }
        if !(mass.is_finite() && mass > 0.0) {
            return Err(domain(format!("mass must be positive, got {mass}")));
        }
        if gamma == 0.0 && temperature > 0.0 {
            return Err(SvlError::Domain(
                "a bath with zero damping cannot sustain a positive temperature".into(),
            ));
        }
        Ok(Self {
            gamma,
            temperature,
            mass,
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Diffusion coefficient `D = γT`.
    pub fn diffusion(&self) -> f64 {
        self.gamma * self.temperature
    }
}

/// Angles and conjugate momenta at time `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpaceState {
    pub theta: Vec<f64>,
    pub p: Vec<f64>,
    pub t: f64,
}

impl PhaseSpaceState {
    pub fn new(theta: Vec<f64>, p: Vec<f64>, t: f64) -> Result<Self> {
        if theta.len() != p.len() {
            return Err(contract(format!(
                "angle and momentum vectors differ in length ({} vs {})",
                theta.len(),
                p.len()
            )));
        }
        Ok(Self { theta, p, t })
    }

    pub fn at_rest(n: usize) -> Self {
        Self {
            theta: vec![0.0; n],
            p: vec![0.0; n],
            t: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite()
            && self.theta.iter().all(|x| x.is_finite())
            && self.p.iter().all(|x| x.is_finite())
    }

    pub fn kinetic_energy(&self, mass: f64) -> f64 {
        self.p.iter().map(|p| p * p).sum::<f64>() / (2.0 * mass)
    }
}
