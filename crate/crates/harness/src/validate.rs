//! Self-checks of the numerical core, run by `svl validate`.

use nalgebra::{Matrix2, Matrix4, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use svl_core::analysis::log_log_slope;
use svl_core::equilibrium::{gaussian_spectrum, solve, EpsilonParam};
use svl_core::integrator::Weak2Stepper;
use svl_core::{
    simulate_trajectory, BathParams, Boundary, Coupling, FrozenSchedule, IntegrationParams, IsingProblem,
    NoiseStream, PhaseSpaceState, Potential,
};

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn outcome(name: &'static str, passed: bool, detail: String) -> CheckOutcome {
    CheckOutcome { name, passed, detail }
}

/// Random graphs with `N ≤ 16`; every gradient component must match the
/// central difference (`h = 1e−5`) of the energy to `1e−6` relative.
pub fn gradient_check(instances: usize, seed: u64) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let n = rng.random_range(2..=16);
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.random::<bool>() {
                    edges.push(Coupling {
                        i,
                        j,
                        strength: rng.random_range(-2.0..2.0),
                    });
                }
            }
        }
        let fields: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let p = IsingProblem::new(n, edges, fields, Boundary::Open).expect("valid random graph");
        let theta: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let (a, b) = (rng.random::<f64>(), rng.random::<f64>());
        let grad = p.gradient(&theta, a, b).expect("dimensions match");
        for i in 0..n {
            let mut up = theta.clone();
            let mut down = theta.clone();
            up[i] += h;
            down[i] -= h;
            let fd = (p.energy(&up, a, b).unwrap() - p.energy(&down, a, b).unwrap()) / (2.0 * h);
            worst = worst.max((fd - grad[i]).abs() / grad[i].abs().max(1.0));
        }
    }
    outcome(
        "gradient_finite_difference",
        worst <= 1e-6,
        format!("{instances} instances, worst relative error {worst:.2e} (limit 1e-6)"),
    )
}

struct Harmonic {
    k: f64,
}

impl Potential for Harmonic {
    fn dim(&self) -> usize {
        1
    }

    fn energy(&self, theta: &[f64], _t: f64) -> svl_core::Result<f64> {
        Ok(0.5 * self.k * theta[0] * theta[0])
    }

    fn gradient(&self, theta: &[f64], _t: f64, _work: &mut [f64], grad: &mut [f64]) -> svl_core::Result<()> {
        grad[0] = self.k * theta[0];
        Ok(())
    }
}

/// Slopes of the weak error in `E[θ]` and `E[θ²]` against `Δt` for the linear
/// SDE. The scheme is affine in the state and the noise, so its moments are
/// propagated exactly; the reference moments come from matrix exponentials.
pub fn weak_order_slopes() -> [f64; 2] {
    let (k, m, gamma, temp, t) = (1.0, 1.0, 0.5, 1.0, 2.0);
    let pot = Harmonic { k };
    let bath = BathParams::new(gamma, temp, m).expect("valid bath");
    let step = |y: (f64, f64), dt: f64, g: f64| {
        let mut s = PhaseSpaceState::new(vec![y.0], vec![y.1], 0.0).unwrap();
        Weak2Stepper::new(1).step_with(&pot, &bath, &mut s, dt, &[g], 0).unwrap();
        Vector2::new(s.theta[0], s.p[0])
    };
    let y0 = Vector2::new(1.0, 0.0);

    let f = Matrix2::new(0.0, 1.0 / m, -k, -gamma / m);
    let mean = (f * t).exp() * y0;
    let mut block = Matrix4::zeros();
    block.fixed_view_mut::<2, 2>(0, 0).copy_from(&(-f * t));
    block.fixed_view_mut::<2, 2>(0, 2).copy_from(&(Matrix2::new(0.0, 0.0, 0.0, 2.0 * gamma * temp) * t));
    block.fixed_view_mut::<2, 2>(2, 2).copy_from(&(f.transpose() * t));
    let e = block.exp();
    let cov = e.fixed_view::<2, 2>(2, 2).transpose() * e.fixed_view::<2, 2>(0, 2);
    let exact = [mean[0], cov[(0, 0)] + mean[0] * mean[0]];

    let mut errors = [Vec::new(), Vec::new()];
    for dt in [0.2, 0.1, 0.05, 0.025, 0.0125] {
        let c0 = step((1.0, 0.0), dt, 0.0);
        let c1 = step((0.0, 1.0), dt, 0.0);
        let map = Matrix2::from_columns(&[c0, c1]);
        let kick = step((0.0, 0.0), dt, 1.0);
        let (mut mu, mut sigma) = (y0, Matrix2::zeros());
        for _ in 0..(t / dt).round() as usize {
            mu = map * mu;
            sigma = map * sigma * map.transpose() + kick * kick.transpose();
        }
        let scheme = [mu[0], sigma[(0, 0)] + mu[0] * mu[0]];
        for i in 0..2 {
            errors[i].push((dt, (scheme[i] - exact[i]).abs()));
        }
    }
    [
        log_log_slope(&errors[0]).unwrap_or(f64::NAN),
        log_log_slope(&errors[1]).unwrap_or(f64::NAN),
    ]
}

pub fn weak_order_check() -> CheckOutcome {
    let s = weak_order_slopes();
    outcome(
        "weak_order_slope",
        s.iter().all(|x| (x - 2.0).abs() <= 0.3),
        format!("slopes E[x] {:.3}, E[x^2] {:.3} (target 2.0 +- 0.3)", s[0], s[1]),
    )
}

/// `⟨p²⟩/m` over a `steps`-step static run of free transverse-field rotors.
pub fn equipartition_ratio(steps: u64, seed: u64) -> f64 {
    let n = 64;
    let (temp, dt) = (0.2, 0.01);
    let problem = IsingProblem::uniform_chain(n, 1.0, Boundary::Open).expect("valid chain");
    let bath = BathParams::new(1.0, temp, 1.0).expect("valid bath");
    let duration = steps as f64 * dt;
    let frozen = FrozenSchedule::new(1.0, 0.0, duration).expect("valid schedule");
    let params = IntegrationParams::new(dt, 1).expect("valid step");
    let mut noise = NoiseStream::new(seed, 0);
    let init = PhaseSpaceState::at_rest(n);
    let burn = 20.0;
    let (mut sum, mut count) = (0.0, 0.0);
    simulate_trajectory(&init, &problem, &frozen, &bath, &params, &mut noise, |t, s| {
        if t > burn {
            sum += s.p.iter().map(|p| p * p).sum::<f64>();
            count += n as f64;
        }
    })
    .expect("static run stays finite");
    sum / count / temp
}

pub fn equipartition_check(seed: u64) -> CheckOutcome {
    let r = equipartition_ratio(1_000_000, seed);
    outcome(
        "equipartition",
        (r - 1.0).abs() <= 0.02,
        format!("<p^2>/(mT) = {r:.4} over 1e6 steps (target 1 +- 0.02)"),
    )
}

pub fn energy_drift_check() -> CheckOutcome {
    let drift = |dt: f64| {
        let problem = IsingProblem::uniform_chain(16, 1.0, Boundary::Periodic).unwrap();
        let bath = BathParams::new(0.0, 0.0, 1.0).unwrap();
        let (a, b) = (0.6, 0.8);
        let frozen = FrozenSchedule::new(a, b, 20.0).unwrap();
        let theta: Vec<f64> = (0..16).map(|i| 0.3 * (i as f64 * 1.7).sin()).collect();
        let p: Vec<f64> = (0..16).map(|i| 0.5 * (i as f64 * 0.9).cos()).collect();
        let init = PhaseSpaceState::new(theta, p, 0.0).unwrap();
        let total = |s: &PhaseSpaceState| problem.energy(&s.theta, a, b).unwrap() + s.kinetic_energy(1.0);
        let e0 = total(&init);
        let params = IntegrationParams::new(dt, 1).unwrap();
        let mut noise = NoiseStream::new(0, 0);
        let mut worst: f64 = 0.0;
        simulate_trajectory(&init, &problem, &frozen, &bath, &params, &mut noise, |_, s| {
            worst = worst.max((total(s) - e0).abs());
        })
        .unwrap();
        worst
    };
    let ratio = drift(0.02) / drift(0.01);
    outcome(
        "hamiltonian_energy_drift",
        ratio >= 3.0,
        format!("drift ratio under dt halving {ratio:.2} (needs >= 3)"),
    )
}

pub fn gaussian_agreement_check() -> CheckOutcome {
    let eps = EpsilonParam::new(-0.5).unwrap();
    let numeric = solve(eps, 1e3).map(|s| s.xi);
    let gauss = gaussian_spectrum(eps, 1e3).map(|g| g.xi);
    match (numeric, gauss) {
        (Ok(n), Ok(g)) => {
            let rel = (g / n - 1.0).abs();
            outcome(
                "gaussian_vs_transfer_matrix",
                rel < 0.02,
                format!("xi {n:.5} numeric vs {g:.5} gaussian at eps=-0.5, beta=1e3 (rel {rel:.2e}, limit 0.02)"),
            )
        }
        (n, g) => outcome("gaussian_vs_transfer_matrix", false, format!("{n:?} / {g:?}")),
    }
}

/// Run every check in order.
pub fn run_all(seed: u64) -> Vec<CheckOutcome> {
    vec![
        gradient_check(100, seed),
        weak_order_check(),
        equipartition_check(seed),
        energy_drift_check(),
        gaussian_agreement_check(),
    ]
}
