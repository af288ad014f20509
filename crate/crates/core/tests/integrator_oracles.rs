use nalgebra::{Matrix2, Matrix4, Vector2};
use svl_core::integrator::{simulate, Weak2Stepper};
use svl_core::{
    initialize_state, simulate_trajectory, BathParams, Boundary, FrozenSchedule, InitStrategy, IntegrationParams,
    IsingProblem, NoiseStream, PhaseSpaceState, Potential, Result,
};

/// `H = Σ ½ k θ²`, the linearized rotor.
struct Harmonic {
    n: usize,
    k: f64,
}

impl Potential for Harmonic {
    fn dim(&self) -> usize {
        self.n
    }

    fn energy(&self, theta: &[f64], _t: f64) -> Result<f64> {
        Ok(theta.iter().map(|x| 0.5 * self.k * x * x).sum())
    }

    fn gradient(&self, theta: &[f64], _t: f64, _work: &mut [f64], grad: &mut [f64]) -> Result<()> {
        for (g, x) in grad.iter_mut().zip(theta) {
            *g = self.k * x;
        }
        Ok(())
    }
}

fn one_step(pot: &Harmonic, bath: &BathParams, y: (f64, f64), dt: f64, g: f64) -> (f64, f64) {
    let mut s = PhaseSpaceState::new(vec![y.0], vec![y.1], 0.0).unwrap();
    Weak2Stepper::new(1).step_with(pot, bath, &mut s, dt, &[g], 0).unwrap();
    (s.theta[0], s.p[0])
}

#[test]
fn two_steps_match_hand_heun_arithmetic() {
    let (k, m, gamma) = (1.5, 2.0, 0.3);
    let pot = Harmonic { n: 1, k };
    let bath = BathParams::new(gamma, 0.0, m).unwrap();
    let dt = 0.1;
    let f = |x: f64, p: f64| (p / m, -k * x - gamma / m * p);
    let mut hand = (0.7, -0.4);
    let mut lib = hand;
    for _ in 0..2 {
        let (dx, dp) = f(hand.0, hand.1);
        let (gx, gp) = (hand.0 + dx * dt, hand.1 + dp * dt);
        let (dx2, dp2) = f(gx, gp);
        hand = (hand.0 + 0.5 * (dx + dx2) * dt, hand.1 + 0.5 * (dp + dp2) * dt);
        lib = one_step(&pot, &bath, lib, dt, 0.0);
    }
    assert!((hand.0 - lib.0).abs() < 1e-15 && (hand.1 - lib.1).abs() < 1e-15);
}

/// Exact mean and covariance of the linear SDE at time `t` from a point start.
fn ou_moments(k: f64, m: f64, gamma: f64, temp: f64, y0: Vector2<f64>, t: f64) -> (Vector2<f64>, Matrix2<f64>) {
    let f = Matrix2::new(0.0, 1.0 / m, -k, -gamma / m);
    let mean = (f * t).exp() * y0;
    let q = Matrix2::new(0.0, 0.0, 0.0, 2.0 * gamma * temp);
    let mut block = Matrix4::zeros();
    block.fixed_view_mut::<2, 2>(0, 0).copy_from(&(-f * t));
    block.fixed_view_mut::<2, 2>(0, 2).copy_from(&(q * t));
    block.fixed_view_mut::<2, 2>(2, 2).copy_from(&(f.transpose() * t));
    let e = block.exp();
    let phi_t = e.fixed_view::<2, 2>(2, 2).into_owned();
    let g12 = e.fixed_view::<2, 2>(0, 2).into_owned();
    (mean, phi_t.transpose() * g12)
}

/// Exact moments of the discrete scheme, which is affine in `(Y, G)` for a linear force.
fn scheme_moments(pot: &Harmonic, bath: &BathParams, y0: Vector2<f64>, t: f64, dt: f64) -> (Vector2<f64>, Matrix2<f64>) {
    let c0 = one_step(pot, bath, (1.0, 0.0), dt, 0.0);
    let c1 = one_step(pot, bath, (0.0, 1.0), dt, 0.0);
    let map = Matrix2::new(c0.0, c1.0, c0.1, c1.1);
    let kick = one_step(pot, bath, (0.0, 0.0), dt, 1.0);
    let c = Vector2::new(kick.0, kick.1);
    let steps = (t / dt).round() as usize;
    let (mut mean, mut cov) = (y0, Matrix2::zeros());
    for _ in 0..steps {
        mean = map * mean;
        cov = map * cov * map.transpose() + c * c.transpose();
    }
    (mean, cov)
}

#[test]
fn weak_order_two_on_the_linear_sde() {
    let (k, m, gamma, temp, t) = (1.0, 1.0, 0.5, 1.0, 2.0);
    let pot = Harmonic { n: 1, k };
    let bath = BathParams::new(gamma, temp, m).unwrap();
    let y0 = Vector2::new(1.0, 0.0);
    let (mean, cov) = ou_moments(k, m, gamma, temp, y0, t);
    let exact = [mean[0], cov[(0, 0)] + mean[0] * mean[0]];
    let ladder = [0.2, 0.1, 0.05, 0.025, 0.0125];
    for moment in 0..2 {
        let pts: Vec<(f64, f64)> = ladder
            .iter()
            .map(|&dt| {
                let (sm, sc) = scheme_moments(&pot, &bath, y0, t, dt);
                let value = [sm[0], sc[(0, 0)] + sm[0] * sm[0]][moment];
                (dt, (value - exact[moment]).abs())
            })
            .collect();
        let slope = svl_core::analysis::log_log_slope(&pts).unwrap();
        assert!((slope - 2.0).abs() <= 0.3, "moment {moment}: slope {slope}, {pts:?}");
    }
}

#[test]
fn ensemble_moments_match_the_ornstein_uhlenbeck_solution() {
    let (k, m, gamma, temp, t) = (1.0, 1.0, 2.0, 0.5, 1.0);
    let pot = Harmonic { n: 1000, k };
    let bath = BathParams::new(gamma, temp, m).unwrap();
    let y0 = Vector2::new(0.8, -0.3);
    let (mean, cov) = ou_moments(k, m, gamma, temp, y0, t);
    let params = IntegrationParams::new(0.01, u64::MAX).unwrap();
    let init = PhaseSpaceState::new(vec![y0[0]; pot.n], vec![y0[1]; pot.n], 0.0).unwrap();
    let (mut s1, mut s2, mut n) = (0.0, 0.0, 0.0);
    for traj in 0..20 {
        let mut noise = NoiseStream::new(11, traj);
        let fin = simulate(&init, &pot, t, &bath, &params, &mut noise, |_, _| {}).unwrap();
        for x in &fin.theta {
            s1 += x;
            s2 += x * x;
            n += 1.0;
        }
    }
    let sample_mean = s1 / n;
    let sample_var = s2 / n - sample_mean * sample_mean;
    let var = cov[(0, 0)];
    assert!((sample_mean - mean[0]).abs() < 4.0 * (var / n).sqrt(), "{sample_mean} vs {}", mean[0]);
    assert!((sample_var - var).abs() < 4.0 * var * (2.0 / n).sqrt(), "{sample_var} vs {var}");
}

#[test]
fn linearized_rotor_equilibrates_to_the_kubo_variances() {
    let (k, m, gamma, temp) = (2.0, 1.0, 1.0, 0.2);
    let pot = Harmonic { n: 64, k };
    let bath = BathParams::new(gamma, temp, m).unwrap();
    let params = IntegrationParams::new(0.02, 10).unwrap();
    let init = PhaseSpaceState::at_rest(pot.n);
    let mut noise = NoiseStream::new(5, 0);
    let (mut x2, mut p2, mut samples) = (0.0, 0.0, 0.0);
    simulate(&init, &pot, 4000.0, &bath, &params, &mut noise, |t, s| {
        if t > 50.0 {
            x2 += s.theta.iter().map(|x| x * x).sum::<f64>();
            p2 += s.p.iter().map(|p| p * p).sum::<f64>();
            samples += s.theta.len() as f64;
        }
    })
    .unwrap();
    assert!((x2 / samples / (temp / k) - 1.0).abs() < 0.03, "Var θ = {}", x2 / samples);
    assert!((p2 / samples / (m * temp) - 1.0).abs() < 0.03, "Var p = {}", p2 / samples);
}

#[test]
fn equipartition_under_the_transverse_field() {
    let problem = IsingProblem::uniform_chain(32, 1.0, Boundary::Open).unwrap();
    let bath = BathParams::new(1.0, 0.2, 1.0).unwrap();
    let frozen = FrozenSchedule::new(1.0, 0.0, 2000.0).unwrap();
    let params = IntegrationParams::new(0.01, 5).unwrap();
    let mut noise = NoiseStream::new(3, 0);
    let init = initialize_state(&problem, &bath, InitStrategy::Thermal, &mut noise).unwrap();
    let (mut ke, mut samples) = (0.0, 0.0);
    simulate_trajectory(&init, &problem, &frozen, &bath, &params, &mut noise, |t, s| {
        if t > 20.0 {
            ke += s.kinetic_energy(1.0) / s.len() as f64;
            samples += 1.0;
        }
    })
    .unwrap();
    let per_rotor = ke / samples;
    assert!((per_rotor / 0.1 - 1.0).abs() < 0.05, "<p²/2m> = {per_rotor}");
}

fn energy_drift(dt: f64) -> f64 {
    let problem = IsingProblem::uniform_chain(16, 1.0, Boundary::Periodic).unwrap();
    let bath = BathParams::new(0.0, 0.0, 1.0).unwrap();
    let frozen = FrozenSchedule::new(0.6, 0.8, 20.0).unwrap();
    let theta: Vec<f64> = (0..16).map(|i| 0.3 * (i as f64 * 1.7).sin()).collect();
    let p: Vec<f64> = (0..16).map(|i| 0.5 * (i as f64 * 0.9).cos()).collect();
    let init = PhaseSpaceState::new(theta, p, 0.0).unwrap();
    let total = |s: &PhaseSpaceState| problem.energy(&s.theta, 0.6, 0.8).unwrap() + s.kinetic_energy(1.0);
    let e0 = total(&init);
    let params = IntegrationParams::new(dt, 1).unwrap();
    let mut noise = NoiseStream::new(0, 0);
    let mut worst: f64 = 0.0;
    simulate_trajectory(&init, &problem, &frozen, &bath, &params, &mut noise, |_, s| {
        worst = worst.max((total(s) - e0).abs());
    })
    .unwrap();
    worst / 20.0
}

#[test]
fn hamiltonian_limit_energy_drift_is_second_order() {
    let coarse = energy_drift(0.02);
    let fine = energy_drift(0.01);
    assert!(coarse / fine >= 3.0, "drift ratio {}", coarse / fine);
}

#[test]
fn noise_increments_are_white_and_uncorrelated() {
    let (gamma, temp, dt): (f64, f64, f64) = (0.7, 0.3, 0.01);
    let d = gamma * temp;
    let n = 6;
    let draws = 200_000;
    let mut noise = NoiseStream::new(99, 4);
    let mut g = vec![0.0; n];
    let mut cov = vec![0.0; n * n];
    for _ in 0..draws {
        noise.fill(&mut g);
        // force increment ξ Δt = √(2D Δt) G
        for i in 0..n {
            for j in 0..n {
                let xi_i = (2.0 * d / dt).sqrt() * g[i];
                let xi_j = (2.0 * d / dt).sqrt() * g[j];
                cov[i * n + j] += xi_i * xi_j;
            }
        }
    }
    let target = 2.0 * d / dt;
    let tol = 5.0 * target * (2.0 / draws as f64).sqrt();
    for i in 0..n {
        for j in 0..n {
            let c = cov[i * n + j] / draws as f64;
            let expected = if i == j { target } else { 0.0 };
            assert!((c - expected).abs() < tol, "({i},{j}): {c}");
        }
    }
}

#[test]
fn strong_damping_relaxes_to_a_stationary_point() {
    let problem = IsingProblem::uniform_chain(8, 1.0, Boundary::Open).unwrap();
    let bath = BathParams::new(20.0, 0.0, 1.0).unwrap();
    let (a, b) = (0.3, 1.0);
    let frozen = FrozenSchedule::new(a, b, 600.0).unwrap();
    let theta: Vec<f64> = (0..8).map(|i| 2.0 * (i as f64 * 2.3).sin()).collect();
    let init = PhaseSpaceState::new(theta, vec![0.5; 8], 0.0).unwrap();
    let params = IntegrationParams::new(0.05, u64::MAX).unwrap();
    let mut noise = NoiseStream::new(1, 0);
    let fin = simulate_trajectory(&init, &problem, &frozen, &bath, &params, &mut noise, |_, _| {}).unwrap();
    let grad = problem.gradient(&fin.theta, a, b).unwrap();
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    assert!(norm < 1e-3, "gradient norm {norm}");
}

#[test]
fn thermal_momenta_follow_equipartition() {
    let problem = IsingProblem::uniform_chain(100, 1.0, Boundary::Open).unwrap();
    let bath = BathParams::new(1.0, 0.5, 1.0).unwrap();
    let mut sum_sq = 0.0;
    let mut count = 0.0;
    for traj in 0..100 {
        let mut noise = NoiseStream::new(8, traj);
        let s = initialize_state(&problem, &bath, InitStrategy::Thermal, &mut noise).unwrap();
        assert!(s.theta.iter().all(|&x| x == 0.0));
        sum_sq += s.p.iter().map(|p| p * p).sum::<f64>();
        count += s.len() as f64;
    }
    let var = sum_sq / count;
    let sigma = 0.5 * (2.0 / count).sqrt();
    assert!((var - 0.5).abs() < 3.0 * sigma, "Var p = {var}");
}

#[test]
fn trajectories_are_reproducible_bit_for_bit() {
    let problem = IsingProblem::uniform_chain(16, 1.0, Boundary::Open).unwrap();
    let bath = BathParams::new(0.5, 0.05, 1.0).unwrap();
    let schedule = svl_core::AnnealSchedule::linear(5.0).unwrap();
    let params = IntegrationParams::new(0.01, u64::MAX).unwrap();
    let run = || {
        let mut noise = NoiseStream::new(77, 3);
        let init = initialize_state(&problem, &bath, InitStrategy::Thermal, &mut noise).unwrap();
        simulate_trajectory(&init, &problem, &schedule, &bath, &params, &mut noise, |_, _| {}).unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(a.t, 5.0);
    assert!(a.theta.iter().zip(&b.theta).all(|(x, y)| x.to_bits() == y.to_bits()));
    assert!(a.p.iter().zip(&b.p).all(|(x, y)| x.to_bits() == y.to_bits()));
}
