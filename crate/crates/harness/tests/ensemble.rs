mod common;

use svl_core::observables::bond_count;
use svl_core::{count_kinks, initialize_state, IsingProblem, NoiseStream};
use svl_harness::{build_pool, cell_seed, run_ensemble, CellSpec};

use common::small_config;

fn cell(gamma: f64, t_a: f64) -> CellSpec {
    CellSpec {
        gamma_index: 0,
        ta_index: 0,
        gamma,
        t_a,
    }
}

#[test]
fn repeated_runs_are_bit_identical() {
    let config = small_config(vec![1.0], vec![10.0], 100);
    let pool = build_pool(2).unwrap();
    let a = run_ensemble(&config, cell(1.0, 10.0), &pool).unwrap();
    let b = run_ensemble(&config, cell(1.0, 10.0), &pool).unwrap();
    assert_eq!(a.stats, b.stats);
    assert!(a.is_valid());
}

#[test]
fn worker_count_does_not_change_statistics() {
    let mut config = small_config(vec![0.5], vec![10.0], 100);
    config.integration.record_stride = Some(20);
    let one = run_ensemble(&config, cell(0.5, 10.0), &build_pool(1).unwrap()).unwrap();
    let four = run_ensemble(&config, cell(0.5, 10.0), &build_pool(4).unwrap()).unwrap();
    assert_eq!(one.stats, four.stats);
    assert_eq!(one.time_series, four.time_series);
    assert_eq!(one.time_series.last().unwrap().t, 10.0);
}

#[test]
fn cells_draw_independent_noise() {
    let seeds = [cell_seed(1, 0, 0), cell_seed(1, 0, 1), cell_seed(1, 1, 0), cell_seed(2, 0, 0)];
    for i in 0..seeds.len() {
        for j in i + 1..seeds.len() {
            assert_ne!(seeds[i], seeds[j]);
        }
    }
    // growing the grid leaves existing cells untouched
    let small = small_config(vec![1.0], vec![10.0], 100);
    let large = small_config(vec![1.0, 2.0], vec![10.0, 20.0], 100);
    let pool = build_pool(1).unwrap();
    let a = run_ensemble(&small, cell(1.0, 10.0), &pool).unwrap();
    let b = run_ensemble(&large, cell(1.0, 10.0), &pool).unwrap();
    assert_eq!(a.stats, b.stats);
}

#[test]
fn instantaneous_quench_freezes_the_initial_sign_pattern() {
    // θ(t_a) ≈ p(0) t_a, so the kinks are those of the initial momenta;
    // weak damping keeps the bath kicks far below the thermal momenta
    let gamma = 1e-8;
    let mut config = small_config(vec![gamma], vec![1e-3], 400);
    config.integration.dt = None;
    let c = cell(gamma, 1e-3);
    let result = run_ensemble(&config, c, &build_pool(1).unwrap()).unwrap();
    let stats = result.stats.unwrap();

    let problem = IsingProblem::uniform_chain(24, 1.0, config.problem.boundary).unwrap();
    let bath = config.bath(gamma).unwrap();
    let seed = cell_seed(config.ensemble.master_seed, 0, 0);
    let mut oracle = std::collections::BTreeMap::new();
    for k in 0..400 {
        let mut noise = NoiseStream::new(seed, k);
        let init = initialize_state(&problem, &bath, config.integration.init, &mut noise).unwrap();
        *oracle.entry(count_kinks(&init.p, config.problem.boundary).unwrap()).or_insert(0u64) += 1;
    }
    assert_eq!(stats.histogram, oracle);
    // independent symmetric signs: each bond is a kink with probability 1/2
    assert!((stats.mean_density - 0.5).abs() < 4.0 * stats.density_err);
    assert_eq!(stats.bonds, bond_count(24, config.problem.boundary));
}

#[test]
fn zero_temperature_adiabatic_limit_has_no_kinks() {
    let mut config = small_config(vec![5.0], vec![2000.0], 100);
    config.bath.temperature = 0.0;
    config.integration.dt = Some(0.1);
    let stats = run_ensemble(&config, cell(5.0, 2000.0), &build_pool(1).unwrap())
        .unwrap()
        .stats
        .unwrap();
    assert_eq!(stats.mean_density, 0.0);
}

#[test]
fn standard_error_shrinks_like_inverse_root_ensemble_size() {
    let pool = build_pool(1).unwrap();
    let mut pts = Vec::new();
    for n in [100, 200, 400, 800, 1600] {
        let config = small_config(vec![2.0], vec![5.0], n);
        let stats = run_ensemble(&config, cell(2.0, 5.0), &pool).unwrap().stats.unwrap();
        pts.push((n as f64, stats.kappa_err[0]));
    }
    let slope = svl_core::analysis::log_log_slope(&pts).unwrap();
    assert!((slope + 0.5).abs() <= 0.1, "slope {slope}: {pts:?}");
}

#[test]
fn relaxation_after_the_anneal_only_extends_the_time_series() {
    let mut config = small_config(vec![1.0], vec![10.0], 100);
    config.integration.record_stride = Some(40);
    let pool = build_pool(1).unwrap();
    let plain = run_ensemble(&config, cell(1.0, 10.0), &pool).unwrap();
    config.integration.relax_after = Some(4.0);
    let relaxed = run_ensemble(&config, cell(1.0, 10.0), &pool).unwrap();
    assert_eq!(plain.stats, relaxed.stats);
    assert!(relaxed.time_series.len() > plain.time_series.len());
    assert_eq!(relaxed.time_series.last().unwrap().t, 14.0);
}
