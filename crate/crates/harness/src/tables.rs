//! Power-law fits over result rows and transfer-operator tables.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use svl_core::analysis::{default_fit_window, fit_power_law, PowerLawFit};
use svl_core::equilibrium::{
    build_kernel, default_grid_size, gaussian_spectrum, leading_spectrum, EpsilonParam, GAUSSIAN_MIN_BETA,
};

use crate::config::{validate_equilibrium, EquilibriumSpec};
use crate::error::Result;
use crate::output::ResultRow;

/// Summary of one `α` fit, as written to `fits.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub gamma: f64,
    pub alpha: f64,
    pub stderr: f64,
    pub window_min: f64,
    pub window_max: f64,
    pub n_points: usize,
    pub r_squared: f64,
}

impl FitRecord {
    pub fn new(gamma: f64, fit: &PowerLawFit) -> Self {
        Self {
            gamma,
            alpha: fit.exponent,
            stderr: fit.stderr,
            window_min: fit.window.0,
            window_max: fit.window.1,
            n_points: fit.n_points,
            r_squared: fit.r_squared,
        }
    }
}

/// Rows grouped by `γ` (in order of first appearance), each sorted by `t_a`.
pub fn density_curves(rows: &[ResultRow]) -> Vec<(f64, Vec<(f64, f64)>)> {
    let mut curves: Vec<(f64, Vec<(f64, f64)>)> = Vec::new();
    for r in rows {
        match curves.iter_mut().find(|(g, _)| *g == r.gamma) {
            Some((_, pts)) => pts.push((r.t_a, r.density)),
            None => curves.push((r.gamma, vec![(r.t_a, r.density)])),
        }
    }
    for (_, pts) in &mut curves {
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    curves
}

/// Fit `density ∝ t_a^{−α}` per `γ` over the default slow-quench window.
pub fn fit_rows(rows: &[ResultRow]) -> Vec<(f64, svl_core::Result<PowerLawFit>)> {
    density_curves(rows)
        .into_iter()
        .map(|(gamma, pts)| {
            let fit = default_fit_window(&pts).and_then(|w| fit_power_law(&pts, w));
            (gamma, fit)
        })
        .collect()
}

/// One line of `equilibrium.csv`. Where `method` ends in `_log` the two `λ`
/// columns hold `ln λ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumRow {
    pub epsilon: f64,
    pub beta: f64,
    pub xi: f64,
    pub mz: f64,
    pub lambda0: f64,
    pub lambda1: f64,
    pub method: String,
}

pub const EQUILIBRIUM_HEADER: [&str; 7] = ["epsilon", "beta", "xi", "mz", "lambda0", "lambda1", "method"];

/// Above this inverse temperature the table stores `ln λ`.
pub const LOG_LAMBDA_BETA: f64 = 1e3;

pub fn equilibrium_table(spec: &EquilibriumSpec, pool: &rayon::ThreadPool) -> Result<Vec<EquilibriumRow>> {
    validate_equilibrium(spec)?;
    let eps = linspace(spec.epsilon_min, spec.epsilon_max, spec.epsilon_points);
    let jobs: Vec<(f64, f64)> = spec
        .betas
        .iter()
        .flat_map(|&b| eps.iter().map(move |&e| (b, e)))
        .collect();
    let rows: Vec<Result<Vec<EquilibriumRow>>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(beta, e)| -> Result<Vec<EquilibriumRow>> {
                let ep = EpsilonParam::new(e)?;
                let m = spec.grid.unwrap_or_else(|| default_grid_size(beta));
                let s = leading_spectrum(&build_kernel(ep, beta, m)?)?;
                let logs = beta > LOG_LAMBDA_BETA;
                let suffix = if logs { "_log" } else { "" };
                let mut out = vec![EquilibriumRow {
                    epsilon: e,
                    beta,
                    xi: s.xi,
                    mz: s.mz,
                    lambda0: if logs { s.log_lambda0 } else { s.lambda0 },
                    lambda1: if logs { s.log_lambda1 } else { s.lambda1 },
                    method: format!("transfer_matrix{suffix}"),
                }];
                if spec.gaussian && beta >= GAUSSIAN_MIN_BETA && e > -1.0 && e < 1.0 {
                    if let Ok(g) = gaussian_spectrum(ep, beta) {
                        out.push(EquilibriumRow {
                            epsilon: e,
                            beta,
                            xi: g.xi,
                            mz: f64::NAN,
                            lambda0: if logs { g.log_lambda0 } else { g.lambda0 },
                            lambda1: f64::NAN,
                            method: format!("gaussian{suffix}"),
                        });
                    }
                }
                Ok(out)
            })
            .collect()
    });
    let mut table = Vec::new();
    for r in rows {
        table.extend(r?);
    }
    Ok(table)
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n)
            .map(|k| if k + 1 == n { hi } else { lo + (hi - lo) * k as f64 / (n - 1) as f64 })
            .collect(),
    }
}

