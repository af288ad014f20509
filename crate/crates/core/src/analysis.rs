//! Kibble-Zurek predictions and power-law fitting of ensemble results.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{contract, domain, Result};
use crate::model::BathParams;

/// Exponents of the Kibble-Zurek scaling `n ~ t_a^{−α}` with `α = dν/(1 + zν)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KzmPrediction {
    pub d: f64,
    pub nu: f64,
    pub z: f64,
    pub alpha: f64,
    pub tau0: f64,
}

impl KzmPrediction {
    pub fn new(d: f64, nu: f64, z: f64, tau0: f64) -> Result<Self> {
        if !(tau0 > 0.0) {
            return Err(contract(format!("tau0 must be positive, got {tau0}")));
        }
        Ok(Self {
            d,
            nu,
            z,
            alpha: kzm_alpha(d, nu, z)?,
            tau0,
        })
    }

    pub fn freeze_out_time(&self, t_a: f64) -> f64 {
        freeze_out_time(self.tau0, t_a, self.z, self.nu)
    }
}

pub fn kzm_alpha(d: f64, nu: f64, z: f64) -> Result<f64> {
    if !(d >= 1.0 && nu > 0.0 && z > 0.0) {
        return Err(contract(format!(
            "need d >= 1, nu > 0, z > 0; got d = {d}, nu = {nu}, z = {z}"
        )));
    }
    Ok(d * nu / (1.0 + z * nu))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DampingRegime {
    Overdamped,
    Underdamped,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelaxationEstimate {
    pub tau: f64,
    pub z: f64,
    pub tau0: f64,
}

/// Linearized relaxation time for a gap `|h − 2J|`:
/// `γ/|h−2J|` (z = 2) when overdamped, `√(m/|h−2J|)` (z = 1) when underdamped.
pub fn relaxation_time(gap: f64, bath: &BathParams, regime: DampingRegime) -> Result<RelaxationEstimate> {
    let gap = gap.abs();
    if gap == 0.0 || !gap.is_finite() {
        return Err(domain("relaxation time diverges at zero distance from the critical point"));
    }
    Ok(match regime {
        DampingRegime::Overdamped => RelaxationEstimate {
            tau: bath.gamma() / gap,
            z: 2.0,
            tau0: bath.gamma(),
        },
        DampingRegime::Underdamped => RelaxationEstimate {
            tau: (bath.mass() / gap).sqrt(),
            z: 1.0,
            tau0: bath.mass().sqrt(),
        },
    })
}

/// `t̂ = (τ₀ t_a^{zν})^{1/(1+zν)}`, prefactor fixed to 1.
pub fn freeze_out_time(tau0: f64, t_a: f64, z: f64, nu: f64) -> f64 {
    let zn = z * nu;
    (tau0 * t_a.powf(zn)).powf(1.0 / (1.0 + zn))
}

/// Ordinary least squares on `(x, y)`: returns `(slope, intercept, slope_stderr, r²)`.
fn ols(x: &[f64], y: &[f64], w: Option<&[f64]>) -> (f64, f64, f64, f64, Vec<f64>) {
    let weight = |i: usize| w.map_or(1.0, |w| w[i]);
    let n = x.len();
    let sw: f64 = (0..n).map(weight).sum();
    let mx = (0..n).map(|i| weight(i) * x[i]).sum::<f64>() / sw;
    let my = (0..n).map(|i| weight(i) * y[i]).sum::<f64>() / sw;
    let sxx: f64 = (0..n).map(|i| weight(i) * (x[i] - mx).powi(2)).sum();
    let sxy: f64 = (0..n).map(|i| weight(i) * (x[i] - mx) * (y[i] - my)).sum();
    let syy: f64 = (0..n).map(|i| weight(i) * (y[i] - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals: Vec<f64> = (0..n).map(|i| y[i] - intercept - slope * x[i]).collect();
    let ssr: f64 = (0..n).map(|i| weight(i) * residuals[i].powi(2)).sum();
    let stderr = if n > 2 {
        (ssr / (n as f64 - 2.0) / sxx).sqrt()
    } else {
        f64::NAN
    };
    let r2 = if syy > 0.0 { 1.0 - ssr / syy } else { 1.0 };
    (slope, intercept, stderr, r2, residuals)
}

/// Slope of `ln y` against `ln x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 {
        return Err(contract("need at least two points for a slope"));
    }
    if points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return Err(contract("log-log fit needs strictly positive coordinates"));
    }
    let x: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    Ok(ols(&x, &y, None).0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    /// `α` in `density ∝ t_a^{−α}`.
    pub exponent: f64,
    pub stderr: f64,
    pub intercept: f64,
    pub window: (f64, f64),
    pub n_points: usize,
    pub r_squared: f64,
    /// One-sided Wald-Wolfowitz p-value for too few residual sign runs.
    pub runs_p_value: f64,
    /// Set when `runs_p_value < 0.01`: the residuals look curved.
    pub curvature_flag: bool,
}

/// Least-squares fit of `ln density = c − α ln t_a` over the points whose `t_a`
/// lies in `window` (inclusive).
pub fn fit_power_law(points: &[(f64, f64)], window: (f64, f64)) -> Result<PowerLawFit> {
    fit_power_law_with(points, None, window)
}

/// [`fit_power_law`] on `(t_a, density, stderr)`; each point is weighted by
/// `(density/stderr)²`, its inverse variance in log space.
pub fn fit_power_law_weighted(points: &[(f64, f64, f64)], window: (f64, f64)) -> Result<PowerLawFit> {
    let xy: Vec<(f64, f64)> = points.iter().map(|p| (p.0, p.1)).collect();
    let err: Vec<f64> = points.iter().map(|p| p.2).collect();
    fit_power_law_with(&xy, Some(&err), window)
}

fn fit_power_law_with(points: &[(f64, f64)], errors: Option<&[f64]>, window: (f64, f64)) -> Result<PowerLawFit> {
    let (lo, hi) = window;
    let slack = 1e-9;
    let selected: Vec<usize> = (0..points.len())
        .filter(|&i| points[i].0 >= lo * (1.0 - slack) && points[i].0 <= hi * (1.0 + slack))
        .collect();
    if selected.len() < 4 {
        return Err(contract(format!(
            "fit window needs at least 4 points, found {}",
            selected.len()
        )));
    }
    let t_min = selected.iter().map(|&i| points[i].0).fold(f64::INFINITY, f64::min);
    let t_max = selected.iter().map(|&i| points[i].0).fold(0.0, f64::max);
    if !(t_min > 0.0 && t_max / t_min >= 10.0 * (1.0 - slack)) {
        return Err(contract("fit window must span at least one decade"));
    }
    if selected.iter().any(|&i| !(points[i].1 > 0.0)) {
        return Err(contract("densities in the fit window must be positive"));
    }
    let x: Vec<f64> = selected.iter().map(|&i| points[i].0.ln()).collect();
    let y: Vec<f64> = selected.iter().map(|&i| points[i].1.ln()).collect();
    let w: Option<Vec<f64>> = errors.map(|e| {
        selected
            .iter()
            .map(|&i| {
                let rel = e[i] / points[i].1;
                if rel > 0.0 {
                    1.0 / (rel * rel)
                } else {
                    1.0
                }
            })
            .collect()
    });
    let (slope, intercept, stderr, r_squared, residuals) = ols(&x, &y, w.as_deref());
    let runs_p_value = runs_test(&residuals);
    Ok(PowerLawFit {
        exponent: -slope,
        stderr,
        intercept,
        window: (t_min, t_max),
        n_points: selected.len(),
        r_squared,
        runs_p_value,
        curvature_flag: runs_p_value < 0.01,
    })
}

/// Probability of observing this few sign runs among the residuals under
/// random ordering (normal approximation). Returns 1 when the test is vacuous.
pub fn runs_test(residuals: &[f64]) -> f64 {
    let scale = residuals.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    if scale == 0.0 {
        return 1.0;
    }
    let signs: Vec<bool> = residuals
        .iter()
        .filter(|r| r.abs() > 1e-12 * scale)
        .map(|&r| r > 0.0)
        .collect();
    let n1 = signs.iter().filter(|&&s| s).count() as f64;
    let n2 = signs.len() as f64 - n1;
    if n1 == 0.0 || n2 == 0.0 {
        return 1.0;
    }
    let runs = 1.0 + signs.windows(2).filter(|w| w[0] != w[1]).count() as f64;
    let n = n1 + n2;
    let mean = 2.0 * n1 * n2 / n + 1.0;
    let var = 2.0 * n1 * n2 * (2.0 * n1 * n2 - n) / (n * n * (n - 1.0));
    if var <= 0.0 {
        return 1.0;
    }
    let z = (runs - mean) / var.sqrt();
    Normal::standard().cdf(z)
}

/// Marks fast-quench points on the plateau: walking up from the smallest
/// `t_a`, a point is excluded while the log-slope to its successor exceeds
/// `−0.05`.
pub fn plateau_mask(points: &[(f64, f64)]) -> Vec<bool> {
    let mut mask = vec![false; points.len()];
    for i in 0..points.len().saturating_sub(1) {
        let (t0, d0) = points[i];
        let (t1, d1) = points[i + 1];
        let slope = (d1.ln() - d0.ln()) / (t1.ln() - t0.ln());
        if slope > -0.05 {
            mask[i] = true;
        } else {
            break;
        }
    }
    mask
}

/// Default fit window: the slowest quenches, grown downward from the largest
/// `t_a` until it holds at least 4 points and spans a decade. Plateau points
/// are never included.
pub fn default_fit_window(points: &[(f64, f64)]) -> Result<(f64, f64)> {
    let mut sorted: Vec<(f64, f64)> = points.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mask = plateau_mask(&sorted);
    let usable: Vec<f64> = sorted
        .iter()
        .zip(&mask)
        .filter(|(_, &m)| !m)
        .map(|(p, _)| p.0)
        .collect();
    let Some(&t_max) = usable.last() else {
        return Err(contract("no points outside the fast-quench plateau"));
    };
    for (count, &t) in usable.iter().rev().enumerate() {
        if count + 1 >= 4 && t_max / t >= 10.0 * (1.0 - 1e-9) {
            return Ok((t, t_max));
        }
    }
    Err(contract(
        "not enough slow-quench points for a window of 4 points over one decade",
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaRow {
    pub gamma: f64,
    pub alpha: f64,
    pub stderr: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaTable {
    pub rows: Vec<AlphaRow>,
    /// `α` is non-increasing in `γ` within the combined 95% intervals.
    pub monotone: bool,
    /// Every `α` lies in `[1/4 − tol, 1/3 + tol]`.
    pub within_bounds: bool,
}

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959963984540054;

/// Tabulate `α(γ)` sorted by `γ` and check its shape.
pub fn alpha_vs_gamma_curve(results: &[(f64, PowerLawFit)], tol: f64) -> AlphaTable {
    let mut rows: Vec<AlphaRow> = results
        .iter()
        .map(|(gamma, fit)| AlphaRow {
            gamma: *gamma,
            alpha: fit.exponent,
            stderr: fit.stderr,
            ci_low: fit.exponent - Z95 * fit.stderr,
            ci_high: fit.exponent + Z95 * fit.stderr,
        })
        .collect();
    rows.sort_by(|a, b| a.gamma.total_cmp(&b.gamma));
    let monotone = rows.windows(2).all(|w| {
        let allowance = Z95 * (w[0].stderr.powi(2) + w[1].stderr.powi(2)).sqrt();
        w[1].alpha <= w[0].alpha + allowance.max(0.0)
    });
    let within_bounds = rows
        .iter()
        .all(|r| r.alpha >= 0.25 - tol && r.alpha <= 1.0 / 3.0 + tol);
    AlphaTable {
        rows,
        monotone,
        within_bounds,
    }
}
