//! Transfer-operator statics of the periodic rotor chain
//!
//! ```text
//! H(θ) = −J Σᵢ sin θᵢ sin θᵢ₊₁ − h Σᵢ cos θᵢ,   J = (1+ε)/2,  h = (1−ε)/2
//! ```
//!
//! The chain is written as a sum of symmetric bond energies `H(θ, ψ)` and the
//! transfer operator with kernel `exp(−βH(θ, ψ))` is discretized on a uniform
//! periodic grid (Nyström with the rectangle rule). Its two leading
//! eigenvalues give the correlation length `ξ = 1/ln(λ₀/λ₁)`; the leading
//! eigenfunction gives single-site averages through the measure `f₀²`.
//!
//! At low temperature the kernel is dominated by the maxima of
//! `g = −H(θ, ψ)`; a second-order expansion there gives closed forms for
//! `λ₀` and `ξ` ([`gaussian_spectrum`]).

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::analysis::log_log_slope;
use crate::error::{contract, domain, Result, SvlError};

/// Critical point `ε* = −1/3` as an exact ratio.
pub const CRITICAL_EPSILON_RATIO: (i64, i64) = (-1, 3);

pub fn critical_epsilon() -> f64 {
    CRITICAL_EPSILON_RATIO.0 as f64 / CRITICAL_EPSILON_RATIO.1 as f64
}

/// `ε = J − h` with `J + h = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonParam {
    epsilon: f64,
}

impl EpsilonParam {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&epsilon) {
            return Err(domain(format!("epsilon must lie in [-1, 1], got {epsilon}")));
        }
        Ok(Self { epsilon })
    }

    pub fn value(&self) -> f64 {
        self.epsilon
    }

    pub fn coupling(&self) -> f64 {
        (1.0 + self.epsilon) / 2.0
    }

    pub fn field(&self) -> f64 {
        (1.0 - self.epsilon) / 2.0
    }

    pub fn distance_to_critical(&self) -> f64 {
        (self.epsilon - critical_epsilon()).abs()
    }
}

/// `H(θ, ψ) = −(J/2)(cos(θ−ψ) − cos(θ+ψ)) − (h/2)(cos θ + cos ψ)`.
pub fn pair_energy(theta: f64, psi: f64, eps: EpsilonParam) -> f64 {
    let (j, h) = (eps.coupling(), eps.field());
    -0.5 * j * ((theta - psi).cos() - (theta + psi).cos()) - 0.5 * h * (theta.cos() + psi.cos())
}

/// Default quadrature size, `max(128, ⌈8√β⌉)`.
pub fn default_grid_size(beta: f64) -> usize {
    128usize.max((8.0 * beta.sqrt()).ceil() as usize)
}

/// Symmetrized Nyström matrix `√wᵢ exp(−β(H(θᵢ, θⱼ) − H_min)) √wⱼ`.
#[derive(Debug, Clone)]
pub struct TransferKernel {
    pub eps: EpsilonParam,
    pub beta: f64,
    pub grid: Vec<f64>,
    pub weights: Vec<f64>,
    /// Energy factored out of every entry; true eigenvalues are the matrix
    /// eigenvalues times `exp(−β h_min)`.
    pub h_min: f64,
    pub matrix: DMatrix<f64>,
}

pub fn build_kernel(eps: EpsilonParam, beta: f64, m: usize) -> Result<TransferKernel> {
    if m < 16 {
        return Err(contract(format!("quadrature needs at least 16 nodes, got {m}")));
    }
    if !(beta.is_finite() && beta > 0.0) {
        return Err(domain(format!("inverse temperature must be positive, got {beta}")));
    }
    let step = 2.0 * PI / m as f64;
    let grid: Vec<f64> = (0..m).map(|k| -PI + step * k as f64).collect();
    let weights = vec![step; m];
    let energy = DMatrix::from_fn(m, m, |i, j| pair_energy(grid[i], grid[j], eps));
    let h_min = energy.min();
    let matrix = DMatrix::from_fn(m, m, |i, j| {
        let e = (-beta * (energy[(i, j)] - h_min)).exp();
        weights[i].sqrt() * e * weights[j].sqrt()
    });
    // bitwise symmetry; the two triangles are computed from H(θ,ψ) and H(ψ,θ)
    let matrix = (&matrix + matrix.transpose()) * 0.5;
    Ok(TransferKernel {
        eps,
        beta,
        grid,
        weights,
        h_min,
        matrix,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralResult {
    pub epsilon: f64,
    pub beta: f64,
    pub lambda0: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub log_lambda0: f64,
    pub log_lambda1: f64,
    pub log_lambda2: f64,
    /// `1/ln(λ₀/λ₁)`; infinite when the top pair is numerically degenerate.
    pub xi: f64,
    /// `1/ln(λ₀/λ₂)`, the decay length of Z₂-even correlations. In the ordered
    /// phase `(λ₀, λ₁)` is a tunnelling doublet and this is the length set by
    /// fluctuations inside one well.
    pub xi_even: f64,
    /// Leading eigenfunction on the grid, `Σ w f₀² = 1`, sign chosen positive.
    pub f0: Vec<f64>,
    /// `⟨|sin θ|⟩` under the single-site measure `f₀²`.
    pub mz: f64,
    pub iterations: usize,
}

const BLOCK: usize = 10;
const RESIDUAL_TOL: f64 = 1e-10;
const MAX_ITERATIONS: usize = 5000;

/// Top eigenpairs of the kernel by block subspace iteration with Rayleigh–Ritz.
pub fn leading_spectrum(kernel: &TransferKernel) -> Result<SpectralResult> {
    let (values, vectors, iterations) = subspace_iteration(&kernel.matrix, 3)?;
    let shift = -kernel.beta * kernel.h_min;
    let logs: Vec<f64> = values.iter().map(|v| v.ln() + shift).collect();

    let mut v0: Vec<f64> = vectors.column(0).iter().copied().collect();
    if v0.iter().sum::<f64>() < 0.0 {
        v0.iter_mut().for_each(|x| *x = -*x);
    }
    let norm = v0.iter().map(|x| x * x).sum::<f64>().sqrt();
    v0.iter_mut().for_each(|x| *x /= norm);
    let mz = v0
        .iter()
        .zip(&kernel.grid)
        .map(|(v, t)| v * v * t.sin().abs())
        .sum();
    let f0 = v0
        .iter()
        .zip(&kernel.weights)
        .map(|(v, w)| v / w.sqrt())
        .collect();

    Ok(SpectralResult {
        epsilon: kernel.eps.value(),
        beta: kernel.beta,
        lambda0: logs[0].exp(),
        lambda1: logs[1].exp(),
        lambda2: logs[2].exp(),
        log_lambda0: logs[0],
        log_lambda1: logs[1],
        log_lambda2: logs[2],
        xi: 1.0 / (values[0] / values[1]).ln(),
        xi_even: 1.0 / (values[0] / values[2]).ln(),
        f0,
        mz,
        iterations,
    })
}

/// Build the kernel at the default grid size and solve it.
pub fn solve(eps: EpsilonParam, beta: f64) -> Result<SpectralResult> {
    leading_spectrum(&build_kernel(eps, beta, default_grid_size(beta))?)
}

fn subspace_iteration(a: &DMatrix<f64>, wanted: usize) -> Result<(Vec<f64>, DMatrix<f64>, usize)> {
    let m = a.nrows();
    let block = BLOCK.min(m);
    // deterministic, non-degenerate start: low Fourier modes plus a ramp
    let mut q = DMatrix::from_fn(m, block, |i, j| {
        let x = 2.0 * PI * i as f64 / m as f64;
        let harmonic = (j / 2 + 1) as f64;
        let base = if j % 2 == 0 { (harmonic * x).cos() } else { (harmonic * x).sin() };
        base + 1e-3 * (i as f64 / m as f64) * (j + 1) as f64 + if j == 0 { 1.0 } else { 0.0 }
    });
    q = q.qr().q();
    let mut worst = f64::INFINITY;
    for it in 1..=MAX_ITERATIONS {
        let z = a * &q;
        q = z.qr().q();
        let aq = a * &q;
        let small = q.transpose() * &aq;
        let small = (&small + small.transpose()) * 0.5;
        let eig = SymmetricEigen::new(small);
        let mut order: Vec<usize> = (0..block).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
        let ritz_vectors = &q * &eig.eigenvectors;
        let ritz_images = &aq * &eig.eigenvectors;
        let top = eig.eigenvalues[order[0]];
        if !(top.is_finite() && top > 0.0) {
            return Err(SvlError::Numerical(format!(
                "leading Ritz value {top} is not positive"
            )));
        }
        worst = 0.0;
        for &k in order.iter().take(wanted) {
            let r = ritz_images.column(k) - ritz_vectors.column(k) * eig.eigenvalues[k];
            worst = f64::max(worst, r.norm() / top);
        }
        if worst < RESIDUAL_TOL {
            let values = order.iter().take(wanted).map(|&k| eig.eigenvalues[k]).collect();
            let mut vectors = DMatrix::zeros(m, wanted);
            for (c, &k) in order.iter().take(wanted).enumerate() {
                vectors.set_column(c, &ritz_vectors.column(k));
            }
            return Ok((values, vectors, it));
        }
        q = ritz_vectors;
    }
    Err(SvlError::Numerical(format!(
        "subspace iteration did not converge in {MAX_ITERATIONS} sweeps (relative residual {worst:e})"
    )))
}

/// Maxima `(θ₀, ψ₀)` of `g = −H(θ, ψ)`.
///
/// A single maximum at the origin for `ε ≤ −1/3`; otherwise the symmetric pair
/// `±(θ₀, θ₀)` where `θ₀` solves `2((1+ε)/(1−ε)) sin θ = tan θ` on `(0, π/2]`.
pub fn find_maxima(eps: EpsilonParam) -> Result<Vec<(f64, f64)>> {
    let e = eps.value();
    if e <= -1.0 {
        return Err(domain("epsilon = -1 has no coupling; the maximum is degenerate"));
    }
    if e <= critical_epsilon() {
        return Ok(vec![(0.0, 0.0)]);
    }
    // sin θ factored out: 2(1+ε) cos θ − (1−ε) = 0, positive at 0⁺, ≤ 0 at π/2
    let f = |t: f64| 2.0 * (1.0 + e) * t.cos() - (1.0 - e);
    let (mut lo, mut hi) = (0.0f64, PI / 2.0);
    if f(hi) >= 0.0 {
        return Ok(vec![(hi, hi), (-hi, -hi)]);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let root = 0.5 * (lo + hi);
    Ok(vec![(root, root), (-root, -root)])
}

/// Second derivatives `(g_θθ, g_θψ, g_ψψ)` of `g = −H(θ, ψ)`.
pub fn pair_hessian(theta: f64, psi: f64, eps: EpsilonParam) -> (f64, f64, f64) {
    let (j, h) = (eps.coupling(), eps.field());
    let (c_minus, c_plus) = ((theta - psi).cos(), (theta + psi).cos());
    let g_tt = 0.5 * j * (c_plus - c_minus) - 0.5 * h * theta.cos();
    let g_tp = 0.5 * j * (c_minus + c_plus);
    let g_pp = 0.5 * j * (c_plus - c_minus) - 0.5 * h * psi.cos();
    (g_tt, g_tp, g_pp)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianSpectrum {
    pub epsilon: f64,
    pub beta: f64,
    pub theta0: f64,
    pub log_lambda0: f64,
    pub lambda0: f64,
    pub xi: f64,
}

/// Smallest inverse temperature at which the saddle-point forms are accepted.
pub const GAUSSIAN_MIN_BETA: f64 = 100.0;

/// Closed-form spectrum of the Gaussian-approximated kernel around a maximum of `g`:
///
/// ```text
/// λ₀  = e^{βg₀} √(2π/β) (√(g_θθ² − g_θψ²) − g_θθ)^{−1/2}
/// ξ⁻¹ = ln(1 + (−g_θθ − g_θψ + √(g_θθ² − g_θψ²)) / g_θψ)
/// ```
pub fn gaussian_spectrum(eps: EpsilonParam, beta: f64) -> Result<GaussianSpectrum> {
    if !(beta >= GAUSSIAN_MIN_BETA) {
        return Err(domain(format!(
            "saddle-point approximation needs beta >= {GAUSSIAN_MIN_BETA}, got {beta}"
        )));
    }
    let maxima = find_maxima(eps)?;
    let (t0, p0) = maxima[0];
    let (g_tt, g_tp, _) = pair_hessian(t0, p0, eps);
    if g_tp == 0.0 {
        return Err(SvlError::Numerical("degenerate saddle: g_θψ = 0".into()));
    }
    let disc = (g_tt * g_tt - g_tp * g_tp).max(0.0).sqrt();
    let g0 = -pair_energy(t0, p0, eps);
    let log_lambda0 = beta * g0 + 0.5 * (2.0 * PI / beta).ln() - 0.5 * (disc - g_tt).ln();
    let xi = 1.0 / (1.0 + (-g_tt - g_tp + disc) / g_tp).ln();
    Ok(GaussianSpectrum {
        epsilon: eps.value(),
        beta,
        theta0: t0,
        log_lambda0,
        lambda0: log_lambda0.exp(),
        xi,
    })
}

/// Correlation-length exponent `ν` from points `(|ε − ε*|, ξ)`.
pub fn fit_nu(curve: &[(f64, f64)]) -> Result<f64> {
    if curve.len() < 5 {
        return Err(contract(format!(
            "need at least 5 points to fit nu, got {}",
            curve.len()
        )));
    }
    let (lo, hi) = curve
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &(x, _)| (lo.min(x), hi.max(x)));
    if !(lo > 0.0 && hi / lo >= 10.0 * (1.0 - 1e-12)) {
        return Err(contract("points must span at least one decade in |eps - eps*|"));
    }
    Ok(log_log_slope(curve)?.abs())
}

/// Connected two-point function `C(l) = ⟨s(θᵢ) s(θᵢ₊ₗ)⟩` in the infinite chain,
/// for `l = 0..=max_l`, using the leading eigenvector of the kernel.
pub fn two_point_function(
    kernel: &TransferKernel,
    spectrum: &SpectralResult,
    observable: impl Fn(f64) -> f64,
    max_l: usize,
) -> Vec<f64> {
    let v0: Vec<f64> = spectrum
        .f0
        .iter()
        .zip(&kernel.weights)
        .map(|(f, w)| f * w.sqrt())
        .collect();
    let start = nalgebra::DVector::from_iterator(
        v0.len(),
        v0.iter().zip(&kernel.grid).map(|(v, t)| v * observable(*t)),
    );
    let scale = (spectrum.log_lambda0 + kernel.beta * kernel.h_min).exp();
    let mut current = start.clone();
    let mut out = Vec::with_capacity(max_l + 1);
    for l in 0..=max_l {
        if l > 0 {
            current = &kernel.matrix * &current / scale;
        }
        out.push(start.dot(&current));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eps(e: f64) -> EpsilonParam {
        EpsilonParam::new(e).unwrap()
    }

    #[test]
    fn couplings_from_epsilon() {
        let e = eps(0.2);
        assert!((e.coupling() - 0.6).abs() < 1e-15);
        assert!((e.field() - 0.4).abs() < 1e-15);
        assert!(EpsilonParam::new(1.5).is_err());
        assert_eq!(critical_epsilon(), -1.0 / 3.0);
    }

    #[test]
    fn pair_energy_reference_values() {
        for e in [-1.0, -0.3, 0.0, 0.7] {
            let h = (1.0 - e) / 2.0;
            assert!((pair_energy(0.0, 0.0, eps(e)) + h).abs() < 1e-15);
        }
        assert!((pair_energy(PI / 2.0, PI / 2.0, eps(1.0)) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn kernel_structure() {
        let k = build_kernel(eps(0.0), 1.0, 16).unwrap();
        assert_eq!(k.matrix, k.matrix.transpose());
        assert!(k.matrix.iter().all(|&x| x > 0.0));
        assert!(build_kernel(eps(0.0), 1.0, 8).is_err());
        assert!(build_kernel(eps(0.0), 0.0, 32).is_err());
    }

    #[test]
    fn maxima_branches() {
        assert_eq!(find_maxima(eps(-0.5)).unwrap(), vec![(0.0, 0.0)]);
        let top = find_maxima(eps(1.0)).unwrap();
        assert!((top[0].0 - PI / 2.0).abs() < 1e-12);
        assert_eq!(top[1], (-top[0].0, -top[0].1));
        let delta = 1e-4;
        let near = find_maxima(eps(critical_epsilon() + delta)).unwrap();
        let expected = 3.0 * (delta / 2.0).sqrt();
        assert!((near[0].0 / expected - 1.0).abs() < 0.01);
    }

    #[test]
    fn maxima_solve_the_stationarity_condition() {
        for e in [-0.3, -0.1, 0.25, 0.6, 0.95] {
            let (t0, _) = find_maxima(eps(e)).unwrap()[0];
            let lhs = 2.0 * (1.0 + e) / (1.0 - e) * t0.sin();
            assert!((lhs - t0.tan()).abs() < 1e-10 * t0.tan().abs());
        }
    }

    #[test]
    fn gaussian_spectrum_rejects_hot_chains() {
        assert!(matches!(gaussian_spectrum(eps(-0.5), 10.0), Err(SvlError::Domain(_))));
        assert!(gaussian_spectrum(eps(-1.0 + 1e-12), 1e3).is_ok());
    }

    #[test]
    fn fit_nu_on_exact_power_law() {
        let curve: Vec<(f64, f64)> = (0..7)
            .map(|k| {
                let x = 1e-3 * 10f64.powf(k as f64 / 3.0);
                (x, 0.47 * x.powf(-0.5))
            })
            .collect();
        assert!((fit_nu(&curve).unwrap() - 0.5).abs() < 1e-12);
        assert!(fit_nu(&curve[..4]).is_err());
        let narrow: Vec<(f64, f64)> = (0..6).map(|k| (1.0 + 0.1 * k as f64, 1.0)).collect();
        assert!(fit_nu(&narrow).is_err());
    }

    #[test]
    fn hot_limit_eigenvalue_is_the_circle_measure() {
        let k = build_kernel(eps(0.3), 1e-9, 64).unwrap();
        let s = leading_spectrum(&k).unwrap();
        assert!((s.lambda0 / (2.0 * PI) - 1.0).abs() < 1e-6);
    }
}
