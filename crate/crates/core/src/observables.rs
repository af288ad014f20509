//! Kink counting, order parameter and kink-number statistics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};
use crate::model::Boundary;

/// `κ₂/κ₁ = 2 − √2` for the isolated quantum chain.
pub fn kappa2_ratio_reference() -> f64 {
    2.0 - 2f64.sqrt()
}

/// `κ₃/κ₁ = 4 − 12/√2 + 8/√3` for the isolated quantum chain.
pub fn kappa3_ratio_reference() -> f64 {
    4.0 - 12.0 / 2f64.sqrt() + 8.0 / 3f64.sqrt()
}

/// Binary image of a rotor: `sgn(sin θ)` with `sgn(0) = +1`.
#[inline]
pub fn rotor_sign(theta: f64) -> i8 {
    if theta.sin() >= 0.0 {
        1
    } else {
        -1
    }
}

/// Number of bonds the kink operator sums over.
pub fn bond_count(n: usize, boundary: Boundary) -> usize {
    match boundary {
        Boundary::Open => n.saturating_sub(1),
        Boundary::Periodic => n,
    }
}

/// `½ Σᵢ [1 − sgn(sin θᵢ) sgn(sin θᵢ₊₁)]` over open or wrapped bonds.
pub fn count_kinks(theta: &[f64], boundary: Boundary) -> Result<u64> {
    if theta.len() < 2 {
        return Err(contract("kink counting needs at least two rotors"));
    }
    let mut kinks = 0u64;
    let mut prev = rotor_sign(theta[0]);
    let first = prev;
    for &t in &theta[1..] {
        let s = rotor_sign(t);
        kinks += u64::from(s != prev);
        prev = s;
    }
    if boundary == Boundary::Periodic {
        kinks += u64::from(prev != first);
    }
    Ok(kinks)
}

/// `M_z = (1/N) Σᵢ |sin θᵢ|`.
pub fn order_parameter(theta: &[f64]) -> f64 {
    if theta.is_empty() {
        return 0.0;
    }
    theta.iter().map(|t| t.sin().abs()).sum::<f64>() / theta.len() as f64
}

/// Normalized frequencies of each observed kink number.
pub fn histogram(samples: &[u64]) -> BTreeMap<u64, f64> {
    let counts = count_values(samples.iter().copied());
    let total = samples.len() as f64;
    counts
        .into_iter()
        .map(|(n, c)| (n, c as f64 / total))
        .collect()
}

fn count_values(samples: impl Iterator<Item = u64>) -> BTreeMap<u64, u64> {
    let mut counts = BTreeMap::new();
    for s in samples {
        *counts.entry(s).or_insert(0) += 1;
    }
    counts
}

/// First three cumulants of a sample with jackknife standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cumulants {
    pub kappa: [f64; 3],
    pub stderr: [f64; 3],
    /// `(κ₂/κ₁, κ₃/κ₁)`.
    pub ratios: [f64; 2],
    pub ratio_stderr: [f64; 2],
}

/// Mean, unbiased variance and the k-statistic `k₃ = n² m₃ / ((n−1)(n−2))`.
pub fn cumulants(samples: &[u64]) -> Result<Cumulants> {
    cumulants_from_counts(&count_values(samples.iter().copied()))
}

/// [`cumulants`] on a histogram `value → count`.
pub fn cumulants_from_counts(counts: &BTreeMap<u64, u64>) -> Result<Cumulants> {
    let n: u64 = counts.values().sum();
    if n < 2 {
        return Err(contract("cumulants need at least two samples"));
    }
    if n < 3 {
        return Err(contract("the third cumulant needs at least three samples"));
    }
    // integer shift keeps the power sums exact and small
    let total: f64 = counts.iter().map(|(&v, &c)| v as f64 * c as f64).sum();
    let shift = (total / n as f64).round();
    let mut sums = PowerSums::default();
    for (&v, &c) in counts {
        sums.add(v as f64 - shift, c as f64);
    }
    let full = sums.kstats(n as f64, shift);
    let (kappa, ratios) = (full, ratios_of(&full));

    let mut stderr = [f64::NAN; 3];
    let mut ratio_stderr = [f64::NAN; 2];
    if n >= 4 {
        // leave-one-out estimates only depend on which value was dropped
        let loo: Vec<(f64, [f64; 3])> = counts
            .iter()
            .map(|(&v, &c)| {
                let mut s = sums;
                s.add(v as f64 - shift, -1.0);
                (c as f64, s.kstats((n - 1) as f64, shift))
            })
            .collect();
        let nf = n as f64;
        for k in 0..3 {
            stderr[k] = jackknife(nf, loo.iter().map(|(c, ks)| (*c, ks[k])));
        }
        for k in 0..2 {
            ratio_stderr[k] = jackknife(nf, loo.iter().map(|(c, ks)| (*c, ratios_of(ks)[k])));
        }
    }
    Ok(Cumulants {
        kappa,
        stderr,
        ratios,
        ratio_stderr,
    })
}

fn ratios_of(k: &[f64; 3]) -> [f64; 2] {
    if k[0] == 0.0 {
        [f64::NAN, f64::NAN]
    } else {
        [k[1] / k[0], k[2] / k[0]]
    }
}

fn jackknife(n: f64, weighted: impl Iterator<Item = (f64, f64)> + Clone) -> f64 {
    let mean = weighted.clone().map(|(c, x)| c * x).sum::<f64>() / n;
    let spread: f64 = weighted.map(|(c, x)| c * (x - mean) * (x - mean)).sum();
    ((n - 1.0) / n * spread).sqrt()
}

#[derive(Debug, Clone, Copy, Default)]
struct PowerSums {
    s1: f64,
    s2: f64,
    s3: f64,
}

impl PowerSums {
    fn add(&mut self, x: f64, weight: f64) {
        self.s1 += weight * x;
        self.s2 += weight * x * x;
        self.s3 += weight * x * x * x;
    }

    fn kstats(&self, n: f64, shift: f64) -> [f64; 3] {
        let mean = self.s1 / n + shift;
        let m2 = self.s2 - self.s1 * self.s1 / n;
        let m3 = self.s3 - 3.0 * self.s1 * self.s2 / n + 2.0 * self.s1.powi(3) / (n * n);
        [
            mean,
            m2 / (n - 1.0),
            n * m3 / ((n - 1.0) * (n - 2.0)),
        ]
    }
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &CompensatedSum) {
        self.add(other.sum);
        self.add(other.carry);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Mergeable per-ensemble accumulator of final-state observables.
///
/// Kink numbers are kept as an exact integer histogram, so merging shards in
/// any order yields identical kink statistics.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct KinkAccumulator {
    counts: BTreeMap<u64, u64>,
    mz: CompensatedSum,
    mz_sq: CompensatedSum,
}

impl KinkAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, kinks: u64, mz: f64) {
        *self.counts.entry(kinks).or_insert(0) += 1;
        self.mz.add(mz);
        self.mz_sq.add(mz * mz);
    }

    pub fn merge(&mut self, other: &KinkAccumulator) {
        for (&k, &c) in &other.counts {
            *self.counts.entry(k).or_insert(0) += c;
        }
        self.mz.merge(&other.mz);
        self.mz_sq.merge(&other.mz_sq);
    }

    pub fn len(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn counts(&self) -> &BTreeMap<u64, u64> {
        &self.counts
    }

    pub fn mean_order_parameter(&self) -> f64 {
        self.mz.value() / self.len() as f64
    }

    pub fn finish(&self, t_a: f64, bonds: usize) -> Result<KinkStatistics> {
        let n_samples = self.len();
        if n_samples > 0 && self.counts.keys().any(|&k| k as usize > bonds) {
            return Err(contract("kink number exceeds the bond count"));
        }
        let c = cumulants_from_counts(&self.counts)?;
        let bonds_f = bonds as f64;
        let mean_mz = self.mean_order_parameter();
        let var_mz = (self.mz_sq.value() / n_samples as f64 - mean_mz * mean_mz).max(0.0);
        Ok(KinkStatistics {
            t_a,
            n_samples,
            bonds,
            mean_density: c.kappa[0] / bonds_f,
            density_err: c.stderr[0] / bonds_f,
            histogram: self.counts.clone(),
            kappa: c.kappa,
            kappa_err: c.stderr,
            ratios: c.ratios,
            ratio_err: c.ratio_stderr,
            mean_mz,
            mz_err: (var_mz / (n_samples as f64 - 1.0)).sqrt(),
        })
    }
}

/// Ensemble summary of the kink number at the end of one anneal.
///
/// Undefined statistics (for example ratios when `κ₁ = 0`) are NaN. JSON has
/// no NaN, so they serialize as `null`, and `null` reads back as NaN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KinkStatistics {
    pub t_a: f64,
    pub n_samples: u64,
    pub bonds: usize,
    /// `κ₁ / bonds`.
    #[serde(deserialize_with = "nan_or::number")]
    pub mean_density: f64,
    #[serde(deserialize_with = "nan_or::number")]
    pub density_err: f64,
    pub histogram: BTreeMap<u64, u64>,
    #[serde(deserialize_with = "nan_or::array")]
    pub kappa: [f64; 3],
    #[serde(deserialize_with = "nan_or::array")]
    pub kappa_err: [f64; 3],
    #[serde(deserialize_with = "nan_or::array")]
    pub ratios: [f64; 2],
    #[serde(deserialize_with = "nan_or::array")]
    pub ratio_err: [f64; 2],
    #[serde(deserialize_with = "nan_or::number")]
    pub mean_mz: f64,
    #[serde(deserialize_with = "nan_or::number")]
    pub mz_err: f64,
}

mod nan_or {
    use serde::de::Error;
    use serde::{Deserialize, Deserializer};

    pub fn number<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }

    pub fn array<'de, D: Deserializer<'de>, const N: usize>(d: D) -> Result<[f64; N], D::Error> {
        let values: Vec<f64> = Vec::<Option<f64>>::deserialize(d)?
            .into_iter()
            .map(|v| v.unwrap_or(f64::NAN))
            .collect();
        let len = values.len();
        values
            .try_into()
            .map_err(|_| D::Error::invalid_length(len, &"a fixed-length array of numbers"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_6, PI};

    #[test]
    fn aligned_and_alternating_chains() {
        let aligned = vec![FRAC_PI_2; 8];
        assert_eq!(count_kinks(&aligned, Boundary::Open).unwrap(), 0);
        let alternating: Vec<f64> = (0..8)
            .map(|i| if i % 2 == 0 { FRAC_PI_2 } else { -FRAC_PI_2 })
            .collect();
        assert_eq!(count_kinks(&alternating, Boundary::Open).unwrap(), 7);
        assert_eq!(count_kinks(&alternating, Boundary::Periodic).unwrap(), 8);
    }

    #[test]
    fn kink_count_requires_two_rotors() {
        assert!(count_kinks(&[0.3], Boundary::Open).is_err());
    }

    #[test]
    fn zero_angle_counts_as_positive() {
        assert_eq!(rotor_sign(0.0), 1);
        assert_eq!(rotor_sign(-0.0), 1);
        assert_eq!(count_kinks(&[0.0, 0.0, 0.0], Boundary::Open).unwrap(), 0);
        assert_eq!(count_kinks(&[0.0, -0.1, 0.0], Boundary::Open).unwrap(), 2);
    }

    #[test]
    fn order_parameter_values() {
        assert!((order_parameter(&[FRAC_PI_2; 5]) - 1.0).abs() < 1e-15);
        assert_eq!(order_parameter(&[0.0; 5]), 0.0);
        assert!((order_parameter(&[FRAC_PI_6, -FRAC_PI_6]) - 0.5).abs() < 1e-15);
        assert!((order_parameter(&[PI / 2.0 + 2.0 * PI]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn cumulants_of_constant_sample() {
        let c = cumulants(&[3, 3, 3, 3]).unwrap();
        assert_eq!(c.kappa, [3.0, 0.0, 0.0]);
    }

    #[test]
    fn cumulants_of_small_sample() {
        let c = cumulants(&[0, 1, 2]).unwrap();
        assert_eq!(c.kappa, [1.0, 1.0, 0.0]);
    }

    #[test]
    fn k3_matches_direct_formula() {
        let xs = [0u64, 0, 1, 5, 2, 2, 9];
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<u64>() as f64 / n;
        let m3 = xs.iter().map(|&x| (x as f64 - mean).powi(3)).sum::<f64>() / n;
        let k3 = n * n * m3 / ((n - 1.0) * (n - 2.0));
        let c = cumulants(&xs).unwrap();
        assert!((c.kappa[2] - k3).abs() < 1e-12 * k3.abs());
    }

    #[test]
    fn cumulants_need_enough_samples() {
        assert!(cumulants(&[]).is_err());
        assert!(cumulants(&[1]).is_err());
        assert!(cumulants(&[1, 2]).is_err());
    }

    #[test]
    fn jackknife_of_the_mean_is_the_standard_error() {
        let xs = [1u64, 4, 2, 8, 5, 7];
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<u64>() as f64 / n;
        let var = xs.iter().map(|&x| (x as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let c = cumulants(&xs).unwrap();
        assert!((c.stderr[0] - (var / n).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn histogram_frequencies() {
        let h = histogram(&[0, 0, 1]);
        assert_eq!(h.len(), 2);
        assert!((h[&0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((h[&1] - 1.0 / 3.0).abs() < 1e-15);
        assert!(histogram(&[]).is_empty());
    }

    #[test]
    fn reference_ratios() {
        assert!((kappa2_ratio_reference() - 0.5858).abs() < 1e-4);
        assert!((kappa3_ratio_reference() - 0.1335).abs() < 1e-4);
    }

    #[test]
    fn accumulator_merge_is_order_independent() {
        let mut a = KinkAccumulator::new();
        let mut b = KinkAccumulator::new();
        for k in 0..10u64 {
            a.push(k % 4, 0.1 * k as f64);
            b.push(k % 3, 0.05 * k as f64);
        }
        let mut ab = a.clone();
        ab.merge(&b);
        let mut ba = b.clone();
        ba.merge(&a);
        assert_eq!(ab.counts(), ba.counts());
        assert!((ab.mean_order_parameter() - ba.mean_order_parameter()).abs() < 1e-15);
        let stats = ab.finish(10.0, 7).unwrap();
        assert_eq!(stats.n_samples, 20);
        assert_eq!(stats.histogram.values().sum::<u64>(), 20);
        assert!(stats.mean_density >= 0.0 && stats.mean_density <= 1.0);
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = CompensatedSum::default();
        s.add(1e16);
        for _ in 0..1000 {
            s.add(1.0);
        }
        s.add(-1e16);
        assert_eq!(s.value(), 1000.0);
    }
}
