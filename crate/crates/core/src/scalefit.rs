//! Discrete power-law fitting of mention-count tails: zeta-normalized
//! maximum likelihood for the exponent and Kolmogorov-Smirnov selection of
//! the lower cutoff.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;

/// Even-index Bernoulli numbers B_2 .. B_16.
const BERNOULLI: [f64; 8] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
];

/// Hurwitz zeta `sum_{k>=0} (q + k)^(-s)` for `s > 1`, `q > 0`, by a short
/// direct sum followed by the Euler-Maclaurin tail.
pub fn hurwitz_zeta(s: f64, q: f64) -> f64 {
    debug_assert!(s > 1.0 && q > 0.0);
    const DIRECT: usize = 12;
    let mut sum = 0.0;
    for k in 0..DIRECT {
        sum += (q + k as f64).powf(-s);
    }
    let a = q + DIRECT as f64;
    let mut tail = a.powf(1.0 - s) / (s - 1.0) + 0.5 * a.powf(-s);
    // term_j = B_2j / (2j)! * s (s+1) ... (s+2j-2) * a^(-s-2j+1)
    let mut rising = s;
    let mut fact = 2.0;
    let mut power = a.powf(-s - 1.0);
    let inv_a2 = 1.0 / (a * a);
    for (j, b) in BERNOULLI.iter().enumerate() {
        let term = b / fact * rising * power;
        tail += term;
        if term.abs() < 1e-17 * tail.abs() {
            break;
        }
        let m = 2.0 * (j as f64 + 1.0);
        rising *= (s + m - 1.0) * (s + m);
        fact *= (m + 1.0) * (m + 2.0);
        power *= inv_a2;
    }
    sum + tail
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub alpha: f64,
    pub x_min: u64,
    pub n_tail: usize,
    pub ks_distance: f64,
    pub log_likelihood: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub tolerance: f64,
    /// Smallest tail accepted while scanning cutoffs.
    pub min_tail: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            alpha_min: 1.0 + 1e-6,
            alpha_max: 6.0,
            tolerance: 1e-6,
            min_tail: 2,
        }
    }
}

/// Distinct values with multiplicities, ascending.
#[derive(Debug, Clone)]
struct Histogram {
    values: Vec<u64>,
    counts: Vec<u64>,
}

impl Histogram {
    fn new(data: &[u64]) -> Self {
        let mut sorted = data.to_vec();
        sorted.sort_unstable();
        let mut values = Vec::new();
        let mut counts: Vec<u64> = Vec::new();
        for x in sorted {
            if values.last() == Some(&x) {
                *counts.last_mut().unwrap() += 1;
            } else {
                values.push(x);
                counts.push(1);
            }
        }
        Histogram { values, counts }
    }

    fn tail_from(&self, x_min: u64) -> Histogram {
        let start = self.values.partition_point(|&v| v < x_min);
        Histogram {
            values: self.values[start..].to_vec(),
            counts: self.counts[start..].to_vec(),
        }
    }

    fn n(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Mean log-likelihood per tail observation at `alpha`.
fn mean_log_likelihood(alpha: f64, x_min: u64, mean_ln_x: f64) -> f64 {
    -hurwitz_zeta(alpha, x_min as f64).ln() - alpha * mean_ln_x
}

fn mean_ln(tail: &Histogram) -> f64 {
    let n = tail.n() as f64;
    tail.values
        .iter()
        .zip(&tail.counts)
        .map(|(&v, &c)| c as f64 * (v as f64).ln())
        .sum::<f64>()
        / n
}

/// Log-likelihood of `data` restricted to `x >= x_min` under exponent `alpha`.
pub fn log_likelihood(data: &[u64], x_min: u64, alpha: f64) -> f64 {
    let tail = Histogram::new(data).tail_from(x_min);
    tail.n() as f64 * mean_log_likelihood(alpha, x_min, mean_ln(&tail))
}

fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = f(x1);
        }
    }
    0.5 * (lo + hi)
}

/// Fitted CDF `P(X <= x) = 1 - zeta(alpha, x+1) / zeta(alpha, x_min)`.
pub fn power_law_cdf(x: u64, alpha: f64, x_min: u64) -> f64 {
    if x < x_min {
        return 0.0;
    }
    1.0 - hurwitz_zeta(alpha, x as f64 + 1.0) / hurwitz_zeta(alpha, x_min as f64)
}

/// Supremum over integers `x >= x_min` of |empirical CDF - fitted CDF|.
fn ks_on_tail(tail: &Histogram, alpha: f64, x_min: u64) -> f64 {
    let n = tail.n() as f64;
    let z_min = hurwitz_zeta(alpha, x_min as f64);
    let cdf = |x: u64| 1.0 - hurwitz_zeta(alpha, x as f64 + 1.0) / z_min;
    let mut below = 0u64;
    let mut d: f64 = 0.0;
    for (&v, &c) in tail.values.iter().zip(&tail.counts) {
        // Just below v the empirical CDF is still below/n.
        if v > x_min {
            d = d.max((below as f64 / n - cdf(v - 1)).abs());
        }
        below += c;
        d = d.max((below as f64 / n - cdf(v)).abs());
    }
    d
}

pub fn ks_distance(data: &[u64], alpha: f64, x_min: u64) -> f64 {
    ks_on_tail(&Histogram::new(data).tail_from(x_min), alpha, x_min)
}

fn fit_tail(tail: &Histogram, x_min: u64, opts: &FitOptions) -> Result<PowerLawFit> {
    let n_tail = tail.n() as usize;
    if n_tail < 2 {
        return Err(Error::InvalidArgument(format!(
            "power-law fit needs at least 2 observations >= {x_min}, got {n_tail}"
        )));
    }
    if tail.values.len() == 1 {
        return Err(Error::Fit(format!(
            "degenerate tail: all {n_tail} observations equal {}",
            tail.values[0]
        )));
    }
    let mean_ln_x = mean_ln(tail);
    let alpha = golden_max(
        |a| mean_log_likelihood(a, x_min, mean_ln_x),
        opts.alpha_min,
        opts.alpha_max,
        opts.tolerance,
    );
    Ok(PowerLawFit {
        alpha,
        x_min,
        n_tail,
        ks_distance: ks_on_tail(tail, alpha, x_min),
        log_likelihood: n_tail as f64 * mean_log_likelihood(alpha, x_min, mean_ln_x),
    })
}

/// Fits the tail exponent. With `x_min` given, only the exponent is fitted;
/// otherwise every observed value is tried as cutoff and the one with the
/// smallest KS distance wins (ties to the smaller cutoff).
pub fn fit_power_law(data: &[u64], x_min: Option<u64>, opts: &FitOptions) -> Result<PowerLawFit> {
    if data.iter().any(|&x| x == 0) {
        return Err(Error::InvalidArgument("power-law data must be positive".into()));
    }
    let hist = Histogram::new(data);
    match x_min {
        Some(0) => Err(Error::InvalidArgument("x_min must be at least 1".into())),
        Some(x) => fit_tail(&hist.tail_from(x), x, opts),
        None => {
            let candidates: Vec<u64> = hist.values.clone();
            let fits: Vec<PowerLawFit> = candidates
                .par_iter()
                .filter_map(|&x| {
                    let tail = hist.tail_from(x);
                    if (tail.n() as usize) < opts.min_tail.max(2) {
                        return None;
                    }
                    fit_tail(&tail, x, opts).ok()
                })
                .collect();
            fits.into_iter()
                .min_by(|a, b| a.ks_distance.total_cmp(&b.ks_distance).then(a.x_min.cmp(&b.x_min)))
                .ok_or_else(|| {
                    Error::InvalidArgument("no cutoff leaves a fittable tail of at least 2 distinct values".into())
                })
        }
    }
}

/// Inverse-CDF draw from the discrete power law on `x >= x_min`.
pub fn sample_discrete_power_law<R: Rng + ?Sized>(rng: &mut R, alpha: f64, x_min: u64) -> u64 {
    let z_min = hurwitz_zeta(alpha, x_min as f64);
    let ccdf = |x: u64| hurwitz_zeta(alpha, x as f64) / z_min;
    let u: f64 = 1.0 - rng.gen::<f64>();
    // Largest x with P(X >= x) >= u.
    let mut lo = x_min;
    let mut hi = x_min.saturating_mul(2).max(x_min + 1);
    while ccdf(hi) >= u {
        lo = hi;
        hi = hi.saturating_mul(2);
        if hi == u64::MAX {
            return lo;
        }
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ccdf(mid) >= u {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Semi-parametric bootstrap goodness-of-fit p-value: the share of synthetic
/// datasets whose refitted KS distance is at least the observed one.
pub fn bootstrap_p_value(
    data: &[u64],
    fit: &PowerLawFit,
    replicates: usize,
    seed: u64,
    opts: &FitOptions,
) -> Result<f64> {
    if replicates == 0 {
        return Err(Error::InvalidArgument("bootstrap needs at least one replicate".into()));
    }
    let body: Vec<u64> = data.iter().copied().filter(|&x| x < fit.x_min).collect();
    let n = data.len();
    let p_tail = fit.n_tail as f64 / n as f64;
    let exceed: usize = (0..replicates)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let synthetic: Vec<u64> = (0..n)
                .map(|_| {
                    if body.is_empty() || rng.gen::<f64>() < p_tail {
                        sample_discrete_power_law(&mut rng, fit.alpha, fit.x_min)
                    } else {
                        body[rng.gen_range(0..body.len())]
                    }
                })
                .collect();
            match fit_power_law(&synthetic, None, opts) {
                Ok(f) if f.ks_distance >= fit.ks_distance => 1,
                _ => 0,
            }
        })
        .sum();
    Ok(exceed as f64 / replicates as f64)
}

/// Empirical CCDF at each distinct value with the fitted CCDF alongside
/// (`NA` below the cutoff): `x, empirical_ccdf, fitted_ccdf`.
pub fn write_ccdf(path: &Path, data: &[u64], fit: &PowerLawFit) -> Result<()> {
    let hist = Histogram::new(data);
    let n = hist.n() as f64;
    let tail_share = fit.n_tail as f64 / n;
    let z_min = hurwitz_zeta(fit.alpha, fit.x_min as f64);
    let mut w = io::writer(path)?;
    w.write_record(["x", "empirical_ccdf", "fitted_ccdf"])?;
    let mut at_least = hist.n();
    for (&v, &c) in hist.values.iter().zip(&hist.counts) {
        let fitted = if v >= fit.x_min {
            io::fmt_f64(tail_share * hurwitz_zeta(fit.alpha, v as f64) / z_min)
        } else {
            "NA".to_string()
        };
        w.write_record([v.to_string(), io::fmt_f64(at_least as f64 / n), fitted])?;
        at_least -= c;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zeta_reference_values() {
        let pi2_6 = std::f64::consts::PI.powi(2) / 6.0;
        assert!((hurwitz_zeta(2.0, 1.0) - pi2_6).abs() < 1e-13);
        assert!((hurwitz_zeta(3.0, 1.0) - 1.202_056_903_159_594_3).abs() < 1e-13);
        let shifted = pi2_6 - (1.0 + 0.25 + 1.0 / 9.0 + 1.0 / 16.0);
        assert!((hurwitz_zeta(2.0, 5.0) - shifted).abs() < 1e-13);
        // Near the pole the series still converges to the direct tail sum.
        let s = 1.05;
        let direct: f64 = (503..2_000_000u64).map(|k| (k as f64).powf(-s)).sum::<f64>()
            + (2_000_000f64).powf(1.0 - s) / (s - 1.0)
            + 0.5 * (2_000_000f64).powf(-s);
        assert!((hurwitz_zeta(s, 503.0) - direct).abs() / direct < 1e-9);
    }

    #[test]
    fn rejects_short_and_degenerate_tails() {
        assert!(matches!(fit_power_law(&[5], Some(5), &FitOptions::default()), Err(Error::InvalidArgument(_))));
        assert!(matches!(fit_power_law(&[7, 7, 7], Some(5), &FitOptions::default()), Err(Error::Fit(_))));
        assert!(fit_power_law(&[0, 3], None, &FitOptions::default()).is_err());
    }

    #[test]
    fn ks_matches_cdf_difference_oracle() {
        let data = [1u64, 1, 2, 3, 3, 3, 5, 8, 13, 21];
        let (alpha, x_min) = (1.8, 2);
        let tail: Vec<u64> = data.iter().copied().filter(|&x| x >= x_min).collect();
        let n = tail.len() as f64;
        let norm: f64 = (x_min..200_000).map(|k| (k as f64).powf(-alpha)).sum::<f64>()
            + (200_000f64).powf(1.0 - alpha) / (alpha - 1.0)
            + 0.5 * (200_000f64).powf(-alpha);
        let mut cum = 0.0;
        let mut d: f64 = 0.0;
        for x in x_min..=30 {
            cum += (x as f64).powf(-alpha) / norm;
            let emp = tail.iter().filter(|&&v| v <= x).count() as f64 / n;
            d = d.max((emp - cum).abs());
        }
        assert!((ks_distance(&data, alpha, x_min) - d).abs() < 1e-9);
    }

    #[test]
    fn duplicating_observations_changes_nothing() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let data: Vec<u64> = (0..2000).map(|_| sample_discrete_power_law(&mut rng, 2.3, 3)).collect();
        let doubled: Vec<u64> = data.iter().chain(&data).copied().collect();
        let opts = FitOptions::default();
        let a = fit_power_law(&data, None, &opts).unwrap();
        let b = fit_power_law(&doubled, None, &opts).unwrap();
        assert_eq!((a.alpha, a.x_min, a.ks_distance), (b.alpha, b.x_min, b.ks_distance));
    }

    #[test]
    fn estimate_is_local_maximum() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let data: Vec<u64> = (0..5000).map(|_| sample_discrete_power_law(&mut rng, 2.5, 1)).collect();
        let fit = fit_power_law(&data, Some(1), &FitOptions::default()).unwrap();
        let at = |a| log_likelihood(&data, 1, a);
        assert!(at(fit.alpha) >= at(fit.alpha + 0.01));
        assert!(at(fit.alpha) >= at(fit.alpha - 0.01));
        assert!((fit.alpha - 2.5).abs() < 0.08);
    }

    #[test]
    fn sampler_respects_cutoff_and_pmf() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let draws: Vec<u64> = (0..40_000).map(|_| sample_discrete_power_law(&mut rng, 2.0, 5)).collect();
        assert!(draws.iter().all(|&x| x >= 5));
        let p5 = draws.iter().filter(|&&x| x == 5).count() as f64 / draws.len() as f64;
        let expected = 25f64.recip() / hurwitz_zeta(2.0, 5.0);
        assert!((p5 - expected).abs() < 0.01, "{p5} vs {expected}");
    }

    #[test]
    fn bootstrap_p_value_is_a_probability() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let data: Vec<u64> = (0..300).map(|_| sample_discrete_power_law(&mut rng, 2.2, 2)).collect();
        let opts = FitOptions::default();
        let fit = fit_power_law(&data, None, &opts).unwrap();
        let p = bootstrap_p_value(&data, &fit, 8, 1, &opts).unwrap();
        assert!((0.0..=1.0).contains(&p));
        assert_eq!(p, bootstrap_p_value(&data, &fit, 8, 1, &opts).unwrap());
    }
}
