//! Summaries, distribution tests and the sub-Gamma maximal inequality check.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

/// Minimum sample size accepted by the two-sample KS test.
pub const KS_MIN_SAMPLES: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub std_err: f64,
    pub q10: f64,
    pub q50: f64,
    pub q90: f64,
    pub min: f64,
    pub max: f64,
}

/// Type-1 (inverse empirical CDF) quantile of already sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let k = (p * n as f64 - 1e-12).ceil().max(1.0) as usize;
    sorted[k.min(n) - 1]
}

pub fn quantile(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(quantile_sorted(&v, p))
}

pub fn median(values: &[f64]) -> Result<f64> {
    quantile(values, 0.5)
}

pub fn summarize(values: &[f64]) -> Result<Summary> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let std_err = if n > 1 {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    } else {
        0.0
    };
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(Summary {
        count: n,
        mean,
        std_err,
        q10: quantile_sorted(&sorted, 0.1),
        q50: quantile_sorted(&sorted, 0.5),
        q90: quantile_sorted(&sorted, 0.9),
        min: sorted[0],
        max: sorted[n - 1],
    })
}

/// Survival function of the Kolmogorov distribution, `P(K > lambda)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let p = if lambda < 1.18 {
        // Jacobi-theta form converges fast for small lambda.
        let c = -std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let mut s = 0.0;
        for k in 1..=50 {
            let j = (2 * k - 1) as f64;
            s += (c * j * j).exp();
        }
        1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * s
    } else {
        let mut s = 0.0;
        let mut sign = 1.0;
        for k in 1..=100 {
            let kf = k as f64;
            s += sign * (-2.0 * kf * kf * lambda * lambda).exp();
            sign = -sign;
        }
        2.0 * s
    };
    p.clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<TestResult> {
    let need = KS_MIN_SAMPLES;
    if a.len() < need || b.len() < need {
        return Err(Error::TooFewSamples {
            needed: need,
            got: a.len().min(b.len()),
        });
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let en = (na * nb / (na + nb)).sqrt();
    let p = kolmogorov_sf((en + 0.12 + 0.11 / en) * d);
    Ok(TestResult {
        statistic: d,
        p_value: p,
    })
}

/// One-sample Kolmogorov-Smirnov test against a continuous CDF.
pub fn ks_one_sample(sample: &[f64], cdf: impl Fn(f64) -> f64) -> Result<TestResult> {
    if sample.len() < KS_MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            needed: KS_MIN_SAMPLES,
            got: sample.len(),
        });
    }
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in s.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    let en = n.sqrt();
    Ok(TestResult {
        statistic: d,
        p_value: kolmogorov_sf((en + 0.12 + 0.11 / en) * d),
    })
}

/// Pearson chi-square test of uniformity over `counts.len()` cells.
pub fn chi_square_uniform(counts: &[u64]) -> Result<TestResult> {
    let k = counts.len();
    let total: u64 = counts.iter().sum();
    if k < 2 || total < 5 * k as u64 {
        return Err(Error::TooFewSamples {
            needed: 5 * k.max(2),
            got: total as usize,
        });
    }
    let expected = total as f64 / k as f64;
    let statistic = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum::<f64>();
    let chi = ChiSquared::new((k - 1) as f64).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(TestResult {
        statistic,
        p_value: chi.sf(statistic).clamp(0.0, 1.0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubGammaMaxReport {
    pub estimate: f64,
    pub std_err: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Bound on the expected maximum of `m` centered sub-Gamma(σ², c) variables.
pub fn subgamma_max_bound(sigma2: f64, c: f64, m: usize) -> f64 {
    let lm = (m as f64).ln();
    (2.0 * sigma2 * lm).sqrt() + c * lm
}

/// Monte Carlo estimate of `E max_{i<=m} X_i` for centered draws from
/// `sampler`, compared against [`subgamma_max_bound`] with a 3 SE allowance.
pub fn subgamma_max_check<R: Rng + ?Sized>(
    mut sampler: impl FnMut(&mut R) -> f64,
    sigma2: f64,
    c: f64,
    m: usize,
    reps: usize,
    rng: &mut R,
) -> Result<SubGammaMaxReport> {
    if m == 0 || reps < 2 {
        return Err(Error::InvalidArgument("need m >= 1 and reps >= 2".into()));
    }
    let maxima: Vec<f64> = (0..reps)
        .map(|_| {
            (0..m)
                .map(|_| sampler(rng))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    let s = summarize(&maxima)?;
    let bound = subgamma_max_bound(sigma2, c, m);
    Ok(SubGammaMaxReport {
        estimate: s.mean,
        std_err: s.std_err,
        bound,
        pass: s.mean <= bound + 3.0 * s.std_err,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from;
    use rand_distr::{Distribution, Exp, StandardNormal};

    #[test]
    fn constant_vector_summary() {
        let s = summarize(&[2.5; 7]).unwrap();
        assert_eq!(s.mean, 2.5);
        assert_eq!(s.std_err, 0.0);
        assert_eq!(s.q10, 2.5);
        assert_eq!(s.max, 2.5);
    }

    #[test]
    fn median_of_three() {
        assert_eq!(summarize(&[3.0, 1.0, 2.0]).unwrap().q50, 2.0);
    }

    #[test]
    fn empty_summary_is_an_error() {
        assert!(matches!(summarize(&[]), Err(Error::EmptyInput)));
    }

    #[test]
    fn uniform_mean_calibration() {
        let mut rng = rng_from(11);
        let v: Vec<f64> = (0..100_000).map(|_| rng.random::<f64>()).collect();
        let s = summarize(&v).unwrap();
        assert!((s.mean - 0.5).abs() < 0.005, "{}", s.mean);
        assert!(s.q10 <= s.q50 && s.q50 <= s.q90);
    }

    #[test]
    fn ks_identical_and_disjoint() {
        let a: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let r = ks_two_sample(&a, &a).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
        let b: Vec<f64> = (0..50).map(|i| 100.0 + i as f64).collect();
        let r = ks_two_sample(&a, &b).unwrap();
        assert_eq!(r.statistic, 1.0);
        assert!(r.p_value < 1e-10);
    }

    #[test]
    fn ks_needs_twenty_samples() {
        let a = [0.0; 19];
        assert!(matches!(
            ks_two_sample(&a, &a),
            Err(Error::TooFewSamples { .. })
        ));
    }

    #[test]
    fn ks_false_rejection_rate_is_calibrated() {
        let mut rng = rng_from(5);
        let mut rejections = 0;
        for _ in 0..200 {
            let a: Vec<f64> = (0..1000).map(|_| StandardNormal.sample(&mut rng)).collect();
            let b: Vec<f64> = (0..1000).map(|_| StandardNormal.sample(&mut rng)).collect();
            if ks_two_sample(&a, &b).unwrap().p_value < 0.05 {
                rejections += 1;
            }
        }
        assert!(rejections < 10, "{rejections} rejections out of 200");
    }

    #[test]
    fn kolmogorov_tail_reference_values() {
        // Standard critical values of the Kolmogorov distribution.
        assert!((kolmogorov_sf(1.3581) - 0.05).abs() < 5e-4);
        assert!((kolmogorov_sf(1.6276) - 0.01).abs() < 2e-4);
        assert!((kolmogorov_sf(0.8276) - 0.50).abs() < 2e-3);
    }

    #[test]
    fn chi_square_extremes() {
        let r = chi_square_uniform(&[100, 100, 100, 100]).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!((r.p_value - 1.0).abs() < 1e-12);
        let r = chi_square_uniform(&[400, 0, 0, 0]).unwrap();
        // (300² + 3·100²)/100 = 1200 = (k-1)·total
        assert!((r.statistic - 1200.0).abs() < 1e-9);
        assert!(r.p_value < 1e-100);
        assert!(chi_square_uniform(&[1, 2, 3]).is_err());
    }

    #[test]
    fn chi_square_calibration() {
        let mut rng = rng_from(77);
        let mut passes = 0;
        for _ in 0..200 {
            let mut counts = [0u64; 6];
            for _ in 0..600 {
                counts[rng.random_range(0..6)] += 1;
            }
            if chi_square_uniform(&counts).unwrap().p_value > 0.01 {
                passes += 1;
            }
        }
        assert!(passes >= 196, "{passes}/200");
    }

    #[test]
    fn subgamma_single_variable_bound_is_zero() {
        let mut rng = rng_from(1);
        let r = subgamma_max_check(|r| StandardNormal.sample(r), 1.0, 0.0, 1, 2000, &mut rng)
            .unwrap();
        assert_eq!(r.bound, 0.0);
        assert!(r.estimate.abs() < 4.0 * r.std_err);
        assert!(r.pass);
    }

    #[test]
    fn subgamma_gaussian_max_of_100() {
        let mut rng = rng_from(2);
        let r = subgamma_max_check(|r| StandardNormal.sample(r), 1.0, 0.0, 100, 2000, &mut rng)
            .unwrap();
        assert!((r.bound - (2.0 * 100f64.ln()).sqrt()).abs() < 1e-12);
        assert!((r.estimate - 2.50).abs() < 0.05, "{}", r.estimate);
        assert!(r.pass);
    }

    #[test]
    fn subgamma_centered_exponential() {
        let mut rng = rng_from(3);
        let exp = Exp::new(1.0).unwrap();
        let r = subgamma_max_check(|r| exp.sample(r) - 1.0, 1.0, 1.0, 50, 2000, &mut rng).unwrap();
        assert!(r.pass, "{r:?}");
        assert!(r.estimate <= (2.0 * 50f64.ln()).sqrt() + 50f64.ln());
    }
}
