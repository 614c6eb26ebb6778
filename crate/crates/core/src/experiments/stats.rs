//! Sample moments and Kolmogorov–Smirnov distances.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Standard deviation of the Kolmogorov limit law of `√(mn/(m+n))·D`.
pub const KOLMOGOROV_SD: f64 = 0.2603;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSe {
    pub mean: f64,
    /// Standard error of the mean; zero for a single sample.
    pub se: f64,
    pub n: usize,
}

pub fn mean_se(xs: &[f64]) -> Result<MeanSe> {
    if xs.is_empty() {
        return Err(invalid("mean of an empty sample"));
    }
    let n = xs.len();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let se = if n > 1 {
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    } else {
        0.0
    };
    Ok(MeanSe { mean, se, n })
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> Result<f64> {
    if xs.len() < 2 {
        return Err(invalid("variance needs at least two samples"));
    }
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    Ok(xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64)
}

fn sorted(xs: &[f64]) -> Result<Vec<f64>> {
    if xs.is_empty() {
        return Err(invalid("KS statistic of an empty sample"));
    }
    if xs.iter().any(|x| x.is_nan()) {
        return Err(invalid("KS statistic of a sample containing NaN"));
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// `sup_x |F_n(x) − F(x)|` against a continuous CDF.
pub fn ks_one_sample(xs: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    let v = sorted(xs)?;
    let n = v.len() as f64;
    let mut d = 0.0f64;
    for (i, x) in v.iter().enumerate() {
        let f = cdf(*x);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    Ok(d)
}

/// `sup_x |F_a(x) − F_b(x)|`; tied values advance both sides together.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    let a = sorted(a)?;
    let b = sorted(b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
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
    Ok(d)
}

/// Scale of the sampling fluctuation of a two-sample KS distance.
pub fn ks_two_sample_se(m: usize, n: usize) -> f64 {
    let (m, n) = (m as f64, n as f64);
    KOLMOGOROV_SD * ((m + n) / (m * n)).sqrt()
}

/// Non-increasing up to at most one increase, which must not exceed `2·se`
/// of the later value.
pub fn monotone_with_one_inversion(values: &[f64], se: &[f64]) -> bool {
    let mut inversions = 0;
    for k in 1..values.len() {
        if values[k] > values[k - 1] {
            inversions += 1;
            let slack = 2.0 * se[k].max(se[k - 1]);
            if inversions > 1 || values[k] - values[k - 1] > slack {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_two_sample(a: &[f64], b: &[f64]) -> f64 {
        let mut d = 0.0f64;
        for x in a.iter().chain(b) {
            let fa = a.iter().filter(|v| **v <= *x).count() as f64 / a.len() as f64;
            let fb = b.iter().filter(|v| **v <= *x).count() as f64 / b.len() as f64;
            d = d.max((fa - fb).abs());
        }
        d
    }

    #[test]
    fn moments() {
        let m = mean_se(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(m.mean, 2.5);
        assert!((m.se - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_se(&[3.0]).unwrap().se, 0.0);
        assert!(mean_se(&[]).is_err());
        assert!((variance(&[1.0, 3.0]).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn one_sample_reference() {
        // Single point at ½ against U(0,1): the empirical CDF jumps 0 → 1.
        assert!((ks_one_sample(&[0.5], |x| x).unwrap() - 0.5).abs() < 1e-15);
        let grid: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0).collect();
        assert!((ks_one_sample(&grid, |x| x).unwrap() - 0.005).abs() < 1e-12);
    }

    #[test]
    fn two_sample_ties() {
        assert_eq!(ks_two_sample(&[0.0; 10], &[0.0; 7]).unwrap(), 0.0);
        let a = [0.0, 0.0, 1.0, 1.0];
        let b = [0.0, 1.0, 1.0, 1.0];
        assert!((ks_two_sample(&a, &b).unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(ks_two_sample(&[0.0], &[1.0]).unwrap(), 1.0);
    }

    #[test]
    fn monotone_rule() {
        assert!(monotone_with_one_inversion(&[3.0, 2.0, 1.0], &[0.1; 3]));
        assert!(monotone_with_one_inversion(&[3.0, 3.1, 1.0], &[0.1; 3]));
        assert!(!monotone_with_one_inversion(&[3.0, 3.5, 1.0], &[0.1; 3]));
        assert!(!monotone_with_one_inversion(&[3.0, 3.1, 3.0, 3.1], &[0.1; 4]));
    }

    proptest! {
        #[test]
        fn two_sample_matches_brute_force(
            a in prop::collection::vec(0u8..6, 1..40),
            b in prop::collection::vec(0u8..6, 1..40),
        ) {
            let a: Vec<f64> = a.into_iter().map(f64::from).collect();
            let b: Vec<f64> = b.into_iter().map(f64::from).collect();
            let fast = ks_two_sample(&a, &b).unwrap();
            prop_assert!((fast - brute_two_sample(&a, &b)).abs() < 1e-12);
            prop_assert!((fast - ks_two_sample(&b, &a).unwrap()).abs() < 1e-12);
        }
    }
}
