//! Sample statistics and goodness-of-fit helpers.

use crate::error::{domain, Result};

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64
}

/// Standardized third central moment.
pub fn skewness(xs: &[f64]) -> Result<f64> {
    if xs.len() < 3 {
        return domain(format!("skewness needs at least 3 samples, got {}", xs.len()));
    }
    let m = mean(xs);
    let n = xs.len() as f64;
    let (m2, m3) = xs.iter().fold((0.0, 0.0), |(s2, s3), x| {
        let d = x - m;
        (s2 + d * d, s3 + d * d * d)
    });
    let (m2, m3) = (m2 / n, m3 / n);
    if m2 <= 0.0 {
        return domain("skewness is undefined for zero-variance data");
    }
    Ok(m3 / m2.powf(1.5))
}

/// Kolmogorov–Smirnov distance between the empirical distribution of
/// `samples` and `cdf`. Sorts `samples` in place.
pub fn ks_statistic<F>(samples: &mut [f64], cdf: F) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    if samples.is_empty() {
        return domain("KS statistic of an empty sample");
    }
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in samples.iter().enumerate() {
        let f = cdf(x)?;
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    Ok(d)
}

/// Asymptotic critical value of the one-sample KS statistic at level `alpha`.
pub fn ks_critical_value(n: usize, alpha: f64) -> f64 {
    (-0.5 * (alpha / 2.0).ln()).sqrt() / (n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn skewness_of_symmetric_data() {
        assert_eq!(skewness(&[-1.0, 0.0, 1.0]).unwrap(), 0.0);
        assert!(skewness(&[1.0, 2.0]).is_err());
        assert!(skewness(&[2.0, 2.0, 2.0]).is_err());
    }

    #[test]
    fn ks_against_exact_uniform_grid() {
        let mut xs: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0).collect();
        let d = ks_statistic(&mut xs, |x| Ok(x)).unwrap();
        assert!((d - 0.005).abs() < 1e-12);
        assert!((ks_critical_value(10_000, 0.01) - 0.016_276).abs() < 1e-5);
    }
}
