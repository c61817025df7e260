//! Small statistics helpers shared by the ensemble and test code.

/// Sample mean and standard error of the mean (`n − 1` normalisation).
///
/// A single value has zero standard error; an empty slice yields `NaN`s.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Kolmogorov–Smirnov statistic of `samples` against `Exp(rate)`.
pub fn ks_statistic_exponential(samples: &[f64], rate: f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(k, &x)| {
            let cdf = 1.0 - (-rate * x).exp();
            let lo = cdf - k as f64 / n;
            let hi = (k + 1) as f64 / n - cdf;
            lo.max(hi)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic one-sample KS critical value `sqrt(-ln(α/2)/2) / sqrt(n)`.
pub fn ks_critical_value(n: usize, significance: f64) -> f64 {
    (-(significance / 2.0).ln() / 2.0).sqrt() / (n as f64).sqrt()
}

/// Percentile by linear interpolation between order statistics, `q ∈ [0, 1]`.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_error() {
        let (m, s) = mean_stderr(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (1.6666666666666667f64 / 4.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_stderr(&[2.0, 2.0]).1, 0.0);
    }

    #[test]
    fn ks_critical_one_percent() {
        // c(0.01) ≈ 1.6276
        assert!((ks_critical_value(1, 0.01) - 1.6276).abs() < 1e-4);
    }

    #[test]
    fn ks_on_exact_quantiles_is_small() {
        let n = 1000;
        let xs: Vec<f64> = (0..n).map(|k| -(1.0 - (k as f64 + 0.5) / n as f64).ln() / 2.0).collect();
        assert!(ks_statistic_exponential(&xs, 2.0) <= 0.5 / n as f64 + 1e-12);
    }

    #[test]
    fn quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile(&v, 0.5), 3.0);
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 0.125), 1.5);
    }
}
