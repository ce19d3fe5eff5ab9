//! Statistical helpers for the empirical audits and trend checks.

use statrs::distribution::{ChiSquared, ContinuousCDF, Gamma};

/// One-sample Kolmogorov-Smirnov statistic of `samples` against a
/// `Gamma(shape, scale)` reference distribution.
pub fn ks_statistic_gamma(samples: &[f64], shape: f64, scale: f64) -> f64 {
    assert!(!samples.is_empty());
    let dist = Gamma::new(shape, 1.0 / scale).expect("valid gamma parameters");
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    let n = sorted.len() as f64;
    let mut worst = 0.0f64;
    for (i, x) in sorted.iter().enumerate() {
        let cdf = dist.cdf(*x);
        let lo = i as f64 / n;
        let hi = (i + 1) as f64 / n;
        worst = worst.max((cdf - lo).abs()).max((hi - cdf).abs());
    }
    worst
}

/// Asymptotic 1% critical value of the KS statistic at sample size `n`.
pub fn ks_critical_value_1pct(n: usize) -> f64 {
    // K such that P(sqrt(n) D_n > K) = 0.01 under the Kolmogorov law.
    1.6276 / (n as f64).sqrt()
}

/// Pearson chi-square goodness-of-fit statistic for observed counts against
/// expected probabilities (which must sum to 1).
pub fn chi_square_statistic(observed: &[u64], probabilities: &[f64]) -> f64 {
    assert_eq!(observed.len(), probabilities.len());
    let total: u64 = observed.iter().sum();
    observed
        .iter()
        .zip(probabilities)
        .map(|(&o, &p)| {
            let e = p * total as f64;
            (o as f64 - e) * (o as f64 - e) / e
        })
        .sum()
}

/// Upper quantile of the chi-square distribution with `dof` degrees of
/// freedom; `alpha` is the tail mass (0.01 for a 1%-level test).
pub fn chi_square_critical(dof: usize, alpha: f64) -> f64 {
    ChiSquared::new(dof as f64)
        .expect("positive dof")
        .inverse_cdf(1.0 - alpha)
}

/// Spearman rank correlation of two equal-length sequences. Ties receive the
/// average rank of their group.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    assert!(x.len() >= 2);
    let rx = ranks(x);
    let ry = ranks(y);
    pearson(&rx, &ry)
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite values"));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            out[idx] = avg;
        }
        i = j + 1;
    }
    out
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}
