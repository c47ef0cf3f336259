//! Independent oracles for integration and acceptance tests.
//!
//! Everything here recomputes probabilities by direct enumeration in linear
//! space, deliberately sharing no code with the library's evaluation paths.

#![allow(dead_code)]

/// Factorial-free Poisson pmf by upward recurrence.
pub fn poisson_pmf(k: u64, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    let mut v = (-lambda).exp();
    for i in 0..k {
        v *= lambda / (i + 1) as f64;
    }
    v
}

/// Binomial pmf from the multiplicative recurrence.
pub fn binomial_pmf(k: u64, n: u64, p: f64) -> f64 {
    if k > n {
        return 0.0;
    }
    if p == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if p == 1.0 {
        return if k == n { 1.0 } else { 0.0 };
    }
    let mut v = (1.0 - p).powi(n as i32);
    for i in 0..k {
        v *= p / (1.0 - p) * (n - i) as f64 / (i + 1) as f64;
    }
    v
}

/// Common-shock bivariate Poisson pmf by direct convolution.
pub fn bivariate_poisson_pmf(k1: u64, k2: u64, l1: f64, l2: f64, phi: f64) -> f64 {
    (0..=k1.min(k2))
        .map(|m| {
            poisson_pmf(k1 - m, l1 - phi) * poisson_pmf(k2 - m, l2 - phi) * poisson_pmf(m, phi)
        })
        .sum()
}

/// Transition probability by exhaustive enumeration of all four thinning
/// outcomes plus the innovation needed to close each combination.
pub fn transition_prob_bruteforce(
    n_prev: (u64, u64),
    n_t: (u64, u64),
    p: [[f64; 2]; 2],
    l1: f64,
    l2: f64,
    phi: f64,
) -> f64 {
    let (a, b) = n_prev;
    let (c, e) = n_t;
    let mut total = 0.0;
    for y11 in 0..=a {
        let w11 = binomial_pmf(y11, a, p[0][0]);
        for y12 in 0..=b {
            let w12 = binomial_pmf(y12, b, p[0][1]);
            if y11 + y12 > c {
                continue;
            }
            let k1 = c - y11 - y12;
            for y21 in 0..=a {
                let w21 = binomial_pmf(y21, a, p[1][0]);
                for y22 in 0..=b {
                    if y21 + y22 > e {
                        continue;
                    }
                    let k2 = e - y21 - y22;
                    let w22 = binomial_pmf(y22, b, p[1][1]);
                    total += w11 * w12 * w21 * w22 * bivariate_poisson_pmf(k1, k2, l1, l2, phi);
                }
            }
        }
    }
    total
}

/// pmf of the total thinning survivors of `(a, b)` toward one component.
pub fn thinning_total_pmf(n: u64, a: u64, b: u64, p_a: f64, p_b: f64) -> f64 {
    let mut total = 0.0;
    for m in 0..=a.min(n) {
        total += binomial_pmf(m, a, p_a) * binomial_pmf(n - m, b, p_b);
    }
    total
}

/// One-sample Kolmogorov-Smirnov p-value against a fully specified CDF,
/// using the Stephens small-sample adjustment of the asymptotic Kolmogorov
/// distribution.
pub fn ks_test_pvalue(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> (f64, f64) {
    samples.sort_by(|a, b| a.total_cmp(b));
    let n = samples.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in samples.iter().enumerate() {
        let f = cdf(x);
        let lo = i as f64 / n;
        let hi = (i as f64 + 1.0) / n;
        d = d.max((f - lo).abs()).max((hi - f).abs());
    }
    let t = d * (n.sqrt() + 0.12 + 0.11 / n.sqrt());
    let mut p = 0.0;
    for k in 1..101 {
        let term = (-2.0 * (k as f64 * t).powi(2)).exp();
        p += if k % 2 == 1 { 2.0 * term } else { -2.0 * term };
    }
    (d, p.clamp(0.0, 1.0))
}

/// CDF of the chi-square distribution with 2 degrees of freedom.
pub fn chi2_df2_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        1.0 - (-x / 2.0).exp()
    }
}
