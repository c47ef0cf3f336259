//! Conditional likelihood of the bivariate INAR(1) process.
//!
//! The one-step transition probability from `(a, b)` to `(c, e)` is
//!
//! ```text
//! pi = sum_{k1, k2} pi_1(c - k1) * pi_2(e - k2) * P(eps = (k1, k2))
//! ```
//!
//! where `pi_1`, `pi_2` are convolutions of two binomial pmfs (survivors of
//! `a` and `b`) and the innovation is common-shock bivariate Poisson. The
//! double sum is evaluated through the shock decomposition: conditioning on
//! the common-shock count `i` factorizes it into two univariate convolutions,
//!
//! ```text
//! pi = sum_i Pois(i; phi) * (pi_1 * q_1)(c - i) * (pi_2 * q_2)(e - i)
//! ```
//!
//! with `q_j = Pois(lambda_j - phi)`. This is algebraically identical to the
//! double sum but linear instead of quadratic in the counts. It runs in
//! linear probability space; transitions whose probability underflows fall
//! back to a log-space evaluation of the double sum.

use std::collections::BTreeMap;

use crate::bivpois::{bp_logpmf, ln_factorial, poisson_logpmf, BivPoissonParams};
use crate::error::{Error, Result};
use crate::process::ThinningMatrix;
use crate::series::CountSeries;

use super::model::BinarParams;

/// Minimum number of rows required by [`fit_cmle`](super::fit_cmle).
pub const MIN_FIT_LENGTH: usize = 30;

/// Log pmf of Binomial(n, p) at k, with deterministic edges for p in {0, 1}.
fn binom_logpmf(k: u64, n: u64, p: f64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    if p == 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if p == 1.0 {
        return if k == n { 0.0 } else { f64::NEG_INFINITY };
    }
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
        + k as f64 * p.ln()
        + (n - k) as f64 * (1.0 - p).ln()
}

/// Binomial pmf over 0..=n by upward recurrence (linear space).
fn binom_pmf_vec(n: u64, p: f64, out: &mut Vec<f64>) {
    out.clear();
    if p == 0.0 {
        out.push(1.0);
        out.extend(std::iter::repeat_n(0.0, n as usize));
        return;
    }
    if p == 1.0 {
        out.extend(std::iter::repeat_n(0.0, n as usize));
        out.push(1.0);
        return;
    }
    let ratio = p / (1.0 - p);
    let mut v = (1.0 - p).powi(n as i32);
    if v == 0.0 {
        // (1-p)^n underflowed; rebuild each entry from logs instead
        for k in 0..=n {
            out.push(binom_logpmf(k, n, p).exp());
        }
        return;
    }
    for k in 0..=n {
        out.push(v);
        if k < n {
            v *= ratio * (n - k) as f64 / (k + 1) as f64;
        }
    }
}

/// Poisson pmf over 0..=k_max (linear space); a zero rate is the point mass
/// at 0.
fn poisson_pmf_vec(rate: f64, k_max: u64, out: &mut Vec<f64>) {
    out.clear();
    if rate == 0.0 {
        out.push(1.0);
        out.extend(std::iter::repeat_n(0.0, k_max as usize));
        return;
    }
    let mut v = (-rate).exp();
    if v == 0.0 {
        for k in 0..=k_max {
            out.push(poisson_logpmf(k, rate).exp());
        }
        return;
    }
    for k in 0..=k_max {
        out.push(v);
        v *= rate / (k + 1) as f64;
    }
}

/// Log pmf of the thinning convolution: the probability that binomial
/// survivors of `n_prev = (a, b)` with probabilities `(p_a, p_b)` total `n`.
///
/// Values of `n` outside `0..=a+b` return negative infinity rather than an
/// error, so callers can use this as a transition kernel entry directly.
pub fn thinning_transition_logpmf(n: u64, n_prev: (u64, u64), p_a: f64, p_b: f64) -> Result<f64> {
    for p in [p_a, p_b] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Domain(format!("probability {p} outside [0, 1]")));
        }
    }
    let (a, b) = n_prev;
    if n > a + b {
        return Ok(f64::NEG_INFINITY);
    }
    let m_lo = n.saturating_sub(b);
    let m_hi = a.min(n);
    let mut max_term = f64::NEG_INFINITY;
    let mut terms = Vec::with_capacity((m_hi - m_lo + 1) as usize);
    for m in m_lo..=m_hi {
        let t = binom_logpmf(m, a, p_a) + binom_logpmf(n - m, b, p_b);
        if t > max_term {
            max_term = t;
        }
        terms.push(t);
    }
    if max_term == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    let sum: f64 = terms.iter().map(|t| (t - max_term).exp()).sum();
    Ok(max_term + sum.ln())
}

/// Scratch buffers reused across transition groups within one likelihood
/// evaluation.
#[derive(Default)]
struct Scratch {
    bin_a: Vec<f64>,
    bin_b: Vec<f64>,
    pi1: Vec<f64>,
    pi2: Vec<f64>,
    conv1: Vec<f64>,
    conv2: Vec<f64>,
}

/// Parameter-dependent kernel state shared by all transitions of one
/// evaluation: Poisson pmf tables of the shock decomposition.
struct Kernel<'a> {
    params: &'a BinarParams,
    q1: Vec<f64>,
    q2: Vec<f64>,
    cs: Vec<f64>,
}

impl<'a> Kernel<'a> {
    fn new(params: &'a BinarParams, max_c: u64, max_e: u64) -> Self {
        let innov = &params.innov;
        let mut q1 = Vec::new();
        let mut q2 = Vec::new();
        let mut cs = Vec::new();
        poisson_pmf_vec(innov.lambda1() - innov.phi(), max_c, &mut q1);
        poisson_pmf_vec(innov.lambda2() - innov.phi(), max_e, &mut q2);
        poisson_pmf_vec(innov.phi(), max_c.min(max_e), &mut cs);
        Self { params, q1, q2, cs }
    }

    /// Prepare the survivor-total convolutions for the previous state
    /// `(a, b)`, up to target totals `max_c`, `max_e`.
    fn prepare_group(&self, a: u64, b: u64, max_c: u64, max_e: u64, s: &mut Scratch) {
        let p = &self.params.p;
        convolve_binomials(a, p.get(0, 0), b, p.get(0, 1), s, /*pi1*/ true);
        convolve_binomials(a, p.get(1, 0), b, p.get(1, 1), s, /*pi1*/ false);
        convolve_with_poisson(&s.pi1, &self.q1, max_c, &mut s.conv1);
        convolve_with_poisson(&s.pi2, &self.q2, max_e, &mut s.conv2);
    }

    /// Transition probability to `(c, e)` in linear space; may underflow to
    /// zero or subnormal, which callers must detect.
    fn transition_prob(&self, c: u64, e: u64, s: &Scratch) -> f64 {
        let i_max = c.min(e).min(self.cs.len() as u64 - 1);
        let mut total = 0.0;
        for i in 0..=i_max {
            total += self.cs[i as usize] * s.conv1[(c - i) as usize] * s.conv2[(e - i) as usize];
        }
        total
    }

    /// Log-space evaluation of the double sum over innovation counts; exact
    /// semantics of the transition kernel, used when the linear path
    /// underflows.
    fn transition_logprob_logspace(&self, a: u64, b: u64, c: u64, e: u64) -> f64 {
        let p = &self.params.p;
        let k1_lo = c.saturating_sub(a + b);
        let k2_lo = e.saturating_sub(a + b);
        let mut terms = Vec::new();
        let mut max_term = f64::NEG_INFINITY;
        for k1 in k1_lo..=c {
            let lp1 = thinning_transition_logpmf(c - k1, (a, b), p.get(0, 0), p.get(0, 1))
                .expect("validated probabilities");
            if lp1 == f64::NEG_INFINITY {
                continue;
            }
            for k2 in k2_lo..=e {
                let lp2 = thinning_transition_logpmf(e - k2, (a, b), p.get(1, 0), p.get(1, 1))
                    .expect("validated probabilities");
                if lp2 == f64::NEG_INFINITY {
                    continue;
                }
                let t = lp1 + lp2 + bp_logpmf(k1, k2, &self.params.innov);
                if t > max_term {
                    max_term = t;
                }
                terms.push(t);
            }
        }
        if max_term == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        let sum: f64 = terms.iter().map(|t| (t - max_term).exp()).sum();
        max_term + sum.ln()
    }
}

/// `pi = Binom(a, p_a) * Binom(b, p_b)` as a full pmf vector over `0..=a+b`.
fn convolve_binomials(a: u64, p_a: f64, b: u64, p_b: f64, s: &mut Scratch, into_pi1: bool) {
    binom_pmf_vec(a, p_a, &mut s.bin_a);
    binom_pmf_vec(b, p_b, &mut s.bin_b);
    let out = if into_pi1 { &mut s.pi1 } else { &mut s.pi2 };
    out.clear();
    out.resize((a + b + 1) as usize, 0.0);
    for (m, &x) in s.bin_a.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (j, &y) in s.bin_b.iter().enumerate() {
            out[m + j] += x * y;
        }
    }
}

/// `(pi * q)(s)` for `s = 0..=s_max`, where `q` runs over innovation counts.
fn convolve_with_poisson(pi: &[f64], q: &[f64], s_max: u64, out: &mut Vec<f64>) {
    out.clear();
    out.resize(s_max as usize + 1, 0.0);
    for (u, &x) in pi.iter().enumerate() {
        if x == 0.0 || u > s_max as usize {
            continue;
        }
        for (j, &y) in q.iter().enumerate().take(s_max as usize - u + 1) {
            out[u + j] += x * y;
        }
    }
}

/// Transition log-probability `log P(N_t = n_t | N_{t-1} = n_prev)`.
pub fn transition_logprob(
    n_t: (u64, u64),
    n_prev: (u64, u64),
    p: &ThinningMatrix,
    innov: &BivPoissonParams,
) -> Result<f64> {
    if p.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            actual: p.dim(),
        });
    }
    let params = BinarParams::new(p.clone(), *innov)?;
    let (c, e) = n_t;
    let (a, b) = n_prev;
    let kernel = Kernel::new(&params, c, e);
    let mut scratch = Scratch::default();
    kernel.prepare_group(a, b, c, e, &mut scratch);
    let prob = kernel.transition_prob(c, e, &scratch);
    if prob >= f64::MIN_POSITIVE && prob.is_finite() {
        Ok(prob.ln())
    } else {
        Ok(kernel.transition_logprob_logspace(a, b, c, e))
    }
}

/// Observed transitions aggregated by (previous, next) state with
/// multiplicities, grouped by previous state so the survivor convolutions
/// are built once per group.
pub(crate) struct TransitionTable {
    groups: Vec<Group>,
    max_c: u64,
    max_e: u64,
}

struct Group {
    a: u64,
    b: u64,
    max_c: u64,
    max_e: u64,
    targets: Vec<(u64, u64, f64)>, // (c, e, multiplicity)
}

impl TransitionTable {
    pub(crate) fn from_series(series: &CountSeries) -> Result<Self> {
        if series.dim() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                actual: series.dim(),
            });
        }
        if series.n_steps() < 2 {
            return Err(Error::SeriesTooShort {
                needed: 2,
                actual: series.n_steps(),
            });
        }
        let mut counts: BTreeMap<(u64, u64, u64, u64), u64> = BTreeMap::new();
        let mut prev: Option<(u64, u64)> = None;
        for row in series.rows() {
            let cur = (row[0], row[1]);
            if let Some((a, b)) = prev {
                *counts.entry((a, b, cur.0, cur.1)).or_insert(0) += 1;
            }
            prev = Some(cur);
        }
        let mut groups: Vec<Group> = Vec::new();
        let (mut max_c, mut max_e) = (0, 0);
        for (&(a, b, c, e), &w) in &counts {
            max_c = max_c.max(c);
            max_e = max_e.max(e);
            match groups.last_mut() {
                Some(g) if g.a == a && g.b == b => {
                    g.max_c = g.max_c.max(c);
                    g.max_e = g.max_e.max(e);
                    g.targets.push((c, e, w as f64));
                }
                _ => groups.push(Group {
                    a,
                    b,
                    max_c: c,
                    max_e: e,
                    targets: vec![(c, e, w as f64)],
                }),
            }
        }
        Ok(Self {
            groups,
            max_c,
            max_e,
        })
    }

    /// Sum of weighted transition log-probabilities. Returns negative
    /// infinity (not an error) when some transition has zero probability
    /// under `params`.
    pub(crate) fn loglik(&self, params: &BinarParams) -> f64 {
        let kernel = Kernel::new(params, self.max_c, self.max_e);
        let mut scratch = Scratch::default();
        let mut total = 0.0;
        for g in &self.groups {
            kernel.prepare_group(g.a, g.b, g.max_c, g.max_e, &mut scratch);
            for &(c, e, w) in &g.targets {
                let prob = kernel.transition_prob(c, e, &scratch);
                let lp = if prob >= f64::MIN_POSITIVE && prob.is_finite() {
                    prob.ln()
                } else {
                    kernel.transition_logprob_logspace(g.a, g.b, c, e)
                };
                if lp == f64::NEG_INFINITY {
                    return f64::NEG_INFINITY;
                }
                total += w * lp;
            }
        }
        total
    }
}

/// Conditional log-likelihood of the series given its first row: the sum of
/// transition log-probabilities over consecutive rows.
pub fn conditional_loglik(
    series: &CountSeries,
    p: &ThinningMatrix,
    innov: &BivPoissonParams,
) -> Result<f64> {
    if p.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            actual: p.dim(),
        });
    }
    let table = TransitionTable::from_series(series)?;
    let params = BinarParams::new(p.clone(), *innov)?;
    Ok(table.loglik(&params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn set1() -> (ThinningMatrix, BivPoissonParams) {
        (
            ThinningMatrix::bivariate(0.25, 0.05, 0.1, 0.4).unwrap(),
            BivPoissonParams::new(5.0, 3.0, 1.0).unwrap(),
        )
    }

    #[test]
    fn thinning_kernel_from_empty_state() {
        assert_eq!(
            thinning_transition_logpmf(0, (0, 0), 0.3, 0.6).unwrap(),
            0.0
        );
        assert_eq!(
            thinning_transition_logpmf(1, (0, 0), 0.3, 0.6).unwrap(),
            f64::NEG_INFINITY
        );
    }

    #[test]
    fn thinning_kernel_collapses_for_equal_probabilities() {
        // survivors of (2, 3) with equal p are Binomial(5, p)
        for n in 0..=5u64 {
            let lp = thinning_transition_logpmf(n, (2, 3), 0.5, 0.5).unwrap();
            assert_relative_eq!(lp, binom_logpmf(n, 5, 0.5), max_relative = 1e-12);
        }
    }

    #[test]
    fn thinning_kernel_normalizes() {
        let total: f64 = (0..=5u64)
            .map(|n| {
                thinning_transition_logpmf(n, (2, 3), 0.25, 0.05)
                    .unwrap()
                    .exp()
            })
            .sum();
        assert_relative_eq!(total, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn thinning_kernel_rejects_bad_probability() {
        assert!(thinning_transition_logpmf(0, (1, 1), -0.2, 0.5).is_err());
        assert!(thinning_transition_logpmf(0, (1, 1), 0.2, 1.5).is_err());
    }

    #[test]
    fn transition_from_zero_state_is_innovation_pmf() {
        let (p, innov) = set1();
        for (c, e) in [(0, 0), (2, 1), (4, 4)] {
            let lp = transition_logprob((c, e), (0, 0), &p, &innov).unwrap();
            assert_relative_eq!(lp, bp_logpmf(c, e, &innov), max_relative = 1e-12);
        }
    }

    #[test]
    fn transition_with_zero_p_is_innovation_pmf() {
        let (_, innov) = set1();
        let p = ThinningMatrix::zeros(2);
        for prev in [(0, 0), (5, 2), (11, 7)] {
            let lp = transition_logprob((2, 1), prev, &p, &innov).unwrap();
            assert_relative_eq!(lp, bp_logpmf(2, 1, &innov), max_relative = 1e-12);
        }
    }

    #[test]
    fn transition_matches_frozen_oracle_value() {
        // brute-force enumeration over thinning outcomes and shock triples
        // (see tests/common) gives ln(0.005085685406405518)
        let (p, innov) = set1();
        let lp = transition_logprob((1, 2), (2, 1), &p, &innov).unwrap();
        assert_relative_eq!(lp, -5.2813254687113576, max_relative = 1e-10);
    }

    #[test]
    fn transition_kernel_normalizes_over_targets() {
        let (p, innov) = set1();
        let mut total = 0.0;
        for c in 0..60 {
            for e in 0..60 {
                total += transition_logprob((c, e), (3, 2), &p, &innov)
                    .unwrap()
                    .exp();
            }
        }
        assert!(total >= 1.0 - 1e-8, "total {total}");
    }

    #[test]
    fn logspace_fallback_agrees_with_linear_path() {
        let (p, innov) = set1();
        let params = BinarParams::new(p, innov).unwrap();
        for (a, b, c, e) in [(2, 1, 1, 2), (0, 4, 3, 0), (6, 5, 4, 7)] {
            let kernel = Kernel::new(&params, c, e);
            let mut s = Scratch::default();
            kernel.prepare_group(a, b, c, e, &mut s);
            let linear = kernel.transition_prob(c, e, &s).ln();
            let logspace = kernel.transition_logprob_logspace(a, b, c, e);
            assert_relative_eq!(linear, logspace, max_relative = 1e-11);
        }
    }

    #[test]
    fn loglik_of_length_two_series_is_single_transition() {
        let (p, innov) = set1();
        let series = CountSeries::new(2, vec![2, 1, 1, 2]).unwrap();
        let ll = conditional_loglik(&series, &p, &innov).unwrap();
        let lp = transition_logprob((1, 2), (2, 1), &p, &innov).unwrap();
        assert_relative_eq!(ll, lp, max_relative = 1e-14);
    }

    #[test]
    fn loglik_is_additive_over_concatenation() {
        let (p, innov) = set1();
        let rows = vec![2, 1, 4, 3, 7, 6, 5, 5, 6, 4, 8, 9, 3, 2];
        let series = CountSeries::new(2, rows).unwrap();
        let n = series.n_steps();
        let whole = conditional_loglik(&series, &p, &innov).unwrap();
        let m = 4;
        let head = conditional_loglik(&series.slice(0, m + 1).unwrap(), &p, &innov).unwrap();
        let tail = conditional_loglik(&series.slice(m, n).unwrap(), &p, &innov).unwrap();
        assert_relative_eq!(whole, head + tail, max_relative = 1e-10);
    }

    #[test]
    fn per_step_probabilities_are_bounded_by_one() {
        let (p, innov) = set1();
        let rows = vec![2, 1, 4, 3, 7, 6, 5, 5];
        let series = CountSeries::new(2, rows).unwrap();
        for t in 0..series.n_steps() - 1 {
            let prev = (series.row(t)[0], series.row(t)[1]);
            let next = (series.row(t + 1)[0], series.row(t + 1)[1]);
            let lp = transition_logprob(next, prev, &p, &innov).unwrap();
            assert!(lp <= 0.0);
        }
    }

    #[test]
    fn loglik_rejects_short_series() {
        let (p, innov) = set1();
        let series = CountSeries::new(2, vec![1, 1]).unwrap();
        assert!(matches!(
            conditional_loglik(&series, &p, &innov),
            Err(Error::SeriesTooShort { .. })
        ));
    }

    #[test]
    fn underflow_falls_back_to_log_space() {
        // a huge jump from an empty state forces the innovation tail; the
        // linear path underflows but the log-space value stays finite
        let p = ThinningMatrix::bivariate(0.1, 0.0, 0.0, 0.1).unwrap();
        let innov = BivPoissonParams::new(0.01, 0.01, 0.0).unwrap();
        let lp = transition_logprob((120, 0), (0, 0), &p, &innov).unwrap();
        let expected = bp_logpmf(120, 0, &innov);
        assert!(lp.is_finite());
        assert_relative_eq!(lp, expected, max_relative = 1e-10);
    }
}
