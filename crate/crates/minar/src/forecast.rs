//! Conditional forecasting and Monte Carlo tail-risk tables.
//!
//! The h-step conditional mean is the matrix-geometric expression
//! `P^h N_t + (I + P + ... + P^(h-1)) lambda`. The conditional variance
//! follows the recursion `V_1(N) = diag(V N) + Lambda`,
//! `V_h(N) = E[V_(h-1)(P ∘ N + eps) | N] + P^(h-1) V_1(N) (P^(h-1))'`;
//! every term of `V_h` is affine in its argument, so the conditional
//! expectation closes by evaluating `V_(h-1)` at `P N + lambda` and the
//! recursion unrolls analytically.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bivpois::BivPoissonParams;
use crate::error::{Error, Result};
use crate::process::{matrix_thin, InnovationSampler, ThinningMatrix};
use crate::rng::RandomSource;

/// Conditional mean `E(N_{t+h} | N_t)`. `h = 0` returns `N_t` itself.
pub fn forecast_mean(
    p: &ThinningMatrix,
    lambda: &DVector<f64>,
    n_t: &[u64],
    h: u32,
) -> Result<DVector<f64>> {
    let d = p.dim();
    if n_t.len() != d || lambda.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: n_t.len().max(lambda.len()),
        });
    }
    let n = DVector::from_iterator(d, n_t.iter().map(|&c| c as f64));
    if h == 0 {
        return Ok(n);
    }
    let pm = p.to_matrix();
    // geometric sum I + P + ... + P^(h-1) accumulated alongside the power
    let mut power = DMatrix::identity(d, d);
    let mut geom = DMatrix::zeros(d, d);
    for _ in 0..h {
        geom += &power;
        power = &power * &pm;
    }
    Ok(power * n + geom * lambda)
}

fn forecast_var_impl(
    pm: &DMatrix<f64>,
    v: &DMatrix<f64>,
    lambda: &DVector<f64>,
    big_lambda: &DMatrix<f64>,
    n: &DVector<f64>,
    h: u32,
) -> DMatrix<f64> {
    let one_step = DMatrix::from_diagonal(&(v * n)) + big_lambda;
    if h == 1 {
        return one_step;
    }
    let next_mean = pm * n + lambda;
    let inner = forecast_var_impl(pm, v, lambda, big_lambda, &next_mean, h - 1);
    let pk = pm.pow(h - 1);
    inner + &pk * one_step * pk.transpose()
}

/// Conditional covariance `var(N_{t+h} | N_t)` for a general innovation with
/// mean `lambda` and covariance `big_lambda`. `h = 0` returns the zero
/// matrix.
pub fn forecast_var_general(
    p: &ThinningMatrix,
    lambda: &DVector<f64>,
    big_lambda: &DMatrix<f64>,
    n_t: &[u64],
    h: u32,
) -> Result<DMatrix<f64>> {
    let d = p.dim();
    if n_t.len() != d || lambda.len() != d || big_lambda.nrows() != d || big_lambda.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: n_t.len(),
        });
    }
    if h == 0 {
        return Ok(DMatrix::zeros(d, d));
    }
    let n = DVector::from_iterator(d, n_t.iter().map(|&c| c as f64));
    Ok(forecast_var_impl(
        &p.to_matrix(),
        &p.bernoulli_variance_matrix(),
        lambda,
        big_lambda,
        &n,
        h,
    ))
}

/// Conditional covariance for bivariate Poisson innovations.
pub fn forecast_var(
    p: &ThinningMatrix,
    innov: &BivPoissonParams,
    n_t: &[u64],
    h: u32,
) -> Result<DMatrix<f64>> {
    forecast_var_general(p, &innov.mean_vector(), &innov.covariance_matrix(), n_t, h)
}

/// How a forecast was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ForecastMethod {
    Analytic,
    MonteCarlo,
}

/// Conditional mean and covariance at one horizon.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForecastResult {
    pub horizon: u32,
    pub cond_mean: Vec<f64>,
    pub cond_cov: Vec<Vec<f64>>,
    pub method: ForecastMethod,
}

/// Analytic mean/covariance forecast at one horizon.
pub fn forecast(
    p: &ThinningMatrix,
    innov: &BivPoissonParams,
    n_t: &[u64],
    h: u32,
) -> Result<ForecastResult> {
    let mean = forecast_mean(p, &innov.mean_vector(), n_t, h)?;
    let cov = forecast_var(p, innov, n_t, h)?;
    Ok(ForecastResult {
        horizon: h,
        cond_mean: mean.iter().copied().collect(),
        cond_cov: (0..cov.nrows())
            .map(|i| cov.row(i).iter().copied().collect())
            .collect(),
        method: ForecastMethod::Analytic,
    })
}

/// Monte Carlo estimates of `P(sum_{k<=T} (N_{1,k} + N_{2,k}) >= n | N_0)`
/// over a grid of thresholds (rows) and horizons (columns).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TailTable {
    pub thresholds: Vec<u64>,
    pub horizons: Vec<u32>,
    /// `probabilities[i][j]` estimates the exceedance of `thresholds[i]` at
    /// `horizons[j]`.
    pub probabilities: Vec<Vec<f64>>,
    /// Binomial standard errors, same shape.
    pub standard_errors: Vec<Vec<f64>>,
    pub paths: u64,
    pub seed: u64,
}

impl TailTable {
    /// CSV grid: rows = thresholds, columns = horizons.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        self.write_grid(out, &self.probabilities)
    }

    /// Companion CSV of per-cell binomial standard errors.
    pub fn write_standard_errors_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        self.write_grid(out, &self.standard_errors)
    }

    fn write_grid<W: std::io::Write>(&self, out: W, grid: &[Vec<f64>]) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["n".to_string()];
        header.extend(self.horizons.iter().map(|t| t.to_string()));
        w.write_record(&header)?;
        for (i, &n) in self.thresholds.iter().enumerate() {
            let mut rec = vec![n.to_string()];
            rec.extend(grid[i].iter().map(|p| p.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Simulate `paths` trajectories from `n0` and tabulate exceedance
/// probabilities of the running total count. One deterministic substream per
/// path makes the table reproducible regardless of thread scheduling.
pub fn mc_tail_table(
    p: &ThinningMatrix,
    innov: &BivPoissonParams,
    n0: &[u64],
    horizons: &[u32],
    thresholds: &[u64],
    paths: u64,
    source: &RandomSource,
) -> Result<TailTable> {
    if p.dim() != 2 || n0.len() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            actual: n0.len(),
        });
    }
    if paths == 0 {
        return Err(Error::Domain("paths must be >= 1".into()));
    }
    if horizons.is_empty() || thresholds.is_empty() {
        return Err(Error::Domain(
            "horizons and thresholds must be non-empty".into(),
        ));
    }
    if horizons.windows(2).any(|w| w[0] >= w[1]) || thresholds.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Domain(
            "horizons and thresholds must be strictly increasing".into(),
        ));
    }
    let max_h = *horizons.last().unwrap();
    let n_h = horizons.len();
    let n_thr = thresholds.len();

    // per-path exceedance indicators, summed as integer counts
    let counts = (0..paths)
        .into_par_iter()
        .fold(
            || vec![0u64; n_h * n_thr],
            |mut acc, path| {
                let mut rng = source
                    .substream(source.stream_id().wrapping_add(path))
                    .rng();
                let mut state = n0.to_vec();
                let mut total = 0u64;
                let mut h_idx = 0;
                for step in 1..=max_h {
                    let thinned = matrix_thin(p, &state, &mut rng).expect("validated dims");
                    let eps = innov.sample(&mut rng);
                    state[0] = thinned[0] + eps[0];
                    state[1] = thinned[1] + eps[1];
                    total += state[0] + state[1];
                    while h_idx < n_h && horizons[h_idx] == step {
                        for (i, &thr) in thresholds.iter().enumerate() {
                            if total >= thr {
                                acc[i * n_h + h_idx] += 1;
                            }
                        }
                        h_idx += 1;
                    }
                }
                acc
            },
        )
        .reduce(
            || vec![0u64; n_h * n_thr],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );

    let pf = paths as f64;
    let mut probabilities = Vec::with_capacity(n_thr);
    let mut standard_errors = Vec::with_capacity(n_thr);
    for i in 0..n_thr {
        let mut row_p = Vec::with_capacity(n_h);
        let mut row_se = Vec::with_capacity(n_h);
        for j in 0..n_h {
            let est = counts[i * n_h + j] as f64 / pf;
            row_p.push(est);
            row_se.push((est * (1.0 - est) / pf).sqrt());
        }
        probabilities.push(row_p);
        standard_errors.push(row_se);
    }
    Ok(TailTable {
        thresholds: thresholds.to_vec(),
        horizons: horizons.to_vec(),
        probabilities,
        standard_errors,
        paths,
        seed: source.seed(),
    })
}
