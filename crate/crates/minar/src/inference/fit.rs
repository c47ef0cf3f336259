//! Conditional maximum likelihood estimation over the model ladder.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::bivpois::BivPoissonParams;
use crate::error::{Error, Result};
use crate::process::ThinningMatrix;
use crate::series::CountSeries;

use super::likelihood::{TransitionTable, MIN_FIT_LENGTH};
use super::model::{decode, encode, BinarParams, ModelSpec, ParamId, PHI_SLACK};
use super::optim::{minimize, OptimOptions};

/// Distance from a domain edge below which an estimate is flagged as a
/// boundary solution (asymptotic normality only holds in the interior).
const BOUNDARY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    pub optim: OptimOptions,
    /// Compute the observed-information standard errors after the fit.
    pub compute_std_errors: bool,
    /// Central-difference step for the observed information, natural scale.
    pub hessian_step: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            optim: OptimOptions::default(),
            compute_std_errors: true,
            hessian_step: 1e-4,
        }
    }
}

/// One fitted parameter with its uncertainty and boundary diagnostic.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamEstimate {
    pub name: String,
    pub estimate: f64,
    /// Observed-information standard error; absent when the information
    /// matrix could not be evaluated or inverted (e.g. boundary solutions).
    pub std_error: Option<f64>,
    pub at_boundary: bool,
}

/// Estimates for one rung of the model ladder.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResult {
    pub model: ModelSpec,
    pub p_hat: ThinningMatrix,
    pub innov_hat: BivPoissonParams,
    pub loglik: f64,
    pub params: Vec<ParamEstimate>,
    pub converged: bool,
    pub evaluations: usize,
    pub iterations: usize,
    /// Number of observed rows (the likelihood conditions on the first).
    pub n_obs: usize,
}

impl FitResult {
    pub fn params_struct(&self) -> BinarParams {
        BinarParams {
            p: self.p_hat.clone(),
            innov: self.innov_hat,
        }
    }

    pub fn estimate(&self, name: &str) -> Option<f64> {
        self.params
            .iter()
            .find(|p| p.name == name)
            .map(|p| p.estimate)
    }

    /// Plain-text summary in the layout of the published parameter tables:
    /// thinning probabilities as percentages, innovation rates, optionally an
    /// LRT row against the diagonal rung, and the unconditional means.
    pub fn text_summary(&self, lrt_over_diagonal: Option<f64>) -> String {
        let mut out = String::new();
        let pct = |v: f64| format!("{:.2}%", 100.0 * v);
        out.push_str(&format!("model            {}\n", self.model.name()));
        out.push_str(&format!("p11              {}\n", pct(self.p_hat.get(0, 0))));
        out.push_str(&format!("p12              {}\n", pct(self.p_hat.get(0, 1))));
        out.push_str(&format!("p21              {}\n", pct(self.p_hat.get(1, 0))));
        out.push_str(&format!("p22              {}\n", pct(self.p_hat.get(1, 1))));
        out.push_str(&format!(
            "lambda1          {:.4}\n",
            self.innov_hat.lambda1()
        ));
        out.push_str(&format!(
            "lambda2          {:.4}\n",
            self.innov_hat.lambda2()
        ));
        out.push_str(&format!("phi              {:.4}\n", self.innov_hat.phi()));
        if let Some(stat) = lrt_over_diagonal {
            out.push_str(&format!("LRT (over diag.) {stat:.4}\n"));
        }
        if let Ok(mu) = crate::moments::stationary_mean(&self.p_hat, &self.innov_hat.mean_vector())
        {
            out.push_str(&format!("Uncond. mean (#1) {:.4}\n", mu[0]));
            out.push_str(&format!("Uncond. mean (#2) {:.4}\n", mu[1]));
        }
        out.push_str(&format!("loglik           {:.6}\n", self.loglik));
        out.push_str(&format!("converged        {}\n", self.converged));
        out
    }
}

struct SampleStats {
    means: [f64; 2],
    lag1_corr: [f64; 2],
    cross_cov: f64,
    zero_variance: [bool; 2],
}

fn sample_stats(series: &CountSeries) -> SampleStats {
    let n = series.n_steps();
    let means = series.column_means();
    let mut var = [0.0f64; 2];
    let mut lag_cov = [0.0f64; 2];
    let mut cross = 0.0f64;
    for t in 0..n {
        let row = series.row(t);
        let d0 = row[0] as f64 - means[0];
        let d1 = row[1] as f64 - means[1];
        var[0] += d0 * d0;
        var[1] += d1 * d1;
        cross += d0 * d1;
        if t > 0 {
            let prev = series.row(t - 1);
            lag_cov[0] += d0 * (prev[0] as f64 - means[0]);
            lag_cov[1] += d1 * (prev[1] as f64 - means[1]);
        }
    }
    let zero_variance = [var[0] == 0.0, var[1] == 0.0];
    SampleStats {
        means: [means[0], means[1]],
        lag1_corr: [
            if var[0] > 0.0 {
                lag_cov[0] / var[0]
            } else {
                f64::NAN
            },
            if var[1] > 0.0 {
                lag_cov[1] / var[1]
            } else {
                f64::NAN
            },
        ],
        cross_cov: cross / n as f64,
        zero_variance,
    }
}

/// Method-of-moments warm start: diagonal thinning from lag-1
/// autocorrelations, off-diagonals at 0.01, innovation rates from the means
/// discounted by the thinning, and the common shock from the sample
/// cross-covariance clamped into its domain.
fn initial_params(series: &CountSeries, model: &ModelSpec) -> Result<BinarParams> {
    let stats = sample_stats(series);
    let free = model.free_params();
    let has = |id: ParamId| free.contains(&id);
    for i in 0..2 {
        if stats.means[i] <= 0.0 {
            return Err(Error::Estimation(format!(
                "series column {} is all zeros; innovation rates must be positive",
                i + 1
            )));
        }
        if (has(ParamId::P11) || has(ParamId::P22)) && stats.zero_variance[i] {
            return Err(Error::Estimation(format!(
                "series column {} is constant; cannot start an autoregressive fit",
                i + 1
            )));
        }
    }
    let p11 = if has(ParamId::P11) {
        stats.lag1_corr[0].clamp(0.01, 0.9)
    } else {
        0.0
    };
    let p22 = if has(ParamId::P22) {
        stats.lag1_corr[1].clamp(0.01, 0.9)
    } else {
        0.0
    };
    let p12 = if has(ParamId::P12) { 0.01 } else { 0.0 };
    let p21 = if has(ParamId::P21) { 0.01 } else { 0.0 };
    // lambda = (I - P) m, clamped positive
    let l1 = (stats.means[0] * (1.0 - p11) - stats.means[1] * p12).max(1e-3);
    let l2 = (stats.means[1] * (1.0 - p22) - stats.means[0] * p21).max(1e-3);
    let min_l = l1.min(l2);
    let phi = if has(ParamId::Phi) {
        stats.cross_cov.clamp(1e-3 * min_l, 0.9 * min_l)
    } else {
        0.0
    };
    BinarParams::new(
        ThinningMatrix::bivariate(p11, p12, p21, p22)?,
        BivPoissonParams::new(l1, l2, phi)?,
    )
}

fn boundary_flag(id: ParamId, params: &BinarParams) -> bool {
    let v = params.get(id);
    match id {
        ParamId::Lambda1 | ParamId::Lambda2 => false,
        ParamId::Phi => {
            let min_l = params.innov.lambda1().min(params.innov.lambda2());
            v <= BOUNDARY_TOL * min_l || v >= min_l * (1.0 - PHI_SLACK) - BOUNDARY_TOL * min_l
        }
        _ => v <= BOUNDARY_TOL || v >= 1.0 - BOUNDARY_TOL,
    }
}

/// Log-likelihood as a function of the free natural parameters (used for the
/// observed information).
fn natural_loglik(
    table: &TransitionTable,
    model: &ModelSpec,
    base: &BinarParams,
    theta: &[f64],
) -> f64 {
    let mut values = base.values();
    for (slot, &id) in theta.iter().zip(model.free_params()) {
        let idx = super::model::ALL_PARAMS
            .iter()
            .position(|p| *p == id)
            .unwrap();
        values[idx] = *slot;
    }
    match BinarParams::from_values(&values) {
        Ok(p) => table.loglik(&p),
        Err(_) => f64::NAN,
    }
}

/// Observed-information standard errors by central finite differences of the
/// log-likelihood on the natural scale, symmetrized before inversion.
fn standard_errors(
    table: &TransitionTable,
    model: &ModelSpec,
    fitted: &BinarParams,
    step: f64,
) -> Vec<Option<f64>> {
    let free = model.free_params();
    let k = free.len();
    let theta: Vec<f64> = free.iter().map(|&id| fitted.get(id)).collect();
    let f = |t: &[f64]| natural_loglik(table, model, fitted, t);
    let f0 = f(&theta);
    let mut hess = DMatrix::zeros(k, k);
    let mut ok = f0.is_finite();
    'outer: for i in 0..k {
        for j in i..k {
            let mut t = theta.clone();
            let h = if i == j {
                t[i] = theta[i] + step;
                let fp = f(&t);
                t[i] = theta[i] - step;
                let fm = f(&t);
                (fp - 2.0 * f0 + fm) / (step * step)
            } else {
                t[i] = theta[i] + step;
                t[j] = theta[j] + step;
                let fpp = f(&t);
                t[j] = theta[j] - step;
                let fpm = f(&t);
                t[i] = theta[i] - step;
                t[j] = theta[j] + step;
                let fmp = f(&t);
                t[j] = theta[j] - step;
                let fmm = f(&t);
                (fpp - fpm - fmp + fmm) / (4.0 * step * step)
            };
            if !h.is_finite() {
                ok = false;
                break 'outer;
            }
            hess[(i, j)] = h;
            hess[(j, i)] = h;
        }
    }
    if !ok {
        return vec![None; k];
    }
    // observed information is the negative Hessian of the log-likelihood
    match (-hess).try_inverse() {
        Some(cov) => (0..k)
            .map(|i| {
                let v = cov[(i, i)];
                if v.is_finite() && v > 0.0 {
                    Some(v.sqrt())
                } else {
                    None
                }
            })
            .collect(),
        None => vec![None; k],
    }
}

/// Fit one rung by conditional maximum likelihood from the method-of-moments
/// warm start.
pub fn fit_cmle(series: &CountSeries, model: ModelSpec, options: &FitOptions) -> Result<FitResult> {
    if series.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            actual: series.dim(),
        });
    }
    if series.n_steps() < MIN_FIT_LENGTH {
        return Err(Error::SeriesTooShort {
            needed: MIN_FIT_LENGTH,
            actual: series.n_steps(),
        });
    }
    let start = initial_params(series, &model)?;
    fit_cmle_from(series, model, &start, options)
}

/// Fit one rung trying the method-of-moments start plus the given extra
/// starts (typically nested optima adapted via
/// [`BinarParams::as_start_for`]), keeping the best likelihood. Evaluation
/// counts accumulate over all runs.
pub fn fit_cmle_multi(
    series: &CountSeries,
    model: ModelSpec,
    extra_starts: &[BinarParams],
    options: &FitOptions,
) -> Result<FitResult> {
    let mut best = fit_cmle(series, model, options)?;
    let mut evaluations = best.evaluations;
    let mut iterations = best.iterations;
    for start in extra_starts {
        let fit = fit_cmle_from(series, model, start, options)?;
        evaluations += fit.evaluations;
        iterations += fit.iterations;
        if fit.loglik > best.loglik {
            best = fit;
        }
    }
    best.evaluations = evaluations;
    best.iterations = iterations;
    Ok(best)
}

/// Fit one rung starting the optimizer from `start` (must satisfy the rung's
/// constraints: pinned entries zero).
pub fn fit_cmle_from(
    series: &CountSeries,
    model: ModelSpec,
    start: &BinarParams,
    options: &FitOptions,
) -> Result<FitResult> {
    if series.n_steps() < MIN_FIT_LENGTH {
        return Err(Error::SeriesTooShort {
            needed: MIN_FIT_LENGTH,
            actual: series.n_steps(),
        });
    }
    for &id in super::model::ALL_PARAMS.iter() {
        if !model.free_params().contains(&id) && start.get(id) != 0.0 {
            return Err(Error::Estimation(format!(
                "start point sets constrained parameter {} nonzero",
                id.name()
            )));
        }
    }
    let table = TransitionTable::from_series(series)?;
    let u0 = encode(start, &model);
    let mut objective = |u: &[f64]| match decode(u, &model) {
        Ok(params) => -table.loglik(&params),
        Err(_) => f64::INFINITY,
    };
    let outcome = minimize(&mut objective, &u0, &options.optim);
    let fitted = decode(&outcome.x, &model)
        .map_err(|e| Error::Numerical(format!("optimizer returned invalid point: {e}")))?;
    let loglik = -outcome.value;
    if !loglik.is_finite() {
        return Err(Error::Estimation(
            "likelihood is degenerate at every visited point".into(),
        ));
    }
    let std_errors = if options.compute_std_errors {
        standard_errors(&table, &model, &fitted, options.hessian_step)
    } else {
        vec![None; model.n_free()]
    };
    let params = model
        .free_params()
        .iter()
        .zip(std_errors)
        .map(|(&id, se)| ParamEstimate {
            name: id.name().to_string(),
            estimate: fitted.get(id),
            std_error: se,
            at_boundary: boundary_flag(id, &fitted),
        })
        .collect();
    Ok(FitResult {
        model,
        p_hat: fitted.p.clone(),
        innov_hat: fitted.innov,
        loglik,
        params,
        converged: outcome.converged,
        evaluations: outcome.evaluations,
        iterations: outcome.iterations,
        n_obs: series.n_steps(),
    })
}
