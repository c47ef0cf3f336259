//! Likelihood ratio tests and Granger-causality classification.
//!
//! Lagged causality lives in the off-diagonal thinning entries: `p12 != 0`
//! means past values of series 2 improve the prediction of series 1 (series 2
//! causes series 1), and symmetrically for `p21`. Instantaneous causality is
//! the common-shock covariance `phi != 0`.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::series::CountSeries;

use super::fit::{fit_cmle, FitOptions, FitResult};
use super::model::ModelSpec;

/// A likelihood ratio test outcome.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LrtResult {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

/// Upper-tail chi-square p-value.
fn chi2_upper_tail(stat: f64, df: usize) -> f64 {
    if df == 0 {
        return 1.0;
    }
    let chi = ChiSquared::new(df as f64).expect("positive df");
    1.0 - chi.cdf(stat)
}

/// Likelihood ratio test of `nested` against `full` on the same data:
/// `2 (loglik_full - loglik_nested)`, clamped at zero, against a chi-square
/// with as many degrees of freedom as the difference in free parameters.
pub fn lrt(nested: &FitResult, full: &FitResult) -> Result<LrtResult> {
    if !nested.model.is_nested_in(&full.model) {
        return Err(Error::NotNested(format!(
            "{} is not nested in {}",
            nested.model.name(),
            full.model.name()
        )));
    }
    if nested.n_obs != full.n_obs {
        return Err(Error::NotNested(format!(
            "fits use different data: {} vs {} rows",
            nested.n_obs, full.n_obs
        )));
    }
    let statistic = (2.0 * (full.loglik - nested.loglik)).max(0.0);
    let df = full.model.n_free() - nested.model.n_free();
    Ok(LrtResult {
        statistic,
        df,
        p_value: chi2_upper_tail(statistic, df),
    })
}

/// Lagged-causality classification of a bivariate series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Causality {
    /// Diagonal thinning not rejected: no lagged causality either way.
    #[serde(rename = "independent")]
    Independent,
    /// Series 1 causes series 2 only (`p21 != 0`, `p12 = 0`).
    #[serde(rename = "1->2")]
    OneCausesTwo,
    /// Series 2 causes series 1 only (`p12 != 0`, `p21 = 0`).
    #[serde(rename = "1<-2")]
    TwoCausesOne,
    /// Feedback: causality in both directions.
    #[serde(rename = "1<->2")]
    Feedback,
}

/// The lagged constraint-shape tests, each against the full model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LaggedTests {
    /// `p12 = p21 = 0` (df 2).
    pub diagonal: LrtResult,
    /// `p12 = 0`: series 2 does not cause series 1 (df 1).
    pub lower_triangular: LrtResult,
    /// `p21 = 0`: series 1 does not cause series 2 (df 1).
    pub upper_triangular: LrtResult,
}

/// Granger-causality report: the instantaneous (common shock) test, the
/// lagged shape tests, the per-model log-likelihoods and the classification.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CausalityReport {
    pub instantaneous: LrtResult,
    pub lagged: LaggedTests,
    pub classification: Causality,
    pub logliks: Vec<(String, f64)>,
    /// Whether every underlying fit converged within its budget.
    pub all_converged: bool,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct GrangerOptions {
    /// Rejection level for the classification (default 5%).
    pub level: f64,
    pub fit: FitOptions,
}

impl Default for GrangerOptions {
    fn default() -> Self {
        Self {
            level: 0.05,
            fit: FitOptions::default(),
        }
    }
}

/// Fit the full, diagonal, both triangular and independent-innovation models
/// and classify the series by the most parsimonious thinning shape that the
/// data do not reject at `options.level`.
///
/// Richer models are additionally warm-started from the nested optima so the
/// clamped LRT statistics never suffer from an under-optimized full model.
pub fn granger_tests(series: &CountSeries, options: &GrangerOptions) -> Result<CausalityReport> {
    use super::fit::fit_cmle_multi;

    let diagonal = fit_cmle(series, ModelSpec::DiagonalBinar, &options.fit)?;
    let from_diag = |m: &ModelSpec| diagonal.params_struct().as_start_for(m);
    let lower = fit_cmle_multi(
        series,
        ModelSpec::LowerTriangular,
        &[from_diag(&ModelSpec::LowerTriangular)],
        &options.fit,
    )?;
    let upper = fit_cmle_multi(
        series,
        ModelSpec::UpperTriangular,
        &[from_diag(&ModelSpec::UpperTriangular)],
        &options.fit,
    )?;
    let no_shock = fit_cmle_multi(
        series,
        ModelSpec::NoCommonShock,
        &[from_diag(&ModelSpec::NoCommonShock)],
        &options.fit,
    )?;
    let full_starts: Vec<_> = [&diagonal, &lower, &upper, &no_shock]
        .iter()
        .map(|f| f.params_struct().as_start_for(&ModelSpec::FullBinar))
        .collect();
    let full = fit_cmle_multi(series, ModelSpec::FullBinar, &full_starts, &options.fit)?;

    let instantaneous = lrt(&no_shock, &full)?;
    let lagged = LaggedTests {
        diagonal: lrt(&diagonal, &full)?,
        lower_triangular: lrt(&lower, &full)?,
        upper_triangular: lrt(&upper, &full)?,
    };

    let level = options.level;
    let classification = if lagged.diagonal.p_value > level {
        Causality::Independent
    } else {
        let lower_ok = lagged.lower_triangular.p_value > level;
        let upper_ok = lagged.upper_triangular.p_value > level;
        match (lower_ok, upper_ok) {
            (true, false) => Causality::OneCausesTwo,
            (false, true) => Causality::TwoCausesOne,
            (false, false) => Causality::Feedback,
            // both one-constraint shapes acceptable: keep the better fitting
            (true, true) => {
                if lower.loglik >= upper.loglik {
                    Causality::OneCausesTwo
                } else {
                    Causality::TwoCausesOne
                }
            }
        }
    };

    let fits = [&full, &diagonal, &lower, &upper, &no_shock];
    let logliks = fits
        .iter()
        .map(|f| (f.model.name().to_string(), f.loglik))
        .collect();
    let all_converged = fits.iter().all(|f| f.converged);

    Ok(CausalityReport {
        instantaneous,
        lagged,
        classification,
        logliks,
        all_converged,
    })
}
