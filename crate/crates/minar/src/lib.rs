//! Multivariate integer-valued autoregressive (INAR) count processes.
//!
//! The process `N_t = P ∘ N_{t-1} + eps_t` combines binomial thinning of the
//! previous counts through a matrix of survival probabilities with i.i.d.
//! integer innovations; off-diagonal thinning entries carry lagged contagion
//! between series and the innovation covariance carries instantaneous
//! dependence. The crate provides:
//!
//! - simulation and stationarity checks ([`process`]),
//! - the common-shock bivariate Poisson innovation ([`bivpois`]),
//! - closed-form stationary moments and autocovariances ([`moments`]),
//! - conditional maximum likelihood over a nested model ladder and
//!   Granger-causality likelihood ratio tests ([`inference`]),
//! - h-step forecasts and Monte Carlo tail-risk tables ([`forecast`]),
//! - earthquake-catalog ingestion into count series ([`catalog`]),
//! - reproducible estimator studies ([`experiments`]).
//!
//! All randomness flows through [`rng::RandomSource`] (seed + stream id), so
//! every result is bit-reproducible, including parallel runs.

pub mod bivpois;
pub mod catalog;
pub mod error;
pub mod experiments;
pub mod forecast;
pub mod inference;
pub mod moments;
pub mod process;
pub mod rng;
pub mod series;

pub use bivpois::{bp_logpmf, bp_moments, bp_sample, BivPoissonParams};
pub use error::{Error, Result};
pub use forecast::{forecast_mean, forecast_var, mc_tail_table, ForecastResult, TailTable};
pub use inference::{
    conditional_loglik, fit_cmle, granger_tests, lrt, transition_logprob, FitOptions, FitResult,
    ModelSpec,
};
pub use moments::{autocov, correlation_summary, stationary_cov, stationary_mean};
pub use process::{binomial_thin, matrix_thin, simulate_minar, ThinningMatrix};
pub use rng::RandomSource;
pub use series::CountSeries;
