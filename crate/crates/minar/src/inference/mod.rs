//! Conditional likelihood, CMLE over the nested model ladder, and
//! Granger-causality likelihood ratio tests for bivariate INAR(1) processes
//! with common-shock Poisson innovations.

mod fit;
mod granger;
mod likelihood;
mod model;
mod optim;

pub use fit::{fit_cmle, fit_cmle_from, fit_cmle_multi, FitOptions, FitResult, ParamEstimate};
pub use granger::{
    granger_tests, lrt, Causality, CausalityReport, GrangerOptions, LaggedTests, LrtResult,
};
pub use likelihood::{
    conditional_loglik, thinning_transition_logpmf, transition_logprob, MIN_FIT_LENGTH,
};
pub use model::{BinarParams, ModelSpec, ParamId};
pub use optim::{OptimMethod, OptimOptions};
