//! Bivariate Poisson innovations with a common shock.
//!
//! The pair is built as `eps_1 = M_1 + M_0`, `eps_2 = M_2 + M_0` from
//! independent Poisson variates with means `lambda_1 - phi`, `lambda_2 - phi`
//! and `phi`. Marginals are Poisson(lambda_1) and Poisson(lambda_2) and the
//! covariance equals `phi`, so a single parameter carries the instantaneous
//! dependence between the two series.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::process::{poisson_draw, InnovationSampler};

/// Parameter triple of the common-shock bivariate Poisson distribution:
/// marginal means `lambda1`, `lambda2` and common-shock covariance
/// `phi` in `[0, min(lambda1, lambda2)]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BivPoissonRepr", into = "BivPoissonRepr")]
pub struct BivPoissonParams {
    lambda1: f64,
    lambda2: f64,
    phi: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct BivPoissonRepr {
    lambda1: f64,
    lambda2: f64,
    phi: f64,
}

impl BivPoissonParams {
    pub fn new(lambda1: f64, lambda2: f64, phi: f64) -> Result<Self> {
        if !(lambda1 > 0.0 && lambda1.is_finite()) || !(lambda2 > 0.0 && lambda2.is_finite()) {
            return Err(Error::Domain(format!(
                "lambda1 and lambda2 must be positive finite, got ({lambda1}, {lambda2})"
            )));
        }
        if !(0.0..=lambda1.min(lambda2)).contains(&phi) {
            return Err(Error::Domain(format!(
                "phi = {phi} outside [0, min(lambda1, lambda2) = {}]",
                lambda1.min(lambda2)
            )));
        }
        Ok(Self {
            lambda1,
            lambda2,
            phi,
        })
    }

    /// Independent margins (`phi = 0`).
    pub fn independent(lambda1: f64, lambda2: f64) -> Result<Self> {
        Self::new(lambda1, lambda2, 0.0)
    }

    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }

    pub fn lambda2(&self) -> f64 {
        self.lambda2
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// Mean vector `(lambda1, lambda2)`.
    pub fn mean_vector(&self) -> DVector<f64> {
        DVector::from_vec(vec![self.lambda1, self.lambda2])
    }

    /// Covariance matrix `[[lambda1, phi], [phi, lambda2]]`.
    pub fn covariance_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[self.lambda1, self.phi, self.phi, self.lambda2])
    }
}

impl TryFrom<BivPoissonRepr> for BivPoissonParams {
    type Error = Error;
    fn try_from(r: BivPoissonRepr) -> Result<Self> {
        Self::new(r.lambda1, r.lambda2, r.phi)
    }
}

impl From<BivPoissonParams> for BivPoissonRepr {
    fn from(p: BivPoissonParams) -> Self {
        Self {
            lambda1: p.lambda1,
            lambda2: p.lambda2,
            phi: p.phi,
        }
    }
}

/// Mean vector and covariance matrix of the innovation pair.
pub fn bp_moments(params: &BivPoissonParams) -> (DVector<f64>, DMatrix<f64>) {
    (params.mean_vector(), params.covariance_matrix())
}

pub(crate) fn ln_factorial(k: u64) -> f64 {
    if k < 2 {
        return 0.0; // ln_gamma(1) and ln_gamma(2) carry rounding residue
    }
    ln_gamma(k as f64 + 1.0)
}

/// Log of the Poisson pmf, with a zero rate treated as the point mass at 0.
pub(crate) fn poisson_logpmf(k: u64, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    -lambda + k as f64 * lambda.ln() - ln_factorial(k)
}

/// Log joint pmf at `(k1, k2)`.
///
/// Computed in log space over the common-shock decomposition: the summand for
/// shock count `i` is `Pois(k1-i; l1-phi) Pois(k2-i; l2-phi) Pois(i; phi)`,
/// accumulated with log-sum-exp so large counts stay finite.
pub fn bp_logpmf(k1: u64, k2: u64, params: &BivPoissonParams) -> f64 {
    let r1 = params.lambda1 - params.phi;
    let r2 = params.lambda2 - params.phi;
    let phi = params.phi;
    let mut max_term = f64::NEG_INFINITY;
    let mut terms = Vec::with_capacity((k1.min(k2) + 1) as usize);
    for i in 0..=k1.min(k2) {
        let t = poisson_logpmf(k1 - i, r1) + poisson_logpmf(k2 - i, r2) + poisson_logpmf(i, phi);
        if t > max_term {
            max_term = t;
        }
        terms.push(t);
    }
    if max_term == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = terms.iter().map(|t| (t - max_term).exp()).sum();
    max_term + sum.ln()
}

/// Draw a pair `(M1 + M0, M2 + M0)` from three independent Poisson variates.
pub fn bp_sample<R: Rng + ?Sized>(params: &BivPoissonParams, rng: &mut R) -> (u64, u64) {
    let m1 = poisson_draw(params.lambda1 - params.phi, rng);
    let m2 = poisson_draw(params.lambda2 - params.phi, rng);
    let m0 = poisson_draw(params.phi, rng);
    (m1 + m0, m2 + m0)
}

impl InnovationSampler for BivPoissonParams {
    fn dim(&self) -> usize {
        2
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<u64> {
        let (e1, e2) = bp_sample(self, rng);
        vec![e1, e2]
    }
}
