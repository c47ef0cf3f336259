//! Model ladder and parameter transforms.
//!
//! The bivariate INAR family is indexed by which of the seven natural
//! parameters `(p11, p12, p21, p22, lambda1, lambda2, phi)` are free; the
//! constrained ones are pinned to zero. Fitting happens on an unconstrained
//! scale: logit for thinning probabilities, log for innovation rates, and a
//! scaled logit mapping the free real line onto `[0, min(lambda1, lambda2))`
//! for the common-shock covariance.

use serde::{Deserialize, Serialize};

use crate::bivpois::BivPoissonParams;
use crate::error::{Error, Result};
use crate::process::ThinningMatrix;

/// Slack keeping `phi` strictly below `min(lambda1, lambda2)` during
/// optimization.
pub(crate) const PHI_SLACK: f64 = 1e-12;

/// Identifiers of the seven natural parameters, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamId {
    P11,
    P12,
    P21,
    P22,
    Lambda1,
    Lambda2,
    Phi,
}

pub(crate) const ALL_PARAMS: [ParamId; 7] = [
    ParamId::P11,
    ParamId::P12,
    ParamId::P21,
    ParamId::P22,
    ParamId::Lambda1,
    ParamId::Lambda2,
    ParamId::Phi,
];

impl ParamId {
    pub fn name(&self) -> &'static str {
        match self {
            ParamId::P11 => "p11",
            ParamId::P12 => "p12",
            ParamId::P21 => "p21",
            ParamId::P22 => "p22",
            ParamId::Lambda1 => "lambda1",
            ParamId::Lambda2 => "lambda2",
            ParamId::Phi => "phi",
        }
    }

    fn index(&self) -> usize {
        match self {
            ParamId::P11 => 0,
            ParamId::P12 => 1,
            ParamId::P21 => 2,
            ParamId::P22 => 3,
            ParamId::Lambda1 => 4,
            ParamId::Lambda2 => 5,
            ParamId::Phi => 6,
        }
    }
}

/// One rung of the nested bivariate model family.
///
/// The first five variants form the estimation ladder from two independent
/// Poisson noises up to the unrestricted model; the last three are the
/// constrained thinning shapes used by the causality tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelSpec {
    /// `P = 0`, `phi = 0`: two independent Poisson noises (2 parameters).
    IndependentPoisson,
    /// `P = 0`: dependent Poisson noises (3 parameters).
    DependentPoisson,
    /// Diagonal `P`, `phi = 0`: two separate INAR(1) processes (4 parameters).
    IndependentInar,
    /// Diagonal `P`, free `phi` (5 parameters).
    DiagonalBinar,
    /// Unrestricted (7 parameters).
    FullBinar,
    /// Lower-triangular `P` (`p12 = 0`): series 1 may cause series 2 but not
    /// conversely (6 parameters).
    LowerTriangular,
    /// Upper-triangular `P` (`p21 = 0`): series 2 may cause series 1 but not
    /// conversely (6 parameters).
    UpperTriangular,
    /// Unrestricted `P` with independent innovation margins (`phi = 0`,
    /// 6 parameters).
    NoCommonShock,
}

impl ModelSpec {
    /// The five rungs of the estimation ladder, most to least constrained.
    pub const LADDER: [ModelSpec; 5] = [
        ModelSpec::IndependentPoisson,
        ModelSpec::DependentPoisson,
        ModelSpec::IndependentInar,
        ModelSpec::DiagonalBinar,
        ModelSpec::FullBinar,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::IndependentPoisson => "independent-poisson",
            ModelSpec::DependentPoisson => "dependent-poisson",
            ModelSpec::IndependentInar => "independent-inar",
            ModelSpec::DiagonalBinar => "diagonal-binar",
            ModelSpec::FullBinar => "full-binar",
            ModelSpec::LowerTriangular => "lower-triangular",
            ModelSpec::UpperTriangular => "upper-triangular",
            ModelSpec::NoCommonShock => "no-common-shock",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "independent-poisson" => Ok(ModelSpec::IndependentPoisson),
            "dependent-poisson" => Ok(ModelSpec::DependentPoisson),
            "independent-inar" => Ok(ModelSpec::IndependentInar),
            "diagonal-binar" => Ok(ModelSpec::DiagonalBinar),
            "full-binar" => Ok(ModelSpec::FullBinar),
            "lower-triangular" => Ok(ModelSpec::LowerTriangular),
            "upper-triangular" => Ok(ModelSpec::UpperTriangular),
            "no-common-shock" => Ok(ModelSpec::NoCommonShock),
            other => Err(Error::Parse(format!("unknown model {other:?}"))),
        }
    }

    /// The free parameters of this rung, in canonical order.
    pub fn free_params(&self) -> &'static [ParamId] {
        use ParamId::*;
        match self {
            ModelSpec::IndependentPoisson => &[Lambda1, Lambda2],
            ModelSpec::DependentPoisson => &[Lambda1, Lambda2, Phi],
            ModelSpec::IndependentInar => &[P11, P22, Lambda1, Lambda2],
            ModelSpec::DiagonalBinar => &[P11, P22, Lambda1, Lambda2, Phi],
            ModelSpec::FullBinar => &[P11, P12, P21, P22, Lambda1, Lambda2, Phi],
            ModelSpec::LowerTriangular => &[P11, P21, P22, Lambda1, Lambda2, Phi],
            ModelSpec::UpperTriangular => &[P11, P12, P22, Lambda1, Lambda2, Phi],
            ModelSpec::NoCommonShock => &[P11, P12, P21, P22, Lambda1, Lambda2],
        }
    }

    pub fn n_free(&self) -> usize {
        self.free_params().len()
    }

    fn free_mask(&self) -> u8 {
        self.free_params()
            .iter()
            .fold(0u8, |m, p| m | (1 << p.index()))
    }

    /// Whether every free parameter of `self` is free in `other` (non-strict:
    /// a model is nested in itself).
    pub fn is_nested_in(&self, other: &ModelSpec) -> bool {
        let (a, b) = (self.free_mask(), other.free_mask());
        a & b == a
    }
}

/// Full natural parameter set of a bivariate model, constrained entries
/// included as zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinarParams {
    pub p: ThinningMatrix,
    pub innov: BivPoissonParams,
}

impl BinarParams {
    pub fn new(p: ThinningMatrix, innov: BivPoissonParams) -> Result<Self> {
        if p.dim() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                actual: p.dim(),
            });
        }
        Ok(Self { p, innov })
    }

    pub(crate) fn get(&self, id: ParamId) -> f64 {
        match id {
            ParamId::P11 => self.p.get(0, 0),
            ParamId::P12 => self.p.get(0, 1),
            ParamId::P21 => self.p.get(1, 0),
            ParamId::P22 => self.p.get(1, 1),
            ParamId::Lambda1 => self.innov.lambda1(),
            ParamId::Lambda2 => self.innov.lambda2(),
            ParamId::Phi => self.innov.phi(),
        }
    }

    pub fn values(&self) -> [f64; 7] {
        let mut v = [0.0; 7];
        for (slot, id) in v.iter_mut().zip(ALL_PARAMS) {
            *slot = self.get(id);
        }
        v
    }

    /// Rebuild from a canonical 7-vector (entries for constrained parameters
    /// must already be zero).
    pub(crate) fn from_values(v: &[f64; 7]) -> Result<Self> {
        let p = ThinningMatrix::bivariate(v[0], v[1], v[2], v[3])?;
        let innov = BivPoissonParams::new(v[4], v[5], v[6])?;
        Ok(Self { p, innov })
    }

    /// Adapt these parameters into a valid optimizer start for `model`:
    /// entries pinned by the model are zeroed, and free probabilities or a
    /// free common shock sitting at zero are floored to a small interior
    /// value so the unconstrained transform stays finite. Warm-starting a
    /// richer rung from a nested optimum this way keeps fitted
    /// log-likelihoods monotone along nesting chains.
    pub fn as_start_for(&self, model: &ModelSpec) -> BinarParams {
        let free = model.free_params();
        let mut v = self.values();
        for (i, id) in ALL_PARAMS.iter().enumerate() {
            if !free.contains(id) {
                v[i] = 0.0;
            }
        }
        for (i, id) in ALL_PARAMS.iter().enumerate() {
            if !free.contains(id) {
                continue;
            }
            match id {
                ParamId::Phi => {
                    let min_l = v[4].min(v[5]);
                    v[6] = v[6].clamp(1e-3 * min_l, min_l * (1.0 - 1e-6));
                }
                ParamId::Lambda1 | ParamId::Lambda2 => {}
                _ => v[i] = v[i].clamp(1e-3, 1.0 - 1e-3),
            }
        }
        Self::from_values(&v).expect("floored values stay in domain")
    }
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

/// Map natural parameters to the unconstrained optimization vector (free
/// parameters only, canonical order).
pub(crate) fn encode(params: &BinarParams, model: &ModelSpec) -> Vec<f64> {
    let min_l = params.innov.lambda1().min(params.innov.lambda2());
    let phi_cap = min_l * (1.0 - PHI_SLACK);
    model
        .free_params()
        .iter()
        .map(|id| match id {
            ParamId::Lambda1 | ParamId::Lambda2 => params.get(*id).ln(),
            ParamId::Phi => logit(params.get(*id) / phi_cap),
            _ => logit(params.get(*id)),
        })
        .collect()
}

/// Inverse of [`encode`]: rebuild natural parameters, pinning constrained
/// entries to zero. Errors when the decoded values leave the admissible
/// domain (e.g. an overflowed rate).
pub(crate) fn decode(u: &[f64], model: &ModelSpec) -> Result<BinarParams> {
    let free = model.free_params();
    if u.len() != free.len() {
        return Err(Error::DimensionMismatch {
            expected: free.len(),
            actual: u.len(),
        });
    }
    let mut v = [0.0f64; 7];
    let mut phi_u = None;
    for (&id, &ui) in free.iter().zip(u) {
        match id {
            ParamId::Lambda1 | ParamId::Lambda2 => v[id.index()] = ui.exp(),
            ParamId::Phi => phi_u = Some(ui),
            _ => v[id.index()] = sigmoid(ui),
        }
    }
    if let Some(ui) = phi_u {
        let min_l = v[4].min(v[5]);
        v[6] = min_l * (1.0 - PHI_SLACK) * sigmoid(ui);
    }
    BinarParams::from_values(&v)
}
