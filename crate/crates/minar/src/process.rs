//! Binomial thinning and the multivariate INAR(1) recursion.
//!
//! The process is `N_t = P ∘ N_{t-1} + eps_t`, where `P ∘ N` thins component
//! j of the previous counts through independent Bernoulli survivals with
//! probability `p_{i,j}` toward component i, and `eps_t` is an i.i.d.
//! integer-valued innovation vector.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::CountSeries;

/// Square matrix of survival probabilities driving autoregression and
/// cross-series contagion. Every entry lies in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct ThinningMatrix {
    d: usize,
    entries: Vec<f64>, // row-major
}

impl ThinningMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let d = rows.len();
        if d == 0 {
            return Err(Error::Domain("thinning matrix must have d >= 1".into()));
        }
        let mut entries = Vec::with_capacity(d * d);
        for row in &rows {
            if row.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    actual: row.len(),
                });
            }
            for &p in row {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::Domain(format!(
                        "thinning probability {p} outside [0, 1]"
                    )));
                }
                entries.push(p);
            }
        }
        Ok(Self { d, entries })
    }

    /// Convenience constructor for the bivariate case.
    pub fn bivariate(p11: f64, p12: f64, p21: f64, p22: f64) -> Result<Self> {
        Self::new(vec![vec![p11, p12], vec![p21, p22]])
    }

    pub fn zeros(d: usize) -> Self {
        Self {
            d,
            entries: vec![0.0; d * d],
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.d + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.d..(i + 1) * self.d]
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.d, self.d, &self.entries)
    }

    /// The matrix `V` with entries `p_{i,j} (1 - p_{i,j})`: per-pair thinning
    /// variances.
    pub fn bernoulli_variance_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.d, self.d, |i, j| {
            let p = self.get(i, j);
            p * (1.0 - p)
        })
    }

    /// Largest eigenvalue modulus. For the 2x2 case this is the closed-form
    /// quadratic root; larger matrices use power iteration (the Perron root
    /// of an entrywise-nonnegative matrix is real and dominant).
    pub fn spectral_radius(&self) -> f64 {
        match self.d {
            1 => self.entries[0],
            2 => {
                // roots of x^2 - tr x + det are real since b*c >= 0, and the
                // larger one dominates in modulus for nonnegative entries
                let (a, b) = (self.get(0, 0), self.get(0, 1));
                let (c, e) = (self.get(1, 0), self.get(1, 1));
                let disc = 0.25 * (a - e) * (a - e) + b * c;
                0.5 * (a + e) + disc.sqrt()
            }
            _ => self.power_iteration_radius(),
        }
    }

    fn power_iteration_radius(&self) -> f64 {
        let m = self.to_matrix();
        let mut v = DVector::from_element(self.d, 1.0 / self.d as f64);
        let mut rho = 0.0;
        for _ in 0..100_000 {
            let w = &m * &v;
            let norm = w.norm();
            if norm == 0.0 {
                return 0.0; // nilpotent
            }
            let next = norm / v.norm();
            let done = (next - rho).abs() <= 1e-12 * next.max(1.0);
            rho = next;
            v = w / norm;
            if done {
                break;
            }
        }
        rho
    }

    /// True when the spectral radius is strictly below 1, the condition for
    /// a stationary INAR(1) process to exist.
    pub fn is_stationary(&self) -> bool {
        self.spectral_radius() < 1.0
    }
}

impl TryFrom<Vec<Vec<f64>>> for ThinningMatrix {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(rows)
    }
}

impl From<ThinningMatrix> for Vec<Vec<f64>> {
    fn from(m: ThinningMatrix) -> Self {
        (0..m.d).map(|i| m.row(i).to_vec()).collect()
    }
}

/// Draw from Binomial(n, p): the thinning `p ∘ n`.
///
/// `p` exactly 0 or 1 (and `n = 0`) resolve deterministically without
/// consuming randomness, so streams stay aligned across model variants that
/// pin individual probabilities.
pub fn binomial_thin<R: Rng + ?Sized>(p: f64, n: u64, rng: &mut R) -> Result<u64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("probability {p} outside [0, 1]")));
    }
    if n == 0 || p == 0.0 {
        return Ok(0);
    }
    if p == 1.0 {
        return Ok(n);
    }
    let bin = Binomial::new(n, p).map_err(|e| Error::Domain(e.to_string()))?;
    Ok(bin.sample(rng))
}

/// The multivariate thinning `P ∘ N`: component i is the sum of d independent
/// binomial thinnings of `N_1..N_d` with probabilities `p_{i,1}..p_{i,d}`.
pub fn matrix_thin<R: Rng + ?Sized>(
    p: &ThinningMatrix,
    counts: &[u64],
    rng: &mut R,
) -> Result<Vec<u64>> {
    if counts.len() != p.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            actual: counts.len(),
        });
    }
    (0..p.dim())
        .map(|i| {
            p.row(i)
                .iter()
                .zip(counts)
                .try_fold(0u64, |acc, (&pij, &nj)| {
                    Ok(acc + binomial_thin(pij, nj, rng)?)
                })
        })
        .collect()
}

/// Samples i.i.d. integer-valued innovation vectors.
pub trait InnovationSampler {
    fn dim(&self) -> usize;
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<u64>;
}

/// Independent Poisson innovations, one rate per component.
#[derive(Debug, Clone)]
pub struct IndependentPoisson {
    rates: Vec<f64>,
}

impl IndependentPoisson {
    pub fn new(rates: Vec<f64>) -> Result<Self> {
        if rates.iter().any(|&l| l < 0.0 || !l.is_finite()) {
            return Err(Error::Domain("Poisson rates must be >= 0".into()));
        }
        Ok(Self { rates })
    }
}

impl InnovationSampler for IndependentPoisson {
    fn dim(&self) -> usize {
        self.rates.len()
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<u64> {
        self.rates.iter().map(|&l| poisson_draw(l, rng)).collect()
    }
}

/// Poisson draw that treats a zero rate as a point mass at 0 without
/// consuming randomness.
pub(crate) fn poisson_draw<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    let pois = Poisson::new(lambda).expect("positive finite rate");
    let x: f64 = pois.sample(rng);
    x as u64
}

/// Simulate the INAR(1) recursion for `steps` transitions starting from `n0`.
///
/// The returned series has `steps + 1` rows, the first being `n0`. A
/// nonstationary `P` is allowed here; only the moment formulas require
/// stationarity.
pub fn simulate_minar<S, R>(
    p: &ThinningMatrix,
    innovations: &S,
    n0: &[u64],
    steps: usize,
    rng: &mut R,
) -> Result<CountSeries>
where
    S: InnovationSampler,
    R: Rng + ?Sized,
{
    let d = p.dim();
    if n0.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: n0.len(),
        });
    }
    if innovations.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: innovations.dim(),
        });
    }
    let mut counts = Vec::with_capacity((steps + 1) * d);
    counts.extend_from_slice(n0);
    let mut state = n0.to_vec();
    for _ in 0..steps {
        let thinned = matrix_thin(p, &state, rng)?;
        let eps = innovations.sample(rng);
        for (s, (t, e)) in state.iter_mut().zip(thinned.iter().zip(&eps)) {
            *s = t + e;
        }
        counts.extend_from_slice(&state);
    }
    CountSeries::new(d, counts)
}
