//! Reproducible study harness: estimator convergence over sample sizes and
//! the five-model comparison ladder.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bivpois::BivPoissonParams;
use crate::error::{Error, Result};
use crate::inference::{
    fit_cmle, fit_cmle_multi, lrt, BinarParams, FitOptions, FitResult, ModelSpec,
};
use crate::moments::stationary_mean;
use crate::process::{simulate_minar, ThinningMatrix};
use crate::rng::RandomSource;
use crate::series::CountSeries;

const PARAM_NAMES: [&str; 7] = ["p11", "p12", "p21", "p22", "lambda1", "lambda2", "phi"];
const BURN_IN: usize = 200;

/// Specification of an estimator convergence study: simulate `replications`
/// series per sample size from the true parameters and refit the full model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudySpec {
    pub p: ThinningMatrix,
    pub innov: BivPoissonParams,
    pub sizes: Vec<usize>,
    pub replications: usize,
    pub seed: u64,
    #[serde(default = "study_fit_options")]
    pub fit_options: FitOptions,
}

fn study_fit_options() -> FitOptions {
    FitOptions {
        compute_std_errors: false,
        ..Default::default()
    }
}

impl StudySpec {
    pub fn new(
        p: ThinningMatrix,
        innov: BivPoissonParams,
        sizes: Vec<usize>,
        replications: usize,
        seed: u64,
    ) -> Result<Self> {
        let spec = Self {
            p,
            innov,
            sizes,
            replications,
            seed,
            fit_options: study_fit_options(),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Also called by the study runner, since deserialized specs bypass
    /// [`StudySpec::new`].
    fn validate(&self) -> Result<()> {
        if self.p.dim() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                actual: self.p.dim(),
            });
        }
        if self.replications < 2 {
            return Err(Error::Domain("replications must be >= 2".into()));
        }
        if self.sizes.is_empty()
            || self.sizes.windows(2).any(|w| w[0] >= w[1])
            || self.sizes[0] == 0
        {
            return Err(Error::Domain(
                "sizes must be positive and strictly increasing".into(),
            ));
        }
        Ok(())
    }

    fn truth(&self) -> [f64; 7] {
        BinarParams {
            p: self.p.clone(),
            innov: self.innov,
        }
        .values()
    }
}

/// Per-size replication means and standard deviations of the full-model CMLE.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimatorStudy {
    pub sizes: Vec<usize>,
    pub truth: [f64; 7],
    pub means: Vec<[f64; 7]>,
    pub stdevs: Vec<[f64; 7]>,
    /// Non-convergent (excluded) fit count per size.
    pub excluded: Vec<usize>,
    pub replications: usize,
    pub seed: u64,
    /// Raw estimates per (size, replication); `None` marks exclusions.
    pub estimates: Vec<Vec<Option<[f64; 7]>>>,
}

/// Run the study: one deterministic substream per (size, replication), fits
/// in parallel, non-convergent fits excluded and counted.
pub fn run_estimator_study(spec: &StudySpec) -> Result<EstimatorStudy> {
    spec.validate()?;
    let rho = spec.p.spectral_radius();
    if rho >= 1.0 {
        return Err(Error::NonStationary { rho });
    }
    let mu = stationary_mean(&spec.p, &spec.innov.mean_vector())?;
    let n0 = [mu[0].round() as u64, mu[1].round() as u64];
    let source = RandomSource::new(spec.seed);

    let mut estimates = Vec::with_capacity(spec.sizes.len());
    for (si, &size) in spec.sizes.iter().enumerate() {
        let per_size: Vec<Option<[f64; 7]>> = (0..spec.replications)
            .into_par_iter()
            .map(|rep| {
                let stream = ((si as u64) << 32) | rep as u64;
                let mut rng = source.substream(stream).rng();
                let sim = simulate_minar(&spec.p, &spec.innov, &n0, BURN_IN + size - 1, &mut rng)
                    .expect("validated dimensions");
                let series = sim.slice(BURN_IN, sim.n_steps()).expect("in range");
                match fit_cmle(&series, ModelSpec::FullBinar, &spec.fit_options) {
                    Ok(fit) if fit.converged => Some(fit.params_struct().values()),
                    _ => None,
                }
            })
            .collect();
        estimates.push(per_size);
    }

    let mut means = Vec::new();
    let mut stdevs = Vec::new();
    let mut excluded = Vec::new();
    for per_size in &estimates {
        let kept: Vec<&[f64; 7]> = per_size.iter().flatten().collect();
        excluded.push(per_size.len() - kept.len());
        if kept.len() < 2 {
            return Err(Error::Estimation(
                "fewer than two convergent fits in a study cell".into(),
            ));
        }
        let k = kept.len() as f64;
        let mut mean = [0.0; 7];
        for est in &kept {
            for (m, v) in mean.iter_mut().zip(est.iter()) {
                *m += v / k;
            }
        }
        let mut sd = [0.0; 7];
        for est in &kept {
            for ((s, v), m) in sd.iter_mut().zip(est.iter()).zip(mean.iter()) {
                *s += (v - m) * (v - m);
            }
        }
        for s in sd.iter_mut() {
            *s = (*s / (k - 1.0)).sqrt();
        }
        means.push(mean);
        stdevs.push(sd);
    }

    Ok(EstimatorStudy {
        sizes: spec.sizes.clone(),
        truth: spec.truth(),
        means,
        stdevs,
        excluded,
        replications: spec.replications,
        seed: spec.seed,
        estimates,
    })
}

impl EstimatorStudy {
    fn write_table<W: std::io::Write>(
        &self,
        out: W,
        rows: &[[f64; 7]],
        with_truth: bool,
        with_excluded: bool,
    ) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["n".to_string()];
        header.extend(PARAM_NAMES.iter().map(|s| s.to_string()));
        if with_excluded {
            header.push("excluded".into());
        }
        w.write_record(&header)?;
        for (i, row) in rows.iter().enumerate() {
            let mut rec = vec![self.sizes[i].to_string()];
            rec.extend(row.iter().map(|v| v.to_string()));
            if with_excluded {
                rec.push(self.excluded[i].to_string());
            }
            w.write_record(&rec)?;
        }
        if with_truth {
            let mut rec = vec!["true".to_string()];
            rec.extend(self.truth.iter().map(|v| v.to_string()));
            if with_excluded {
                rec.push(String::new());
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Mean-estimate table: one row per sample size plus the true values, a
    /// diagnostics column counting excluded fits.
    pub fn write_means_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let rows = self.means.clone();
        self.write_table(out, &rows, true, true)
    }

    /// Replication standard deviations, one row per sample size.
    pub fn write_stdevs_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let rows = self.stdevs.clone();
        self.write_table(out, &rows, false, false)
    }

    /// Raw per-replication estimates for external plotting.
    pub fn write_raw_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["n".to_string(), "replication".to_string()];
        header.extend(PARAM_NAMES.iter().map(|s| s.to_string()));
        header.push("converged".into());
        w.write_record(&header)?;
        for (si, per_size) in self.estimates.iter().enumerate() {
            for (rep, est) in per_size.iter().enumerate() {
                let mut rec = vec![self.sizes[si].to_string(), rep.to_string()];
                match est {
                    Some(v) => {
                        rec.extend(v.iter().map(|x| x.to_string()));
                        rec.push("true".into());
                    }
                    None => {
                        rec.extend(std::iter::repeat_n(String::new(), 7));
                        rec.push("false".into());
                    }
                }
                w.write_record(&rec)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// One comparison row of the ladder report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LadderTest {
    pub name: String,
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
    /// 95% chi-square critical value for `df` (3.84 for 1, 5.99 for 2).
    pub threshold: f64,
    pub significant: bool,
}

/// Fits of all five rungs plus the four nested comparisons.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LadderReport {
    pub fits: Vec<FitResult>,
    pub tests: Vec<LadderTest>,
}

impl LadderReport {
    pub fn fit(&self, model: ModelSpec) -> &FitResult {
        self.fits
            .iter()
            .find(|f| f.model == model)
            .expect("all rungs fitted")
    }

    /// The four comparisons as a CSV table: one row per test.
    pub fn write_tests_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "test",
            "statistic",
            "df",
            "p_value",
            "threshold",
            "significant",
        ])?;
        for t in &self.tests {
            w.write_record([
                t.name.clone(),
                t.statistic.to_string(),
                t.df.to_string(),
                t.p_value.to_string(),
                t.threshold.to_string(),
                t.significant.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn threshold_for_df(df: usize) -> f64 {
    match df {
        1 => 3.84,
        2 => 5.99,
        _ => unreachable!("ladder tests have df 1 or 2"),
    }
}

/// Fit the five nested rungs and report the four standard comparisons:
/// dependent vs independent Poisson, independent INARs vs independent
/// Poisson, diagonal vs independent INARs, full vs diagonal. Each rung is
/// warm-started from the already-fitted nested rungs as well as the moment
/// start, keeping the fitted log-likelihoods monotone along nesting chains.
pub fn run_model_ladder(series: &CountSeries, options: &FitOptions) -> Result<LadderReport> {
    let mut fits: Vec<FitResult> = Vec::with_capacity(ModelSpec::LADDER.len());
    for &m in ModelSpec::LADDER.iter() {
        let starts: Vec<BinarParams> = fits
            .iter()
            .filter(|f| f.model.is_nested_in(&m))
            .map(|f| f.params_struct().as_start_for(&m))
            .collect();
        fits.push(fit_cmle_multi(series, m, &starts, options)?);
    }
    let get = |m: ModelSpec| fits.iter().find(|f| f.model == m).unwrap();
    let pairs = [
        (ModelSpec::IndependentPoisson, ModelSpec::DependentPoisson),
        (ModelSpec::IndependentPoisson, ModelSpec::IndependentInar),
        (ModelSpec::IndependentInar, ModelSpec::DiagonalBinar),
        (ModelSpec::DiagonalBinar, ModelSpec::FullBinar),
    ];
    let mut tests = Vec::with_capacity(pairs.len());
    for (nested, full) in pairs {
        let t = lrt(get(nested), get(full))?;
        let threshold = threshold_for_df(t.df);
        tests.push(LadderTest {
            name: format!("{} vs {}", full.name(), nested.name()),
            statistic: t.statistic,
            df: t.df,
            p_value: t.p_value,
            threshold,
            significant: t.statistic > threshold,
        });
    }
    Ok(LadderReport { fits, tests })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec() -> StudySpec {
        StudySpec::new(
            ThinningMatrix::bivariate(0.25, 0.05, 0.1, 0.4).unwrap(),
            BivPoissonParams::new(5.0, 3.0, 1.0).unwrap(),
            vec![120, 260],
            4,
            2024,
        )
        .unwrap()
    }

    #[test]
    fn study_is_deterministic() {
        let spec = small_spec();
        let a = run_estimator_study(&spec).unwrap();
        let b = run_estimator_study(&spec).unwrap();
        assert_eq!(a.means, b.means);
        assert_eq!(a.stdevs, b.stdevs);
        assert_eq!(a.estimates, b.estimates);
    }

    #[test]
    fn study_rejects_bad_specs() {
        let p = ThinningMatrix::bivariate(0.25, 0.05, 0.1, 0.4).unwrap();
        let innov = BivPoissonParams::new(5.0, 3.0, 1.0).unwrap();
        assert!(StudySpec::new(p.clone(), innov, vec![100, 50], 4, 1).is_err());
        assert!(StudySpec::new(p, innov, vec![100], 1, 1).is_err());
    }

    #[test]
    fn study_csv_has_expected_shape() {
        let spec = small_spec();
        let study = run_estimator_study(&spec).unwrap();
        let mut buf = Vec::new();
        study.write_means_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 1 + 2 + 1); // header + 2 sizes + truth row
        assert!(lines[0].starts_with("n,p11,p12,p21,p22,lambda1,lambda2,phi,excluded"));
        assert!(lines[3].starts_with("true,"));
    }

    #[test]
    fn ladder_logliks_weakly_increase_along_nesting() {
        let p = ThinningMatrix::bivariate(0.25, 0.05, 0.1, 0.4).unwrap();
        let innov = BivPoissonParams::new(5.0, 3.0, 1.0).unwrap();
        let mut rng = RandomSource::new(3).rng();
        let sim = simulate_minar(&p, &innov, &[7, 6], 700, &mut rng).unwrap();
        let series = sim.slice(200, sim.n_steps()).unwrap();
        let opts = FitOptions {
            compute_std_errors: false,
            ..Default::default()
        };
        let report = run_model_ladder(&series, &opts).unwrap();
        let ll = |m: ModelSpec| report.fit(m).loglik;
        let tol = 1e-6;
        // chain 1: indep poisson < dep poisson < diagonal < full
        assert!(ll(ModelSpec::DependentPoisson) >= ll(ModelSpec::IndependentPoisson) - tol);
        assert!(ll(ModelSpec::DiagonalBinar) >= ll(ModelSpec::DependentPoisson) - tol);
        assert!(ll(ModelSpec::FullBinar) >= ll(ModelSpec::DiagonalBinar) - tol);
        // chain 2: indep poisson < indep inar < diagonal
        assert!(ll(ModelSpec::IndependentInar) >= ll(ModelSpec::IndependentPoisson) - tol);
        assert!(ll(ModelSpec::DiagonalBinar) >= ll(ModelSpec::IndependentInar) - tol);
        assert_eq!(report.tests.len(), 4);
        // full-model truth with strong autocorrelation: the INAR-vs-Poisson
        // comparison is overwhelmingly significant
        assert!(report.tests[1].significant);
    }
}
