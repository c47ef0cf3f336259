//! Command configurations: a JSON config file provides the rich settings,
//! a few flags override the common ones. Every run is fully determined by
//! (effective config, input files).

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use minar::catalog::{ColumnMap, MagnitudeBand};
use minar::inference::FitOptions;
use minar::{BivPoissonParams, ThinningMatrix};

/// Inline model parameters: thinning matrix plus bivariate Poisson
/// innovation triple.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelParams {
    pub p: Vec<Vec<f64>>,
    pub lambda1: f64,
    pub lambda2: f64,
    pub phi: f64,
}

impl ModelParams {
    pub fn build(&self) -> Result<(ThinningMatrix, BivPoissonParams)> {
        let p = ThinningMatrix::new(self.p.clone()).context("invalid thinning matrix")?;
        let innov = BivPoissonParams::new(self.lambda1, self.lambda2, self.phi)
            .context("invalid innovation parameters")?;
        Ok((p, innov))
    }
}

/// Model parameters taken either inline or from a fit-result JSON file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamSource {
    Inline(ModelParams),
    FromFit { params_from: PathBuf },
}

impl ParamSource {
    pub fn build(&self) -> Result<(ThinningMatrix, BivPoissonParams)> {
        match self {
            ParamSource::Inline(m) => m.build(),
            ParamSource::FromFit { params_from } => {
                let file = std::fs::File::open(params_from)
                    .with_context(|| format!("cannot open {}", params_from.display()))?;
                let fit: minar::FitResult =
                    serde_json::from_reader(file).context("invalid fit-result JSON")?;
                Ok((fit.p_hat, fit.innov_hat))
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulateConfig {
    #[serde(flatten)]
    pub params: ModelParams,
    pub steps: usize,
    #[serde(default)]
    pub n0: Option<Vec<u64>>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitConfig {
    #[serde(default)]
    pub model: Option<String>,
    #[serde(default)]
    pub fit: Option<FitOptions>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GrangerConfig {
    #[serde(default)]
    pub level: Option<f64>,
    #[serde(default)]
    pub fit: Option<FitOptions>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForecastConfig {
    #[serde(flatten)]
    pub params: ParamSource,
    pub n0: Option<Vec<u64>>,
    pub horizons: Vec<u32>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RiskConfig {
    #[serde(flatten)]
    pub params: ParamSource,
    pub n0: Option<Vec<u64>>,
    pub horizons: Vec<u32>,
    pub thresholds: Vec<u64>,
    #[serde(default = "default_paths")]
    pub paths: u64,
    #[serde(default)]
    pub seed: u64,
}

fn default_paths() -> u64 {
    100_000
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyConfig {
    #[serde(flatten)]
    pub params: ModelParams,
    pub sizes: Vec<usize>,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub fit: Option<FitOptions>,
}

fn default_replications() -> usize {
    100
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IngestConfig {
    pub catalog: PathBuf,
    pub plates: PathBuf,
    #[serde(default)]
    pub columns: Option<ColumnMap>,
    pub window_hours: f64,
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
    #[serde(default)]
    pub magnitude_band: Option<MagnitudeBand>,
    /// Two-plate mode: one column of counts per plate.
    #[serde(default)]
    pub plate_pair: Option<(String, String)>,
    /// Band-split mode: medium and large magnitude columns for one plate.
    #[serde(default)]
    pub plate: Option<String>,
    #[serde(default)]
    pub magnitude_split: Option<MagnitudeSplit>,
}

/// Band edges for the medium/large split: medium is `lo <= M <= mid`
/// (inclusive), large is `M > mid`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MagnitudeSplit {
    pub lo: f64,
    pub mid: f64,
}

/// Read the JSON config file when given, otherwise fail with a clear message
/// naming the command that needs it.
pub fn load_config<T: serde::de::DeserializeOwned>(
    path: Option<&Path>,
    command: &str,
) -> Result<T> {
    let Some(path) = path else {
        bail!("{command} requires --config with a JSON settings file");
    };
    let file =
        std::fs::File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    serde_json::from_reader(file)
        .with_context(|| format!("invalid {command} config {}", path.display()))
}

/// Sibling path with a suffix before the extension: `table.csv` + `_se` ->
/// `table_se.csv`.
pub fn sibling_path(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().unwrap_or_default().to_string_lossy();
    let ext = path.extension().map(|e| e.to_string_lossy().into_owned());
    let name = match ext {
        Some(ext) => format!("{stem}{suffix}.{ext}"),
        None => format!("{stem}{suffix}"),
    };
    path.with_file_name(name)
}
