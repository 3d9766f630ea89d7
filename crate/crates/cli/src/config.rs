use std::path::Path;

use anyhow::{bail, Result};
use depkernel::rng::Seed;
use depkernel::svm::{BatteryConfig, Estimator, Schedule, SolverOptions};
use depkernel::{KernelSpec, Loss, ProcessSpec};
use serde::de::DeserializeOwned;
use serde::Deserialize;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateConfig {
    pub schema: u32,
    pub process: ProcessSpec<f64>,
    pub n: usize,
    pub seeds: Vec<Seed>,
}

fn default_threshold() -> f64 {
    0.05
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KmeConfig {
    pub schema: u32,
    pub process: ProcessSpec<f64>,
    pub kernel: KernelSpec<f64>,
    pub n_grid: Vec<usize>,
    pub seeds: Vec<Seed>,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

fn default_loss() -> Loss<f64> {
    Loss::square(1.0)
}

fn default_estimator() -> Estimator<f64> {
    Estimator::Svm
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SvmConfig {
    pub schema: u32,
    pub process: ProcessSpec<f64>,
    pub kernel: KernelSpec<f64>,
    #[serde(default = "default_loss")]
    pub loss: Loss<f64>,
    #[serde(default = "default_estimator")]
    pub estimator: Estimator<f64>,
    #[serde(default)]
    pub schedule: Schedule<f64>,
    pub n_grid: Vec<usize>,
    pub seeds: Vec<Seed>,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub solver: SolverOptions<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    pub schema: u32,
    pub battery: BatteryConfig,
}

/// Errors in the configuration itself, as opposed to failures while running.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

pub trait Versioned {
    fn schema(&self) -> u32;
}

macro_rules! versioned {
    ($($t:ty),*) => {$(
        impl Versioned for $t {
            fn schema(&self) -> u32 {
                self.schema
            }
        }
    )*};
}

versioned!(GenerateConfig, KmeConfig, SvmConfig, VerifyConfig);

pub fn load<C: DeserializeOwned + Versioned>(path: &Path) -> Result<C> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
    let cfg: C = serde_json::from_str(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    if cfg.schema() != SCHEMA_VERSION {
        return Err(ConfigError(format!("unsupported schema {} (expected {SCHEMA_VERSION})", cfg.schema())).into());
    }
    Ok(cfg)
}

pub fn check_seeds(seeds: &[Seed]) -> Result<()> {
    if seeds.is_empty() {
        bail!(ConfigError("seeds must not be empty".into()));
    }
    Ok(())
}

pub fn check_grid(n_grid: &[usize]) -> Result<()> {
    if n_grid.is_empty() || n_grid[0] == 0 || n_grid.windows(2).any(|w| w[0] >= w[1]) {
        bail!(ConfigError("n_grid must be non-empty, positive and strictly increasing".into()));
    }
    Ok(())
}

pub fn check_threshold(t: f64) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        bail!(ConfigError(format!("threshold must be a finite non-negative number, got {t}")));
    }
    Ok(())
}
