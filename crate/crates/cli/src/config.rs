//! Experiment configuration: one JSON document per run.

use crate::error::{CliError, Result};
use roughhawkes::hawkes::Statistic;
use roughhawkes::kernels::{
    build_nontrivial_volterra, build_sector_model, build_two_asset, CheckTolerances, ModelFamily, NontrivialParams,
    SectorParams, TwoAssetParams,
};
use roughhawkes::spectrum::SectorLimitParams;
use serde::Deserialize;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case")]
pub enum ModelConfig {
    TwoAsset(TwoAssetParams),
    Sector(SectorParams),
    NontrivialVolterra(NontrivialParams),
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Simulator {
    #[default]
    Thinning,
    Branching,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TolerancesConfig {
    pub structural: Option<f64>,
    pub spectral: Option<f64>,
    pub probe_ratio: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: Option<ModelConfig>,
    pub spectrum: Option<SectorLimitParams>,
    /// Overrides the preset's alpha.
    pub alpha: Option<f64>,
    #[serde(rename = "T_list", default)]
    pub t_list: Vec<f64>,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    #[serde(default = "default_paths")]
    pub paths: usize,
    pub master_seed: u64,
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub tolerances: TolerancesConfig,
    #[serde(default)]
    pub simulator: Simulator,
    /// Statistic names as accepted by `Statistic::parse`.
    #[serde(default)]
    pub statistics: Vec<String>,
    /// Number of per-path CSVs written by the simulation commands.
    #[serde(default = "default_keep_paths")]
    pub keep_paths: usize,
    pub max_events: Option<usize>,
}

fn default_grid_points() -> usize {
    512
}

fn default_paths() -> usize {
    10_000
}

fn default_keep_paths() -> usize {
    4
}

/// The raw bytes (hashed into the manifest) and the parsed document.
pub struct LoadedConfig {
    pub bytes: Vec<u8>,
    pub config: ExperimentConfig,
}

pub fn load(path: &Path) -> Result<LoadedConfig> {
    let bytes = std::fs::read(path).map_err(|source| CliError::ReadConfig { path: path.to_path_buf(), source })?;
    let config = serde_json::from_slice(&bytes)
        .map_err(|e| CliError::Config(format!("{} (line {}, column {})", e, e.line(), e.column())))?;
    Ok(LoadedConfig { bytes, config })
}

impl ExperimentConfig {
    pub fn family(&self) -> Result<ModelFamily> {
        let model = self.model.as_ref().ok_or_else(|| CliError::Config("missing `model` section".into()))?;
        let family = match model.clone() {
            ModelConfig::TwoAsset(mut p) => {
                p.alpha = self.alpha.unwrap_or(p.alpha);
                build_two_asset(&p)?
            }
            ModelConfig::Sector(mut p) => {
                p.alpha = self.alpha.unwrap_or(p.alpha);
                build_sector_model(&p)?
            }
            ModelConfig::NontrivialVolterra(mut p) => {
                p.alpha = self.alpha.unwrap_or(p.alpha);
                build_nontrivial_volterra(&p)?
            }
        };
        Ok(family)
    }

    pub fn check_tolerances(&self) -> CheckTolerances {
        let d = CheckTolerances::default();
        CheckTolerances {
            structural: self.tolerances.structural.unwrap_or(d.structural),
            spectral: self.tolerances.spectral.unwrap_or(d.spectral),
            probe_ratio: self.tolerances.probe_ratio.unwrap_or(d.probe_ratio),
        }
    }

    pub fn horizons(&self) -> Result<&[f64]> {
        if self.t_list.is_empty() {
            return Err(CliError::Config("`T_list` must list at least one horizon".into()));
        }
        if let Some(t) = self.t_list.iter().find(|t| !(**t >= 1.0 && t.is_finite())) {
            return Err(CliError::Config(format!("horizon {t} in `T_list` must be finite and at least 1")));
        }
        Ok(&self.t_list)
    }

    /// Parsed statistics, with indices checked against `m` assets.
    pub fn statistics(&self, defaults: &[&str], m: usize) -> Result<Vec<(String, Statistic)>> {
        let names: Vec<String> = if self.statistics.is_empty() {
            defaults.iter().map(|s| s.to_string()).collect()
        } else {
            self.statistics.clone()
        };
        names
            .into_iter()
            .map(|n| {
                let s = Statistic::parse(&n).map_err(|e| CliError::Config(format!("statistic `{n}`: {e}")))?;
                let fits = match s {
                    Statistic::TerminalPriceSecondMoment(i) => i < m,
                    Statistic::TerminalPriceCrossMoment(i, j) | Statistic::TerminalPriceCorrelation(i, j) => i < m && j < m,
                    Statistic::MeanX(k) | Statistic::MeanZ(k) => k < 2 * m,
                };
                if !fits {
                    return Err(CliError::Config(format!("statistic `{n}` refers to a component the model does not have")));
                }
                Ok((n, s))
            })
            .collect()
    }

    pub fn check_sizes(&self) -> Result<()> {
        if self.grid_points < 8 {
            return Err(CliError::Config(format!("`grid_points` must be at least 8, got {}", self.grid_points)));
        }
        if self.paths == 0 {
            return Err(CliError::Config("`paths` must be positive".into()));
        }
        Ok(())
    }
}
