//! The JSON run configuration shared by every command.

use std::path::{Path, PathBuf};

use longidose_core::dose_response::EstimatorConfig;
use longidose_core::panel::{Column, PanelDataset, PanelSchema, Transform};
use longidose_core::sim::{DgpSpec, Example, SecondParam};
use longidose_core::stats::quantile;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub simulation: SimulationConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            version: CONFIG_VERSION,
            estimator: EstimatorConfig::default(),
            data: DataConfig::default(),
            simulation: SimulationConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub path: Option<PathBuf>,
    pub schema: PanelSchema,
    /// Applied in order after loading.
    pub transforms: Vec<TransformStep>,
    /// Overrides `estimator.dose_grid` when present.
    pub dose_grid: Option<DoseGrid>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformStep {
    pub column: Column,
    pub transform: Transform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DoseGrid {
    Values(Vec<f64>),
    /// Type-7 quantiles of the (transformed) pooled dose column.
    Quantiles(Vec<f64>),
}

impl DoseGrid {
    pub fn resolve(&self, data: &PanelDataset) -> Result<Vec<f64>, CliError> {
        match self {
            DoseGrid::Values(v) => Ok(v.clone()),
            DoseGrid::Quantiles(q) => {
                if q.iter().any(|p| !(0.0..=1.0).contains(p)) {
                    return Err(CliError::Usage(format!("dose quantiles must lie in [0, 1]: {q:?}")));
                }
                let doses = data.doses();
                Ok(q.iter().map(|&p| quantile(&doses, p)).collect())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationConfig {
    pub example: u8,
    pub n: usize,
    pub k: usize,
    pub replicates: usize,
    pub second_param: SecondParam,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            example: 1,
            n: 100,
            k: 10,
            replicates: 200,
            second_param: SecondParam::Variance,
        }
    }
}

impl SimulationConfig {
    pub fn spec(&self, seed: u64) -> Result<DgpSpec, CliError> {
        let example = match self.example {
            1 => Example::One,
            2 => Example::Two,
            other => return Err(CliError::Usage(format!("unknown example {other}; expected 1 or 2"))),
        };
        Ok(DgpSpec {
            example,
            n: self.n,
            k: self.k,
            seed,
            second_param: self.second_param,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    /// Posterior samples read by `summarize` and `plot`.
    pub samples: Option<PathBuf>,
    pub plot: Option<PathBuf>,
}

pub fn load(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    parse(&text).map_err(|e| match e {
        CliError::Usage(m) => CliError::Usage(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn parse(text: &str) -> Result<RunConfig, CliError> {
    // check the version before the full schema so old files get a clear message
    let raw: serde_json::Value =
        serde_json::from_str(text).map_err(|e| CliError::Usage(format!("invalid JSON: {e}")))?;
    match raw.get("version").and_then(serde_json::Value::as_u64) {
        Some(v) if v == CONFIG_VERSION as u64 => {}
        Some(v) => return Err(CliError::Usage(format!("unsupported config version {v}; expected {CONFIG_VERSION}"))),
        None => return Err(CliError::Usage("config is missing an integer `version` field".into())),
    }
    let cfg: RunConfig = serde_json::from_value(raw).map_err(|e| CliError::Usage(format!("invalid config: {e}")))?;
    cfg.estimator
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(cfg)
}

pub fn write_resolved(cfg: &RunConfig, dir: &Path) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(cfg).expect("config serializes");
    text.push('\n');
    let path = dir.join("resolved-config.json");
    std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))
}
