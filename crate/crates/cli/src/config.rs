use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use qswitch_core::tomo::Method;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Fock,
    Qubit,
    Procmat,
}

impl FromStr for Model {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fock" => Ok(Model::Fock),
            "qubit" => Ok(Model::Qubit),
            "procmat" => Ok(Model::Procmat),
            other => Err(format!("unknown model `{other}` (fock, qubit, procmat)")),
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Model::Fock => "fock",
            Model::Qubit => "qubit",
            Model::Procmat => "procmat",
        })
    }
}

/// Run configuration; every field has a default and the resolved value is echoed into report.json.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: Model,
    /// Control distinguishability D ∈ [0, 1].
    pub distinguishability: f64,
    pub seed: u64,
    pub out: PathBuf,
    /// Circuit file for the Fock model; the shipped reference table when absent.
    pub circuit: Option<PathBuf>,
    pub sweep_points: usize,
    /// Extra sweep point reported beside the grid.
    pub sweep_probe: f64,
    pub tomo_pairs: u64,
    pub tomo_method: Method,
    /// Imported counts replacing the simulated ones.
    pub tomo_counts: Option<PathBuf>,
    pub fringe_points: usize,
    pub plots: bool,
    pub tolerances: Tolerances,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub model_agreement: f64,
    pub normalization: f64,
    pub witness_recompute: f64,
    pub monotonicity: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { model_agreement: 1e-9, normalization: 1e-9, witness_recompute: 1e-6, monotonicity: 1e-6 }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: Model::Procmat,
            distinguishability: 0.0,
            seed: 1,
            out: PathBuf::from("out"),
            circuit: None,
            sweep_points: 21,
            sweep_probe: 0.29,
            tomo_pairs: 30_000,
            tomo_method: Method::Mle,
            tomo_counts: None,
            fringe_points: 73,
            plots: true,
            tolerances: Tolerances::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::Parse(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let d = self.distinguishability;
        if !(0.0..=1.0).contains(&d) {
            return Err(CliError::Parse(format!("distinguishability {d} outside [0, 1]")));
        }
        if !(0.0..=1.0).contains(&self.sweep_probe) {
            return Err(CliError::Parse(format!("sweep_probe {} outside [0, 1]", self.sweep_probe)));
        }
        if self.tomo_pairs == 0 {
            return Err(CliError::Parse("tomo_pairs must be positive".into()));
        }
        if self.fringe_points < 3 {
            return Err(CliError::Parse("fringe_points must be at least 3".into()));
        }
        Ok(())
    }

    /// Temporal overlap of the eraser arms for the Fock model.
    pub fn overlap(&self) -> f64 {
        (1.0 - self.distinguishability.powi(2)).max(0.0).sqrt()
    }
}
