//! Fit settings read from an optional JSON file; absent fields keep defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};
use simmoe::model::{FitConfig, GateMode};

use crate::error::{CliError, Result};

/// Mirror of [`FitConfig`] with every field optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSettings {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gate_subiterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gate_mc_samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adam_learning_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_floor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eig_floor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predictive_ke: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predictive_kg: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gate_mode: Option<String>,
}

impl From<&FitConfig> for FitSettings {
    fn from(c: &FitConfig) -> Self {
        FitSettings {
            iterations: Some(c.iterations),
            gate_subiterations: Some(c.gate_subiterations),
            gate_mc_samples: Some(c.gate_mc_samples),
            adam_learning_rate: Some(c.adam_learning_rate),
            r_floor: Some(c.r_floor),
            eig_floor: Some(c.eig_floor),
            predictive_ke: Some(c.predictive_ke),
            predictive_kg: Some(c.predictive_kg),
            seed: Some(c.seed),
            gate_mode: Some(c.gate_mode.to_string()),
        }
    }
}

impl FitSettings {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Fields set here replace those of `base`.
    pub fn apply(&self, base: &FitConfig) -> Result<FitConfig> {
        let mut c = base.clone();
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { c.$f = v; } )* };
        }
        set!(iterations, gate_subiterations, gate_mc_samples, adam_learning_rate, r_floor, eig_floor, predictive_ke, predictive_kg, seed);
        if let Some(mode) = &self.gate_mode {
            c.gate_mode = mode.parse::<GateMode>().map_err(|e| CliError::Config(e.to_string()))?;
        }
        c.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(c)
    }

    /// `self` with the fields set in `over` replaced.
    pub fn overridden_by(&self, over: &FitSettings) -> FitSettings {
        macro_rules! pick {
            ($($f:ident),*) => { FitSettings { $( $f: over.$f.clone().or_else(|| self.$f.clone()), )* } };
        }
        pick!(iterations, gate_subiterations, gate_mc_samples, adam_learning_rate, r_floor, eig_floor, predictive_ke, predictive_kg, seed, gate_mode)
    }
}
