//! TOML run configurations. Every field has a default; unknown keys are errors.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::survey::toml_error;
use crate::driver::FwiConfig;
use crate::forward::WeightMode;
use crate::{Error, Result};

/// Settings for a single-step solver comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompareConfig {
    /// Frequency to linearize at (default: the survey's first).
    pub frequency_hz: Option<f64>,
    pub epsilon: f64,
    pub drop_model_term: bool,
    pub weight_mode: Option<WeightMode>,
    /// Stop once `E_cg` falls below this.
    pub tol: f64,
    pub max_iterations: usize,
    pub restart: usize,
    pub ilu_levels: Vec<usize>,
    /// Evaluate `E_cg` every this many GMRES iterations.
    pub ecg_stride: usize,
    pub threads: usize,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            frequency_hz: None,
            epsilon: 1.0,
            drop_model_term: false,
            weight_mode: None,
            tol: 1e-6,
            max_iterations: 300,
            restart: 30,
            ilu_levels: vec![0, 2, 4],
            ecg_stride: 1,
            threads: 0,
        }
    }
}

impl CompareConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::Config(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        if self.restart == 0 || self.max_iterations == 0 || self.ecg_stride == 0 {
            return Err(Error::Config(
                "restart, max_iterations and ecg_stride must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

pub fn load_compare_config(path: &Path) -> Result<CompareConfig> {
    let text = super::read_to_string(path)?;
    let c: CompareConfig =
        toml::from_str(&text).map_err(|e| toml_error(&text, &super::file_label(path), &e))?;
    c.validate()?;
    Ok(c)
}

pub fn load_fwi_config(path: &Path) -> Result<FwiConfig> {
    let text = super::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| toml_error(&text, &super::file_label(path), &e))
}
