//! Survey files (TOML). Node coordinates are `[x, z]` indices on the full
//! grid, PML included.
//!
//! ```toml
//! frequencies_hz = [4.0, 6.0]
//! weight_mode = "identity"
//! receivers = [[12, 12], [14, 12]]   # default for sources without their own list
//!
//! [pml]
//! reference_speed = 2000.0
//!
//! [[sources]]
//! x = 20
//! z = 12
//! receivers = [[30, 12]]
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::forward::{Source, Survey, WeightMode};
use crate::grid::{Grid2D, PmlProfile};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PmlSection {
    /// Wave speed used for the default damping amplitude.
    #[serde(default = "default_reference_speed")]
    pub reference_speed: f64,
    pub sigma_max: Option<f64>,
    pub power: Option<f64>,
}

fn default_reference_speed() -> f64 {
    2000.0
}

impl Default for PmlSection {
    fn default() -> Self {
        Self {
            reference_speed: default_reference_speed(),
            sigma_max: None,
            power: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceEntry {
    pub x: usize,
    pub z: usize,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub receivers: Option<Vec<[usize; 2]>>,
}

fn default_amplitude() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurveyFile {
    pub frequencies_hz: Vec<f64>,
    #[serde(default)]
    pub weight_mode: WeightMode,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub receivers: Vec<[usize; 2]>,
    #[serde(default)]
    pub pml: PmlSection,
    pub sources: Vec<SourceEntry>,
}

impl SurveyFile {
    pub fn parse(text: &str, label: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| toml_error(text, label, &e))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self)
            .map_err(|e| Error::InvalidInput(format!("cannot serialize survey: {e}")))
    }

    pub fn survey(&self, grid: &Grid2D) -> Result<Survey> {
        let node = |[x, z]: [usize; 2], what: &str| -> Result<usize> {
            if x >= grid.nx() || z >= grid.nz() {
                return Err(Error::InvalidInput(format!(
                    "{what} at [{x}, {z}] is outside the {}x{} grid",
                    grid.nx(),
                    grid.nz()
                )));
            }
            Ok(grid.index(x, z))
        };
        let mut sources = Vec::with_capacity(self.sources.len());
        for (k, s) in self.sources.iter().enumerate() {
            let recs = s.receivers.as_ref().unwrap_or(&self.receivers);
            let receivers = recs
                .iter()
                .map(|&r| node(r, &format!("receiver of source {k}")))
                .collect::<Result<Vec<_>>>()?;
            sources.push(Source {
                node: node([s.x, s.z], &format!("source {k}"))?,
                amplitude: s.amplitude,
                receivers,
            });
        }
        Survey::new(grid, sources, self.frequencies_hz.clone())
    }

    pub fn pml_profile(&self, grid: &Grid2D) -> Result<PmlProfile> {
        let p = &self.pml;
        if !(p.reference_speed.is_finite() && p.reference_speed > 0.0) {
            return Err(Error::Config(format!(
                "pml.reference_speed must be positive, got {}",
                p.reference_speed
            )));
        }
        let mut profile = PmlProfile::from_reference_speed(grid, p.reference_speed);
        if let Some(s) = p.sigma_max {
            if !(s.is_finite() && s >= 0.0) {
                return Err(Error::Config(format!(
                    "pml.sigma_max must be non-negative, got {s}"
                )));
            }
            profile.sigma_max = s;
        }
        if let Some(q) = p.power {
            if !(q.is_finite() && q > 0.0) {
                return Err(Error::Config(format!(
                    "pml.power must be positive, got {q}"
                )));
            }
            profile.power = q;
        }
        Ok(profile)
    }
}

pub fn load_survey(path: &Path) -> Result<SurveyFile> {
    SurveyFile::parse(&super::read_to_string(path)?, &super::file_label(path))
}

/// Converts a TOML error into a parse error carrying the 1-based line.
pub(crate) fn toml_error(text: &str, label: &str, e: &toml::de::Error) -> Error {
    let line = e
        .span()
        .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
        .unwrap_or(0);
    Error::parse(label, line, e.message().to_string())
}
