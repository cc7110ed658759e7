//! File formats: binary model files, TOML surveys and configs, CSV data and
//! logs, PPM heatmaps.

mod config;
mod data;
mod heatmap;
mod model;
mod survey;

use std::io::Write;
use std::path::Path;

pub use config::{load_compare_config, load_fwi_config, CompareConfig};
pub use data::{read_data, write_data, DataSet};
pub use heatmap::{write_heatmap, Colormap};
pub use model::{read_model, write_model, ModelFile, ValueKind};
pub use survey::{load_survey, PmlSection, SourceEntry, SurveyFile};

use crate::{Error, Result};

/// Writes `bytes` to a temporary sibling and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidInput(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(
        ".{}.tmp{}",
        name.to_string_lossy(),
        std::process::id()
    ));
    let write = || -> std::io::Result<()> {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    };
    write().map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

pub(crate) fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn file_label(path: &Path) -> String {
    path.display().to_string()
}
