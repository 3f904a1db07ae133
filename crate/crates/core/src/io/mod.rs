//! Run configuration, binary field files and CSV output.

mod config;
mod field_file;

pub use config::{
    DualSection, ForwardSection, GridSection, IoSection, RunConfig, ScenarioSection, SchemeSection,
    TimeSection,
};
pub use field_file::{read_field, read_primal, write_field, write_primal, FieldFile, FORMAT_VERSION, MAGIC};

use std::path::Path;

use crate::error::{Error, Result};

/// Writes `header` followed by `rows`, one line each.
pub fn write_csv(path: &Path, header: &str, rows: impl IntoIterator<Item = String>) -> Result<()> {
    let mut text = String::from(header);
    text.push('\n');
    for r in rows {
        text.push_str(&r);
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
