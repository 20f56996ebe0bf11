//! The bundled example datasets.
//!
//! Lookup order: the directory named by `CAUSATION_BOUNDS_FIXTURES`, a
//! `fixtures/` directory next to the executable (or its parent), then the
//! crate's source tree.

use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::model::Dataset;

pub const ENV_VAR: &str = "CAUSATION_BOUNDS_FIXTURES";
pub const NAMES: [&str; 3] = ["treatment", "institute", "vaccine"];

/// Candidate directories, most specific first.
pub fn search_path() -> Vec<PathBuf> {
    let mut dirs = Vec::new();
    if let Some(dir) = std::env::var_os(ENV_VAR) {
        dirs.push(PathBuf::from(dir));
    }
    if let Ok(exe) = std::env::current_exe() {
        for ancestor in exe.ancestors().skip(1).take(3) {
            dirs.push(ancestor.join("fixtures"));
        }
    }
    dirs.push(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures"));
    dirs
}

pub fn path(name: &str) -> Result<PathBuf> {
    let file = format!("{name}.json");
    search_path()
        .into_iter()
        .map(|d| d.join(&file))
        .find(|p| p.is_file())
        .ok_or_else(|| Error::DatasetFormat(format!("fixture {name:?} not found (set {ENV_VAR})")))
}

/// Load a bundled dataset by name.
pub fn load(name: &str) -> Result<Dataset> {
    Dataset::load(path(name)?)
}
