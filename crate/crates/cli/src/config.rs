//! Optional TOML config. Every key mirrors a command line flag of the same
//! name (dashes become underscores); flags win over the file.
//!
//! ```toml
//! data_dir = "bench-data"
//!
//! [generate]
//! board = "4x4"
//! geoms = "2-11"
//! lengths = "2-11"
//! interference = 0
//! per_cell = 3
//! seed = 0
//! jobs = 0
//!
//! [run]
//! agent = "optimal"
//! modality = "text"
//! step_cap = 20
//! context_window = 2
//! seed = 0
//! jobs = 0
//!
//! [serve]
//! addr = "127.0.0.1:8080"
//! idle_timeout = 1800
//! step_cap = 20
//! context_window = 2
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::Failure;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub data_dir: Option<PathBuf>,
    #[serde(default)]
    pub generate: GenerateSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub serve: ServeSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateSection {
    pub board: Option<String>,
    pub geoms: Option<String>,
    pub lengths: Option<String>,
    pub interference: Option<u32>,
    pub per_cell: Option<usize>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub agent: Option<String>,
    pub modality: Option<String>,
    pub step_cap: Option<u32>,
    pub context_window: Option<usize>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServeSection {
    pub addr: Option<String>,
    /// Seconds.
    pub idle_timeout: Option<u64>,
    pub step_cap: Option<u32>,
    pub context_window: Option<usize>,
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Config, Failure> {
        let Some(path) = path else { return Ok(Config::default()) };
        let text = std::fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
    }
}
