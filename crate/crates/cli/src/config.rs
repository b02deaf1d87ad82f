//! Flat key-value config file; every command-line flag has a key of the same name with
//! dashes replaced by underscores. Flags given on the command line win.

use std::fs;
use std::path::{Path, PathBuf};

use layerwise::shallow::Optimizer;
use layerwise::{Activation, Error, FeatureMode, Result};
use serde::Deserialize;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub grid_points: Option<usize>,
    pub out: Option<PathBuf>,
    pub format: Option<String>,
    pub restarts: Option<usize>,
    pub iterations: Option<usize>,
    pub step_size: Option<f64>,
    pub step_decay: Option<f64>,
    pub init_scale: Option<f64>,
    pub activation: Option<Activation>,
    pub optimizer: Option<Optimizer>,
    pub record_runtime: Option<bool>,

    pub dims: Option<usize>,
    pub level: Option<u32>,
    pub levels: Option<Vec<u32>>,
    pub function: Option<String>,
    pub functions: Option<Vec<String>>,
    pub units: Option<usize>,
    pub widths: Option<Vec<usize>>,
    pub width: Option<usize>,
    pub depth: Option<usize>,
    pub max_depth: Option<usize>,
    pub mode: Option<FeatureMode>,
    pub tau: Option<f64>,
    pub tol: Option<f64>,
    pub chain_activation: Option<Activation>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            message: e.message().to_string(),
        })
    }
}

/// Command-line value, else config value, else the default.
pub fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}
