use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use crate::train::TrainArgs;

/// Everything needed to reproduce a run, written next to its outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config: TrainArgs,
    pub workers: usize,
    pub dataset_path: PathBuf,
    pub dataset_digest: String,
    pub seed: u64,
    pub outputs: Vec<PathBuf>,
    pub started_unix_s: f64,
    pub finished_unix_s: f64,
    pub results: RunResults,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResults {
    pub objective: f64,
    pub lower_bound: f64,
    pub gap: f64,
    pub abs_gap: f64,
    pub termination: String,
    pub train_rmse: f64,
    pub test_rmse: f64,
    pub cart_objective: f64,
    pub cart_train_rmse: f64,
    pub cart_test_rmse: f64,
    pub nodes_explored: u64,
    pub elapsed_s: f64,
}

pub fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

impl RunManifest {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))
    }
}

/// `dir/stem.json` → `dir/stem<suffix>`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}
