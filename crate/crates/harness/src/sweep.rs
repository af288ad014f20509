//! The `(γ, t_a)` grid with per-cell persistence and resume.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::ensemble::{run_ensemble, CellResult, CellSpec};
use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellError {
    pub cell: CellSpec,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config_hash: String,
    pub config: ExperimentConfig,
    /// Sorted by `(γ index, t_a index)`.
    pub cells: Vec<CellResult>,
    pub errors: Vec<CellError>,
}

impl RunRecord {
    pub fn empty(config: &ExperimentConfig) -> Self {
        Self {
            config_hash: config.hash(),
            config: config.clone(),
            cells: Vec::new(),
            errors: Vec::new(),
        }
    }

    pub fn failure_count(&self) -> usize {
        self.cells.iter().map(|c| c.failures.len()).sum()
    }

    /// Every cell ran and none lost a trajectory.
    pub fn is_valid(&self) -> bool {
        self.errors.is_empty() && self.cells.iter().all(CellResult::is_valid)
    }
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub record: RunRecord,
    pub computed: Vec<(usize, usize)>,
    pub reused: Vec<(usize, usize)>,
}

#[derive(Serialize, Deserialize)]
struct StoredCell {
    config_hash: String,
    result: CellResult,
}

/// Directory holding one JSON file per finished cell.
#[derive(Debug, Clone)]
pub struct CellStore {
    dir: PathBuf,
}

impl CellStore {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self { dir })
    }

    fn path(&self, gi: usize, ti: usize) -> PathBuf {
        self.dir.join(format!("cell_g{gi:03}_t{ti:03}.json"))
    }

    fn load(&self, gi: usize, ti: usize, hash: &str) -> Result<Option<CellResult>> {
        let path = self.path(gi, ti);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        let stored: StoredCell = serde_json::from_str(&text)
            .map_err(|e| HarnessError::Io(format!("corrupt cell file {}: {e}", path.display())))?;
        if stored.config_hash != hash {
            return Err(HarnessError::Config(format!(
                "{} belongs to a different configuration; use a fresh output directory",
                path.display()
            )));
        }
        Ok(Some(stored.result))
    }

    /// Write via a temporary file and rename, so a crash never leaves a
    /// half-written cell behind.
    fn save(&self, hash: &str, result: &CellResult) -> Result<()> {
        let path = self.path(result.cell.gamma_index, result.cell.ta_index);
        let tmp = path.with_extension("json.tmp");
        let stored = StoredCell {
            config_hash: hash.to_string(),
            result: result.clone(),
        };
        fs::write(&tmp, serde_json::to_vec_pretty(&stored)?)?;
        fs::rename(&tmp, &path)?;
        Ok(())
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }
}

/// Run every cell of the grid. With a store, each finished cell is persisted
/// immediately; with `resume`, cells already in the store are loaded instead
/// of recomputed. A cell that fails is recorded and the sweep moves on.
pub fn run_sweep(
    config: &ExperimentConfig,
    pool: &rayon::ThreadPool,
    store: Option<&CellStore>,
    resume: bool,
    mut progress: impl FnMut(&CellSpec, Option<&CellResult>),
) -> Result<SweepReport> {
    let mut record = RunRecord::empty(config);
    let hash = record.config_hash.clone();
    let mut computed = Vec::new();
    let mut reused = Vec::new();
    let grid = config.t_a_grid();
    for (gi, &gamma) in config.bath.gammas.iter().enumerate() {
        for (ti, &t_a) in grid.iter().enumerate() {
            let cell = CellSpec {
                gamma_index: gi,
                ta_index: ti,
                gamma,
                t_a,
            };
            if let (Some(store), true) = (store, resume) {
                if let Some(done) = store.load(gi, ti, &hash)? {
                    reused.push((gi, ti));
                    record.cells.push(done);
                    continue;
                }
            }
            match run_ensemble(config, cell, pool) {
                Ok(result) => {
                    if let Some(store) = store {
                        store.save(&hash, &result)?;
                    }
                    progress(&cell, Some(&result));
                    computed.push((gi, ti));
                    record.cells.push(result);
                }
                Err(HarnessError::Io(msg)) => return Err(HarnessError::Io(msg)),
                Err(e) => {
                    progress(&cell, None);
                    record.errors.push(CellError {
                        cell,
                        message: e.to_string(),
                    });
                }
            }
        }
    }
    Ok(SweepReport {
        record,
        computed,
        reused,
    })
}
