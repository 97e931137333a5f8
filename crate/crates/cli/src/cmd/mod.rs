pub mod generate;
pub mod replay;
pub mod run;
pub mod score;
pub mod serve;

use std::path::{Path, PathBuf};

use ivispar_core::engine::{EpisodeLog, LogError, PromptTemplates};
use ivispar_core::generator::{Dataset, DatasetError};

use crate::Failure;

pub fn load_dataset(path: &Path) -> Result<Dataset, Failure> {
    Dataset::load(path).map_err(|e| match e {
        DatasetError::Io(io) => Failure::io(path, io),
        other => Failure::format(format!("{}: {other}", path.display())),
    })
}

pub fn load_templates(dir: Option<&Path>) -> Result<PromptTemplates, Failure> {
    match dir {
        Some(dir) => PromptTemplates::from_dir(dir).map_err(|e| Failure::usage(format!("{}: {e}", dir.display()))),
        None => Ok(PromptTemplates::default()),
    }
}

/// `*.jsonl` files under `root` (or `root` itself), sorted by path.
pub fn log_files(root: &Path) -> Result<Vec<PathBuf>, Failure> {
    if root.is_file() {
        return Ok(vec![root.to_path_buf()]);
    }
    if !root.is_dir() {
        return Err(Failure::usage(format!("{}: no such log file or directory", root.display())));
    }
    let mut files = Vec::new();
    for entry in walkdir::WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(|e| Failure::usage(e.to_string()))?;
        if entry.file_type().is_file() && entry.path().extension().is_some_and(|x| x == "jsonl") {
            files.push(entry.into_path());
        }
    }
    Ok(files)
}

/// Every log in every file under `root`, in path order.
pub fn read_logs(root: &Path) -> Result<Vec<(PathBuf, EpisodeLog)>, Failure> {
    let mut out = Vec::new();
    for path in log_files(root)? {
        let text = std::fs::read_to_string(&path).map_err(|e| Failure::io(&path, e))?;
        let logs = EpisodeLog::read_many(&text).map_err(|e| match e {
            LogError::Io(io) => Failure::io(&path, io),
            other => Failure::format(format!("{}: {other}", path.display())),
        })?;
        out.extend(logs.into_iter().map(|l| (path.clone(), l)));
    }
    Ok(out)
}

pub fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), Failure> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Failure::io(parent, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Failure::io(path, e))
}
