use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::config::ExperimentConfig;
use crate::error::CliError;

/// Bumped whenever a file layout or CSV header changes.
pub const SCHEMA_VERSION: u32 = 1;

/// Result directory that remembers every file written into it.
pub struct OutputDir {
    path: PathBuf,
    files: Vec<String>,
}

impl OutputDir {
    pub fn create(path: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(path).map_err(|source| CliError::Write {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(OutputDir {
            path: path.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.path.join(name);
        fs::write(&path, contents).map_err(|source| CliError::Write { path, source })?;
        self.files.push(name.to_string());
        Ok(())
    }

    /// `metadata.json`: the resolved config (enough to re-run), the file
    /// list, and run information. Only `run` carries wall-clock data.
    pub fn finish(
        mut self,
        subcommand: &str,
        config: &ExperimentConfig,
        workers: Option<usize>,
        run: Value,
    ) -> Result<(), CliError> {
        let metadata = json!({
            "schema_version": SCHEMA_VERSION,
            "tool": concat!("dtwa ", env!("CARGO_PKG_VERSION")),
            "subcommand": subcommand,
            "config": config,
            "workers": workers,
            "files": self.files,
            "run": run,
        });
        let text = serde_json::to_string_pretty(&metadata).expect("metadata serializes");
        self.write("metadata.json", &text)
    }
}
