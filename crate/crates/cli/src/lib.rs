//! Library side of the `scadboot` command: config schema, CSV ingestion and
//! the three commands.

pub mod config;
pub mod csv;
pub mod fit;
pub mod generate;
pub mod simulate;

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};

pub use csv::{load_csv, CsvError};

/// A file a command wants written to the output directory.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub name: String,
    pub contents: String,
}

impl Output {
    pub fn new(name: impl Into<String>, contents: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            contents: contents.into(),
        }
    }
}

/// Create `dir` if needed and check that it takes writes.
pub fn prepare_output_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))?;
    let probe = dir.join(".scadboot-write-probe");
    fs::write(&probe, b"").with_context(|| format!("output directory {} is not writable", dir.display()))?;
    let _ = fs::remove_file(probe);
    Ok(())
}

pub fn write_outputs(dir: &Path, outputs: &[Output]) -> Result<()> {
    for out in outputs {
        let path = dir.join(&out.name);
        fs::write(&path, &out.contents).with_context(|| format!("cannot write {}", path.display()))?;
    }
    Ok(())
}

/// 2 for numerical failures inside the estimator, 1 for everything else.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    let numerical = err
        .chain()
        .any(|e| e.downcast_ref::<scadboot::Error>().is_some_and(|e| e.is_numerical()));
    if numerical {
        2
    } else {
        1
    }
}
