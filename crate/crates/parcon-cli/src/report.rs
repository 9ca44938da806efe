//! Output files: CSV and JSON written atomically (write-then-rename), LF
//! line endings, '.' decimal separator, header row first.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::CliError;

pub struct OutputDir {
    root: PathBuf,
}

impl OutputDir {
    pub fn new(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root)
            .map_err(|e| CliError::Input(format!("cannot create output dir: {e}")))?;
        Ok(OutputDir {
            root: root.to_path_buf(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Write-then-rename so partially written files never appear under the
    /// final name.
    pub fn write_atomic(&self, name: &str, contents: &str) -> Result<PathBuf, CliError> {
        let final_path = self.path(name);
        let tmp_path = self.path(&format!(".{name}.tmp"));
        let mut file = fs::File::create(&tmp_path)
            .map_err(|e| CliError::Input(format!("cannot write {name}: {e}")))?;
        file.write_all(contents.as_bytes())
            .and_then(|_| file.sync_all())
            .map_err(|e| CliError::Input(format!("cannot write {name}: {e}")))?;
        drop(file);
        fs::rename(&tmp_path, &final_path)
            .map_err(|e| CliError::Input(format!("cannot finalize {name}: {e}")))?;
        Ok(final_path)
    }

    pub fn write_json<T: serde::Serialize>(
        &self,
        name: &str,
        value: &T,
    ) -> Result<PathBuf, CliError> {
        let text = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::Numerical(format!("serialization failed: {e}")))?;
        self.write_atomic(name, &(text + "\n"))
    }
}

/// CSV accumulator with a fixed header.
pub struct Csv {
    buf: String,
    columns: usize,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Csv {
            buf: header.join(",") + "\n",
            columns: header.len(),
        }
    }

    pub fn row(&mut self, cells: &[String]) {
        assert_eq!(cells.len(), self.columns, "row width must match header");
        self.buf.push_str(&cells.join(","));
        self.buf.push('\n');
    }

    pub fn finish(self) -> String {
        self.buf
    }
}

/// Shortest-roundtrip decimal formatting; deterministic for equal values.
pub fn fmt(v: f64) -> String {
    format!("{v}")
}
