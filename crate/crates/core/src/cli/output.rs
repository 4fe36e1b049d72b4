//! Atomic output files and the run manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::hilbert::ComplexMatrix;

/// Version of the CSV column layouts written by the CLI.
pub const CSV_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize)]
pub struct OutputFile {
    pub name: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
    pub csv_schema_version: u32,
    pub started_unix_ms: u128,
    pub wall_clock_seconds: f64,
    pub files: Vec<OutputFile>,
}

/// Collects files written during one command. Each file goes to a
/// temporary sibling first and is renamed into place.
#[derive(Debug)]
pub struct OutputDir {
    dir: PathBuf,
    files: Vec<OutputFile>,
}

impl OutputDir {
    pub fn create(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(Self { dir, files: Vec::new() })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    pub fn files(&self) -> &[OutputFile] {
        &self.files
    }

    pub fn write(&mut self, name: &str, contents: &[u8]) -> Result<PathBuf> {
        let path = write_atomic(&self.dir, name, contents)?;
        self.files.retain(|f| f.name != name);
        self.files.push(OutputFile {
            name: name.to_string(),
            sha256: hex::encode(Sha256::digest(contents)),
            bytes: contents.len(),
        });
        Ok(path)
    }

    /// Writes `manifest.json`; it is not listed in its own file table.
    pub fn finish(self, mut manifest: RunManifest) -> Result<PathBuf> {
        manifest.files = self.files;
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        text.push('\n');
        write_atomic(&self.dir, "manifest.json", text.as_bytes())
    }
}

fn write_atomic(dir: &Path, name: &str, contents: &[u8]) -> Result<PathBuf> {
    let target = dir.join(name);
    let tmp = dir.join(format!(".{name}.tmp-{}", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
        fs::rename(&tmp, &target)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(Error::io(&target, e));
    }
    Ok(target)
}

/// Column names `prefix_re_ij, prefix_im_ij` for a `d × d` matrix, row-major.
pub fn matrix_columns(prefix: &str, d: usize) -> Vec<String> {
    let mut cols = Vec::with_capacity(2 * d * d);
    for i in 0..d {
        for j in 0..d {
            cols.push(format!("{prefix}_re_{i}{j}"));
            cols.push(format!("{prefix}_im_{i}{j}"));
        }
    }
    cols
}

pub fn matrix_fields(m: &ComplexMatrix) -> impl Iterator<Item = f64> + '_ {
    m.data().iter().flat_map(|z| [z.re, z.im])
}

/// A numeric table emitted as CSV or JSON.
#[derive(Clone, Debug, Serialize)]
pub struct Table {
    pub schema_version: u32,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: Vec<String>) -> Self {
        Self {
            schema_version: CSV_SCHEMA_VERSION,
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Vec<u8> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns).expect("writing to memory");
        for row in &self.rows {
            w.write_record(row.iter().map(|&x| num(x))).expect("writing to memory");
        }
        w.into_inner().expect("flushing to memory")
    }

    /// JSON with non-finite values written as `null`.
    pub fn to_json(&self) -> Vec<u8> {
        let mut text = serde_json::to_string(self).expect("table serializes");
        text.push('\n');
        text.into_bytes()
    }
}

/// Shortest text that parses back to the same value.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && a.is_finite() && !(1e-5..1e16).contains(&a) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}
