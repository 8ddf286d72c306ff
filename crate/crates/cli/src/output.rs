use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// A result file written during a command.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FileRecord {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

/// Provenance stamped into every artifact.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Stamp {
    pub tool: &'static str,
    pub version: &'static str,
    pub seed: u64,
    pub config: String,
}

impl Stamp {
    pub fn new(seed: u64, config_hash: &str) -> Self {
        Stamp { tool: "trialeq", version: env!("CARGO_PKG_VERSION"), seed, config: config_hash.to_string() }
    }

    fn csv_line(&self) -> String {
        format!("# {} {} seed={} config={}\n", self.tool, self.version, self.seed, self.config)
    }
}

/// Output directory that records what it writes.
pub struct Output {
    dir: PathBuf,
    stamp: Stamp,
    files: Vec<FileRecord>,
}

/// Formats a float for CSV; non-finite values become empty fields.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x}")
    } else {
        String::new()
    }
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Output {
    pub fn create(dir: &Path, stamp: Stamp) -> CliResult<Self> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Output { dir: dir.to_path_buf(), stamp, files: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn stamp(&self) -> &Stamp {
        &self.stamp
    }

    pub fn files(&self) -> &[FileRecord] {
        &self.files
    }

    fn put(&mut self, name: &str, bytes: Vec<u8>) -> CliResult<()> {
        let path = self.dir.join(name);
        fs::write(&path, &bytes).map_err(|e| CliError::io(&path, e))?;
        log::debug!("wrote {}", path.display());
        let rec = FileRecord { path: name.to_string(), sha256: sha256_hex(&bytes), bytes: bytes.len() };
        match self.files.iter_mut().find(|f| f.path == name) {
            Some(f) => *f = rec,
            None => self.files.push(rec),
        }
        Ok(())
    }

    /// CSV with a `#` provenance line before the header.
    pub fn csv(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> CliResult<()> {
        let mut w = csv::Writer::from_writer(self.stamp.csv_line().into_bytes());
        let csv_err = |e: csv::Error| CliError::data(format!("{name}: {e}"));
        w.write_record(header).map_err(csv_err)?;
        for r in rows {
            debug_assert_eq!(r.len(), header.len(), "{name}: row width");
            w.write_record(&r).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::data(format!("{name}: {e}")))?;
        self.put(name, bytes)
    }

    /// JSON object `{"trialeq": stamp, "result": value}`.
    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        #[derive(Serialize)]
        struct Wrapped<'a, T> {
            trialeq: &'a Stamp,
            result: &'a T,
        }
        let mut bytes = serde_json::to_vec_pretty(&Wrapped { trialeq: &self.stamp, result: value })
            .map_err(|e| CliError::data(format!("{name}: {e}")))?;
        bytes.push(b'\n');
        self.put(name, bytes)
    }

    /// Raw file written without a stamp (the manifest).
    pub fn raw(&mut self, name: &str, bytes: Vec<u8>) -> CliResult<()> {
        let path = self.dir.join(name);
        fs::write(&path, &bytes).map_err(|e| CliError::io(&path, e))
    }
}

/// Reads a CSV written by [`Output::csv`], skipping the provenance line.
pub fn read_csv(path: &Path) -> CliResult<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    let header = r
        .headers()
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?
        .iter()
        .map(String::from)
        .collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        rows.push(rec.iter().map(String::from).collect());
    }
    Ok((header, rows))
}
