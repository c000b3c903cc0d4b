//! Atomic file output, CSV formatting and content digests.

use std::io::Write;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Writes `bytes` to a temporary file next to `path`, then renames it into
/// place, so `path` never holds a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let io = |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Float formatting with 17 significant digits (lossless for f64).
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// In-memory CSV table.
pub struct Table {
    writer: csv::Writer<Vec<u8>>,
}

/// One CSV cell.
pub enum Cell<'a> {
    F(f64),
    I(i64),
    U(u64),
    S(&'a str),
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header).expect("writing to memory cannot fail");
        Table { writer }
    }

    pub fn row(&mut self, cells: &[Cell]) {
        let rec: Vec<String> = cells
            .iter()
            .map(|c| match c {
                Cell::F(v) => fmt_f64(*v),
                Cell::I(v) => v.to_string(),
                Cell::U(v) => v.to_string(),
                Cell::S(s) => s.to_string(),
            })
            .collect();
        self.writer.write_record(&rec).expect("writing to memory cannot fail");
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.writer.into_inner().expect("flushing memory cannot fail")
    }
}

/// Record of one written artifact.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub path: PathBuf,
    pub sha256: String,
}

/// Collects outputs of a run under one directory and file-name prefix.
pub struct OutputSet {
    dir: PathBuf,
    prefix: String,
    pub artifacts: Vec<Artifact>,
}

impl OutputSet {
    pub fn new(dir: PathBuf, prefix: String) -> Result<Self, CliError> {
        std::fs::create_dir_all(&dir).map_err(|source| CliError::Io {
            path: dir.clone(),
            source,
        })?;
        Ok(OutputSet {
            dir,
            prefix,
            artifacts: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(format!("{}{name}", self.prefix))
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.path(name);
        write_atomic(&path, bytes)?;
        self.artifacts.push(Artifact {
            path,
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    pub fn table(&mut self, name: &str, table: Table) -> Result<(), CliError> {
        self.write(name, &table.into_bytes())
    }

    pub fn grid(&mut self, name: &str, field: &crate::grid::GridField) -> Result<(), CliError> {
        self.write(name, &field.encode()?)
    }

    /// One-line summary: mode, then `path sha256=…` per file.
    pub fn summary(&self, mode: &str) -> String {
        let files: Vec<String> = self
            .artifacts
            .iter()
            .map(|a| format!("{} sha256={}", a.path.display(), a.sha256))
            .collect();
        format!("evwg {mode}: ok; {}", files.join("; "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_through_text() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MAX, f64::MIN_POSITIVE] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.txt");
        write_atomic(&p, b"first").unwrap();
        write_atomic(&p, b"second").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"second");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn digest_is_sha256() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
