//! Artifacts, their on-disk layout and the run manifest.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{LabError, LabResult};

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Comma-separated text built row by row.
pub struct Csv {
    text: String,
}

pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.into())
    }
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut text = header.join(",");
        text.push('\n');
        Csv { text }
    }

    pub fn row(&mut self, cells: Vec<Cell>) {
        for (i, c) in cells.iter().enumerate() {
            if i > 0 {
                self.text.push(',');
            }
            match c {
                Cell::Int(v) => write!(self.text, "{v}").unwrap(),
                Cell::Float(v) => self.text.push_str(&fmt_f64(*v)),
                Cell::Text(v) => self.text.push_str(v),
            }
        }
        self.text.push('\n');
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.text.into_bytes()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl Artifact {
    pub fn csv(name: &str, csv: Csv) -> Self {
        Artifact {
            name: name.into(),
            bytes: csv.into_bytes(),
        }
    }

    pub fn json<T: Serialize>(name: &str, value: &T) -> Self {
        let mut text = serde_json::to_string_pretty(value).expect("summaries serialize");
        text.push('\n');
        Artifact {
            name: name.into(),
            bytes: text.into_bytes(),
        }
    }

    pub fn sha256(&self) -> String {
        hex::encode(Sha256::digest(&self.bytes))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FileDigest {
    pub name: String,
    pub sha256: String,
    pub bytes: usize,
}

/// Provenance record written next to every run's outputs.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub started: String,
    pub finished: String,
    pub files: Vec<FileDigest>,
}

pub const MANIFEST_NAME: &str = "manifest.json";

/// Write `files` and the manifest into `dir`, creating it if needed.
pub fn write_run(dir: &Path, files: &[Artifact], manifest: &RunManifest) -> LabResult<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|source| LabError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    for f in files {
        write_file(&dir.join(&f.name), &f.bytes)?;
    }
    let m = Artifact::json(MANIFEST_NAME, manifest);
    let path = dir.join(MANIFEST_NAME);
    write_file(&path, &m.bytes)?;
    Ok(path)
}

fn write_file(path: &Path, bytes: &[u8]) -> LabResult<()> {
    std::fs::write(path, bytes).map_err(|source| LabError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn digests(files: &[Artifact]) -> Vec<FileDigest> {
    files
        .iter()
        .map(|f| FileDigest {
            name: f.name.clone(),
            sha256: f.sha256(),
            bytes: f.bytes.len(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02e23, std::f64::consts::PI] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_f64(1.0), "1.0000000000000000e0");
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
    }

    #[test]
    fn csv_layout() {
        let mut c = Csv::new(&["trial", "theta"]);
        c.row(vec![3usize.into(), 0.5.into()]);
        assert_eq!(String::from_utf8(c.into_bytes()).unwrap(), "trial,theta\n3,5.0000000000000000e-1\n");
    }

    #[test]
    fn known_digest() {
        let a = Artifact {
            name: "x".into(),
            bytes: b"abc".to_vec(),
        };
        assert_eq!(a.sha256(), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
