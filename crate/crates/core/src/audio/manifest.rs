//! JSON-lines corpus manifests pairing clean and degraded files.

use crate::degrade::AppliedOps;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Heldout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Path of the clean file, relative to the manifest root.
    pub clean_path: String,
    pub lq_path: Option<String>,
    pub seed: u64,
    pub split: Split,
    /// The operator chain that produced `lq_path`, when known.
    pub applied_ops: Option<AppliedOps>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    root: String,
    sample_rate: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub root: PathBuf,
    pub sample_rate: u32,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn new(root: impl Into<PathBuf>, sample_rate: u32) -> Self {
        Manifest {
            root: root.into(),
            sample_rate,
            entries: Vec::new(),
        }
    }

    /// Write as JSON lines: a header line followed by one entry per line.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let header = Header {
            root: self.root.display().to_string(),
            sample_rate: self.sample_rate,
        };
        writeln!(f, "{}", serde_json::to_string(&header).unwrap()).map_err(|e| Error::io(path, e))?;
        for entry in &self.entries {
            writeln!(f, "{}", serde_json::to_string(entry).unwrap())
                .map_err(|e| Error::io(path, e))?;
        }
        Ok(())
    }

    /// Load and validate: referenced paths must exist and seeds must be
    /// unique.
    pub fn load(path: impl AsRef<Path>) -> Result<Manifest> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = std::io::BufReader::new(f).lines();
        let header_line = lines
            .next()
            .ok_or_else(|| Error::Manifest("empty manifest".into()))?
            .map_err(|e| Error::io(path, e))?;
        let header: Header = serde_json::from_str(&header_line)
            .map_err(|e| Error::Manifest(format!("bad header line: {e}")))?;
        let root = PathBuf::from(&header.root);
        let mut entries = Vec::new();
        let mut seeds = HashSet::new();
        for (i, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: ManifestEntry = serde_json::from_str(&line)
                .map_err(|e| Error::Manifest(format!("bad entry on line {}: {e}", i + 2)))?;
            if !seeds.insert(entry.seed) {
                return Err(Error::Manifest(format!(
                    "duplicate seed {} on line {}",
                    entry.seed,
                    i + 2
                )));
            }
            let clean = root.join(&entry.clean_path);
            if !clean.exists() {
                return Err(Error::Manifest(format!("missing file {}", clean.display())));
            }
            if let Some(lq) = &entry.lq_path {
                let lq = root.join(lq);
                if !lq.exists() {
                    return Err(Error::Manifest(format!("missing file {}", lq.display())));
                }
            }
            entries.push(entry);
        }
        Ok(Manifest {
            root,
            sample_rate: header.sample_rate,
            entries,
        })
    }
}
