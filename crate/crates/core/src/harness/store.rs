//! Append-only JSONL run log.
//!
//! The first line is a schema header; every following line is one
//! [`RunRecord`]. Records are never rewritten. A later record for the same
//! `(cell, replication)` supersedes earlier ones, which is how runs are
//! invalidated or repaired.
//!
//! Each record is written with a single `write_all` of the full line. A
//! process killed mid-write can leave a partial final line; opening the
//! store for writing truncates it.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::record::{CellKey, RunRecord};

pub const SCHEMA_NAME: &str = "disposition.run-log";
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("run store {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("run store {0} does not exist")]
    NotFound(String),
    #[error("run store {path} line {line}: {message}")]
    Corrupt {
        path: String,
        line: usize,
        message: String,
    },
    #[error("unknown cell {0}")]
    UnknownCell(CellKey),
    #[error("run store {0} was opened read-only")]
    ReadOnly(String),
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    schema: String,
    version: u32,
}

type CellIndex = BTreeMap<CellKey, BTreeMap<u32, RunRecord>>;

#[derive(Debug)]
struct Inner {
    file: Option<File>,
    index: CellIndex,
    lines: usize,
}

#[derive(Debug)]
pub struct RunStore {
    path: PathBuf,
    inner: Mutex<Inner>,
}

impl RunStore {
    /// Opens `path` for appending, creating it with a header when missing.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let path = path.as_ref().to_path_buf();
        let io = |source| StoreError::Io {
            path: path.display().to_string(),
            source,
        };
        if !path.exists() {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent).map_err(io)?;
            }
            let mut file = File::create(&path).map_err(io)?;
            let header = serde_json::to_string(&Header {
                schema: SCHEMA_NAME.into(),
                version: SCHEMA_VERSION,
            })
            .expect("header serializes");
            file.write_all(format!("{header}\n").as_bytes())
                .map_err(io)?;
        }
        let text = fs::read_to_string(&path).map_err(io)?;
        let (index, lines, complete_len) = parse_log(&path, &text)?;
        let mut file = OpenOptions::new()
            .read(true)
            .write(true)
            .open(&path)
            .map_err(io)?;
        if complete_len < text.len() {
            warn!(
                "{}: dropping {} bytes of a partially written record",
                path.display(),
                text.len() - complete_len
            );
            file.set_len(complete_len as u64).map_err(io)?;
        }
        file.seek(SeekFrom::End(0)).map_err(io)?;
        Ok(Self {
            path,
            inner: Mutex::new(Inner {
                file: Some(file),
                index,
                lines,
            }),
        })
    }

    /// Opens an existing log without write access.
    pub fn open_read_only(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let path = path.as_ref().to_path_buf();
        if !path.exists() {
            return Err(StoreError::NotFound(path.display().to_string()));
        }
        let text = fs::read_to_string(&path).map_err(|source| StoreError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let (index, lines, _) = parse_log(&path, &text)?;
        Ok(Self {
            path,
            inner: Mutex::new(Inner {
                file: None,
                index,
                lines,
            }),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&self, record: &RunRecord) -> Result<(), StoreError> {
        let mut line = serde_json::to_string(record).expect("record serializes");
        line.push('\n');
        let mut inner = self.inner.lock().expect("store lock poisoned");
        let file = inner
            .file
            .as_mut()
            .ok_or_else(|| StoreError::ReadOnly(self.path.display().to_string()))?;
        file.write_all(line.as_bytes())
            .and_then(|_| file.flush())
            .map_err(|source| StoreError::Io {
                path: self.path.display().to_string(),
                source,
            })?;
        inner.lines += 1;
        inner
            .index
            .entry(record.cell.clone())
            .or_default()
            .insert(record.replication, record.clone());
        Ok(())
    }

    /// Number of record lines in the log, superseded ones included.
    pub fn record_lines(&self) -> usize {
        self.inner.lock().expect("store lock poisoned").lines
    }

    pub fn is_empty(&self) -> bool {
        self.inner
            .lock()
            .expect("store lock poisoned")
            .index
            .is_empty()
    }

    pub fn cells(&self) -> Vec<CellKey> {
        self.inner
            .lock()
            .expect("store lock poisoned")
            .index
            .keys()
            .cloned()
            .collect()
    }

    /// The current record of one replication, if any.
    pub fn get(&self, cell: &CellKey, replication: u32) -> Option<RunRecord> {
        let inner = self.inner.lock().expect("store lock poisoned");
        inner.index.get(cell)?.get(&replication).cloned()
    }

    /// Current records of a cell, valid and invalid, by replication index.
    pub fn cell_records(&self, cell: &CellKey) -> Result<Vec<RunRecord>, StoreError> {
        let inner = self.inner.lock().expect("store lock poisoned");
        inner
            .index
            .get(cell)
            .map(|runs| runs.values().cloned().collect())
            .ok_or_else(|| StoreError::UnknownCell(cell.clone()))
    }

    /// Valid records of a cell ordered by replication index.
    pub fn load_cell(&self, cell: &CellKey) -> Result<Vec<RunRecord>, StoreError> {
        Ok(self
            .cell_records(cell)?
            .into_iter()
            .filter(RunRecord::is_valid)
            .collect())
    }

    /// Appends a superseding invalid copy of a replication.
    pub fn invalidate(
        &self,
        cell: &CellKey,
        replication: u32,
        reason: &str,
    ) -> Result<(), StoreError> {
        let current = self
            .get(cell, replication)
            .ok_or_else(|| StoreError::UnknownCell(cell.clone()))?;
        self.append(&current.invalidated(reason))
    }
}

/// Returns the index, the number of record lines and the byte length of the
/// complete prefix of the log.
fn parse_log(path: &Path, text: &str) -> Result<(CellIndex, usize, usize), StoreError> {
    let corrupt = |line: usize, message: String| StoreError::Corrupt {
        path: path.display().to_string(),
        line,
        message,
    };
    let mut index = CellIndex::new();
    let mut lines = 0;
    let mut offset = 0;
    for (n, raw) in text.split_inclusive('\n').enumerate() {
        let terminated = raw.ends_with('\n');
        let body = raw.trim_end_matches(['\n', '\r']);
        if n == 0 {
            let header: Header =
                serde_json::from_str(body).map_err(|e| corrupt(1, format!("bad header: {e}")))?;
            if header.schema != SCHEMA_NAME || header.version != SCHEMA_VERSION {
                return Err(corrupt(
                    1,
                    format!("unsupported schema {} v{}", header.schema, header.version),
                ));
            }
            if !terminated {
                return Err(corrupt(1, "header is not newline-terminated".into()));
            }
            offset += raw.len();
            continue;
        }
        if body.trim().is_empty() {
            offset += raw.len();
            continue;
        }
        if !terminated {
            // the writer died mid-record
            break;
        }
        let record: RunRecord =
            serde_json::from_str(body).map_err(|e| corrupt(n + 1, e.to_string()))?;
        lines += 1;
        index
            .entry(record.cell.clone())
            .or_default()
            .insert(record.replication, record);
        offset += raw.len();
    }
    if text.is_empty() {
        return Err(corrupt(1, "missing header".into()));
    }
    Ok((index, lines, offset))
}
