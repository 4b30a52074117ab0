//! JSON Lines reading and writing.
//!
//! Readers are strict: every non-blank line must deserialize into the target
//! record type, unknown fields included, and failures report the file and the
//! 1-based line number. Writers emit one compact JSON object per line.

use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum JsonlError {
    /// A line that is not valid JSON or not a valid record. `line` is 1-based.
    #[error("{path}:{line}: {message}")]
    Line {
        path: String,
        line: usize,
        message: String,
    },
    #[error("failed to read '{path}': {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to write '{path}': {source}")]
    Write {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Reads every record from a JSONL file. Blank lines are permitted and
/// skipped; they still count toward line numbering.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, JsonlError> {
    let display = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|source| JsonlError::Read {
        path: display.clone(),
        source,
    })?;
    let reader = BufReader::new(file);
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| JsonlError::Read {
            path: display.clone(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| JsonlError::Line {
            path: display.clone(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        records.push(record);
    }
    Ok(records)
}

/// Like [`read_jsonl`], but keeps each record's 1-based line number so
/// callers can locate post-parse errors (bad severity strings, dangling
/// references) in the source file.
pub fn read_jsonl_numbered<T: DeserializeOwned>(
    path: &Path,
) -> Result<Vec<(usize, T)>, JsonlError> {
    let display = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|source| JsonlError::Read {
        path: display.clone(),
        source,
    })?;
    let reader = BufReader::new(file);
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| JsonlError::Read {
            path: display.clone(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| JsonlError::Line {
            path: display.clone(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        records.push((idx + 1, record));
    }
    Ok(records)
}

/// Serializes records to a JSONL byte buffer, one compact object per line.
pub fn to_jsonl_bytes<T: Serialize>(records: &[T]) -> Vec<u8> {
    let mut out = Vec::new();
    for r in records {
        // Serialization of our plain data types cannot fail.
        serde_json::to_writer(&mut out, r).expect("jsonl serialization");
        out.push(b'\n');
    }
    out
}

/// Writes records to `path` atomically (see [`crate::fsutil::atomic_write`]).
pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<(), JsonlError> {
    crate::fsutil::atomic_write(path, &to_jsonl_bytes(records)).map_err(|source| {
        JsonlError::Write {
            path: path.display().to_string(),
            source,
        }
    })
}

/// Reads records from any buffered reader; `origin` labels error messages
/// (e.g. `"stdin"`).
pub fn read_jsonl_from<R: BufRead, T: DeserializeOwned>(
    reader: R,
    origin: &str,
) -> Result<Vec<T>, JsonlError> {
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| JsonlError::Read {
            path: origin.to_string(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| JsonlError::Line {
            path: origin.to_string(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        records.push(record);
    }
    Ok(records)
}
