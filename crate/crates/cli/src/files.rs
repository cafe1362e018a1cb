//! File-format helpers shared across subcommands: corpus path resolution,
//! summaries files, and atomic JSON/JSONL writers.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use limgen_core::corpus::{load_corpus, Corpus, InputSchema, LoadReport};
use limgen_core::manifest::write_atomic;
use limgen_core::{Error, Result};

/// Resolve a `--corpus` argument: a directory means the `papers.jsonl`
/// inside it; a file path is used as-is.
pub fn corpus_file(corpus: &Path) -> PathBuf {
    if corpus.is_dir() {
        corpus.join("papers.jsonl")
    } else {
        corpus.to_path_buf()
    }
}

pub fn load_corpus_arg(corpus: &Path) -> Result<(Corpus, LoadReport)> {
    load_corpus(&corpus_file(corpus), InputSchema::JsonlV1)
}

/// One row of a summaries file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub paper_id: String,
    pub summary: String,
}

/// Load a summaries file into a per-paper map. Duplicate paper ids are an
/// error: the file would silently shadow itself otherwise.
pub fn load_summaries(path: &Path) -> Result<BTreeMap<String, String>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut map = BTreeMap::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: SummaryRecord = serde_json::from_str(&line).map_err(|e| {
            Error::Invalid(format!(
                "{}:{}: invalid summary record: {e}",
                path.display(),
                idx + 1
            ))
        })?;
        if map.insert(row.paper_id.clone(), row.summary).is_some() {
            return Err(Error::Invalid(format!(
                "{}: duplicate summary for paper `{}`",
                path.display(),
                row.paper_id
            )));
        }
    }
    Ok(map)
}

/// Write rows as JSONL, atomically.
pub fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut bytes = Vec::new();
    for row in rows {
        serde_json::to_writer(&mut bytes, row)?;
        bytes.push(b'\n');
    }
    write_atomic(path, &bytes)
}

/// Write a value as pretty JSON with a trailing newline, atomically.
pub fn write_json_pretty<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

/// Create the parent directory of an output path when it has one.
pub fn ensure_parent_dir(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    Ok(())
}
