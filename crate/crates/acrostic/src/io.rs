//! JSONL corpora and embedding files.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use acrostic_core::embed::{EmbeddingTable, LoadReport};
use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Reads one JSON value per non-blank line. Errors name the file and line.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let f = fs::File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.with_context(|| format!("{}: read error at line {}", path.display(), i + 1))?;
        if line.trim().is_empty() {
            continue;
        }
        let v = serde_json::from_str(&line)
            .with_context(|| format!("{}: malformed JSON at line {}", path.display(), i + 1))?;
        out.push(v);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let f = fs::File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    let mut w = BufWriter::new(f);
    for it in items {
        serde_json::to_writer(&mut w, it)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s).with_context(|| format!("cannot write {}", path.display()))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let s = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&s).with_context(|| format!("{}: malformed JSON", path.display()))
}

/// Loads a whitespace-separated embedding file. The dimension is taken from
/// the first entry unless given.
pub fn read_embeddings(path: &Path, dim: Option<usize>) -> Result<(EmbeddingTable, LoadReport)> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read embeddings {}", path.display()))?;
    let dim = match dim {
        Some(d) => d,
        None => match text.lines().find(|l| !l.trim().is_empty()) {
            Some(l) => l.split_whitespace().count() - 1,
            None => bail!("{}: embedding file is empty", path.display()),
        },
    };
    let (table, report) =
        EmbeddingTable::parse(&text, dim).with_context(|| format!("{}: bad embedding file", path.display()))?;
    for (line, token) in &report.duplicates {
        log::warn!("{}:{line}: duplicate entry {token:?}, last one kept", path.display());
    }
    Ok((table, report))
}

pub fn write_embeddings(path: &Path, table: &EmbeddingTable) -> Result<()> {
    fs::write(path, table.to_text()).with_context(|| format!("cannot write {}", path.display()))
}
