//! Whole-file atomic writes and the schema-tagged JSON envelope.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use tempfile::NamedTempFile;

use crate::error::{CliError, Result};

pub const SCHEMA: u32 = 1;

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema: u32,
    #[serde(flatten)]
    body: &'a T,
}

/// Writes into a temporary file next to `path`, then renames it into place.
pub fn write_atomic<F>(path: &Path, fill: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> std::result::Result<(), Box<dyn std::error::Error>>,
{
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir).map_err(|e| CliError::output(path, e))?;
    let mut tmp = NamedTempFile::new_in(&dir).map_err(|e| CliError::output(path, e))?;
    {
        let mut buf = std::io::BufWriter::new(tmp.as_file_mut());
        fill(&mut buf).map_err(|e| CliError::output(path, e))?;
        buf.flush().map_err(|e| CliError::output(path, e))?;
    }
    tmp.persist(path).map_err(|e| CliError::output(path, e.error))?;
    Ok(())
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    write_atomic(path, |w| Ok(w.write_all(bytes)?))
}

/// Pretty JSON with a top-level `"schema": 1`, newline-terminated.
pub fn write_json<T: Serialize>(path: &Path, body: &T) -> Result<()> {
    let mut text = serde_json::to_vec_pretty(&Envelope { schema: SCHEMA, body })
        .map_err(|e| CliError::output(path, e))?;
    text.push(b'\n');
    write_bytes(path, &text)
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read(path).map_err(|e| CliError::input(path, e))?;
    serde_json::from_slice(&text)
        .map_err(|e| CliError::validation(format!("{}: {e}", path.display())).at(path))
}
