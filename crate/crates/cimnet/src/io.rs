//! JSON/CSV readers and writers. Every output file is written to a
//! temporary sibling and renamed into place, so readers never observe a
//! partial file.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{ConfigError, Error};

/// Parses `text` as JSON, reporting the failing field path and position.
pub fn parse_json<T: DeserializeOwned>(text: &str, origin: &str) -> Result<T, ConfigError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let value: T = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let field = e.path().to_string();
        let inner = e.into_inner();
        ConfigError {
            origin: origin.to_string(),
            line: inner.line(),
            column: inner.column(),
            field: (field != ".").then_some(field),
            message: strip_position(&inner.to_string()),
        }
    })?;
    de.end().map_err(|e| ConfigError {
        origin: origin.to_string(),
        line: e.line(),
        column: e.column(),
        field: None,
        message: strip_position(&e.to_string()),
    })?;
    Ok(value)
}

/// serde_json appends " at line L column C"; the diagnostic prints its own.
fn strip_position(msg: &str) -> String {
    match msg.rfind(" at line ") {
        Some(i) => msg[..i].to_string(),
        None => msg.to_string(),
    }
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T, Error> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_json(&text, &path.display().to_string())?)
}

/// 1-based line of the first occurrence of `"key"` in `text`.
pub fn line_of_key(text: &str, key: &str) -> usize {
    let needle = format!("\"{key}\"");
    text.lines()
        .position(|l| l.contains(&needle))
        .map_or(0, |i| i + 1)
}

/// Writes `bytes` to `path` atomically (temporary file plus rename).
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), Error> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    let tmp: PathBuf = path.with_file_name(format!(".{name}.tmp-{}", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), Error> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Other(e.into()))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// One compact JSON document per line.
pub fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), Error> {
    let mut out = String::new();
    for r in rows {
        out.push_str(&serde_json::to_string(r).map_err(|e| Error::Other(e.into()))?);
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

/// Serializes `rows` (structs with named fields) as CSV with a header.
pub fn csv_string<T: Serialize>(rows: &[T]) -> Result<String, Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Other(e.into()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Other(anyhow::anyhow!("{e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), Error> {
    write_atomic(path, csv_string(rows)?.as_bytes())
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, Error> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Other(e.into()))?;
    let origin = path.display().to_string();
    r.deserialize()
        .enumerate()
        .map(|(i, row)| {
            row.map_err(|e| {
                Error::Config(ConfigError {
                    origin: origin.clone(),
                    line: i + 2,
                    column: 0,
                    field: None,
                    message: e.to_string(),
                })
            })
        })
        .collect()
}
