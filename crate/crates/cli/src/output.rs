use serde::Serialize;
use std::io::Write;
use std::path::Path;

use tbfa::TbfaError;

/// Writes via a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), TbfaError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| TbfaError::Io(e.error.to_string()))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), TbfaError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| TbfaError::Io(e.to_string()))?;
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

/// RFC 4180 CSV from a header and string rows.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), TbfaError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
    let io = |e: csv::Error| TbfaError::Io(e.to_string());
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(r).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| TbfaError::Io(e.to_string()))?;
    write_atomic(path, &bytes)
}

pub fn read(path: &Path) -> Result<Vec<u8>, TbfaError> {
    std::fs::read(path).map_err(|e| TbfaError::Io(format!("{}: {e}", path.display())))
}

/// `.json` paths get JSON, everything else CSV.
pub fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}
