//! JSON-Lines reading and writing with reproducible byte output.
//!
//! Every dataset and report file in the pipeline is UTF-8 JSON-Lines with one
//! object per line and keys sorted lexicographically, so identical data always
//! serializes to identical bytes.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

/// Serialize to a single JSON line with lexicographically sorted keys.
///
/// Round-trips through `serde_json::Value`, whose map type is a `BTreeMap`,
/// which is what guarantees the key ordering.
pub fn to_canonical_string<T: Serialize>(value: &T) -> Result<String> {
    let value = serde_json::to_value(value)?;
    Ok(serde_json::to_string(&value)?)
}

/// Pretty-printed variant of [`to_canonical_string`] for report files.
pub fn to_canonical_pretty<T: Serialize>(value: &T) -> Result<String> {
    let value = serde_json::to_value(value)?;
    Ok(serde_json::to_string_pretty(&value)?)
}

/// Read a JSONL file, one `T` per non-empty line.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let reader = BufReader::new(file);
    let mut out = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path.display().to_string(), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let item: T = serde_json::from_str(&line).map_err(|e| Error::InvalidRecord {
            record_id: format!("{}:{}", path.display(), lineno + 1),
            reason: e.to_string(),
        })?;
        out.push(item);
    }
    Ok(out)
}

/// Write items as canonical JSONL, one object per line, trailing newline.
pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| Error::io(parent.display().to_string(), e))?;
        }
    }
    let file = File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut writer = BufWriter::new(file);
    for item in items {
        writeln!(writer, "{}", to_canonical_string(item)?)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
    }
    writer
        .flush()
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(())
}

/// Write a single value as pretty canonical JSON (for reports and manifests).
pub fn write_json_pretty<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| Error::io(parent.display().to_string(), e))?;
        }
    }
    let text = to_canonical_pretty(value)?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path.display().to_string(), e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Serialize, Deserialize, PartialEq, Debug)]
    struct Row {
        zeta: u32,
        alpha: String,
    }

    #[test]
    fn canonical_output_sorts_keys() {
        let row = Row {
            zeta: 1,
            alpha: "x".into(),
        };
        assert_eq!(to_canonical_string(&row).unwrap(), r#"{"alpha":"x","zeta":1}"#);
    }

    #[test]
    fn jsonl_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rows.jsonl");
        let rows = vec![
            Row {
                zeta: 1,
                alpha: "a".into(),
            },
            Row {
                zeta: 2,
                alpha: "b".into(),
            },
        ];
        write_jsonl(&path, &rows).unwrap();
        let back: Vec<Row> = read_jsonl(&path).unwrap();
        assert_eq!(back, rows);
    }
}
