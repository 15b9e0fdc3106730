//! File formats and persistence.
//!
//! Every text format carries a `format_version` and is rejected when the
//! version is unknown. Writes go to a temporary file in the target
//! directory and are renamed into place.

pub mod manifest;
pub mod profile;
pub mod report;
pub mod wav;

use std::io::Write;
use std::path::{Path, PathBuf};

use crate::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

/// Writes `bytes` to `path` through a temporary file and rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    with_atomic_file(path, |file| {
        file.write_all(bytes)
            .map_err(|e| Error::io(format!("writing {}", path.display()), e))
    })
}

/// Runs `fill` on a temporary file next to `path`, then renames it over
/// `path`. Nothing is left behind on failure.
pub fn with_atomic_file(
    path: &Path,
    fill: impl FnOnce(&mut std::fs::File) -> Result<()>,
) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir)
        .map_err(|e| Error::io(format!("creating temporary file in {}", dir.display()), e))?;
    fill(tmp.as_file_mut())?;
    tmp.as_file_mut()
        .sync_all()
        .map_err(|e| Error::io(format!("syncing {}", path.display()), e))?;
    tmp.persist(path)
        .map_err(|e| Error::io(format!("renaming into {}", path.display()), e.error))?;
    Ok(())
}

/// Resolves a manifest-relative path. Absolute paths are rejected.
pub fn resolve_relative(base_dir: &Path, declared: &Path) -> Result<PathBuf> {
    if declared.is_absolute() {
        return Err(Error::Config(format!(
            "path {} must be relative to the manifest",
            declared.display()
        )));
    }
    Ok(base_dir.join(declared))
}

pub(crate) fn check_version(found: u32) -> Result<()> {
    if found != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            found,
            expected: FORMAT_VERSION,
        });
    }
    Ok(())
}

/// Pretty JSON with numeric arrays kept on one line each.
pub fn to_json_text(value: &serde_json::Value) -> String {
    fn is_flat(values: &[serde_json::Value]) -> bool {
        values
            .iter()
            .all(|v| !matches!(v, serde_json::Value::Array(_) | serde_json::Value::Object(_)))
    }

    fn write(value: &serde_json::Value, indent: usize, out: &mut String) {
        let pad = "  ".repeat(indent + 1);
        match value {
            serde_json::Value::Array(items) if !items.is_empty() && !is_flat(items) => {
                out.push_str("[\n");
                for (i, item) in items.iter().enumerate() {
                    out.push_str(&pad);
                    write(item, indent + 1, out);
                    out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
                }
                out.push_str(&"  ".repeat(indent));
                out.push(']');
            }
            serde_json::Value::Object(map) if !map.is_empty() => {
                out.push_str("{\n");
                for (i, (key, item)) in map.iter().enumerate() {
                    out.push_str(&pad);
                    out.push_str(&serde_json::Value::String(key.clone()).to_string());
                    out.push_str(": ");
                    write(item, indent + 1, out);
                    out.push_str(if i + 1 < map.len() { ",\n" } else { "\n" });
                }
                out.push_str(&"  ".repeat(indent));
                out.push('}');
            }
            other => out.push_str(&other.to_string()),
        }
    }

    let mut out = String::new();
    write(value, 0, &mut out);
    out.push('\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested/out.txt");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(path.parent().unwrap()).unwrap().count(), 1);
    }

    #[test]
    fn failed_fill_leaves_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.txt");
        let err = with_atomic_file(&path, |_| Err(Error::Config("boom".into())));
        assert!(err.is_err());
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
    }

    #[test]
    fn relative_paths_only() {
        assert!(resolve_relative(Path::new("/a"), Path::new("/etc/x")).is_err());
        assert_eq!(resolve_relative(Path::new("/a"), Path::new("b/c")).unwrap(), PathBuf::from("/a/b/c"));
    }

    #[test]
    fn json_text_keeps_rows_inline() {
        let v = serde_json::json!({"a": 1, "rows": [[1.5, 2.0], [3.0, -0.0]], "s": "x"});
        let text = to_json_text(&v);
        assert!(text.contains("[1.5,2.0]"), "{text}");
        let back: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(back, v);
    }
}
