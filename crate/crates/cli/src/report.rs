//! Experiment reports and file digests.

use std::collections::BTreeMap;
use std::fs;
use std::hash::Hasher;
use std::path::Path;

use anyhow::{Context, Result};
use fnv::FnvHasher;
use serde::Serialize;
use serde_json::Value;

/// Key excluded when comparing reports across runs.
pub const WALL_CLOCK_KEY: &str = "wall_clock_secs";

/// 64-bit FNV-1a of `bytes`, as 16 hex digits.
pub fn digest_bytes(bytes: &[u8]) -> String {
    let mut h = FnvHasher::default();
    h.write(bytes);
    format!("{:016x}", h.finish())
}

/// Digest of a file, or of a directory's files in sorted relative-path order.
pub fn digest_path(path: &Path) -> Result<String> {
    if path.is_file() {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        return Ok(digest_bytes(&bytes));
    }
    let mut files = Vec::new();
    collect_files(path, path, &mut files)?;
    files.sort();
    let mut h = FnvHasher::default();
    for rel in files {
        h.write(rel.as_bytes());
        h.write(&[0]);
        h.write(&fs::read(path.join(&rel))?);
    }
    Ok(format!("{:016x}", h.finish()))
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<String>) -> Result<()> {
    for entry in
        fs::read_dir(dir).with_context(|| format!("reading directory {}", dir.display()))?
    {
        let p = entry?.path();
        if p.is_dir() {
            collect_files(root, &p, out)?;
        } else if p.file_name().is_some_and(|n| n != "report.json") {
            out.push(
                p.strip_prefix(root)
                    .expect("under root")
                    .to_string_lossy()
                    .replace('\\', "/"),
            );
        }
    }
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub command: Vec<String>,
    pub config: Value,
    pub seed: Option<u64>,
    pub metrics: Value,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub wall_clock_secs: f64,
}

impl Report {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

/// A report's JSON with the wall-clock field removed.
pub fn strip_wall_clock(text: &str) -> Result<Value> {
    let mut v: Value = serde_json::from_str(text)?;
    if let Some(obj) = v.as_object_mut() {
        obj.remove(WALL_CLOCK_KEY);
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv_reference_values() {
        assert_eq!(digest_bytes(b""), "cbf29ce484222325");
        assert_eq!(digest_bytes(b"a"), "af63dc4c8601ec8c");
        assert_eq!(digest_bytes(b"foobar"), "85944171f73967e8");
    }

    #[test]
    fn directory_digest_ignores_report() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("a.txt"), "x").unwrap();
        let before = digest_path(dir.path()).unwrap();
        fs::write(dir.path().join("report.json"), "{}").unwrap();
        assert_eq!(before, digest_path(dir.path()).unwrap());
        fs::write(dir.path().join("b.txt"), "y").unwrap();
        assert_ne!(before, digest_path(dir.path()).unwrap());
    }
}
