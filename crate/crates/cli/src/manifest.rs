//! SHA-256 manifest of every artifact under an output directory.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.sha256";

fn collect(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let path = entry?.path();
        if path.is_dir() {
            collect(&path, out)?;
        } else {
            out.push(path);
        }
    }
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// `<sha256>  <relative path>` lines, sorted by path.
pub fn manifest_text(root: &Path) -> Result<String> {
    let mut files = Vec::new();
    collect(root, &mut files)?;
    let mut rows: Vec<(String, String)> = Vec::new();
    for f in files {
        let rel = f.strip_prefix(root).expect("walked under root").to_string_lossy().replace('\\', "/");
        if rel == MANIFEST_FILE {
            continue;
        }
        let bytes = fs::read(&f).with_context(|| format!("reading {}", f.display()))?;
        rows.push((rel, sha256_hex(&bytes)));
    }
    rows.sort();
    Ok(rows.into_iter().map(|(p, h)| format!("{h}  {p}\n")).collect())
}

pub fn write_manifest(root: &Path) -> Result<()> {
    let text = manifest_text(root)?;
    let path = root.join(MANIFEST_FILE);
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}
