//! Staged output files: everything is written to temporaries next to its
//! destination and only renamed into place once the command has succeeded.

use anyhow::{Context, Result};
use std::io::Write;
use std::path::{Path, PathBuf};
use tempfile::NamedTempFile;

#[derive(Default)]
pub struct Outputs {
    staged: Vec<(NamedTempFile, PathBuf)>,
}

impl Outputs {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn stage(&mut self, dest: &Path, bytes: &[u8]) -> Result<()> {
        let dir = match dest.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => Path::new("."),
        };
        let mut tmp = NamedTempFile::new_in(dir)
            .with_context(|| format!("cannot create output in {}", dir.display()))?;
        tmp.write_all(bytes)
            .and_then(|_| tmp.flush())
            .with_context(|| format!("cannot write {}", dest.display()))?;
        self.staged.push((tmp, dest.to_path_buf()));
        Ok(())
    }

    pub fn stage_json<T: serde::Serialize>(&mut self, dest: &Path, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.stage(dest, &bytes)
    }

    /// Rename every staged file into place. If one rename fails, files
    /// already moved are removed again.
    pub fn commit(self) -> Result<()> {
        let mut done: Vec<PathBuf> = Vec::new();
        for (tmp, dest) in self.staged {
            if let Err(e) = tmp.persist(&dest) {
                for path in &done {
                    let _ = std::fs::remove_file(path);
                }
                return Err(e.error).with_context(|| format!("cannot write {}", dest.display()));
            }
            done.push(dest);
        }
        Ok(())
    }
}
