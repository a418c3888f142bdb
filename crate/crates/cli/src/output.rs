//! Output directories written via a staging area and renamed into place.

use std::fs;
use std::path::{Path, PathBuf};

use crate::Failure;

fn io_failure(what: &str, path: &Path, e: std::io::Error) -> Failure {
    Failure::Runtime(format!("{what} {}: {e}", path.display()))
}

pub struct OutputDir {
    root: PathBuf,
}

impl OutputDir {
    /// Creates `root` if needed. An existing non-empty directory is refused
    /// unless `overwrite` is set.
    pub fn prepare(root: &Path, overwrite: bool) -> Result<Self, Failure> {
        if root.exists() {
            let mut entries = fs::read_dir(root).map_err(|e| io_failure("cannot read", root, e))?;
            if !overwrite && entries.next().is_some() {
                return Err(Failure::Usage(format!(
                    "output directory {} is not empty (pass --overwrite to replace its files)",
                    root.display()
                )));
            }
        } else {
            fs::create_dir_all(root).map_err(|e| io_failure("cannot create", root, e))?;
        }
        Ok(OutputDir { root: root.to_path_buf() })
    }

    pub fn stage(&self) -> Result<Staged, Failure> {
        let staging = self.root.join(format!(".staging-{}", std::process::id()));
        if staging.exists() {
            fs::remove_dir_all(&staging).map_err(|e| io_failure("cannot clear", &staging, e))?;
        }
        fs::create_dir_all(&staging).map_err(|e| io_failure("cannot create", &staging, e))?;
        Ok(Staged { root: self.root.clone(), staging, files: Vec::new(), committed: false })
    }
}

/// Files written so far, not yet visible under their final names. Dropping
/// without [`Staged::commit`] deletes them.
pub struct Staged {
    root: PathBuf,
    staging: PathBuf,
    files: Vec<String>,
    committed: bool,
}

impl Staged {
    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<(), Failure> {
        let path = self.staging.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| io_failure("cannot create", parent, e))?;
        }
        fs::write(&path, bytes).map_err(|e| io_failure("cannot write", &path, e))?;
        self.files.push(rel.to_string());
        Ok(())
    }

    pub fn commit(mut self) -> Result<(), Failure> {
        for rel in &self.files {
            let from = self.staging.join(rel);
            let to = self.root.join(rel);
            if let Some(parent) = to.parent() {
                fs::create_dir_all(parent).map_err(|e| io_failure("cannot create", parent, e))?;
            }
            fs::rename(&from, &to).map_err(|e| io_failure("cannot move into place", &to, e))?;
        }
        self.committed = true;
        fs::remove_dir_all(&self.staging).map_err(|e| io_failure("cannot remove", &self.staging, e))
    }
}

impl Drop for Staged {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.staging);
        }
    }
}
