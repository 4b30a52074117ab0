//! Filesystem helpers shared by the pipeline: atomic writes and an advisory
//! lock that prevents two pipeline runs from racing on one output directory.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

/// Writes `bytes` to `path` atomically: the content lands in a temporary
/// file in the same directory and is renamed into place, so a reader never
/// observes a half-written artifact and a crash never clobbers the previous
/// version.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let mut tmp = match dir {
        Some(dir) => tempfile::NamedTempFile::new_in(dir)?,
        None => tempfile::NamedTempFile::new_in(".")?,
    };
    io::Write::write_all(&mut tmp, bytes)?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Advisory lock on an output directory.
///
/// Created with `create_new`, so acquisition fails if the lock file already
/// exists; the file is removed on drop, including early returns and panics
/// that unwind. A process kill can leave the file behind — the error message
/// tells the operator which path to delete after checking no run is live.
#[derive(Debug)]
pub struct DirLock {
    path: PathBuf,
}

impl DirLock {
    pub fn acquire(dir: &Path) -> io::Result<DirLock> {
        fs::create_dir_all(dir)?;
        let path = dir.join(".lock");
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(DirLock { path }),
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => Err(io::Error::new(
                io::ErrorKind::AlreadyExists,
                format!(
                    "output directory is locked by another run (remove '{}' if no run is active)",
                    path.display()
                ),
            )),
            Err(e) => Err(e),
        }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}
