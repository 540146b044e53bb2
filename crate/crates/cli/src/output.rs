//! Write-to-temp, rename-on-success file output.

use std::io::Write;
use std::path::{Path, PathBuf};

use tempfile::NamedTempFile;

use crate::CliError;

/// Files staged next to their destinations. Nothing becomes visible until
/// [`Staged::commit`]; dropping without committing removes every temp file.
#[derive(Default)]
pub struct Staged {
    files: Vec<(NamedTempFile, PathBuf)>,
}

impl Staged {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, path: &Path, bytes: &[u8]) -> Result<(), CliError> {
        let dir = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => Path::new("."),
        };
        let io = |e: std::io::Error| CliError::Io(path.to_path_buf(), e);
        let mut tmp = NamedTempFile::new_in(dir).map_err(io)?;
        tmp.write_all(bytes).map_err(io)?;
        #[cfg(unix)]
        {
            use std::os::unix::fs::PermissionsExt;
            // temp files are created 0600; outputs should look like any other file
            tmp.as_file()
                .set_permissions(std::fs::Permissions::from_mode(0o644))
                .map_err(io)?;
        }
        tmp.as_file().sync_all().map_err(io)?;
        self.files.push((tmp, path.to_path_buf()));
        Ok(())
    }

    /// Renames every staged file into place. If one rename fails, files
    /// already moved by this call are removed again.
    pub fn commit(self) -> Result<(), CliError> {
        let mut done: Vec<PathBuf> = Vec::new();
        for (tmp, dest) in self.files {
            if let Err(e) = tmp.persist(&dest) {
                for p in &done {
                    let _ = std::fs::remove_file(p);
                }
                return Err(CliError::Io(dest, e.error));
            }
            done.push(dest);
        }
        Ok(())
    }
}

/// `foo/bar.png` with suffix `report.txt` becomes `foo/bar.report.txt`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    path.with_extension(suffix)
}
