use std::io::Write;
use std::path::{Path, PathBuf};

use tempfile::NamedTempFile;

use crate::failure::Failure;

/// Where artifacts go. Without a path the primary artifact is printed to
/// stdout and secondary ones to stderr; with a path, secondary artifacts
/// land next to it as `<path>.<suffix>`.
pub struct Output {
    path: Option<PathBuf>,
}

impl Output {
    pub fn new(path: Option<PathBuf>) -> Self {
        Self { path }
    }

    pub fn primary(&self, bytes: &[u8]) -> Result<(), Failure> {
        match &self.path {
            Some(p) => write_atomic(p, bytes),
            None => {
                let mut out = std::io::stdout().lock();
                out.write_all(bytes)?;
                out.flush()?;
                Ok(())
            }
        }
    }

    pub fn secondary(&self, suffix: &str, bytes: &[u8]) -> Result<(), Failure> {
        match &self.path {
            Some(p) => {
                let mut name = p.as_os_str().to_owned();
                name.push(".");
                name.push(suffix);
                write_atomic(Path::new(&name), bytes)
            }
            None => {
                std::io::stderr().write_all(bytes)?;
                Ok(())
            }
        }
    }
}

/// Temp file in the destination directory, then rename.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Failure::Io(e.to_string()))?;
    Ok(())
}
