use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::hex_digest;
use crate::error::{CliError, Result};

pub const CACHE_ENV: &str = "STEINMD_CACHE_DIR";

/// Content-addressed store of computed artifacts, one file per key.
#[derive(Debug, Clone)]
pub struct Cache {
    dir: PathBuf,
}

impl Cache {
    /// `$STEINMD_CACHE_DIR` if set and nonempty, otherwise `<output_dir>/.cache`.
    pub fn locate(output_dir: &Path) -> Self {
        let dir = match std::env::var_os(CACHE_ENV) {
            Some(d) if !d.is_empty() => PathBuf::from(d),
            _ => output_dir.join(".cache"),
        };
        Self { dir }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn key<T: Serialize>(description: &T) -> String {
        hex_digest(&serde_json::to_vec(description).expect("cache key serializes"))
    }

    /// Returns the stored bytes for `key`, computing and storing them on a miss.
    /// The flag is true on a hit.
    pub fn get_or_compute<F>(&self, key: &str, compute: F) -> Result<(Vec<u8>, bool)>
    where
        F: FnOnce() -> Result<Vec<u8>>,
    {
        let path = self.dir.join(format!("{key}.csv"));
        if let Ok(bytes) = std::fs::read(&path) {
            return Ok((bytes, true));
        }
        let bytes = compute()?;
        std::fs::create_dir_all(&self.dir).map_err(|e| CliError::io(format!("creating {}", self.dir.display()), e))?;
        // Rename keeps readers from ever seeing a partial entry.
        let tmp = self.dir.join(format!("{key}.{}.tmp", std::process::id()));
        std::fs::write(&tmp, &bytes).map_err(|e| CliError::io(format!("writing {}", tmp.display()), e))?;
        std::fs::rename(&tmp, &path).map_err(|e| CliError::io(format!("writing {}", path.display()), e))?;
        Ok((bytes, false))
    }
}
