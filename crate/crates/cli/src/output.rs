//! All-or-nothing output: files are written into a hidden staging
//! directory and moved into place only when the command succeeds.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

pub struct Staging {
    out: PathBuf,
    dir: PathBuf,
}

impl Staging {
    pub fn new(out: &Path) -> Result<Self> {
        std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
        let dir = out.join(format!(".dtecm-staging-{}", std::process::id()));
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self { out: out.to_path_buf(), dir })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn commit(self) -> Result<()> {
        let mut entries: Vec<_> = std::fs::read_dir(&self.dir)?.collect::<std::io::Result<_>>()?;
        entries.sort_by_key(|e| e.file_name());
        for entry in entries {
            let target = self.out.join(entry.file_name());
            std::fs::rename(entry.path(), &target).with_context(|| format!("moving output to {}", target.display()))?;
        }
        Ok(())
    }
}

impl Drop for Staging {
    fn drop(&mut self) {
        // on failure the partial outputs disappear with the staging dir
        let _ = std::fs::remove_dir_all(&self.dir);
    }
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
