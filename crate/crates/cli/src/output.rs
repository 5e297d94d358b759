use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

/// Output directory whose files all start with a `# config_sha256=` line.
pub struct Output {
    dir: PathBuf,
    hash: String,
}

impl Output {
    pub fn new(dir: &Path, hash: String) -> Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            hash,
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Writes the provenance line, then whatever `body` emits.
    pub fn write_with(
        &self,
        name: &str,
        body: impl FnOnce(&mut dyn Write) -> csmac_core::Result<()>,
    ) -> Result<PathBuf> {
        let path = self.path(name);
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        let mut w = BufWriter::new(file);
        writeln!(w, "# config_sha256={}", self.hash)?;
        body(&mut w).with_context(|| format!("writing {}", path.display()))?;
        w.flush()?;
        log::info!("wrote {}", path.display());
        Ok(path)
    }

    pub fn table(&self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<PathBuf> {
        self.write_with(name, |w| {
            let mut c = csv::Writer::from_writer(w);
            c.write_record(header)?;
            for r in rows {
                c.write_record(r)?;
            }
            c.flush()?;
            Ok(())
        })
    }

    pub fn text(&self, name: &str, contents: &str) -> Result<PathBuf> {
        self.write_with(name, |w| Ok(w.write_all(contents.as_bytes())?))
    }
}

/// Cell for a value that may be missing (infeasible or undefined).
pub fn cell<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(|| "inf".to_string(), |x| x.to_string())
}

/// Scientific notation for magnitudes below 1e-4, shortest round-trip otherwise.
pub fn num(x: f64) -> String {
    if x != 0.0 && x.abs() < 1e-4 {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}
