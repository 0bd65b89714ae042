pub mod bench;
pub mod cagp;
pub mod calibrate;
pub mod simplify;
pub mod trace;

use std::io::Write;
use std::path::PathBuf;

use anyhow::{Context, Result};
use serde_json::Value;

/// Where command results go: files in a directory, or stdout.
pub struct Output {
    dir: Option<PathBuf>,
}

impl Output {
    pub fn new(dir: Option<PathBuf>) -> Result<Self> {
        if let Some(d) = &dir {
            std::fs::create_dir_all(d).with_context(|| format!("creating {}", d.display()))?;
        }
        Ok(Self { dir })
    }

    pub fn has_dir(&self) -> bool {
        self.dir.is_some()
    }

    pub fn json(&self, name: &str, value: &Value) -> Result<()> {
        let text = serde_json::to_string_pretty(value)? + "\n";
        self.text(name, &text)
    }

    pub fn csv(&self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| anyhow::anyhow!("csv buffer: {e}"))?;
        self.text(name, &String::from_utf8(bytes)?)
    }

    /// Writes `dir/name`, or prints the content when no directory is set.
    pub fn text(&self, name: &str, content: &str) -> Result<()> {
        match &self.dir {
            Some(d) => {
                let path = d.join(name);
                std::fs::write(&path, content)
                    .with_context(|| format!("writing {}", path.display()))?;
                eprintln!("wrote {}", path.display());
            }
            None => {
                let mut out = std::io::stdout().lock();
                out.write_all(content.as_bytes())?;
            }
        }
        Ok(())
    }
}

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.12e}")
}
