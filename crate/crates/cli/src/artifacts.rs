//! Output directory handling and the replay manifest.

use crate::error::{CliError, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

pub struct Artifacts {
    root: PathBuf,
    written: Vec<String>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    config_sha256: String,
    master_seed: u64,
    library_version: &'a str,
    artifacts: &'a [String],
}

impl Artifacts {
    /// Nothing touches the disk until the first write.
    pub fn new(root: &Path) -> Self {
        Self { root: root.to_path_buf(), written: Vec::new() }
    }

    /// Writes `rel` (relative to the output root) through `body`.
    pub fn write<F>(&mut self, rel: &str, body: F) -> Result<()>
    where
        F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
    {
        let path = self.root.join(rel);
        let wrap = |source| CliError::Write { path: path.clone(), source };
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(wrap)?;
        }
        let mut w = BufWriter::new(File::create(&path).map_err(wrap)?);
        body(&mut w).and_then(|_| w.flush()).map_err(wrap)?;
        self.written.push(rel.to_string());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<()> {
        self.write(rel, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            writeln!(w)
        })
    }

    /// Writes `manifest.json`; call last so that it lists every artifact.
    pub fn finish(mut self, command: &str, config_bytes: &[u8], seed: u64) -> Result<()> {
        let digest = Sha256::digest(config_bytes);
        let config_sha256 = digest.iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        });
        let written = std::mem::take(&mut self.written);
        let manifest = Manifest {
            command,
            config_sha256,
            master_seed: seed,
            library_version: env!("CARGO_PKG_VERSION"),
            artifacts: &written,
        };
        self.write_json("manifest.json", &manifest)
    }
}

/// CSV writer for rows of already formatted cells.
pub fn csv<W: Write>(w: &mut W, header: &[&str], rows: &[Vec<String>]) -> std::io::Result<()> {
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}
