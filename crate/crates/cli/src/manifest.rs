use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
struct FileEntry {
    path: String,
    sha256: String,
}

/// Provenance record written next to every run's outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    command_line: Vec<String>,
    toolkit_version: &'static str,
    seeds: Vec<u64>,
    inputs: Vec<FileEntry>,
    outputs: Vec<FileEntry>,
    started_unix: u64,
    wall_clock_seconds: f64,
    #[serde(skip)]
    started: Option<Instant>,
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

impl RunManifest {
    pub fn start() -> Self {
        Self {
            command_line: std::env::args().collect(),
            toolkit_version: env!("CARGO_PKG_VERSION"),
            seeds: Vec::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            started_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            wall_clock_seconds: 0.0,
            started: Some(Instant::now()),
        }
    }

    pub fn seed(&mut self, seed: u64) {
        self.seeds.push(seed);
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        let sha256 = sha256_file(path)?;
        self.inputs.push(FileEntry {
            path: path.display().to_string(),
            sha256,
        });
        Ok(())
    }

    pub fn inputs<'a>(&mut self, paths: impl IntoIterator<Item = &'a Option<PathBuf>>) -> Result<()> {
        for p in paths.into_iter().flatten() {
            self.input(p)?;
        }
        Ok(())
    }

    /// Hashes the outputs and writes the manifest to `path`.
    pub fn finish(mut self, outputs: &[PathBuf], path: &Path) -> Result<()> {
        for p in outputs {
            let sha256 = sha256_file(p)?;
            self.outputs.push(FileEntry {
                path: p.display().to_string(),
                sha256,
            });
        }
        if let Some(t) = self.started {
            self.wall_clock_seconds = t.elapsed().as_secs_f64();
        }
        fs::write(path, serde_json::to_string_pretty(&self)?)
            .with_context(|| format!("writing {}", path.display()))
    }
}

/// `<out>.manifest.json` for a single output file.
pub fn beside(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    out.with_file_name(name)
}
