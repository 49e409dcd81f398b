use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

/// Everything needed to replay a run, plus what it produced.
#[derive(Serialize, Debug)]
pub struct RunManifest {
    pub subcommand: String,
    pub parameters: Value,
    pub version: String,
    pub parallel: bool,
    pub wall_time_s: f64,
    pub status: String,
    pub summary: Value,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn path(out_dir: &Path, subcommand: &str) -> PathBuf {
        out_dir.join(format!("{subcommand}.manifest.json"))
    }

    pub fn write(&self, out_dir: &Path) -> std::io::Result<PathBuf> {
        let p = Self::path(out_dir, &self.subcommand);
        let mut text = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        text.push('\n');
        fs::write(&p, text)?;
        Ok(p)
    }
}
