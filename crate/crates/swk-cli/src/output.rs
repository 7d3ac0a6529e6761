//! Deterministic, atomically written output files. Each one embeds the
//! resolved configuration and the artifact version.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use swk_core::state::fmt_num;

use crate::config::Resolved;
use crate::CliError;

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    swk_version: &'static str,
    config: &'a Resolved,
    result: T,
}

pub struct Artifacts<'a> {
    dir: PathBuf,
    config: &'a Resolved,
}

impl<'a> Artifacts<'a> {
    pub fn new(out: Option<&Path>, config: &'a Resolved) -> Result<Self, CliError> {
        let dir = match (out, &config.scenario.outputs.dir) {
            (Some(d), _) => d.to_path_buf(),
            (None, Some(d)) => PathBuf::from(d),
            (None, None) => PathBuf::from("."),
        };
        fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        Ok(Artifacts { dir, config })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(format!("{}{name}", self.config.scenario.outputs.prefix))
    }

    /// `# `-prefixed header lines for CSV files.
    pub fn preamble(&self) -> Vec<String> {
        let cfg = serde_json::to_string(self.config).expect("config serializes");
        vec![swk_core::VERSION.to_string(), format!("config {cfg}")]
    }

    pub fn write_json<T: Serialize>(&self, name: &str, result: T) -> Result<PathBuf, CliError> {
        let env = Envelope { swk_version: swk_core::VERSION, config: self.config, result };
        let mut bytes = serde_json::to_vec_pretty(&env).expect("output serializes");
        bytes.push(b'\n');
        let path = self.path(name);
        atomic_write(&path, &bytes)?;
        Ok(path)
    }

    /// Writes a CSV table: preamble, `header`, then one row per entry.
    pub fn write_table(&self, name: &str, header: &[&str], rows: &[Vec<f64>]) -> Result<PathBuf, CliError> {
        let mut buf = Vec::new();
        for line in self.preamble() {
            writeln!(buf, "# {line}").expect("write to memory");
        }
        writeln!(buf, "{}", header.join(",")).expect("write to memory");
        for r in rows {
            let cells: Vec<String> = r.iter().map(|&x| fmt_num(x)).collect();
            writeln!(buf, "{}", cells.join(",")).expect("write to memory");
        }
        let path = self.path(name);
        atomic_write(&path, &buf)?;
        Ok(path)
    }

    pub fn write_bytes(&self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        atomic_write(&path, bytes)?;
        Ok(path)
    }
}

/// Writes to a sibling temporary file, then renames it into place.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.{}.tmp", std::process::id()));
    fs::write(&tmp, bytes).map_err(|e| CliError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        CliError::io(path, e)
    })
}
