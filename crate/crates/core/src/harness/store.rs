use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultRecord {
    pub config: Value,
    pub quantity: String,
    pub value: f64,
    pub stderr: f64,
    pub n: usize,
    pub method: String,
    pub wall_ms: u64,
    /// Milliseconds since the Unix epoch.
    pub ts: u64,
    pub version: String,
}

impl ResultRecord {
    /// One JSON line with keys sorted at every level.
    pub fn to_line(&self) -> Result<String> {
        if !self.value.is_finite() || !self.stderr.is_finite() {
            return Err(Error::Store(format!(
                "record {} has a non-finite value or stderr",
                self.quantity
            )));
        }
        let v = serde_json::to_value(self).map_err(|e| Error::Store(e.to_string()))?;
        Ok(v.to_string())
    }

    pub fn from_line(line: &str) -> Result<Self> {
        serde_json::from_str(line).map_err(|e| Error::Store(e.to_string()))
    }

    pub fn space(&self) -> Option<&str> {
        self.config.get("space").and_then(Value::as_str)
    }

    pub fn group(&self) -> Option<&str> {
        self.config.get("group").and_then(Value::as_str)
    }
}

/// Append-only line-delimited record file.
#[derive(Debug, Clone)]
pub struct Store {
    path: PathBuf,
}

impl Store {
    pub fn new(path: impl AsRef<Path>) -> Self {
        Self {
            path: path.as_ref().to_path_buf(),
        }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&self, records: &[ResultRecord]) -> Result<()> {
        let lines = records
            .iter()
            .map(|r| r.to_line())
            .collect::<Result<Vec<_>>>()?;
        let mut f = OpenOptions::new().create(true).append(true).open(&self.path)?;
        for line in lines {
            f.write_all(format!("{line}\n").as_bytes())?;
        }
        f.flush()?;
        Ok(())
    }

    /// All records; a missing file is an empty store.
    pub fn load(&self) -> Result<Vec<ResultRecord>> {
        let f = match File::open(&self.path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(e.into()),
        };
        let mut out = Vec::new();
        for (i, line) in BufReader::new(f).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            out.push(ResultRecord::from_line(&line).map_err(|e| Error::Store(format!("line {}: {e}", i + 1)))?);
        }
        Ok(out)
    }

    /// Records previously produced by an identical config.
    pub fn cached(&self, config: &Value) -> Result<Vec<ResultRecord>> {
        Ok(self.load()?.into_iter().filter(|r| &r.config == config).collect())
    }
}
