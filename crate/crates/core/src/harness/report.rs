//! Report and CSV writers.
//!
//! JSON reports are pretty-printed with sorted keys, so equal payloads are
//! equal bytes. Every artifact carries the resolved configuration: JSON
//! reports under `"config"`, CSV files in a leading `# config: ` line.
//! Wall-clock times go to a separate `timing.json`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde_json::Value;

use crate::error::{Error, Result};
use crate::measurement::write_atomic;

/// Collects the artifacts of one run inside its output directory.
#[derive(Debug)]
pub struct ArtifactSink {
    dir: PathBuf,
    config: Value,
    written: Vec<PathBuf>,
    timing: BTreeMap<String, f64>,
}

impl ArtifactSink {
    pub fn new(dir: &Path, config: Value) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            config,
            written: Vec::new(),
            timing: BTreeMap::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn config(&self) -> &Value {
        &self.config
    }

    /// Writes `payload` with the config echo inserted under `"config"`.
    pub fn json(&mut self, name: &str, mut payload: Value) -> Result<PathBuf> {
        if let Value::Object(map) = &mut payload {
            map.insert("config".into(), self.config.clone());
        }
        let path = self.path(name);
        write_json(&path, &payload)?;
        self.written.push(path.clone());
        Ok(path)
    }

    /// Writes CSV `rows` under `header`, preceded by the config line.
    pub fn csv(&mut self, name: &str, header: &str, rows: &[String]) -> Result<PathBuf> {
        let mut out = format!("# config: {}\n{header}\n", self.config);
        for r in rows {
            out.push_str(r);
            out.push('\n');
        }
        let path = self.path(name);
        write_atomic(&path, out.as_bytes())?;
        self.written.push(path.clone());
        Ok(path)
    }

    /// Records an externally written file.
    pub fn record(&mut self, path: PathBuf) {
        self.written.push(path);
    }

    pub fn time(&mut self, label: &str, seconds: f64) {
        self.timing.insert(label.to_string(), seconds);
    }

    /// Writes `timing.json` and returns every artifact path.
    pub fn finish(mut self) -> Result<Vec<PathBuf>> {
        let path = self.path("timing.json");
        write_json(&path, &serde_json::to_value(&self.timing)?)?;
        self.written.push(path);
        Ok(self.written)
    }
}

pub fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// `|estimate - truth| / truth`.
pub fn relative_error(estimate: f64, truth: f64) -> f64 {
    (estimate - truth).abs() / truth.abs()
}
