//! Run reports: a TOML key-value document with the results, the library
//! version, the wall-clock time and the full configuration, so a report can
//! be fed back as `--config`.

use std::path::Path;
use std::time::Instant;

use toml::{Table, Value};

use crate::config::ExperimentConfig;
use crate::error::CliResult;

pub struct Report {
    command: &'static str,
    started: Instant,
    results: Table,
}

impl Report {
    pub fn new(command: &'static str) -> Self {
        Self {
            command,
            started: Instant::now(),
            results: Table::new(),
        }
    }

    pub fn set(&mut self, key: &str, value: impl Into<Value>) {
        self.results.insert(key.to_string(), value.into());
    }

    pub fn push_table(&mut self, key: &str, entry: Table) {
        let slot = self
            .results
            .entry(key.to_string())
            .or_insert_with(|| Value::Array(Vec::new()));
        if let Value::Array(a) = slot {
            a.push(Value::Table(entry));
        }
    }

    pub fn render(&self, config: &ExperimentConfig) -> String {
        let mut doc = Table::new();
        doc.insert("command".into(), self.command.into());
        doc.insert("version".into(), env!("CARGO_PKG_VERSION").into());
        doc.insert(
            "wall_clock_seconds".into(),
            self.started.elapsed().as_secs_f64().into(),
        );
        doc.insert("results".into(), Value::Table(self.results.clone()));
        doc.insert(
            "config".into(),
            Value::try_from(config).expect("config is always serializable"),
        );
        toml::to_string(&doc).expect("report is always serializable")
    }

    pub fn write(&self, config: &ExperimentConfig, dir: &Path) -> CliResult<()> {
        write_atomic(&dir.join("report.toml"), self.render(config).as_bytes())
    }
}

/// Writes through a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let tmp = path.with_extension("partial");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Comma-separated table with a header row.
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new<S: AsRef<str>>(header: impl IntoIterator<Item = S>) -> Self {
        let cols: Vec<String> = header.into_iter().map(|s| s.as_ref().to_string()).collect();
        Self {
            text: cols.join(",") + "\n",
        }
    }

    pub fn row<S: ToString>(&mut self, fields: impl IntoIterator<Item = S>) {
        let cols: Vec<String> = fields.into_iter().map(|f| f.to_string()).collect();
        self.text.push_str(&cols.join(","));
        self.text.push('\n');
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        write_atomic(path, self.text.as_bytes())
    }
}
