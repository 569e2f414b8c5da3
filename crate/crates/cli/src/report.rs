//! JSON reports with named checks, written atomically.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::config::RunConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    AtMost,
    AtLeast,
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub relation: Relation,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub command: String,
    pub config_hash: String,
    pub config: Value,
    pub tolerances: BTreeMap<String, f64>,
    pub results: BTreeMap<String, Value>,
    pub checks: Vec<Check>,
    pub pass: bool,
}

impl Report {
    pub fn new(command: &str, cfg: &RunConfig) -> Self {
        Report {
            command: command.to_string(),
            config_hash: cfg.hash(),
            config: cfg.canonical(),
            tolerances: cfg.tolerances.clone(),
            results: BTreeMap::new(),
            checks: Vec::new(),
            pass: true,
        }
    }

    pub fn result<T: Serialize>(&mut self, name: &str, value: T) {
        self.results
            .insert(name.to_string(), serde_json::to_value(value).expect("result serializes"));
    }

    /// Records `value <= bound`; NaN fails.
    pub fn at_most(&mut self, name: &str, value: f64, bound: f64) -> bool {
        self.push(name, value, bound, Relation::AtMost, value <= bound)
    }

    /// Records `value >= bound`; NaN fails.
    pub fn at_least(&mut self, name: &str, value: f64, bound: f64) -> bool {
        self.push(name, value, bound, Relation::AtLeast, value >= bound)
    }

    fn push(&mut self, name: &str, value: f64, bound: f64, relation: Relation, pass: bool) -> bool {
        self.pass &= pass;
        self.checks.push(Check {
            name: name.to_string(),
            value,
            bound,
            relation,
            pass,
        });
        pass
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(self).expect("report serializes");
        out.push(b'\n');
        out
    }

    /// Writes `<dir>/<command>.json`.
    pub fn write(&self, dir: &Path) -> std::io::Result<PathBuf> {
        write_atomic(dir, &format!("{}.json", self.command), &self.to_bytes())
    }
}

/// Writes through a temporary file in `dir` and renames it into place.
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> std::io::Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(&path).map_err(|e| e.error)?;
    Ok(path)
}
