//! Output files with the resolved config embedded.
//!
//! CSV files start with `#`-prefixed lines holding the TOML config; everything
//! after them is the body. JSON files carry the config under the `config` key.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::Value;

use crate::config::RunConfig;
use crate::CliError;

pub const CSV_MARKER: &str = "# cllab config";

/// 17 significant digits.
pub fn f17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Compact parameter tag for file names.
pub fn tag(x: f64) -> String {
    format!("{x}")
}

pub struct Outputs {
    dir: PathBuf,
    toml: String,
    config: Value,
    written: Vec<PathBuf>,
}

impl Outputs {
    pub fn new(cfg: &RunConfig) -> Result<Self, CliError> {
        let dir = PathBuf::from(&cfg.out);
        fs::create_dir_all(&dir)?;
        Ok(Self { dir, toml: cfg.to_toml()?, config: serde_json::to_value(cfg)?, written: Vec::new() })
    }

    pub fn csv(&mut self, name: &str, body: &str) -> Result<(), CliError> {
        let mut s = String::from(CSV_MARKER);
        s.push('\n');
        for line in self.toml.lines() {
            s.push_str("# ");
            s.push_str(line);
            s.push('\n');
        }
        s.push_str(body);
        self.write(name, &s)
    }

    /// Writes `value` with the config attached; non-object values go under `data`.
    pub fn json(&mut self, name: &str, value: Value) -> Result<(), CliError> {
        let mut obj = match value {
            Value::Object(m) => m,
            other => {
                let mut m = serde_json::Map::new();
                m.insert("data".into(), other);
                m
            }
        };
        obj.insert("config".into(), self.config.clone());
        let mut s = serde_json::to_string_pretty(&Value::Object(obj))?;
        s.push('\n');
        self.write(name, &s)
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        fs::write(self.dir.join(name), contents)?;
        self.written.push(PathBuf::from(name));
        Ok(())
    }

    pub fn into_written(self) -> Vec<PathBuf> {
        self.written
    }
}

/// Body of a CSV output: the lines after the embedded config.
pub fn csv_body(text: &str) -> &str {
    let mut rest = text;
    while rest.starts_with('#') {
        rest = rest.split_once('\n').map(|(_, r)| r).unwrap_or("");
    }
    rest
}

/// Recovers the config embedded in an output file.
pub fn embedded_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path)?;
    if text.starts_with(CSV_MARKER) {
        let toml: String = text
            .lines()
            .skip(1)
            .take_while(|l| l.starts_with('#'))
            .map(|l| l.strip_prefix("# ").unwrap_or(l.trim_start_matches('#')))
            .collect::<Vec<_>>()
            .join("\n");
        return RunConfig::from_toml(&toml);
    }
    let v: Value = serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: not a cllab output ({e})", path.display())))?;
    let cfg = v.get("config").ok_or_else(|| CliError::Config(format!("{}: no embedded config", path.display())))?;
    let cfg: RunConfig = serde_json::from_value(cfg.clone()).map_err(|e| CliError::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Experiment;

    #[test]
    fn f17_round_trips() {
        for x in [0.1, 1.0 / 3.0, -2.718281828459045e-300, 6.02214076e23] {
            assert_eq!(f17(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn csv_and_json_embed_config() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = RunConfig::new(Experiment::Boundary);
        cfg.out = dir.path().to_string_lossy().into_owned();
        cfg.seed = 42;
        let mut out = Outputs::new(&cfg).unwrap();
        out.csv("a.csv", "y,v\n1,2\n").unwrap();
        out.json("a.json", serde_json::json!([1, 2])).unwrap();
        let text = fs::read_to_string(dir.path().join("a.csv")).unwrap();
        assert_eq!(csv_body(&text), "y,v\n1,2\n");
        assert_eq!(embedded_config(&dir.path().join("a.csv")).unwrap(), cfg);
        assert_eq!(embedded_config(&dir.path().join("a.json")).unwrap(), cfg);
    }
}
