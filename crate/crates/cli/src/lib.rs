//! Experiment driver behind the `cllab` binary.

pub mod commands;
pub mod config;
pub mod output;

pub use config::{Experiment, RunConfig};

use serde_json::json;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    Core(#[from] cllab::Error),
    #[error("{context}: {source}")]
    Context { context: String, source: cllab::Error },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn context(self, ctx: impl Into<String>) -> Self {
        match self {
            CliError::Core(source) => CliError::Context { context: ctx.into(), source },
            other => other,
        }
    }

    pub fn kind(&self) -> String {
        match self {
            CliError::Config(_) => "config".into(),
            CliError::Core(e) | CliError::Context { source: e, .. } => variant_name(e),
            CliError::Io(_) => "io".into(),
            CliError::Json(_) => "json".into(),
        }
    }

    /// Machine-readable form printed on failure.
    pub fn to_json(&self) -> serde_json::Value {
        let context = match self {
            CliError::Context { context, .. } => Some(context.clone()),
            _ => None,
        };
        json!({ "error": { "kind": self.kind(), "message": self.to_string(), "context": context } })
    }
}

fn variant_name(e: &cllab::Error) -> String {
    let dbg = format!("{e:?}");
    dbg.split(|c: char| !c.is_alphanumeric()).next().unwrap_or("").to_string()
}

/// Result of a command: files written, relative to the output directory.
pub type Written = Vec<std::path::PathBuf>;

/// Runs the configured experiment, writing into `cfg.out`.
pub fn run(cfg: &RunConfig) -> Result<Written, CliError> {
    cfg.validate()?;
    let mut out = output::Outputs::new(cfg)?;
    commands::dispatch(cfg, &mut out)?;
    Ok(out.into_written())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_json_shape() {
        let e = CliError::from(cllab::Error::Collision(1e-9)).context("eigen");
        let v = e.to_json();
        assert_eq!(v["error"]["kind"], "Collision");
        assert_eq!(v["error"]["context"], "eigen");
        assert!(v["error"]["message"].as_str().unwrap().starts_with("eigen: "));
    }
}
