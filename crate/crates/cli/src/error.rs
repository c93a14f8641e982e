use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use sgsde_core::Error;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{usage}")]
    Usage { usage: String },

    #[error("config `{field}`: {message}")]
    Config {
        field: String,
        /// JSON pointer to the offending value; empty for the whole document.
        pointer: String,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] Error),
}

/// Dotted field name to JSON pointer: `grid.dt` to `/grid/dt`.
fn pointer_of(field: &str) -> String {
    if field.is_empty() {
        return String::new();
    }
    field.split('.').map(|s| format!("/{s}")).collect()
}

impl CliError {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        let field = field.into();
        CliError::Config {
            pointer: pointer_of(&field),
            field,
            message: message.into(),
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Core validation errors raised while building a config section keep
    /// their field, prefixed by the section.
    pub fn from_core_in(section: &str, e: Error) -> Self {
        match e {
            Error::Invalid { field, message } => {
                CliError::config(format!("{section}.{field}"), message)
            }
            Error::Shape(message) => CliError::config(section, message),
            other => CliError::Core(other),
        }
    }

    /// 0 is success; 1 means the run was misconfigured or refused; 2 means
    /// the numerical method failed.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if !e.is_validation() => 2,
            _ => 1,
        }
    }

    pub fn to_json(&self) -> Value {
        let body = match self {
            CliError::Usage { usage } => json!({ "kind": "usage", "message": usage }),
            CliError::Config {
                field,
                pointer,
                message,
            } => {
                json!({ "kind": "config", "field": field, "pointer": pointer, "message": message })
            }
            CliError::Io { path, source } => {
                json!({ "kind": "io", "path": path.display().to_string(), "message": source.to_string() })
            }
            CliError::Core(e) => core_json(e),
        };
        json!({ "error": body })
    }
}

fn core_json(e: &Error) -> Value {
    let message = e.to_string();
    match e {
        Error::Invalid { field, .. } => {
            json!({ "kind": "validation", "field": field, "message": message })
        }
        Error::Range {
            field, required, ..
        } => {
            json!({ "kind": "validation", "field": field, "required": required, "message": message })
        }
        Error::Refused(reason) => {
            json!({ "kind": "refused", "reason": reason, "message": message })
        }
        Error::Divergence { time, norm } => {
            json!({ "kind": "divergence", "time": time, "norm": norm, "message": message })
        }
        Error::NonConvergence {
            tol,
            iterations,
            last,
            residuals,
        } => json!({
            "kind": "non_convergence",
            "tol": tol,
            "iterations": iterations,
            "last": last,
            "residuals": residuals,
            "message": message,
        }),
        e if e.is_validation() => json!({ "kind": "validation", "message": message }),
        _ => json!({ "kind": "numerical", "message": message }),
    }
}
