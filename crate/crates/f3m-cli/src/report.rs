//! Report envelope shared by every subcommand's machine-readable output.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::args::Resolved;
use f3m_core::error::Result;

/// Provenance block embedded in every JSON report. Wall-clock fields are
/// omitted in deterministic mode so identical runs serialize identically.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub command: String,
    pub library_version: String,
    pub host_threads: usize,
    pub seed: u64,
    pub deterministic: bool,
    pub config: Resolved,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timestamp_unix: Option<u64>,
}

impl RunManifest {
    pub fn new(command: &str, resolved: &Resolved) -> Self {
        let deterministic = resolved.deterministic;
        RunManifest {
            schema_version: 1,
            command: command.to_string(),
            library_version: env!("CARGO_PKG_VERSION").to_string(),
            host_threads: resolved.threads.unwrap_or_else(|| {
                std::thread::available_parallelism()
                    .map(|v| v.get())
                    .unwrap_or(1)
            }),
            seed: resolved.seed,
            deterministic,
            config: resolved.clone(),
            timestamp_unix: if deterministic {
                None
            } else {
                SystemTime::now()
                    .duration_since(UNIX_EPOCH)
                    .ok()
                    .map(|d| d.as_secs())
            },
        }
    }

    /// Hide a wall-clock measurement when reproducibility is requested.
    pub fn clock<T>(&self, value: T) -> Option<T> {
        if self.deterministic {
            None
        } else {
            Some(value)
        }
    }
}

/// Serialize a report to the output path, or stdout when none is given.
pub fn emit<T: Serialize>(report: &T, out: Option<&str>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(report)
        .map_err(|e| f3m_core::Error::Format(format!("serialize report: {e}")))?;
    text.push('\n');
    match out {
        Some(path) => std::fs::write(Path::new(path), text)?,
        None => print!("{text}"),
    }
    Ok(())
}
