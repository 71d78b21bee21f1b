use std::time::{SystemTime, UNIX_EPOCH};

use hyqmom::sampling::PRNG_NAME;
use serde::Serialize;
use serde_json::Value;

use crate::{Cli, Format};

/// Record of one command invocation, written next to its outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: &'static str,
    pub config: Value,
    pub seed: u64,
    pub prng: &'static str,
    pub tol: f64,
    pub format: Format,
    /// Files written alongside the manifest, relative to it.
    pub outputs: Vec<String>,
    pub started_unix_seconds: f64,
    pub wall_clock_seconds: f64,
    pub exit_code: u8,
    pub passed: bool,
    pub summary: Value,
}

impl RunManifest {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        cli: &Cli,
        command: &str,
        config: Value,
        outputs: Vec<String>,
        exit_code: u8,
        passed: bool,
        summary: Value,
        wall_clock_seconds: f64,
    ) -> Self {
        let now = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0.0, |d| d.as_secs_f64());
        Self {
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION"),
            config,
            seed: cli.seed,
            prng: PRNG_NAME,
            tol: cli.tol,
            format: cli.format,
            outputs,
            started_unix_seconds: now - wall_clock_seconds,
            wall_clock_seconds,
            exit_code,
            passed,
            summary,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("plain data");
        s.push('\n');
        s
    }
}
