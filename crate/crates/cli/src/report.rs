use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::{Config, Failure};

/// Bumped whenever a report field changes meaning or disappears.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize)]
struct Report<'a> {
    schema_version: u32,
    tool_version: &'static str,
    command: &'a str,
    config: &'a Config,
    inputs: Value,
    outputs: Value,
    summary: Value,
}

/// `<out>.report.json` for a file output, `<out>/report.json` for a
/// directory.
pub fn default_path(out: &Path, is_dir: bool) -> PathBuf {
    if is_dir {
        out.join("report.json")
    } else {
        let mut name = out.as_os_str().to_owned();
        name.push(".report.json");
        PathBuf::from(name)
    }
}

pub fn write(
    path: &Path,
    command: &str,
    config: &Config,
    inputs: Value,
    outputs: Value,
    summary: Value,
) -> Result<PathBuf, Failure> {
    let report = Report {
        schema_version: SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION"),
        command,
        config,
        inputs,
        outputs,
        summary,
    };
    let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Failure::io(path, e))?;
    Ok(path.to_path_buf())
}
