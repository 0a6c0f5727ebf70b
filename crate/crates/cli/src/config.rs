//! `key = value` configuration files and run manifests.
//!
//! Option structs derive both `clap::Args` and serde, with every field
//! optional. Flags given on the command line win over values from
//! `--config`; the merged table is what the run uses and what the manifest
//! records, so `--config <manifest>` replays a run.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use nirom::{io, Error, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use toml::{Table, Value};

const RUN_TABLE: &str = "run";

pub fn read_table(path: &Path) -> Result<Table> {
    let text = std::fs::read_to_string(path)?;
    let mut table: Table = text
        .parse()
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    table.remove(RUN_TABLE);
    Ok(table)
}

fn to_table<T: Serialize>(value: &T) -> Result<Table> {
    match Value::try_from(value) {
        Ok(Value::Table(t)) => Ok(t),
        Ok(other) => Err(Error::Config(format!("expected a table, got {other}"))),
        Err(e) => Err(Error::Config(e.to_string())),
    }
}

/// Overlays the non-empty flags onto the config file (if any).
pub fn merge<T: Serialize + DeserializeOwned>(flags: &T, config: Option<&PathBuf>) -> Result<T> {
    let mut table = match config {
        Some(p) => read_table(p)?,
        None => Table::new(),
    };
    for (k, v) in to_table(flags)? {
        table.insert(k, v);
    }
    Value::Table(table).try_into().map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))
}

/// Writes `options` plus a `[run]` table next to the outputs.
pub fn write_manifest<T: Serialize>(path: &Path, subcommand: &str, options: &T) -> Result<()> {
    let mut table = to_table(options)?;
    let mut run = Table::new();
    run.insert("subcommand".into(), Value::String(subcommand.into()));
    run.insert("version".into(), Value::String(env!("CARGO_PKG_VERSION").into()));
    let now = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    run.insert("unix_time".into(), Value::Integer(now as i64));
    table.insert(RUN_TABLE.into(), Value::Table(run));
    let text = toml::to_string(&table).map_err(|e| Error::Config(e.to_string()))?;
    io::write_atomic(path, text.as_bytes())
}
