//! Run manifests: one `manifest.json` per output directory, carrying the
//! resolved configuration and seed so any run can be reproduced.

use std::io;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

pub fn write_manifest(
    dir: &Path,
    subcommand: &str,
    seed: Option<u64>,
    threads: usize,
    args: Value,
) -> io::Result<PathBuf> {
    let manifest = json!({
        "subcommand": subcommand,
        "version": env!("CARGO_PKG_VERSION"),
        "seed": seed,
        "threads": threads,
        "timestamp_utc": chrono::Utc::now().to_rfc3339(),
        "args": args,
    });
    let path = dir.join("manifest.json");
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(path)
}
