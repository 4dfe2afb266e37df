//! Metadata headers and manifests shared by the commands.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use vmspod::{Error, RunConfig};

fn problem_name(cfg: &RunConfig) -> String {
    match serde_json::to_value(cfg.problem) {
        Ok(Value::String(s)) => s,
        _ => format!("{:?}", cfg.problem),
    }
}

pub fn hex(v: u64) -> String {
    format!("{v:016x}")
}

/// `# key=value` pairs every CSV carries.
pub fn metadata(cfg: &RunConfig, command: &str, fingerprint: u64) -> Vec<(String, String)> {
    vec![
        ("command".into(), command.into()),
        ("config_hash".into(), cfg.hash_hex()),
        ("space_fingerprint".into(), hex(fingerprint)),
        ("problem".into(), problem_name(cfg)),
        ("nu".into(), cfg.nu.to_string()),
        ("nu_t".into(), cfg.nu_t.to_string()),
        ("R".into(), cfg.cutoff.to_string()),
    ]
}

/// Side-car JSON naming the config hash, inputs and outputs of a command
/// whose main artifact is binary.
pub fn write_manifest(
    cfg: &RunConfig,
    command: &str,
    fingerprint: u64,
    inputs: Value,
    outputs: &[&Path],
) -> Result<PathBuf, Error> {
    let names: Vec<String> = outputs
        .iter()
        .map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default())
        .collect();
    let doc = json!({
        "command": command,
        "config_hash": cfg.hash_hex(),
        "space_fingerprint": hex(fingerprint),
        "inputs": inputs,
        "outputs": names,
        "config": serde_json::to_value(cfg).expect("configuration serializes"),
    });
    let path = cfg.out.join(format!("{command}_manifest.json"));
    fs::write(&path, serde_json::to_string_pretty(&doc).expect("manifest serializes") + "\n")?;
    Ok(path)
}

pub fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}
