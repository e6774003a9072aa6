use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;
use std::time::SystemTime;

use serde::Serialize;

use crate::config::{RunConfig, Value};

pub const SCHEMA_VERSION: &str = "1";

/// The JSON document written for every run.
#[derive(Serialize)]
pub struct Record<'a> {
    pub schema_version: &'static str,
    pub command: &'static str,
    pub config: &'a std::collections::BTreeMap<String, Value>,
    pub seed: u64,
    pub timestamp: String,
    pub passed: bool,
    pub result: &'a serde_json::Value,
}

impl<'a> Record<'a> {
    pub fn new(cfg: &'a RunConfig, result: &'a serde_json::Value, passed: bool) -> Self {
        Record {
            schema_version: SCHEMA_VERSION,
            command: cfg.command.name(),
            config: &cfg.values,
            seed: cfg.seed(),
            timestamp: humantime::format_rfc3339_seconds(SystemTime::now()).to_string(),
            passed,
            result,
        }
    }
}

/// A value as it would be written in a config file.
pub fn raw_value(v: &Value) -> String {
    match v {
        Value::Float(x) => format!("{x:?}"),
        Value::UInt(x) => x.to_string(),
        Value::Bool(x) => x.to_string(),
        Value::Text(s) => s.clone(),
        Value::Texts(items) => items.join(","),
        Value::FloatList(items) => items.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(","),
        Value::Manifold(m) => m.to_string(),
        Value::Scheme(s) => s.to_string(),
    }
}

/// `# hypokinetic <command>` followed by `# key = value` lines; readable by `--config`.
pub fn csv_header(cfg: &RunConfig) -> String {
    let mut out = format!("# hypokinetic {}\n", cfg.command);
    for (k, v) in &cfg.values {
        let _ = writeln!(out, "# {k} = {}", raw_value(v));
    }
    out
}

pub fn write_text(path: Option<&Path>, text: &str) -> std::io::Result<()> {
    match path {
        Some(p) => std::fs::write(p, text),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()
        }
    }
}

pub fn to_json(record: &Record) -> String {
    let mut s = serde_json::to_string_pretty(record).expect("records serialize");
    s.push('\n');
    s
}
