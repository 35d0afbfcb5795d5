//! Experiment output files, each written to a temporary name and renamed.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use qrefrig_core::experiments::{fmt_f64, to_csv, to_jsonl, RunOutput};

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_path: Option<String>,
    pub seed: u64,
    pub out_dir: String,
    pub tool_version: String,
    pub duration_seconds: f64,
    /// The configuration actually consumed, defaults filled in.
    pub config: Value,
}

fn write_atomic(dir: &Path, name: &str, contents: &str) -> io::Result<()> {
    let tmp = dir.join(format!(".{name}.tmp"));
    let mut f = fs::File::create(&tmp)?;
    f.write_all(contents.as_bytes())?;
    f.sync_all()?;
    fs::rename(&tmp, dir.join(name))
}

/// `name,value` rows for the scalar entries of the summary.
fn scalars_csv(out: &RunOutput) -> String {
    let mut s = String::from("name,value\n");
    for (k, v) in &out.summary {
        let cell = match v {
            Value::Number(n) => match n.as_i64() {
                Some(i) => i.to_string(),
                None => fmt_f64(n.as_f64().unwrap_or(f64::NAN)),
            },
            Value::Bool(b) => b.to_string(),
            _ => continue,
        };
        s.push_str(&format!("{k},{cell}\n"));
    }
    s
}

pub fn write_run(dir: &Path, out: &RunOutput, manifest: &RunManifest) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    write_atomic(dir, "trace.jsonl", &to_jsonl(&out.records))?;
    write_atomic(dir, "summary.csv", &to_csv(&out.records))?;
    if let Some(b) = &out.baseline {
        write_atomic(dir, "baseline.jsonl", &to_jsonl(b))?;
        write_atomic(dir, "baseline.csv", &to_csv(b))?;
    }
    write_atomic(dir, "scalars.csv", &scalars_csv(out))?;
    let summary = json!({ "passed": out.all_passed(), "checks": out.checks, "summary": out.summary });
    write_atomic(dir, "summary.json", &(serde_json::to_string_pretty(&summary).expect("serializable") + "\n"))?;
    write_atomic(dir, "manifest.json", &(serde_json::to_string_pretty(manifest).expect("serializable") + "\n"))
}
