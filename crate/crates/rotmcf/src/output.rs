//! Output files: CSV tables with a header row, JSON with sorted keys, and a
//! manifest listing every file with its SHA-256. Wall-clock times go to a
//! separate `timing.json` so that everything else is reproducible byte for
//! byte.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::CliError;

pub const MANIFEST: &str = "manifest.json";
pub const TIMING: &str = "timing.json";

/// Formats a float for CSV in shortest round-trip form, switching to
/// exponent notation for very small or large magnitudes.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && !(1e-4..1e15).contains(&a) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// JSON number, or `null` for non-finite values.
pub fn jnum(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Pretty JSON with object keys sorted at every level and a final newline.
pub fn to_json_text(v: &Value) -> String {
    fn sorted(v: &Value) -> Value {
        match v {
            Value::Object(m) => {
                let b: BTreeMap<&String, Value> = m.iter().map(|(k, v)| (k, sorted(v))).collect();
                Value::Object(b.into_iter().map(|(k, v)| (k.clone(), v)).collect())
            }
            Value::Array(a) => Value::Array(a.iter().map(sorted).collect()),
            other => other.clone(),
        }
    }
    let mut s = serde_json::to_string_pretty(&sorted(v)).expect("JSON values always serialize");
    s.push('\n');
    s
}

#[derive(Debug)]
struct Written {
    sha256: String,
    bytes: usize,
    rows: Option<usize>,
}

/// An output directory that remembers what was written to it.
#[derive(Debug)]
pub struct Outputs {
    dir: PathBuf,
    files: BTreeMap<String, Written>,
    started: Instant,
    stages: Vec<(String, f64)>,
}

impl Outputs {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self { dir: dir.to_path_buf(), files: BTreeMap::new(), started: Instant::now(), stages: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn write(&mut self, name: &str, bytes: &[u8], rows: Option<usize>) -> Result<(), CliError> {
        let p = self.path(name);
        std::fs::write(&p, bytes).map_err(|e| CliError::io(&p, e))?;
        self.files.insert(name.to_string(), Written { sha256: sha256_hex(bytes), bytes: bytes.len(), rows });
        Ok(())
    }

    /// Writes a CSV table with `\n` line endings.
    pub fn csv<I>(&mut self, name: &str, header: &[&str], rows: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let io = |e: csv::Error| CliError::io(&self.dir.join(name), std::io::Error::other(e));
        w.write_record(header).map_err(io)?;
        let mut count = 0;
        for r in rows {
            debug_assert_eq!(r.len(), header.len());
            w.write_record(&r).map_err(io)?;
            count += 1;
        }
        let bytes =
            w.into_inner().map_err(|e| CliError::io(&self.dir.join(name), std::io::Error::other(e.to_string())))?;
        self.write(name, &bytes, Some(count))
    }

    pub fn json(&mut self, name: &str, v: &Value) -> Result<(), CliError> {
        self.write(name, to_json_text(v).as_bytes(), None)
    }

    pub fn text(&mut self, name: &str, s: &str) -> Result<(), CliError> {
        self.write(name, s.as_bytes(), None)
    }

    /// Records the wall time since the previous stage (or the start).
    pub fn stage(&mut self, name: &str) {
        let total = self.started.elapsed().as_secs_f64();
        let before: f64 = self.stages.iter().map(|s| s.1).sum();
        self.stages.push((name.to_string(), total - before));
    }

    /// Writes `manifest.json` (deterministic) and `timing.json`.
    pub fn finish(mut self, command: &str, config: &ExperimentConfig, summary: Value) -> Result<PathBuf, CliError> {
        let files: BTreeMap<&String, Value> = self
            .files
            .iter()
            .map(|(k, w)| {
                let mut v = json!({ "sha256": w.sha256, "bytes": w.bytes });
                if let Some(r) = w.rows {
                    v["rows"] = json!(r);
                }
                (k, v)
            })
            .collect();
        let cfg: BTreeMap<&str, String> =
            config.entries().into_iter().filter(|(k, _)| *k != "output_dir" && *k != "workers").collect();
        let manifest = json!({
            "command": command,
            "config": cfg,
            "config_hash": config.hash(),
            "files": files,
            "summary": summary,
            "versions": {
                "rotmcf": env!("CARGO_PKG_VERSION"),
                "rotmcf-core": rotmcf_core::VERSION,
            },
        });
        let timing = json!({
            "command": command,
            "stages": self.stages.iter().map(|(k, v)| json!({ "stage": k, "seconds": v })).collect::<Vec<_>>(),
            "total_seconds": self.started.elapsed().as_secs_f64(),
        });
        let m = to_json_text(&manifest);
        let p = self.path(MANIFEST);
        std::fs::write(&p, m).map_err(|e| CliError::io(&p, e))?;
        let t = to_json_text(&timing);
        let q = self.path(TIMING);
        std::fs::write(&q, t).map_err(|e| CliError::io(&q, e))?;
        self.files.clear();
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keys_come_out_sorted_at_every_level() {
        let v = json!({ "b": 1, "a": { "z": 2, "y": [ { "d": 1, "c": 2 } ] } });
        let s = to_json_text(&v);
        let pos = |k: &str| s.find(k).unwrap();
        assert!(pos("\"a\"") < pos("\"b\""));
        assert!(pos("\"y\"") < pos("\"z\""));
        assert!(pos("\"c\"") < pos("\"d\""));
        assert!(s.ends_with("}\n"));
    }

    #[test]
    fn csv_has_header_and_unix_newlines() {
        let d = tempfile::tempdir().unwrap();
        let mut o = Outputs::create(d.path()).unwrap();
        o.csv("t.csv", &["a", "b"], vec![vec![num(0.1), opt(None)], vec![num(1e-20), num(2.0)]]).unwrap();
        let s = std::fs::read_to_string(d.path().join("t.csv")).unwrap();
        assert_eq!(s, "a,b\n0.1,\n1e-20,2\n");
        let m = o.finish("test", &ExperimentConfig::default(), json!({})).unwrap();
        let v: Value = serde_json::from_str(&std::fs::read_to_string(m).unwrap()).unwrap();
        assert_eq!(v["files"]["t.csv"]["rows"], 2);
        assert!(d.path().join(TIMING).exists());
    }

    #[test]
    fn non_finite_numbers_become_null() {
        assert_eq!(jnum(f64::NAN), Value::Null);
        assert_eq!(jnum(1.5), json!(1.5));
    }
}
