//! Output directory handling: CSV tables and versioned JSON summaries.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::Config;

pub const SCHEMA_VERSION: u32 = 1;

/// Significant digits kept for every float in a JSON summary.
pub const JSON_DIGITS: usize = 12;

pub struct Output {
    pub dir: PathBuf,
    pub command: &'static str,
}

impl Output {
    pub fn create(dir: PathBuf, command: &'static str) -> Result<Self> {
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Output { dir, command })
    }

    pub fn path(&self, file: &str) -> PathBuf {
        self.dir.join(format!("{}_{file}", self.command))
    }

    pub fn csv<R: AsRef<[String]>>(&self, file: &str, header: &[&str], rows: impl IntoIterator<Item = R>) -> Result<PathBuf> {
        let path = self.path(file);
        let mut w = csv::Writer::from_path(&path).with_context(|| format!("creating {}", path.display()))?;
        w.write_record(header)?;
        for r in rows {
            w.write_record(r.as_ref())?;
        }
        w.flush()?;
        Ok(path)
    }

    /// Writes `<command>_summary.json` wrapping `result` with the schema
    /// version, the full configuration and the seed.
    pub fn summary(&self, cfg: &Config, seed: u64, pass: bool, result: Value) -> Result<PathBuf> {
        let doc = json!({
            "schema_version": SCHEMA_VERSION,
            "command": self.command,
            "seed": seed,
            "pass": pass,
            "config": cfg,
            "result": result,
        });
        let path = self.path("summary.json");
        let text = serde_json::to_string_pretty(&fixed_precision(doc))?;
        fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

pub fn to_value<T: Serialize>(v: &T) -> Result<Value> {
    Ok(serde_json::to_value(v)?)
}

fn round(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", JSON_DIGITS - 1, x).parse().unwrap_or(x)
}

/// Rounds every float in `v` to [`JSON_DIGITS`] significant digits.
pub fn fixed_precision(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => n.as_f64().map(|x| json!(round(x))).unwrap_or(Value::Number(n)),
        Value::Array(a) => Value::Array(a.into_iter().map(fixed_precision).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, fixed_precision(v))).collect()),
        other => other,
    }
}

/// `--out`, then `HYPREST_OUT`, then the config's `out` key.
pub fn resolve_dir(flag: Option<&Path>, cfg: &Config) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    match std::env::var_os("HYPREST_OUT") {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => PathBuf::from(cfg.out_dir()),
    }
}

/// Fixed-precision float for CSV cells.
pub fn num(x: f64) -> String {
    format!("{:.*e}", JSON_DIGITS - 1, x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_is_stable() {
        let v = fixed_precision(json!({"a": [0.1 + 0.2, 1.0 / 3.0], "b": 7, "c": "x"}));
        assert_eq!(v["a"][0], json!(0.3));
        assert_eq!(v["a"][1], json!(0.333333333333));
        assert_eq!(v["b"], json!(7));
        assert_eq!(fixed_precision(v.clone()), v);
    }
}
