//! Run reports: named CSV tables plus the digest and seed of the config
//! that produced them, in a canonical JSON form.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::scenario::SystemConfig;

pub const SCHEMA_VERSION: u32 = 1;

/// Canonical JSON: object keys sorted, no whitespace, floats with 17
/// significant digits in exponent form, integers verbatim.
pub fn canonical_json(v: &Value) -> Result<String> {
    let mut out = String::new();
    write_value(v, &mut out)?;
    Ok(out)
}

fn write_value(v: &Value, out: &mut String) -> Result<()> {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                out.push_str(&i.to_string());
            } else if let Some(u) = n.as_u64() {
                out.push_str(&u.to_string());
            } else {
                let f = n.as_f64().ok_or_else(|| Error::Report(format!("unrepresentable number {n}")))?;
                if !f.is_finite() {
                    return Err(Error::Report("non-finite number".into()));
                }
                out.push_str(&format!("{f:.16e}"));
            }
        }
        Value::String(s) => out.push_str(&serde_json::to_string(s).map_err(|e| Error::Report(e.to_string()))?),
        Value::Array(a) => {
            out.push('[');
            for (i, x) in a.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_value(x, out)?;
            }
            out.push(']');
        }
        Value::Object(m) => {
            let mut keys: Vec<&String> = m.keys().collect();
            keys.sort();
            out.push('{');
            for (i, k) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&serde_json::to_string(k).map_err(|e| Error::Report(e.to_string()))?);
                out.push(':');
                write_value(&m[k], out)?;
            }
            out.push('}');
        }
    }
    Ok(())
}

pub fn to_canonical<T: Serialize>(x: &T) -> Result<String> {
    canonical_json(&serde_json::to_value(x).map_err(|e| Error::Report(e.to_string()))?)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// SHA-256 of the canonical config. The seed is part of the config, so a
/// different seed gives a different digest.
pub fn config_digest(cfg: &SystemConfig) -> Result<String> {
    Ok(sha256_hex(to_canonical(cfg)?.as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub schema_version: u32,
    pub csv: String,
}

/// Output of one experiment run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub experiment: String,
    pub config_digest: String,
    pub seed: u64,
    pub tables: Vec<Table>,
    /// Omitted unless timing was requested, which keeps output reproducible.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub experiment: String,
    pub config_digest: String,
    pub seed: u64,
    pub version: String,
    pub tables: Vec<Table>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time: Option<f64>,
}

impl MetricReport {
    pub fn to_json(&self) -> Result<String> {
        to_canonical(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Report(e.to_string()))
    }

    pub fn digest(&self) -> Result<String> {
        Ok(sha256_hex(self.to_json()?.as_bytes()))
    }
}

/// Merges results from one (config, seed) into a single report. Tables keep
/// their input order; wall time is summed when every input carries one.
pub fn build_report(experiment: &str, results: &[ExperimentResult]) -> Result<MetricReport> {
    let first = results.first().ok_or_else(|| Error::Report("no results to report".into()))?;
    if let Some(bad) = results.iter().find(|r| r.config_digest != first.config_digest || r.seed != first.seed) {
        return Err(Error::Report(format!(
            "mixed provenance: {} ({}, seed {}) vs {} ({}, seed {})",
            first.experiment, first.config_digest, first.seed, bad.experiment, bad.config_digest, bad.seed
        )));
    }
    let wall_time = results.iter().map(|r| r.wall_time).sum::<Option<f64>>();
    Ok(MetricReport {
        experiment: experiment.to_string(),
        config_digest: first.config_digest.clone(),
        seed: first.seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        tables: results.iter().flat_map(|r| r.tables.iter().cloned()).collect(),
        wall_time,
    })
}

/// Minimal CSV writer. Fields never contain separators, so no quoting.
#[derive(Debug, Clone, Default)]
pub struct Csv {
    buf: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut c = Csv::default();
        c.buf.push_str(&header.join(","));
        c.buf.push('\n');
        c
    }

    pub fn row(&mut self, fields: &[String]) {
        self.buf.push_str(&fields.join(","));
        self.buf.push('\n');
    }

    pub fn finish(self) -> String {
        self.buf
    }
}

/// Shortest round-trip decimal form, independent of locale.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn result(seed: u64) -> ExperimentResult {
        let cfg = SystemConfig { seed, ..Default::default() };
        ExperimentResult {
            experiment: "associate".into(),
            config_digest: config_digest(&cfg).unwrap(),
            seed,
            tables: vec![Table { name: "associate_sua".into(), schema_version: SCHEMA_VERSION, csv: "a,b\n1,2\n".into() }],
            wall_time: None,
        }
    }

    #[test]
    fn canonical_form() {
        let v = json!({"b": 1, "a": [0.1, -2, true, null], "c": {"z": "q\"", "y": 1e-300}});
        assert_eq!(
            canonical_json(&v).unwrap(),
            r#"{"a":[1.0000000000000001e-1,-2,true,null],"b":1,"c":{"y":1.0000000000000000e-300,"z":"q\""}}"#
        );
    }

    #[test]
    fn digest_tracks_seed() {
        let a = config_digest(&SystemConfig::default()).unwrap();
        let b = config_digest(&SystemConfig::default()).unwrap();
        let c = config_digest(&SystemConfig { seed: 2, ..Default::default() }).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.len(), 64);
    }

    #[test]
    fn build_rejects_empty_and_mixed() {
        assert!(build_report("x", &[]).is_err());
        assert!(build_report("x", &[result(1), result(2)]).is_err());
        let r = build_report("x", &[result(1), result(1)]).unwrap();
        assert_eq!(r.tables.len(), 2);
        assert_eq!(r.wall_time, None);
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let r = build_report("x", &[result(7)]).unwrap();
        let s = r.to_json().unwrap();
        let back = MetricReport::from_json(&s).unwrap();
        assert_eq!(back.to_json().unwrap(), s);
        assert_eq!(back, r);
    }
}
