//! Result files: CSV tables and JSON documents, each stamped with the hash of
//! the configuration that produced it and the random seed.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_sha256: String,
    pub seed: u64,
}

impl Provenance {
    /// Hash of the compact serialization of `config`. Object keys serialize
    /// in sorted order, so equal configurations hash equally.
    pub fn new(config: &serde_json::Value, seed: u64) -> Self {
        let digest = Sha256::digest(config.to_string().as_bytes());
        let config_sha256 = digest.iter().map(|b| format!("{b:02x}")).collect();
        Provenance {
            config_sha256,
            seed,
        }
    }

    pub fn comment_line(&self) -> String {
        format!("# config_sha256={}, seed={}", self.config_sha256, self.seed)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

pub fn csv_string(table: &Table, prov: &Provenance) -> Result<String> {
    let mut out = prov.comment_line().into_bytes();
    out.push(b'\n');
    let mut w = csv::Writer::from_writer(out);
    let io_err = |e: csv::Error| Error::Io {
        path: "<csv>".into(),
        message: e.to_string(),
    };
    w.write_record(&table.header).map_err(io_err)?;
    for row in &table.rows {
        w.write_record(row).map_err(io_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io {
        path: "<csv>".into(),
        message: e.to_string(),
    })?;
    String::from_utf8(bytes).map_err(|e| Error::Io {
        path: "<csv>".into(),
        message: e.to_string(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope<T> {
    #[serde(flatten)]
    pub provenance: Provenance,
    pub result: T,
}

pub fn json_string<T: Serialize>(value: &T, prov: &Provenance) -> Result<String> {
    let env = Envelope {
        provenance: prov.clone(),
        result: value,
    };
    let mut s = serde_json::to_string_pretty(&env)
        .map_err(|e| Error::numerical(format!("serializing result: {e}")))?;
    s.push('\n');
    Ok(s)
}

/// Writes `text` to `path`, or to standard output when `path` is `None`.
pub fn write_text(text: &str, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Error::Io {
            path: p.display().to_string(),
            message: e.to_string(),
        }),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| Error::Io {
                    path: "<stdout>".into(),
                    message: e.to_string(),
                })
        }
    }
}

pub fn emit_csv(table: &Table, prov: &Provenance, path: Option<&Path>) -> Result<()> {
    write_text(&csv_string(table, prov)?, path)
}

pub fn emit_json<T: Serialize>(value: &T, prov: &Provenance, path: Option<&Path>) -> Result<()> {
    write_text(&json_string(value, prov)?, path)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    serde_json::from_str(&text).map_err(|e| Error::Validation(format!("{}: {e}", path.display())))
}

/// Reads a result written by [`emit_json`], or the bare result value.
pub fn read_result<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let v: serde_json::Value = read_json(path)?;
    let inner = match v {
        serde_json::Value::Object(mut o)
            if o.contains_key("config_sha256") && o.contains_key("result") =>
        {
            o.remove("result").expect("checked")
        }
        other => other,
    };
    serde_json::from_value(inner).map_err(|e| Error::Validation(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_table_is_header_only() {
        let prov = Provenance::new(&serde_json::json!({"a": 1}), 7);
        let s = csv_string(&Table::new(&["x", "y"]), &prov).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].starts_with("# config_sha256=") && lines[0].ends_with("seed=7"));
        assert_eq!(lines[1], "x,y");
        assert!(s.ends_with('\n'));
    }

    #[test]
    fn hash_ignores_key_order() {
        let a = serde_json::json!({"a": 1, "b": [1.5, 2]});
        let b: serde_json::Value = serde_json::from_str(r#"{"b": [1.5, 2], "a": 1}"#).unwrap();
        assert_eq!(Provenance::new(&a, 0), Provenance::new(&b, 0));
        assert_eq!(Provenance::new(&a, 0).config_sha256.len(), 64);
    }

    #[test]
    fn envelope_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.json");
        let prov = Provenance::new(&serde_json::json!({}), 3);
        emit_json(&vec![1.25, -0.5], &prov, Some(&p)).unwrap();
        let back: Vec<f64> = read_result(&p).unwrap();
        assert_eq!(back, vec![1.25, -0.5]);
        let bare = dir.path().join("bare.json");
        fs::write(&bare, "[2.0]").unwrap();
        assert_eq!(read_result::<Vec<f64>>(&bare).unwrap(), vec![2.0]);
    }

    #[test]
    fn missing_file_names_path() {
        let err = read_json::<Vec<f64>>(Path::new("/nonexistent/x.json")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/x.json"));
    }
}
