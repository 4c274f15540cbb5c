//! CSV tables and JSON sidecars.

use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::config::RunConfig;
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 9] = ["quantity", "epsilon", "delta", "n_min", "n_max", "value", "lo", "hi", "converged"];

/// One output row. Every row carries its truncation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResultRecord {
    pub quantity: String,
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    pub n_min: usize,
    pub n_max: usize,
    pub d_max: Option<usize>,
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
    pub converged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "serde_json::Value::is_null")]
    pub diagnostics: serde_json::Value,
    /// Whether `value`, `lo` and `hi` are entropies (rescaled by a display base).
    #[serde(skip)]
    pub entropy_valued: bool,
}

impl ResultRecord {
    pub fn new(quantity: &str, n_min: usize, n_max: usize) -> Self {
        ResultRecord {
            quantity: quantity.into(),
            epsilon: None,
            delta: None,
            n_min,
            n_max,
            d_max: None,
            value: f64::NAN,
            lo: f64::NAN,
            hi: f64::NAN,
            converged: false,
            error: None,
            diagnostics: serde_json::Value::Null,
            entropy_valued: true,
        }
    }

    pub fn epsilon(mut self, e: f64) -> Self {
        self.epsilon = Some(e);
        self
    }

    pub fn delta(mut self, d: f64) -> Self {
        self.delta = Some(d);
        self
    }

    pub fn d_max(mut self, d: usize) -> Self {
        self.d_max = Some(d);
        self
    }

    pub fn values(mut self, value: f64, lo: f64, hi: f64, converged: bool) -> Self {
        self.value = value;
        self.lo = lo;
        self.hi = hi;
        self.converged = converged;
        self
    }

    pub fn point(self, value: f64, converged: bool) -> Self {
        self.values(value, value, value, converged)
    }

    pub fn diagnostics<T: Serialize>(mut self, d: &T) -> Self {
        self.diagnostics = serde_json::to_value(d).unwrap_or(serde_json::Value::Null);
        self
    }

    pub fn not_entropy(mut self) -> Self {
        self.entropy_valued = false;
        self
    }

    pub fn rescaled(&self, base: Option<f64>) -> ResultRecord {
        let mut r = self.clone();
        if let (Some(b), true) = (base, r.entropy_valued) {
            let k = b.ln();
            r.value /= k;
            r.lo /= k;
            r.hi /= k;
        }
        r
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn csv_bytes(records: &[ResultRecord]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Config(format!("csv: {e}"));
    w.write_record(CSV_HEADER).map_err(io)?;
    for r in records {
        w.write_record([
            r.quantity.clone(),
            opt(r.epsilon),
            opt(r.delta),
            r.n_min.to_string(),
            r.n_max.to_string(),
            r.value.to_string(),
            r.lo.to_string(),
            r.hi.to_string(),
            r.converged.to_string(),
        ])
        .map_err(io)?;
    }
    w.into_inner().map_err(|e| Error::Config(format!("csv: {e}")))
}

/// SHA-256 of the canonical JSON form of the effective configuration.
pub fn config_hash(cfg: &RunConfig) -> String {
    let canonical = serde_json::to_vec(cfg).expect("config serializes");
    hex::encode(Sha256::digest(&canonical))
}

#[derive(Serialize)]
struct Provenance {
    config_hash: String,
    version: &'static str,
    timestamp_unix: u64,
}

#[derive(Serialize)]
struct Sidecar<'a> {
    command: &'a str,
    config: &'a RunConfig,
    records: &'a [ResultRecord],
    exit_code: i32,
    provenance: Provenance,
}

pub fn sidecar_bytes(command: &str, cfg: &RunConfig, records: &[ResultRecord], exit_code: i32) -> Vec<u8> {
    let timestamp_unix =
        std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let side = Sidecar {
        command,
        config: cfg,
        records,
        exit_code,
        provenance: Provenance { config_hash: config_hash(cfg), version: env!("CARGO_PKG_VERSION"), timestamp_unix },
    };
    let mut out = serde_json::to_vec_pretty(&side).expect("sidecar serializes");
    out.push(b'\n');
    out
}

/// Paths written by one run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Written {
    pub csv: Option<PathBuf>,
    pub json: Option<PathBuf>,
}

pub fn write_outputs(
    dir: &Path,
    stem: &str,
    command: &str,
    cfg: &RunConfig,
    records: &[ResultRecord],
    exit_code: i32,
) -> Result<Written> {
    let shown: Vec<ResultRecord> = records.iter().map(|r| r.rescaled(cfg.compute.display_base)).collect();
    let csv = csv_bytes(&shown)?;
    let io = |p: &Path, e: std::io::Error| Error::Config(format!("cannot write {}: {e}", p.display()));
    std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let mut written = Written::default();
    if cfg.output.csv {
        let p = dir.join(format!("{stem}.csv"));
        std::fs::write(&p, &csv).map_err(|e| io(&p, e))?;
        written.csv = Some(p);
    }
    if cfg.output.json {
        let p = dir.join(format!("{stem}.json"));
        std::fs::write(&p, sidecar_bytes(command, cfg, &shown, exit_code)).map_err(|e| io(&p, e))?;
        written.json = Some(p);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let r = ResultRecord::new("bowen_entropy", 50, 400).epsilon(0.1).d_max(12).values(1.25, 1.0, 1.5, true);
        let text = String::from_utf8(csv_bytes(std::slice::from_ref(&r)).unwrap()).unwrap();
        assert_eq!(text, "quantity,epsilon,delta,n_min,n_max,value,lo,hi,converged\nbowen_entropy,0.1,,50,400,1.25,1,1.5,true\n");
        let bits = r.rescaled(Some(2.0));
        assert!((bits.value - 1.25 / 2f64.ln()).abs() < 1e-15);
        assert_eq!(r.clone().not_entropy().rescaled(Some(2.0)).value, 1.25);
    }
}
