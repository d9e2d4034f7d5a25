//! Serialization helpers and the run manifest.
//!
//! All numeric output is written with 17 significant digits
//! (`{:.16e}`), enough to round-trip f64 exactly, so byte-identical
//! reruns are checkable.

use crate::error::Result;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::io::Write;
use std::path::Path;

/// Format a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".to_string()
    } else if v > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

struct SigDigitFormatter;

impl serde_json::ser::Formatter for SigDigitFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        if value.is_finite() {
            write!(writer, "{value:.16e}")
        } else {
            // JSON has no literal for non-finite values
            write!(writer, "null")
        }
    }

    fn write_f32<W>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        self.write_f64(writer, value as f64)
    }
}

/// Serialize to JSON with floats at 17 significant digits.
pub fn to_json_17<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SigDigitFormatter);
    value
        .serialize(&mut ser)
        .map_err(|e| crate::error::Error::InvalidArgument(format!("serialization: {e}")))?;
    Ok(String::from_utf8(buf).expect("json is utf8"))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    let out = h.finalize();
    out.iter().map(|b| format!("{b:02x}")).collect()
}

/// Provenance record written next to every command's outputs.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub config_hash: String,
    pub created_at: String,
    pub config: serde_json::Value,
    pub outputs: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, config_text: &str, config: serde_json::Value) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config_hash: sha256_hex(config_text.as_bytes()),
            created_at: chrono::Utc::now().to_rfc3339(),
            config,
            outputs: Vec::new(),
            failures: Vec::new(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let text = to_json_17(self)?;
        let mut f = std::fs::File::create(dir.join("manifest.json"))?;
        f.write_all(text.as_bytes())?;
        f.write_all(b"\n")?;
        Ok(())
    }
}

/// Write an observable series as CSV.
pub fn write_series_csv(path: &Path, series: &crate::observables::ObservableSeries) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(
        f,
        "time,e_qub,e_total,s_q,s_c,n_phot,top_fock_pop,e_total_drive"
    )?;
    for k in 0..series.times.len() {
        writeln!(
            f,
            "{},{},{},{},{},{},{},{}",
            fmt_f64(series.times[k]),
            fmt_f64(series.e_qub[k]),
            fmt_f64(series.e_total[k]),
            fmt_f64(series.s_q[k]),
            fmt_f64(series.s_c[k]),
            fmt_f64(series.n_phot[k]),
            fmt_f64(series.top_fock_pop[k]),
            fmt_f64(series.e_total_drive[k]),
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_formatting_has_17_digits_and_round_trips() {
        let v = std::f64::consts::PI;
        let s = fmt_f64(v);
        assert_eq!(s, "3.1415926535897931e0");
        assert_eq!(s.parse::<f64>().unwrap(), v);
        let tiny = 1.2345678901234567e-300;
        assert_eq!(fmt_f64(tiny).parse::<f64>().unwrap(), tiny);
    }

    #[test]
    fn json_floats_use_fixed_format() {
        #[derive(Serialize)]
        struct S {
            x: f64,
        }
        let s = to_json_17(&S { x: 0.1 }).unwrap();
        assert_eq!(s, "{\"x\":1.0000000000000001e-1}");
    }

    #[test]
    fn hash_is_stable() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
