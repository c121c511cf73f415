//! Trace, point-set, and payload file formats, plus the run manifest.
//!
//! Formats are deliberately minimal and deterministic:
//!
//! * Trace CSV: header `time_s,current_uA`, one `time,value` row per
//!   sample. Normalized traces use `time_s,normalized`.
//! * Equilibrium point CSV: header `concentration_M,delta_i_uA`.
//! * Decision-sample CSV: header `index,time_s,current_uA`.
//! * Payloads: a single line of `0`/`1` characters.
//!
//! Everything is UTF-8 with LF line endings. Floats are written with
//! Rust's shortest round-trip formatting, so writing and re-reading a file
//! reproduces bit-identical values, and re-running a seeded experiment
//! reproduces byte-identical files. Parse errors always name the file and
//! the 1-based line.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::kinetics::SensingPoint;

pub const TRACE_HEADER: &str = "time_s,current_uA";
pub const NORMALIZED_HEADER: &str = "time_s,normalized";
pub const POINTS_HEADER: &str = "concentration_M,delta_i_uA";
pub const DECISIONS_HEADER: &str = "index,time_s,current_uA";

/// File reading, writing, or parsing failure; messages name the file and,
/// for parse problems, the line.
#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {problem}")]
    Parse {
        path: String,
        line: usize,
        problem: String,
    },
}

fn io_err(path: &Path, source: std::io::Error) -> IoError {
    IoError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn parse_err(path: &Path, line: usize, problem: impl Into<String>) -> IoError {
    IoError::Parse {
        path: path.display().to_string(),
        line,
        problem: problem.into(),
    }
}

fn write_two_column(
    path: &Path,
    header: &str,
    xs: &[f64],
    ys: &[f64],
) -> Result<(), IoError> {
    assert_eq!(xs.len(), ys.len(), "column lengths must match");
    let mut out = String::with_capacity(24 * xs.len() + header.len() + 1);
    out.push_str(header);
    out.push('\n');
    for (x, y) in xs.iter().zip(ys) {
        let _ = writeln!(out, "{x},{y}");
    }
    std::fs::write(path, out).map_err(|e| io_err(path, e))
}

fn read_two_column(path: &Path, header: &str) -> Result<(Vec<f64>, Vec<f64>), IoError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut lines = text.lines().enumerate();
    let Some((_, first)) = lines.next() else {
        return Err(parse_err(path, 1, format!("empty file; expected header `{header}`")));
    };
    if first.trim_end_matches('\r') != header {
        return Err(parse_err(
            path,
            1,
            format!("expected header `{header}`, found `{first}`"),
        ));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, raw) in lines {
        let line = raw.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let (Some(a), Some(b), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(parse_err(path, i + 1, "expected exactly 2 comma-separated fields"));
        };
        let x: f64 = a
            .trim()
            .parse()
            .map_err(|_| parse_err(path, i + 1, format!("cannot parse `{a}` as a number")))?;
        let y: f64 = b
            .trim()
            .parse()
            .map_err(|_| parse_err(path, i + 1, format!("cannot parse `{b}` as a number")))?;
        xs.push(x);
        ys.push(y);
    }
    if xs.is_empty() {
        return Err(parse_err(path, 2, "no data rows"));
    }
    Ok((xs, ys))
}

/// Write a current trace (`time_s,current_uA`).
pub fn write_trace_csv(
    path: impl AsRef<Path>,
    times_s: &[f64],
    current_ua: &[f64],
) -> Result<(), IoError> {
    write_two_column(path.as_ref(), TRACE_HEADER, times_s, current_ua)
}

/// Read a current trace (`time_s,current_uA`) as `(times, currents)`.
pub fn read_trace_csv(path: impl AsRef<Path>) -> Result<(Vec<f64>, Vec<f64>), IoError> {
    read_two_column(path.as_ref(), TRACE_HEADER)
}

/// Write a normalized trace (`time_s,normalized`).
pub fn write_normalized_csv(
    path: impl AsRef<Path>,
    times_s: &[f64],
    normalized: &[f64],
) -> Result<(), IoError> {
    write_two_column(path.as_ref(), NORMALIZED_HEADER, times_s, normalized)
}

/// Read a normalized trace (`time_s,normalized`) as `(times, values)`.
pub fn read_normalized_csv(path: impl AsRef<Path>) -> Result<(Vec<f64>, Vec<f64>), IoError> {
    read_two_column(path.as_ref(), NORMALIZED_HEADER)
}

/// Read a trace that may carry either the current header or the normalized
/// header; returns the header that matched along with the columns.
pub fn read_any_trace_csv(
    path: impl AsRef<Path>,
) -> Result<(&'static str, Vec<f64>, Vec<f64>), IoError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let first = text.lines().next().unwrap_or("").trim_end_matches('\r');
    let header = if first == TRACE_HEADER {
        TRACE_HEADER
    } else if first == NORMALIZED_HEADER {
        NORMALIZED_HEADER
    } else {
        return Err(parse_err(
            path,
            1,
            format!("expected header `{TRACE_HEADER}` or `{NORMALIZED_HEADER}`, found `{first}`"),
        ));
    };
    let (xs, ys) = read_two_column(path, header)?;
    Ok((header, xs, ys))
}

/// Write equilibrium sensing points (`concentration_M,delta_i_uA`).
pub fn write_points_csv(
    path: impl AsRef<Path>,
    points: &[SensingPoint],
) -> Result<(), IoError> {
    let (cs, dis): (Vec<f64>, Vec<f64>) = points
        .iter()
        .map(|p| (p.concentration_molar, p.delta_i_ua))
        .unzip();
    write_two_column(path.as_ref(), POINTS_HEADER, &cs, &dis)
}

/// Read equilibrium sensing points (`concentration_M,delta_i_uA`).
pub fn read_points_csv(path: impl AsRef<Path>) -> Result<Vec<SensingPoint>, IoError> {
    let (cs, dis) = read_two_column(path.as_ref(), POINTS_HEADER)?;
    Ok(cs
        .into_iter()
        .zip(dis)
        .map(|(concentration_molar, delta_i_ua)| SensingPoint {
            concentration_molar,
            delta_i_ua,
        })
        .collect())
}

/// Write decision samples (`index,time_s,current_uA`).
pub fn write_decisions_csv(
    path: impl AsRef<Path>,
    times_s: &[f64],
    current_ua: &[f64],
) -> Result<(), IoError> {
    assert_eq!(times_s.len(), current_ua.len(), "column lengths must match");
    let path = path.as_ref();
    let mut out = String::new();
    out.push_str(DECISIONS_HEADER);
    out.push('\n');
    for (i, (t, r)) in times_s.iter().zip(current_ua).enumerate() {
        let _ = writeln!(out, "{i},{t},{r}");
    }
    std::fs::write(path, out).map_err(|e| io_err(path, e))
}

/// Write a payload as a single `0`/`1` line.
pub fn write_bits_file(path: impl AsRef<Path>, bits: &[u8]) -> Result<(), IoError> {
    let path = path.as_ref();
    let mut out = String::with_capacity(bits.len() + 1);
    for &b in bits {
        out.push(if b == 0 { '0' } else { '1' });
    }
    out.push('\n');
    std::fs::write(path, out).map_err(|e| io_err(path, e))
}

/// Read a single-line `0`/`1` payload file.
pub fn read_bits_file(path: impl AsRef<Path>) -> Result<Vec<u8>, IoError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let line = text.trim();
    if line.is_empty() {
        return Err(parse_err(path, 1, "empty payload file"));
    }
    line.chars()
        .map(|ch| match ch {
            '0' => Ok(0),
            '1' => Ok(1),
            other => Err(parse_err(
                path,
                1,
                format!("payload may contain only '0' and '1', found {other:?}"),
            )),
        })
        .collect()
}

/// Hex-encoded SHA-256 of a byte string; used to fingerprint configs in
/// manifests.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for byte in digest {
        let _ = write!(out, "{byte:02x}");
    }
    out
}

/// Record of one simulation run: enough to reproduce it and to check that
/// a reproduction really is byte-identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    /// Version of the tool that produced the run.
    pub tool_version: String,
    /// SHA-256 of the exact config text the run used.
    pub config_sha256: String,
    /// Payload generator seed.
    #[serde(with = "hex_u64")]
    pub tx_seed: u64,
    /// Noise stream seed actually used.
    #[serde(with = "hex_u64")]
    pub noise_seed: u64,
    /// Files the run wrote, relative to the manifest.
    pub artifacts: Vec<String>,
}

/// Seeds ride in TOML as `0x`-prefixed hex strings: TOML integers are
/// signed 64-bit, which cannot carry the upper half of the u64 seed space.
mod hex_u64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &u64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{v:#018x}"))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        let text = String::deserialize(d)?;
        let digits = text
            .strip_prefix("0x")
            .ok_or_else(|| serde::de::Error::custom(format!("expected 0x-prefixed seed, got `{text}`")))?;
        u64::from_str_radix(digits, 16).map_err(serde::de::Error::custom)
    }
}

/// Write a manifest as TOML.
pub fn write_manifest(path: impl AsRef<Path>, manifest: &RunManifest) -> Result<(), IoError> {
    let path = path.as_ref();
    let text = toml::to_string_pretty(manifest)
        .map_err(|e| parse_err(path, 0, format!("manifest serialize error: {e}")))?;
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}
