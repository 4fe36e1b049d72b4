//! Line-oriented text format shared by kernels, correlation functions and
//! heterodyne records:
//!
//! ```text
//! # memmon <kind> v1
//! # key = value
//! ...
//! 0, <re>, <im>
//! 1, <re>, <im>
//! ```
//!
//! Floats are written in shortest round-trip exponent form, so reading a file
//! back yields bit-identical values.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::hilbert::C64;

pub(crate) const MAGIC: &str = "memmon";
pub(crate) const VERSION: &str = "v1";

pub(crate) fn fmt_f64(x: f64) -> String {
    format!("{x:e}")
}

pub(crate) struct Document {
    pub kind: String,
    pub header: BTreeMap<String, String>,
    /// (first column, complex payload) for every data row.
    pub rows: Vec<(i64, C64)>,
}

pub(crate) fn render(kind: &str, header: &[(&str, String)], first_index: i64, values: &[C64]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# {MAGIC} {kind} {VERSION}");
    for (k, v) in header {
        let _ = writeln!(out, "# {k} = {v}");
    }
    for (i, z) in values.iter().enumerate() {
        let _ = writeln!(out, "{}, {}, {}", first_index + i as i64, fmt_f64(z.re), fmt_f64(z.im));
    }
    out
}

fn parse_error(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        location: format!("line {line}"),
        message: message.into(),
    }
}

pub(crate) fn parse(text: &str, expected_kind: &str) -> Result<Document> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let (lineno, first) = lines.next().ok_or_else(|| parse_error(1, "empty input"))?;
    let parts: Vec<&str> = first.trim_start_matches('#').split_whitespace().collect();
    if !first.starts_with('#') || parts.len() != 3 || parts[0] != MAGIC || parts[2] != VERSION {
        return Err(parse_error(
            lineno,
            format!("expected header `# {MAGIC} {expected_kind} {VERSION}`"),
        ));
    }
    if parts[1] != expected_kind {
        return Err(parse_error(
            lineno,
            format!("file holds a `{}`, expected `{expected_kind}`", parts[1]),
        ));
    }
    let mut header = BTreeMap::new();
    let mut rows = Vec::new();
    for (lineno, line) in lines {
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if !rows.is_empty() {
                return Err(parse_error(lineno, "header line after data rows"));
            }
            let (k, v) = rest
                .split_once('=')
                .ok_or_else(|| parse_error(lineno, "header lines must read `# key = value`"))?;
            if header.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
                return Err(parse_error(lineno, format!("duplicate header key `{}`", k.trim())));
            }
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 3 {
            return Err(parse_error(lineno, format!("expected 3 columns, found {}", cols.len())));
        }
        let idx: i64 = cols[0]
            .parse()
            .map_err(|_| parse_error(lineno, format!("bad index `{}`", cols[0])))?;
        let re: f64 = cols[1]
            .parse()
            .map_err(|_| parse_error(lineno, format!("bad real part `{}`", cols[1])))?;
        let im: f64 = cols[2]
            .parse()
            .map_err(|_| parse_error(lineno, format!("bad imaginary part `{}`", cols[2])))?;
        rows.push((idx, C64::new(re, im)));
    }
    Ok(Document {
        kind: expected_kind.to_string(),
        header,
        rows,
    })
}

impl Document {
    pub fn get<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.header.get(key).ok_or_else(|| Error::Parse {
            location: "header".into(),
            message: format!("missing `{key}` in {} header", self.kind),
        })?;
        raw.parse().map_err(|_| Error::Parse {
            location: "header".into(),
            message: format!("cannot parse `{key} = {raw}`"),
        })
    }

    pub fn get_str(&self, key: &str) -> Result<&str> {
        self.header.get(key).map(String::as_str).ok_or_else(|| Error::Parse {
            location: "header".into(),
            message: format!("missing `{key}` in {} header", self.kind),
        })
    }

    /// Data values, checking the index column runs `first, first+1, ...` and
    /// the row count equals `expected`.
    pub fn values(&self, first: i64, expected: usize) -> Result<Vec<C64>> {
        if self.rows.len() != expected {
            return Err(Error::Parse {
                location: "body".into(),
                message: format!("header announces {expected} rows, found {}", self.rows.len()),
            });
        }
        self.rows
            .iter()
            .enumerate()
            .map(|(i, &(idx, z))| {
                if idx != first + i as i64 {
                    Err(Error::Parse {
                        location: format!("row {}", i + 1),
                        message: format!("index {idx} out of sequence, expected {}", first + i as i64),
                    })
                } else {
                    Ok(z)
                }
            })
            .collect()
    }
}
