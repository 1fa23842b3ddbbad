//! Plain-text measure format.
//!
//! ```text
//! # comment
//! dim=<d> trunc_err=<e> [key=value ...]
//! k1 k2 ... kd weight
//! ```
//!
//! Weights are written with shortest round-trip formatting, so reading a written
//! file reproduces the measure bitwise.

use std::fmt::Write as _;

use super::{LatticePoint, SignedLatticeMeasure};
use crate::error::{Error, Result};

/// Parsed measure file: the measure plus any extra `key=value` header entries.
#[derive(Clone, Debug)]
pub struct MeasureFile {
    pub measure: SignedLatticeMeasure,
    pub extra: Vec<(String, String)>,
}

impl MeasureFile {
    pub fn extra_value(&self, key: &str) -> Option<&str> {
        self.extra
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }
}

pub fn format_measure(m: &SignedLatticeMeasure, extra: &[(&str, String)]) -> String {
    let mut s = String::new();
    write!(s, "dim={} trunc_err={:e}", m.dim(), m.trunc_err()).unwrap();
    for (k, v) in extra {
        write!(s, " {k}={v}").unwrap();
    }
    s.push('\n');
    for (p, w) in m.iter() {
        for c in p {
            write!(s, "{c} ").unwrap();
        }
        writeln!(s, "{w:e}").unwrap();
    }
    s
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

pub fn parse_measure(text: &str) -> Result<MeasureFile> {
    let mut header: Option<(usize, f64, Vec<(String, String)>)> = None;
    let mut atoms: Vec<(LatticePoint, f64)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match &header {
            None => {
                let mut dim = None;
                let mut err = None;
                let mut extra = Vec::new();
                for tok in line.split_whitespace() {
                    let (k, v) = tok
                        .split_once('=')
                        .ok_or_else(|| parse_err(lineno, format!("expected key=value, got {tok:?}")))?;
                    match k {
                        "dim" => {
                            dim = Some(
                                v.parse::<usize>()
                                    .map_err(|e| parse_err(lineno, format!("dim: {e}")))?,
                            )
                        }
                        "trunc_err" => {
                            err = Some(
                                v.parse::<f64>()
                                    .map_err(|e| parse_err(lineno, format!("trunc_err: {e}")))?,
                            )
                        }
                        _ => extra.push((k.to_string(), v.to_string())),
                    }
                }
                let dim = dim.filter(|d| *d >= 1).ok_or_else(|| parse_err(lineno, "missing dim"))?;
                let err = err.ok_or_else(|| parse_err(lineno, "missing trunc_err"))?;
                if !(err >= 0.0) {
                    return Err(parse_err(lineno, "trunc_err must be >= 0"));
                }
                header = Some((dim, err, extra));
            }
            Some((dim, _, _)) => {
                let toks: Vec<&str> = line.split_whitespace().collect();
                if toks.len() != dim + 1 {
                    return Err(parse_err(
                        lineno,
                        format!("expected {} fields, found {}", dim + 1, toks.len()),
                    ));
                }
                let coords = toks[..*dim]
                    .iter()
                    .map(|t| t.parse::<i64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|e| parse_err(lineno, format!("coordinate: {e}")))?;
                let w = toks[*dim]
                    .parse::<f64>()
                    .map_err(|e| parse_err(lineno, format!("weight: {e}")))?;
                atoms.push((LatticePoint::new(coords), w));
            }
        }
    }
    let (dim, err, extra) = header.ok_or_else(|| parse_err(0, "missing header line"))?;
    let measure = SignedLatticeMeasure::from_atoms(dim, atoms)?.with_added_err(err);
    Ok(MeasureFile { measure, extra })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bitwise() {
        let m = SignedLatticeMeasure::from_atoms(
            2,
            [(vec![0, 0], 1.0 / 3.0), (vec![1, -2], -1e-300), (vec![-5, 7], 0.1 + 0.2)],
        )
        .unwrap()
        .with_added_err(1.0 / 7.0);
        let text = format_measure(&m, &[("tail_m2", "inf".into())]);
        let back = parse_measure(&text).unwrap();
        assert_eq!(back.measure, m);
        assert_eq!(back.extra_value("tail_m2"), Some("inf"));
    }

    #[test]
    fn comments_and_errors() {
        let ok = "# lazy walk\ndim=1 trunc_err=0\n0 0.5\n# mid comment\n1 0.25\n-1 0.25\n";
        assert_eq!(parse_measure(ok).unwrap().measure.len(), 3);
        assert!(parse_measure("1 0.5\n").is_err());
        assert!(parse_measure("dim=1 trunc_err=0\n1 2 0.5\n").is_err());
        assert!(parse_measure("dim=1 trunc_err=-1\n").is_err());
        assert!(parse_measure("dim=1 trunc_err=0\nx 0.5\n").is_err());
    }
}
