//! Headered columnar text files for traces, spectra and fringe scans.
//!
//! Layout: `#`-prefixed header lines carrying `key=value` pairs, one line of
//! tab-separated column names, then tab-separated numeric rows. Floats are
//! written in shortest round-trip form.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fringe::FringeScan;
use crate::sim::PhotocurrentTrace;
use crate::spectral::NoiseSpectrum;

/// A parsed columnar file.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnarTable {
    pub kind: String,
    pub header: BTreeMap<String, String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl ColumnarTable {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn header_f64(&self, key: &str) -> Option<f64> {
        self.header.get(key)?.parse().ok()
    }
}

fn write_header<W: Write>(out: &mut W, kind: &str, echo: &[(String, String)], columns: &[&str]) -> Result<()> {
    writeln!(out, "# hetnoise {kind}")?;
    for (k, v) in echo {
        writeln!(out, "# {k}={v}")?;
    }
    writeln!(out, "{}", columns.join("\t"))?;
    Ok(())
}

fn fmt(v: f64) -> String {
    format!("{v:e}")
}

/// Writes `time_s, j1_a, j2_a, jminus_a`. `echo` is copied into the header
/// after the sample rate and seed.
pub fn write_trace<W: Write>(out: &mut W, trace: &PhotocurrentTrace, echo: &[(String, String)]) -> Result<()> {
    let mut header = vec![
        ("sample_rate_hz".to_string(), fmt(trace.sample_rate)),
        ("seed".to_string(), trace.seed_used.to_string()),
        ("trial".to_string(), trace.trial.to_string()),
    ];
    header.extend_from_slice(echo);
    write_header(out, "trace", &header, &["time_s", "j1_a", "j2_a", "jminus_a"])?;
    for k in 0..trace.len() {
        writeln!(
            out,
            "{}\t{}\t{}\t{}",
            fmt(trace.time(k)),
            fmt(trace.j1[k]),
            fmt(trace.j2[k]),
            fmt(trace.j_minus[k])
        )?;
    }
    Ok(())
}

/// Writes `freq_hz, psd_a2_per_hz, power_db`. Invalid bins carry `nan`.
pub fn write_spectrum<W: Write>(out: &mut W, spectrum: &NoiseSpectrum, echo: &[(String, String)]) -> Result<()> {
    let mut header = vec![
        ("rbw_hz".to_string(), fmt(spectrum.rbw)),
        ("averages".to_string(), spectrum.averages.to_string()),
        ("reference_a2".to_string(), fmt(spectrum.reference)),
    ];
    header.extend_from_slice(echo);
    write_header(out, "spectrum", &header, &["freq_hz", "psd_a2_per_hz", "power_db"])?;
    for i in 0..spectrum.len() {
        let (p, db) = if spectrum.valid[i] {
            (fmt(spectrum.psd[i]), fmt(spectrum.power_db[i]))
        } else {
            ("nan".into(), "nan".into())
        };
        writeln!(out, "{}\t{}\t{}", fmt(spectrum.freqs[i]), p, db)?;
    }
    Ok(())
}

/// Writes `axis, i1, i2, ...`.
pub fn write_fringe_scan<W: Write>(out: &mut W, scan: &FringeScan, echo: &[(String, String)]) -> Result<()> {
    let names: Vec<String> = std::iter::once("axis".to_string())
        .chain((1..=scan.intensities.len()).map(|i| format!("i{i}")))
        .collect();
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    write_header(out, "fringe", echo, &refs)?;
    for (k, x) in scan.axis.iter().enumerate() {
        let mut line = fmt(*x);
        for row in &scan.intensities {
            line.push('\t');
            line.push_str(&fmt(row[k]));
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Parses a columnar file. `path` is only used in error messages.
pub fn parse_columnar(text: &str, path: &Path) -> Result<ColumnarTable> {
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut kind = String::new();
    let mut header = BTreeMap::new();
    let mut columns: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let rest = rest.trim();
            if let Some((k, v)) = rest.split_once('=') {
                header.insert(k.trim().to_string(), v.trim().to_string());
            } else if let Some(k) = rest.strip_prefix("hetnoise ") {
                kind = k.trim().to_string();
            }
            continue;
        }
        match &columns {
            None => columns = Some(line.split_whitespace().map(str::to_string).collect()),
            Some(cols) => {
                let row: Vec<f64> = line
                    .split_whitespace()
                    .map(|tok| tok.parse::<f64>().map_err(|_| err(lineno, format!("not a number: '{tok}'"))))
                    .collect::<Result<_>>()?;
                if row.len() != cols.len() {
                    return Err(err(
                        lineno,
                        format!("expected {} columns, found {}", cols.len(), row.len()),
                    ));
                }
                rows.push(row);
            }
        }
    }
    let columns = columns.ok_or_else(|| err(1, "missing column header line".into()))?;
    Ok(ColumnarTable {
        kind,
        header,
        columns,
        rows,
    })
}

pub fn read_columnar(path: &Path) -> Result<ColumnarTable> {
    parse_columnar(&fs::read_to_string(path)?, path)
}

/// Reads a trace file. The sample rate comes from the header, or from the
/// time column when the header lacks it.
pub fn read_trace(path: &Path) -> Result<PhotocurrentTrace> {
    let table = read_columnar(path)?;
    let col = |name: &str| {
        table.column(name).ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("missing column '{name}'"),
        })
    };
    let sample_rate = match table.header_f64("sample_rate_hz") {
        Some(fs) => fs,
        None => {
            let t = col("time_s")?;
            if t.len() < 2 {
                return Err(Error::range("trace needs at least two samples"));
            }
            1.0 / (t[1] - t[0])
        }
    };
    let seed = table.header.get("seed").and_then(|s| s.parse().ok()).unwrap_or(0);
    let trial = table.header.get("trial").and_then(|s| s.parse().ok()).unwrap_or(0);
    let mut trace = PhotocurrentTrace::from_detectors(col("j1_a")?, col("j2_a")?, sample_rate, seed, trial)?;
    if let Some(jm) = table.column("jminus_a") {
        trace.j_minus = jm;
    }
    Ok(trace)
}

/// Reads a fringe scan: first column is the axis, the rest are detectors.
pub fn read_fringe_scan(path: &Path) -> Result<FringeScan> {
    let table = read_columnar(path)?;
    if table.columns.len() < 2 {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: "a fringe scan needs an axis column and at least one intensity column".into(),
        });
    }
    let axis = table.rows.iter().map(|r| r[0]).collect();
    let intensities = (1..table.columns.len())
        .map(|c| table.rows.iter().map(|r| r[c]).collect())
        .collect();
    FringeScan::new(axis, intensities)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = "# hetnoise trace\n# seed=3\ntime_s\tj1_a\tj2_a\n0\t1\t2\n1\tx\t2\n";
        match parse_columnar(text, Path::new("t.tsv")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 5),
            other => panic!("{other:?}"),
        }
        let ragged = "a\tb\n1\t2\n3\n";
        assert!(matches!(parse_columnar(ragged, Path::new("r")), Err(Error::Parse { line: 3, .. })));
    }

    proptest! {
        #[test]
        fn trace_round_trip(vals in proptest::collection::vec((-1e-2..1e-2f64, -1e-2..1e-2f64), 2..40),
                            seed in any::<u64>()) {
            let (j1, j2): (Vec<f64>, Vec<f64>) = vals.into_iter().unzip();
            let trace = PhotocurrentTrace::from_detectors(j1, j2, 2e7, seed, 3).unwrap();
            let mut buf = Vec::new();
            write_trace(&mut buf, &trace, &[("lo_power_mw".into(), "4".into())]).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("t.tsv");
            std::fs::write(&p, &buf).unwrap();
            let back = read_trace(&p).unwrap();
            prop_assert_eq!(back, trace);
        }
    }
}
