//! Text and columnar serializations of a [`RunReport`].

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use hetnoise_core::io::parse_columnar;

use crate::error::{CliError, Result};
use crate::runner::{ExpectationOutcome, RunReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    #[default]
    Text,
    Columnar,
}

impl Format {
    pub fn extension(&self) -> &'static str {
        match self {
            Format::Text => "txt",
            Format::Columnar => "tsv",
        }
    }
}

pub fn emit_report(r: &RunReport, format: Format) -> String {
    match format {
        Format::Text => emit_text(r),
        Format::Columnar => emit_columnar(r),
    }
}

/// Plain decimals for ordinary magnitudes, exponent form otherwise.
fn num(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && a.is_finite() && !(1e-3..1e7).contains(&a) {
        format!("{v:e}")
    } else {
        v.to_string()
    }
}

fn emit_text(r: &RunReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "scenario    {}", r.scenario);
    let _ = writeln!(s, "experiment  {}", r.experiment);
    let _ = writeln!(s, "master seed {}", r.master_seed);
    if r.trials > 0 {
        let _ = writeln!(s, "monte carlo {} trials x {} samples", r.trials, r.samples);
    } else {
        let _ = writeln!(s, "monte carlo off");
    }
    s.push_str("\nmetrics\n");
    let width = r.metrics.keys().map(String::len).max().unwrap_or(0);
    for (k, v) in &r.metrics {
        let _ = writeln!(s, "  {k:<width$}  {}", num(*v));
    }
    if !r.expectations.is_empty() {
        s.push_str("\nexpectations\n");
        for e in &r.expectations {
            let _ = writeln!(
                s,
                "  {}  {} = {} (target {} +/- {})",
                if e.pass { "PASS" } else { "FAIL" },
                e.metric,
                num(e.value),
                num(e.target),
                num(e.tolerance)
            );
        }
    }
    if !r.notes.is_empty() {
        s.push_str("\nnotes\n");
        for n in &r.notes {
            let _ = writeln!(s, "  {n}");
        }
    }
    if !r.artifacts.is_empty() {
        s.push_str("\nartifacts\n");
        for a in &r.artifacts {
            let _ = writeln!(s, "  {}", a.display());
        }
    }
    let total = r.expectations.len();
    let _ = writeln!(
        s,
        "\nresult      {} of {total} expectations met",
        total - r.failed()
    );
    s
}

fn emit_columnar(r: &RunReport) -> String {
    let mut s = String::from("# hetnoise report\n");
    let _ = writeln!(s, "# scenario={}", r.scenario);
    let _ = writeln!(s, "# experiment={}", r.experiment);
    let _ = writeln!(s, "# master_seed={}", r.master_seed);
    let _ = writeln!(s, "# trials={}", r.trials);
    let _ = writeln!(s, "# samples={}", r.samples);
    for (k, v) in &r.metrics {
        let _ = writeln!(s, "# metric.{k}={v:e}");
    }
    for (i, e) in r.expectations.iter().enumerate() {
        let _ = writeln!(s, "# expect.{i}={}", e.metric);
    }
    for (i, n) in r.notes.iter().enumerate() {
        let _ = writeln!(s, "# note.{i}={}", n.replace('\n', " "));
    }
    for (i, a) in r.artifacts.iter().enumerate() {
        let _ = writeln!(s, "# artifact.{i}={}", a.display());
    }
    s.push_str("expectation\tvalue\ttarget\ttolerance\tpass\n");
    for (i, e) in r.expectations.iter().enumerate() {
        let _ = writeln!(
            s,
            "{i}\t{:e}\t{:e}\t{:e}\t{}",
            e.value,
            e.target,
            e.tolerance,
            u8::from(e.pass)
        );
    }
    s
}

/// Reads back the columnar form.
pub fn parse_report(text: &str, path: &Path) -> Result<RunReport> {
    let table = parse_columnar(text, path).map_err(|e| CliError::core("report", e))?;
    let bad = |message: String| CliError::Parse {
        path: path.to_path_buf(),
        line: 1,
        message,
    };
    let get = |key: &str| table.header.get(key).cloned().ok_or_else(|| bad(format!("missing header key '{key}'")));
    let int = |key: &str| -> Result<u64> { get(key)?.parse().map_err(|_| bad(format!("'{key}' is not an integer"))) };
    let indexed = |prefix: &str| -> BTreeMap<usize, String> {
        table
            .header
            .iter()
            .filter_map(|(k, v)| Some((k.strip_prefix(prefix)?.parse().ok()?, v.clone())))
            .collect()
    };

    let mut metrics = BTreeMap::new();
    for (k, v) in &table.header {
        if let Some(name) = k.strip_prefix("metric.") {
            let value = v.parse().map_err(|_| bad(format!("metric '{name}' is not a number")))?;
            metrics.insert(name.to_string(), value);
        }
    }
    let names = indexed("expect.");
    let mut expectations = Vec::with_capacity(table.rows.len());
    for row in &table.rows {
        let i = row[0] as usize;
        let metric = names
            .get(&i)
            .cloned()
            .ok_or_else(|| bad(format!("expectation {i} has no metric name")))?;
        expectations.push(ExpectationOutcome {
            metric,
            value: row[1],
            target: row[2],
            tolerance: row[3],
            pass: row[4] != 0.0,
        });
    }
    Ok(RunReport {
        scenario: get("scenario")?,
        experiment: get("experiment")?,
        master_seed: int("master_seed")?,
        trials: int("trials")? as usize,
        samples: int("samples")? as usize,
        metrics,
        expectations,
        notes: indexed("note.").into_values().collect(),
        artifacts: indexed("artifact.").into_values().map(PathBuf::from).collect(),
    })
}
