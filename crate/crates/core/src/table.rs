//! Comma-separated result tables with `#` metadata lines.

use std::fmt::Write as _;
use std::path::Path;

use crate::ao_driver::Scheme;
use crate::error::{RelayError, Result};

pub const RESULTS_HEADER: &str = "scheme,ratio,rho,mean_rate,stderr,n_ok,n_skip";

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub scheme: Scheme,
    pub ratio: f64,
    pub rho: f64,
    pub mean_rate: f64,
    pub stderr: f64,
    pub n_ok: usize,
    pub n_skip: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultsTable {
    /// Metadata lines without the leading `# `.
    pub metadata: Vec<String>,
    pub rows: Vec<ResultRow>,
}

/// Renders metadata, a header and rows. Floats use the shortest
/// representation that parses back to the same value.
pub fn render(metadata: &[String], header: &str, rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = String::new();
    for m in metadata {
        if m.is_empty() {
            out.push_str("#\n");
        }
        for line in m.lines() {
            let _ = writeln!(out, "# {line}");
        }
    }
    out.push_str(header);
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    out
}

impl ResultsTable {
    pub fn to_csv(&self) -> String {
        render(
            &self.metadata,
            RESULTS_HEADER,
            self.rows.iter().map(|r| {
                vec![
                    r.scheme.to_string(),
                    r.ratio.to_string(),
                    r.rho.to_string(),
                    r.mean_rate.to_string(),
                    r.stderr.to_string(),
                    r.n_ok.to_string(),
                    r.n_skip.to_string(),
                ]
            }),
        )
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

fn field<T: std::str::FromStr>(s: &str, name: &str, line: usize) -> Result<T> {
    s.trim().parse().map_err(|_| RelayError::Parse(format!("line {line}: invalid {name} '{s}'")))
}

/// Parses a results table. Metadata lines may appear anywhere before the
/// header; blank lines are ignored.
pub fn parse_results_table(text: &str) -> Result<ResultsTable> {
    let mut table = ResultsTable::default();
    let mut header_seen = false;
    for (i, raw) in text.lines().enumerate() {
        let n = i + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        if let Some(m) = line.strip_prefix('#') {
            if header_seen {
                return Err(RelayError::Parse(format!("line {n}: metadata after header")));
            }
            table.metadata.push(m.strip_prefix(' ').unwrap_or(m).to_string());
            continue;
        }
        if !header_seen {
            if line.trim() != RESULTS_HEADER {
                return Err(RelayError::Parse(format!("line {n}: expected header '{RESULTS_HEADER}'")));
            }
            header_seen = true;
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 7 {
            return Err(RelayError::Parse(format!("line {n}: expected 7 columns, found {}", cols.len())));
        }
        let scheme = cols[0].parse::<Scheme>().map_err(|e| RelayError::Parse(format!("line {n}: {e}")))?;
        table.rows.push(ResultRow {
            scheme,
            ratio: field(cols[1], "ratio", n)?,
            rho: field(cols[2], "rho", n)?,
            mean_rate: field(cols[3], "mean_rate", n)?,
            stderr: field(cols[4], "stderr", n)?,
            n_ok: field(cols[5], "n_ok", n)?,
            n_skip: field(cols[6], "n_skip", n)?,
        });
    }
    if !header_seen {
        return Err(RelayError::Parse("missing header".into()));
    }
    Ok(table)
}

pub fn read_results_table(path: &Path) -> Result<ResultsTable> {
    parse_results_table(&std::fs::read_to_string(path)?)
}
