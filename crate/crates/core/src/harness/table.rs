//! Plot-ready result tables.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A probe's output: one row per measurement.
///
/// Cells are `None` where a quantity is undefined (for instance a ratio on
/// a degenerate row); they are written as empty CSV fields, never as NaN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
    /// Rows whose reference quantity vanished; excluded from ratios.
    pub degenerate: Vec<bool>,
    /// Aggregate statistics, keyed by name.
    pub summary: Vec<(String, f64)>,
    pub meta: ProbeMeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeMeta {
    pub seed: u64,
    /// Sample size per measurement.
    pub m: usize,
    /// Wall-clock start, seconds since the Unix epoch.
    pub started_unix: u64,
    pub finished_unix: u64,
}

impl ProbeMeta {
    pub(crate) fn start(seed: u64, m: usize) -> Self {
        let now = unix_now();
        Self { seed, m, started_unix: now, finished_unix: now }
    }

    pub(crate) fn finish(mut self) -> Self {
        self.finished_unix = unix_now();
        self
    }
}

fn unix_now() -> u64 {
    std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

impl ProbeResult {
    pub(crate) fn new(name: &str, columns: &[&str], meta: ProbeMeta) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            degenerate: Vec::new(),
            summary: Vec::new(),
            meta,
        }
    }

    /// Appends a row; non-finite cells become `None`.
    pub(crate) fn push(&mut self, row: Vec<Option<f64>>, degenerate: bool) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::DimensionMismatch { expected: self.columns.len(), got: row.len() });
        }
        self.rows.push(row.into_iter().map(|c| c.filter(|v| v.is_finite())).collect());
        self.degenerate.push(degenerate);
        Ok(())
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// All cells of a column, in row order.
    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let j = self.column_index(name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    pub fn stat(&self, key: &str) -> Option<f64> {
        self.summary.iter().find(|(k, _)| k == key).map(|(_, v)| *v)
    }

    /// Writes the header, then one line per row with a trailing
    /// `degenerate` flag column.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        let mut header = self.columns.clone();
        header.push("degenerate".into());
        wtr.write_record(&header)?;
        for (row, &deg) in self.rows.iter().zip(&self.degenerate) {
            let mut cells: Vec<String> = row.iter().map(|c| c.map(fmt_cell).unwrap_or_default()).collect();
            cells.push(u8::from(deg).to_string());
            wtr.write_record(&cells)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

pub(crate) fn fmt_cell(v: f64) -> String {
    format!("{v:.16e}")
}
