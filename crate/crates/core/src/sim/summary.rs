//! Grouped summaries of sweep CSVs and inversion of calibration curves.

use super::sweep::CsvRecord;
use super::SimError;
use crate::numeric::{fmt_sig9, percentile_sorted};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

/// Columns of a summary CSV that follow the group-key columns.
pub const SUMMARY_HEADER: [&str; 7] = ["metric", "count", "failures", "mean", "median", "p25", "p75"];

/// A CSV held as strings, the common input of summaries and plots.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn from_csv<R: Read>(input: R) -> Result<Table, SimError> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
        let columns = reader.headers()?.iter().map(str::to_string).collect();
        let rows = reader
            .records()
            .map(|r| r.map(|r| r.iter().map(str::to_string).collect()))
            .collect::<Result<_, _>>()?;
        Ok(Table { columns, rows })
    }

    /// The table as it would be read back from the records' CSV.
    pub fn from_records<R: CsvRecord>(records: &[R]) -> Table {
        Table {
            columns: R::HEADER.iter().map(|c| c.to_string()).collect(),
            rows: records.iter().map(CsvRecord::fields).collect(),
        }
    }

    pub fn column(&self, name: &str) -> Result<usize, SimError> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| SimError::UnknownColumn(name.to_string()))
    }

    /// Index of the `failed`/`skipped` flag column, if any.
    fn failure_column(&self) -> Option<usize> {
        self.columns.iter().position(|c| c == "failed" || c == "skipped")
    }
}

/// Statistics of one metric within one group. Failed rows are counted in
/// `failures` and excluded from everything else.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    /// `(column, value)` for each group key.
    pub keys: Vec<(String, String)>,
    pub metric: String,
    pub count: usize,
    pub failures: usize,
    pub mean: Option<f64>,
    pub median: Option<f64>,
    pub p25: Option<f64>,
    pub p75: Option<f64>,
}

impl SummaryRow {
    pub fn key(&self, name: &str) -> Option<&str> {
        self.keys.iter().find(|(k, _)| k == name).map(|(_, v)| v.as_str())
    }
}

/// Group rows by the values of `keys` (groups in order of first
/// appearance) and summarize each metric column.
pub fn aggregate(table: &Table, keys: &[&str], metrics: &[&str]) -> Result<Vec<SummaryRow>, SimError> {
    if keys.is_empty() {
        return Err(SimError::NoGroupKeys);
    }
    if table.rows.is_empty() {
        return Err(SimError::NoRecords);
    }
    let key_idx = keys.iter().map(|k| table.column(k)).collect::<Result<Vec<_>, _>>()?;
    let metric_idx = metrics.iter().map(|m| table.column(m)).collect::<Result<Vec<_>, _>>()?;
    let fail_idx = table.failure_column();

    let mut groups: Vec<(Vec<String>, Vec<&Vec<String>>)> = Vec::new();
    for row in &table.rows {
        let key: Vec<String> = key_idx.iter().map(|&i| row[i].clone()).collect();
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, rows)) => rows.push(row),
            None => groups.push((key, vec![row])),
        }
    }

    let mut out = Vec::new();
    for (key, rows) in &groups {
        let failed = |r: &Vec<String>| fail_idx.is_some_and(|i| r[i].trim() == "1");
        let failures = rows.iter().filter(|r| failed(r)).count();
        for (m, &mi) in metrics.iter().zip(&metric_idx) {
            let values: Vec<f64> = rows
                .iter()
                .filter(|r| !failed(r))
                .filter_map(|r| r[mi].trim().parse::<f64>().ok())
                .collect();
            let mut sorted = values.clone();
            sorted.sort_by(f64::total_cmp);
            let stat = |q: f64| (!sorted.is_empty()).then(|| percentile_sorted(&sorted, q));
            out.push(SummaryRow {
                keys: keys.iter().map(|k| k.to_string()).zip(key.iter().cloned()).collect(),
                metric: m.to_string(),
                count: values.len(),
                failures,
                mean: (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64),
                median: stat(0.5),
                p25: stat(0.25),
                p75: stat(0.75),
            });
        }
    }
    Ok(out)
}

/// Write summary rows in long format: key columns, then [`SUMMARY_HEADER`].
pub fn write_summary<W: Write>(out: W, rows: &[SummaryRow]) -> Result<(), SimError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let Some(first) = rows.first() else {
        return Err(SimError::NoRecords);
    };
    let header: Vec<&str> = first.keys.iter().map(|(k, _)| k.as_str()).chain(SUMMARY_HEADER).collect();
    w.write_record(&header)?;
    let opt = |v: Option<f64>| v.map(fmt_sig9).unwrap_or_default();
    for r in rows {
        let mut f: Vec<String> = r.keys.iter().map(|(_, v)| v.clone()).collect();
        f.extend([
            r.metric.clone(),
            r.count.to_string(),
            r.failures.to_string(),
            opt(r.mean),
            opt(r.median),
            opt(r.p25),
            opt(r.p75),
        ]);
        w.write_record(&f)?;
    }
    w.flush()?;
    Ok(())
}

impl Table {
    /// Summarize and write in one step.
    pub fn write_summary<W: Write>(&self, out: W, keys: &[&str], metrics: &[&str]) -> Result<(), SimError> {
        write_summary(out, &aggregate(self, keys, metrics)?)
    }
}

/// Result of reading a calibration curve backwards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Equivalent {
    Parameter(f64),
    /// Below the smallest mean on the curve (the value given).
    BelowRange(f64),
    /// Above the largest mean on the curve (the value given).
    AboveRange(f64),
}

/// Mean metric as a function of distortion parameter, for one kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationCurve {
    /// `(parameter, mean metric)`, ascending in both.
    pub points: Vec<(f64, f64)>,
}

impl CalibrationCurve {
    /// Build from a summary grouped by `kind` and `parameter`.
    pub fn from_summary(rows: &[SummaryRow], kind: &str, metric: &str) -> Result<CalibrationCurve, SimError> {
        let mut points: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.metric == metric && r.key("kind") == Some(kind))
            .filter_map(|r| Some((r.key("parameter")?.parse::<f64>().ok()?, r.mean?)))
            .collect();
        if points.is_empty() {
            return Err(SimError::EmptyCurve {
                kind: kind.to_string(),
                metric: metric.to_string(),
            });
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        CalibrationCurve::new(points)
    }

    /// `points` must be sorted by parameter with strictly increasing means.
    pub fn new(points: Vec<(f64, f64)>) -> Result<CalibrationCurve, SimError> {
        let offending: Vec<(f64, f64)> = points
            .windows(2)
            .filter(|w| !(w[1].1 > w[0].1 && w[1].0 > w[0].0))
            .map(|w| (w[0].0, w[1].0))
            .collect();
        if !offending.is_empty() {
            return Err(SimError::NonMonotone(offending));
        }
        Ok(CalibrationCurve { points })
    }

    /// Piecewise-linear inverse; no extrapolation.
    pub fn invert(&self, observed: f64) -> Equivalent {
        let (first, last) = (self.points[0], self.points[self.points.len() - 1]);
        if observed < first.1 {
            return Equivalent::BelowRange(observed);
        }
        if observed > last.1 {
            return Equivalent::AboveRange(observed);
        }
        if let Some(&(p, _)) = self.points.iter().find(|(_, m)| *m == observed) {
            return Equivalent::Parameter(p);
        }
        let w = self
            .points
            .windows(2)
            .find(|w| observed > w[0].1 && observed < w[1].1)
            .expect("observed lies strictly inside one segment");
        let ((p0, m0), (p1, m1)) = (w[0], w[1]);
        Equivalent::Parameter(p0 + (observed - m0) / (m1 - m0) * (p1 - p0))
    }
}

/// Parameter equivalent to an observed metric value, read off the
/// calibration summary for one distortion kind.
pub fn equivalent_distortion(rows: &[SummaryRow], kind: &str, metric: &str, observed: f64) -> Result<Equivalent, SimError> {
    Ok(CalibrationCurve::from_summary(rows, kind, metric)?.invert(observed))
}
