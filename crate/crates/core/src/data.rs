//! Fixation data CSV: `seq_id,t,x,y` with a header row.

use crate::hmm::{FixationSequence, SequenceError};
use crate::linalg::Point2;
use std::collections::BTreeMap;
use std::io::{Read, Write};

pub const FIXATION_HEADER: [&str; 4] = ["seq_id", "t", "x", "y"];

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("line {line}: {msg}")]
    Malformed { line: u64, msg: String },
    #[error("missing or wrong header (expected seq_id,t,x,y)")]
    Header,
    #[error("no fixation sequences in input")]
    Empty,
    #[error("sequence {seq_id}: {source}")]
    Sequence {
        seq_id: u64,
        #[source]
        source: SequenceError,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Parse fixation sequences. Rows are grouped by `seq_id` (ascending) and
/// ordered by `t` within a sequence; duplicate `(seq_id, t)` is an error.
pub fn read_fixations<R: Read>(input: R) -> Result<Vec<FixationSequence>, DataError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let headers = reader.headers()?.clone();
    if headers.len() != 4 || headers.iter().zip(FIXATION_HEADER).any(|(a, b)| a.trim() != b) {
        return Err(DataError::Header);
    }
    let mut groups: BTreeMap<u64, BTreeMap<u64, Point2>> = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            DataError::Malformed { line, msg: e.to_string() }
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let bad = |msg: String| DataError::Malformed { line, msg };
        if record.len() != 4 {
            return Err(bad(format!("expected 4 fields, found {}", record.len())));
        }
        let seq_id: u64 = record[0].trim().parse().map_err(|_| bad(format!("bad seq_id {:?}", &record[0])))?;
        let t: u64 = record[1].trim().parse().map_err(|_| bad(format!("bad t {:?}", &record[1])))?;
        let x: f64 = record[2].trim().parse().map_err(|_| bad(format!("bad x {:?}", &record[2])))?;
        let y: f64 = record[3].trim().parse().map_err(|_| bad(format!("bad y {:?}", &record[3])))?;
        if !x.is_finite() || !y.is_finite() {
            return Err(bad("non-finite coordinate".into()));
        }
        if groups.entry(seq_id).or_default().insert(t, Point2::new(x, y)).is_some() {
            return Err(bad(format!("duplicate t={t} in sequence {seq_id}")));
        }
    }
    if groups.is_empty() {
        return Err(DataError::Empty);
    }
    groups
        .into_iter()
        .map(|(seq_id, pts)| {
            FixationSequence::new(pts.into_values().collect()).map_err(|source| DataError::Sequence { seq_id, source })
        })
        .collect()
}

/// Write sequences with `seq_id` and `t` numbered from zero.
pub fn write_fixations<W: Write>(mut out: W, seqs: &[FixationSequence]) -> std::io::Result<()> {
    writeln!(out, "{}", FIXATION_HEADER.join(","))?;
    for (i, s) in seqs.iter().enumerate() {
        for (t, p) in s.points().iter().enumerate() {
            writeln!(out, "{i},{t},{},{}", p.x, p.y)?;
        }
    }
    out.flush()
}
