//! CSV and JSON writers for analysis outputs.

use std::fs;
use std::path::Path;

use num_complex::Complex;
use pmsn_core::numeric::SeqTensor;
use pmsn_core::Real;
use serde::Serialize;

use crate::error::{Error, Result};

/// Writes `rows` as CSV with a header taken from the row type's field names.
/// An empty table still gets the header from `empty_header`.
pub fn write_rows<R: Serialize>(path: &Path, rows: &[R], empty_header: &[&str]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::format(path, e.to_string()))?;
    }
    if rows.is_empty() {
        w.write_record(empty_header)
            .map_err(|e| Error::format(path, e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::format(path, e.to_string()))?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn write_json<V: Serialize>(path: &Path, value: &V) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::format(path, e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Wide trace of one batch element: columns `t, n0, n1, ...`.
pub fn write_trace<T: Real>(path: &Path, x: &SeqTensor<T>, b: usize) -> Result<()> {
    let (_, time, features) = x.shape();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["t".to_string()];
    header.extend((0..features).map(|f| format!("n{f}")));
    w.write_record(&header)
        .map_err(|e| Error::format(path, e.to_string()))?;
    for t in 0..time {
        let mut rec = vec![t.to_string()];
        rec.extend(x.row(b, t).iter().map(|v| v.as_f64().to_string()));
        w.write_record(&rec).map_err(|e| Error::format(path, e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::format(path, e.to_string()))?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Serialize)]
struct ModeSample {
    t: usize,
    neuron: usize,
    mode: usize,
    re: f64,
    im: f64,
}

/// Long-form hidden mode trajectories: `traces[neuron][mode][t]`.
pub fn write_modes_trace<T: Real>(path: &Path, traces: &[Vec<Vec<Complex<T>>>]) -> Result<()> {
    let mut rows = Vec::new();
    for (neuron, modes) in traces.iter().enumerate() {
        let time = modes.first().map_or(0, Vec::len);
        for t in 0..time {
            for (mode, tr) in modes.iter().enumerate() {
                rows.push(ModeSample {
                    t,
                    neuron,
                    mode,
                    re: tr[t].re.as_f64(),
                    im: tr[t].im.as_f64(),
                });
            }
        }
    }
    write_rows(path, &rows, &["t", "neuron", "mode", "re", "im"])
}

/// Parses a numeric CSV of time steps by features. Blank lines and lines
/// starting with `#` are skipped; every row must have the same width.
pub fn read_series_csv(path: &Path) -> Result<(Vec<f64>, usize, usize)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(bytes.as_slice());
    let mut values = Vec::new();
    let mut width = 0;
    let mut rows = 0;
    for rec in r.records() {
        let rec = rec.map_err(|e| {
            let offset = e.position().map_or(0, |p| p.byte());
            Error::parse(path, offset, e.to_string())
        })?;
        let offset = rec.position().map_or(0, |p| p.byte());
        if rec.iter().all(str::is_empty) {
            continue;
        }
        if rows == 0 {
            width = rec.len();
        } else if rec.len() != width {
            return Err(Error::parse(
                path,
                offset,
                format!("row {} has {} columns, expected {width}", rows + 1, rec.len()),
            ));
        }
        for field in rec.iter() {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::parse(path, offset, format!("'{field}' is not a number")))?;
            if !v.is_finite() {
                return Err(Error::parse(path, offset, format!("'{field}' is not finite")));
            }
            values.push(v);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::parse(path, 0, "input contains no samples"));
    }
    Ok((values, rows, width))
}
