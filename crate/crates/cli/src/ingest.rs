//! CSV input and output of observation sets.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use entrokit::{DataSet, Error, Result};

/// Reads an `n × d` data set from a CSV file.
pub fn ingest_csv(path: &Path) -> Result<DataSet> {
    let file = File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_dataset(file)
}

/// Parses comma-separated finite reals, one observation per row. A first
/// row that does not parse as numbers is taken as a header.
pub fn read_dataset<R: Read>(input: R) -> Result<DataSet> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut values = Vec::new();
    let mut dim = None;
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse(e.to_string()))?;
        let row = record.position().map_or(i as u64 + 1, |p| p.line());
        if i == 0 && record.iter().any(|cell| cell.parse::<f64>().is_err()) {
            continue;
        }
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        match dim {
            None => dim = Some(record.len()),
            Some(d) if d != record.len() => {
                return Err(Error::Parse(format!(
                    "row {row}: expected {d} columns, found {}",
                    record.len()
                )))
            }
            Some(_) => {}
        }
        for (col, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                Error::Parse(format!(
                    "row {row}, column {}: `{cell}` is not a number",
                    col + 1
                ))
            })?;
            if !v.is_finite() {
                return Err(Error::Parse(format!(
                    "row {row}, column {}: `{cell}` is not finite",
                    col + 1
                )));
            }
            values.push(v);
        }
    }
    match dim {
        Some(d) => DataSet::from_flat(values, d),
        None => Err(Error::Parse("input contains no observations".into())),
    }
}

/// Writes one observation per row with round-trip exact formatting.
pub fn write_dataset<W: Write>(data: &DataSet, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    for row in data.rows() {
        w.write_record(row.iter().map(|v| format!("{v:?}")))?;
    }
    w.flush()?;
    Ok(())
}
