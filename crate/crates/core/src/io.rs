//! CSV encodings of series and matrices.
//!
//! Numbers are written with 17 significant digits (`{:.16e}`), which
//! round-trips every `f64` exactly.

use std::io::{Read, Write};

use chrono::{NaiveDate, SecondsFormat};
use ndarray::Array2;

use crate::error::{Error, Result};
use crate::ingest::RawSeries;
use crate::resample::DataMatrix;

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// `timestamp,count` rows in RFC 3339 UTC.
pub fn write_series_csv<W: Write>(out: W, series: &RawSeries) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["timestamp", "count"])?;
    for s in &series.samples {
        wtr.write_record([
            s.timestamp.to_rfc3339_opts(SecondsFormat::Secs, true),
            fmt_f64(s.count),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// A matrix under a header row with one label per column.
pub fn write_matrix_csv<W: Write, S: AsRef<str>>(out: W, header: &[S], matrix: &Array2<f64>) -> Result<()> {
    if header.len() != matrix.ncols() {
        return Err(Error::InvalidInput(format!(
            "{} header labels for {} columns",
            header.len(),
            matrix.ncols()
        )));
    }
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(header.iter().map(|h| h.as_ref()))?;
    for row in matrix.rows() {
        wtr.write_record(row.iter().map(|v| fmt_f64(*v)))?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_matrix_csv<R: Read>(input: R) -> Result<(Vec<String>, Array2<f64>)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let cols = header.len();
    let mut data = Vec::new();
    let mut rows = 0;
    for record in rdr.records() {
        let record = record?;
        if record.len() != cols {
            return Err(Error::InvalidInput(format!(
                "row {} has {} fields, expected {cols}",
                rows + 1,
                record.len()
            )));
        }
        for field in record.iter() {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::InvalidInput(format!("not a number: {field:?}")))?;
            data.push(v);
        }
        rows += 1;
    }
    let matrix = Array2::from_shape_vec((rows, cols), data)
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    Ok((header, matrix))
}

pub fn day_header(days: &[NaiveDate]) -> Vec<String> {
    days.iter().map(|d| d.format("%Y-%m-%d").to_string()).collect()
}

pub fn component_header(k: usize) -> Vec<String> {
    (1..=k).map(|j| format!("component_{j}")).collect()
}

pub fn write_data_matrix<W: Write>(out: W, matrix: &DataMatrix) -> Result<()> {
    write_matrix_csv(out, &day_header(&matrix.day_labels), &matrix.x)
}

pub fn read_data_matrix<R: Read>(input: R) -> Result<DataMatrix> {
    let (header, x) = read_matrix_csv(input)?;
    let days = header
        .iter()
        .map(|h| {
            NaiveDate::parse_from_str(h, "%Y-%m-%d")
                .map_err(|_| Error::InvalidInput(format!("bad day label {h:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    DataMatrix::new(x, days)
}
