//! CSV datasets: one point per row, one coordinate per column.
//!
//! A first row containing any cell that does not parse as a number is taken
//! as the header. Values are written with Rust's shortest round-trip float
//! formatting, so reading a written file back gives the same bits.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pca::Dataset;

/// Observed range of one input column before min-max rescaling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnRange {
    pub min: f64,
    pub max: f64,
}

impl ColumnRange {
    /// Maps `[min, max]` onto `[0, 1]`; a constant column maps to 0.
    pub fn rescale(self, x: f64) -> f64 {
        if self.max > self.min {
            ((x - self.min) / (self.max - self.min)).clamp(0.0, 1.0)
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone)]
pub struct Ingested {
    pub columns: Vec<String>,
    pub has_header: bool,
    pub dataset: Dataset,
    /// Present when the columns were min-max rescaled on the way in.
    pub rescaling: Option<Vec<ColumnRange>>,
}

pub fn default_columns(d: usize) -> Vec<String> {
    (1..=d).map(|k| format!("x{k}")).collect()
}

pub fn read_csv(path: impl AsRef<Path>, rescale: bool) -> Result<Ingested> {
    parse_csv(File::open(path)?, rescale)
}

/// Rows and columns in error messages are 1-based positions in the file.
pub fn parse_csv(reader: impl Read, rescale: bool) -> Result<Ingested> {
    let (columns, has_header, points, rescaling) = parse_matrix(reader, rescale)?;
    Ok(Ingested { columns, has_header, dataset: Dataset::new(points)?, rescaling })
}

/// Points of a CSV file in `[0, 1]^d` without the two-point minimum of a
/// [`Dataset`]. A header-only file gives zero columns.
pub fn read_points(path: impl AsRef<Path>) -> Result<(Vec<String>, DMatrix<f64>)> {
    let (columns, _, points, _) = parse_matrix(File::open(path)?, false)?;
    Ok((columns, points))
}

type Parsed = (Vec<String>, bool, DMatrix<f64>, Option<Vec<ColumnRange>>);

fn parse_matrix(reader: impl Read, rescale: bool) -> Result<Parsed> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(reader);
    let mut records = rdr.records();
    let first = records.next().ok_or_else(|| Error::Malformed("empty file".into()))??;
    let has_header = first.iter().any(|c| c.parse::<f64>().is_err());
    let width = first.len();
    if width == 0 || (width == 1 && first[0].is_empty()) {
        return Err(Error::Malformed("first row has no cells".into()));
    }
    let columns = if has_header { first.iter().map(str::to_string).collect() } else { default_columns(width) };

    let mut values: Vec<f64> = Vec::new();
    let mut row = 1;
    let mut push_row = |record: &csv::StringRecord, row: usize| -> Result<()> {
        if record.len() != width {
            return Err(Error::Parse {
                row,
                col: record.len().min(width) + 1,
                reason: format!("expected {width} cells, found {}", record.len()),
            });
        }
        for (k, cell) in record.iter().enumerate() {
            let x: f64 = cell.parse().map_err(|_| Error::Parse {
                row,
                col: k + 1,
                reason: format!("not a number: {cell:?}"),
            })?;
            if !x.is_finite() {
                return Err(Error::Parse { row, col: k + 1, reason: format!("non-finite value {cell:?}") });
            }
            if !rescale && !(0.0..=1.0).contains(&x) {
                return Err(Error::Parse {
                    row,
                    col: k + 1,
                    reason: format!("value {x} is outside [0, 1]; pass --rescale to min-max scale the columns"),
                });
            }
            values.push(x);
        }
        Ok(())
    };
    if !has_header {
        push_row(&first, row)?;
    }
    for record in records {
        row += 1;
        push_row(&record?, row)?;
    }

    let n = values.len() / width;
    let mut points = DMatrix::from_vec(width, n, values);
    let rescaling = if rescale {
        let ranges: Vec<ColumnRange> = points.row_iter().map(|r| ColumnRange { min: r.min(), max: r.max() }).collect();
        for mut c in points.column_iter_mut() {
            for (k, x) in c.iter_mut().enumerate() {
                *x = ranges[k].rescale(*x);
            }
        }
        Some(ranges)
    } else {
        None
    };
    Ok((columns, has_header, points, rescaling))
}

pub fn write_csv(path: impl AsRef<Path>, columns: &[String], points: &DMatrix<f64>) -> Result<()> {
    let mut file = File::create(path)?;
    file.write_all(&csv_bytes(columns, points)?)?;
    Ok(())
}

/// The header row followed by one row per column of `points`.
pub fn csv_bytes(columns: &[String], points: &DMatrix<f64>) -> Result<Vec<u8>> {
    if columns.len() != points.nrows() {
        return Err(Error::param("columns", format!("{} names for {} coordinates", columns.len(), points.nrows())));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(columns)?;
    for c in points.column_iter() {
        w.write_record(c.iter().map(|x| x.to_string()))?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}
