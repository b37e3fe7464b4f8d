//! Wide CSV input: a header `id,t1,...,tk` followed by one row per subject.

use std::path::Path;

use crate::error::{Error, Result};
use crate::fungeom::{SampledCurve, TimeGrid};
use crate::smooth::RawRecord;

/// Parsed table. Empty cells are `None`.
#[derive(Clone, Debug, PartialEq)]
pub struct Ingested {
    pub ids: Vec<String>,
    /// Header times, rescaled into `[0, 1]` when needed.
    pub times: Vec<f64>,
    pub values: Vec<Vec<Option<f64>>>,
    /// Set when the header times had to be rescaled.
    pub rescaled: bool,
}

impl Ingested {
    /// One record per row holding its observed cells.
    pub fn records(&self) -> Result<Vec<RawRecord<f64>>> {
        self.ids
            .iter()
            .zip(&self.values)
            .map(|(id, row)| {
                let (t, y): (Vec<f64>, Vec<f64>) = self
                    .times
                    .iter()
                    .zip(row)
                    .filter_map(|(t, v)| v.map(|v| (*t, v)))
                    .unzip();
                RawRecord::new(id.clone(), t, y)
            })
            .collect()
    }

    /// Rows as curves when the header is a uniform grid and no cell is
    /// missing.
    pub fn curves(&self) -> Option<Vec<SampledCurve<f64>>> {
        let grid = TimeGrid::<f64>::uniform(self.times.len()).ok()?;
        let uniform = grid.points().iter().zip(&self.times).all(|(a, b)| (a - b).abs() <= 1e-9);
        if !uniform {
            return None;
        }
        self.values
            .iter()
            .map(|row| {
                let v: Option<Vec<f64>> = row.iter().copied().collect();
                SampledCurve::new(grid.clone(), v?).ok()
            })
            .collect()
    }
}

fn parse_cell(cell: &str, line: usize, column: usize) -> Result<Option<f64>> {
    let cell = cell.trim();
    if cell.is_empty() {
        return Ok(None);
    }
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        _ => Err(Error::Parse {
            line,
            column,
            message: format!("not a finite number: {cell:?}"),
        }),
    }
}

pub fn ingest_csv(path: impl AsRef<Path>) -> Result<Ingested> {
    let path = path.as_ref();
    let text = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let text = String::from_utf8(text).map_err(|e| Error::io(path, format!("not UTF-8: {e}")))?;
    parse_csv(&text)
}

pub fn parse_csv(text: &str) -> Result<Ingested> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut rows = reader.records();
    let no_rows = || Error::Data("no data rows".into());
    let header = match rows.next() {
        Some(r) => r.map_err(csv_error)?,
        None => return Err(no_rows()),
    };
    if header.len() < 2 {
        return Err(Error::Parse {
            line: 1,
            column: 2,
            message: "header needs an id column and at least one time".into(),
        });
    }
    let mut times = Vec::with_capacity(header.len() - 1);
    for (j, cell) in header.iter().enumerate().skip(1) {
        let t = parse_cell(cell, 1, j + 1)?.ok_or_else(|| Error::Parse {
            line: 1,
            column: j + 1,
            message: "empty header time".into(),
        })?;
        if let Some(prev) = times.last() {
            if t <= *prev {
                return Err(Error::Parse {
                    line: 1,
                    column: j + 1,
                    message: format!("header times must increase ({t} after {prev})"),
                });
            }
        }
        times.push(t);
    }
    let (lo, hi) = (times[0], times[times.len() - 1]);
    let rescaled = lo < 0.0 || hi > 1.0;
    if rescaled {
        log::warn!("header times span [{lo}, {hi}]; rescaling to [0, 1]");
        times = times.iter().map(|t| (t - lo) / (hi - lo)).collect();
    }
    let mut ids = Vec::new();
    let mut values = Vec::new();
    for row in rows {
        let row = row.map_err(csv_error)?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        if row.len() == 1 && row[0].trim().is_empty() {
            continue;
        }
        if row.len() != times.len() + 1 {
            return Err(Error::Parse {
                line,
                column: row.len().min(times.len() + 1) + 1,
                message: format!("expected {} fields, found {}", times.len() + 1, row.len()),
            });
        }
        let vals = row
            .iter()
            .enumerate()
            .skip(1)
            .map(|(j, c)| parse_cell(c, line, j + 1))
            .collect::<Result<Vec<_>>>()?;
        ids.push(row[0].trim().to_string());
        values.push(vals);
    }
    if ids.is_empty() {
        return Err(no_rows());
    }
    Ok(Ingested {
        ids,
        times,
        values,
        rescaled,
    })
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::Parse {
        line,
        column: 0,
        message: e.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_rows() {
        let d = parse_csv("id,0,0.5,1\na,1,2,3\nb,4,5,6\n").unwrap();
        let c = d.curves().unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c[1].values(), &[4.0, 5.0, 6.0]);
        assert_eq!(d.ids, vec!["a", "b"]);
    }

    #[test]
    fn missing_cells_are_unobserved() {
        let d = parse_csv("id,0,0.5,1\na,1,,3\n").unwrap();
        assert!(d.curves().is_none());
        let r = d.records().unwrap();
        assert_eq!(r[0].times, vec![0.0, 1.0]);
        assert_eq!(r[0].observations, vec![1.0, 3.0]);
    }

    #[test]
    fn rescales_header_times() {
        let d = parse_csv("id,1,2,5\na,1,2,3\n").unwrap();
        assert!(d.rescaled);
        assert_eq!(d.times, vec![0.0, 0.25, 1.0]);
        assert!(d.curves().is_none());
    }

    #[test]
    fn diagnostics() {
        assert_eq!(parse_csv("").unwrap_err(), Error::Data("no data rows".into()));
        assert_eq!(parse_csv("id,0,1\n").unwrap_err(), Error::Data("no data rows".into()));
        match parse_csv("id,0,0.5,0.5\na,1,2,3\n").unwrap_err() {
            Error::Parse { line: 1, column: 4, .. } => {}
            e => panic!("{e:?}"),
        }
        match parse_csv("id,0,0.5,1\na,1,2,3\nb,1,2\n").unwrap_err() {
            Error::Parse { line: 3, .. } => {}
            e => panic!("{e:?}"),
        }
        match parse_csv("id,0,0.5,1\na,1,x,3\n").unwrap_err() {
            Error::Parse { line: 2, column: 3, .. } => {}
            e => panic!("{e:?}"),
        }
    }
}
