//! Observed margins from data: a 2x2 table of counts, or one record per
//! subject with binary `E` and `D` columns.

use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::bounds::ObservedMargins;
use crate::error::{Error, Result};

/// Cell counts of the `D` by `E` table. JSON keys are `d1e1, d0e1, d1e0, d0e0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContingencyCounts {
    #[serde(rename = "d1e1")]
    pub n_d1_e1: u64,
    #[serde(rename = "d0e1")]
    pub n_d0_e1: u64,
    #[serde(rename = "d1e0")]
    pub n_d1_e0: u64,
    #[serde(rename = "d0e0")]
    pub n_d0_e0: u64,
}

impl ContingencyCounts {
    pub fn new(n_d1_e1: u64, n_d0_e1: u64, n_d1_e0: u64, n_d0_e0: u64) -> Self {
        ContingencyCounts {
            n_d1_e1,
            n_d0_e1,
            n_d1_e0,
            n_d0_e0,
        }
    }

    pub fn exposed(&self) -> u64 {
        self.n_d1_e1 + self.n_d0_e1
    }

    pub fn unexposed(&self) -> u64 {
        self.n_d1_e0 + self.n_d0_e0
    }

    pub fn total(&self) -> u64 {
        self.exposed() + self.unexposed()
    }

    fn record(&mut self, e: u8, d: u8) {
        match (e, d) {
            (1, 1) => self.n_d1_e1 += 1,
            (1, 0) => self.n_d0_e1 += 1,
            (0, 1) => self.n_d1_e0 += 1,
            _ => self.n_d0_e0 += 1,
        }
    }

    /// One `(e, d)` record per counted subject, in cell order.
    pub fn expand(&self) -> impl Iterator<Item = (u8, u8)> + '_ {
        let cells = [
            ((1u8, 1u8), self.n_d1_e1),
            ((1, 0), self.n_d0_e1),
            ((0, 1), self.n_d1_e0),
            ((0, 0), self.n_d0_e0),
        ];
        cells
            .into_iter()
            .flat_map(|(row, n)| std::iter::repeat_n(row, n as usize))
    }
}

pub fn margins_from_counts(c: &ContingencyCounts) -> Result<ObservedMargins> {
    if c.exposed() == 0 {
        return Err(Error::EmptyArm(1));
    }
    if c.unexposed() == 0 {
        return Err(Error::EmptyArm(0));
    }
    ObservedMargins::new(
        c.exposed() as f64 / c.total() as f64,
        c.n_d1_e0 as f64 / c.unexposed() as f64,
        c.n_d1_e1 as f64 / c.exposed() as f64,
    )
}

/// Tallies `(e, d)` records; row numbers in errors are zero-based.
pub fn counts_from_records<I, T>(rows: I) -> Result<ContingencyCounts>
where
    I: IntoIterator<Item = (T, T)>,
    T: TryInto<u8> + Copy + std::fmt::Display,
{
    let mut counts = ContingencyCounts::default();
    for (row, (e, d)) in rows.into_iter().enumerate() {
        let as_binary = |v: T| match v.try_into() {
            Ok(b @ (0 | 1)) => Some(b),
            _ => None,
        };
        match (as_binary(e), as_binary(d)) {
            (Some(e), Some(d)) => counts.record(e, d),
            _ => {
                return Err(Error::MalformedRow {
                    row,
                    detail: format!("expected binary (E, D), got ({e}, {d})"),
                })
            }
        }
    }
    Ok(counts)
}

pub fn margins_from_records<I, T>(rows: I) -> Result<ObservedMargins>
where
    I: IntoIterator<Item = (T, T)>,
    T: TryInto<u8> + Copy + std::fmt::Display,
{
    margins_from_counts(&counts_from_records(rows)?)
}

/// Reads a counts JSON object.
pub fn read_counts_json<R: Read>(reader: R) -> Result<ContingencyCounts> {
    Ok(serde_json::from_reader(reader)?)
}

fn parse_flag(field: &str, column: &str, row: usize) -> Result<u8> {
    match field {
        "0" => Ok(0),
        "1" => Ok(1),
        other => Err(Error::MalformedRow {
            row,
            detail: format!("column {column} must be \"0\" or \"1\", got {other:?}"),
        }),
    }
}

/// Reads a headed CSV with columns `E` and `D` (any case); other columns
/// are ignored. Data rows are numbered from 1.
pub fn read_records_csv<R: Read>(reader: R) -> Result<ContingencyCounts> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &'static str| {
        headers
            .iter()
            .position(|h| h.trim().eq_ignore_ascii_case(name))
            .ok_or(Error::MissingColumn(name))
    };
    let (e_col, d_col) = (find("E")?, find("D")?);

    let mut counts = ContingencyCounts::default();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::MalformedRow {
            row,
            detail: e.to_string(),
        })?;
        let field = |col: usize, name: &str| {
            record.get(col).ok_or_else(|| Error::MalformedRow {
                row,
                detail: format!("missing {name} value"),
            })
        };
        let e = parse_flag(field(e_col, "E")?, "E", row)?;
        let d = parse_flag(field(d_col, "D")?, "D", row)?;
        counts.record(e, d);
    }
    Ok(counts)
}
