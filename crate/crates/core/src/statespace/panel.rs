use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A calendar month.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct YearMonth {
    pub year: i32,
    /// 1..=12
    pub month: u32,
}

impl YearMonth {
    pub fn new(year: i32, month: u32) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::validation(format!("month {month} out of range")));
        }
        Ok(Self { year, month })
    }

    /// Months since January of year 0.
    pub fn ordinal(self) -> i64 {
        self.year as i64 * 12 + (self.month as i64 - 1)
    }

    pub fn from_ordinal(ord: i64) -> Self {
        Self {
            year: ord.div_euclid(12) as i32,
            month: (ord.rem_euclid(12) + 1) as u32,
        }
    }

    pub fn add_months(self, k: i64) -> Self {
        Self::from_ordinal(self.ordinal() + k)
    }

    /// Contiguous monthly index of length `n` starting at `self`.
    pub fn range(self, n: usize) -> Vec<YearMonth> {
        (0..n as i64).map(|k| self.add_months(k)).collect()
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for YearMonth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (y, m) = s
            .split_once('-')
            .ok_or_else(|| Error::validation(format!("expected YYYY-MM, got {s:?}")))?;
        let year = y
            .parse::<i32>()
            .map_err(|_| Error::validation(format!("bad year in {s:?}")))?;
        let month = m
            .parse::<u32>()
            .map_err(|_| Error::validation(format!("bad month in {s:?}")))?;
        YearMonth::new(year, month)
    }
}

/// Multivariate monthly observations. Missing entries are stored as NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationPanel {
    values: DMatrix<f64>,
    time_index: Vec<YearMonth>,
    names: Vec<String>,
}

impl ObservationPanel {
    /// Builds a panel from a `T_obs x p` matrix. Series names default to `y1..yp`.
    pub fn new(values: DMatrix<f64>, time_index: Vec<YearMonth>) -> Result<Self> {
        let names = (1..=values.ncols()).map(|i| format!("y{i}")).collect();
        Self::with_names(values, time_index, names)
    }

    pub fn with_names(
        values: DMatrix<f64>,
        time_index: Vec<YearMonth>,
        names: Vec<String>,
    ) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::validation(
                "panel must have at least one row and one series",
            ));
        }
        if time_index.len() != values.nrows() {
            return Err(Error::validation(format!(
                "time index has {} entries but panel has {} rows",
                time_index.len(),
                values.nrows()
            )));
        }
        if names.len() != values.ncols() {
            return Err(Error::validation("one name per series is required"));
        }
        for w in time_index.windows(2) {
            if w[1].ordinal() != w[0].ordinal() + 1 {
                return Err(Error::validation(format!(
                    "time index must be contiguous monthly: {} followed by {}",
                    w[0], w[1]
                )));
            }
        }
        if values.iter().any(|v| v.is_infinite()) {
            return Err(Error::validation("panel contains infinite values"));
        }
        for j in 0..values.ncols() {
            if values.column(j).iter().all(|v| v.is_nan()) {
                return Err(Error::validation(format!(
                    "series {} has no observed entries",
                    names[j]
                )));
            }
        }
        Ok(Self {
            values,
            time_index,
            names,
        })
    }

    /// Single series starting at `start`.
    pub fn from_series(x: &[f64], start: YearMonth) -> Result<Self> {
        Self::new(
            DMatrix::from_column_slice(x.len(), 1, x),
            start.range(x.len()),
        )
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn time_index(&self) -> &[YearMonth] {
        &self.time_index
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n_obs(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_series(&self) -> usize {
        self.values.ncols()
    }

    pub fn series(&self, j: usize) -> Vec<f64> {
        self.values.column(j).iter().copied().collect()
    }

    pub fn has_missing(&self) -> bool {
        self.values.iter().any(|v| v.is_nan())
    }

    /// Panel holding only the listed series.
    pub fn select(&self, cols: &[usize]) -> Result<Self> {
        let values = DMatrix::from_fn(self.n_obs(), cols.len(), |i, j| self.values[(i, cols[j])]);
        let names = cols.iter().map(|&c| self.names[c].clone()).collect();
        Self::with_names(values, self.time_index.clone(), names)
    }
}
