//! Cramér-von Mises tests of deterministic seasonality.
//!
//! The series is regressed on a constant and the eleven monthly trigonometric
//! terms. For harmonic `j < 6` the statistic is
//!
//! ```text
//! (2 / (T^2 s2)) sum_t [ (sum_{i<=t} e_i cos(lambda_j i))^2 + (sum_{i<=t} e_i sin(lambda_j i))^2 ]
//! ```
//!
//! and for `j = 6` only the cosine term enters, with factor 1. Under a
//! deterministic seasonal the statistic is asymptotically CvM with 2 (or 1)
//! degrees of freedom; the group-II statistic sums `j = 2..6` and has 9.
//! Critical values come from finite-sample tables interpolated in `1/T`,
//! since the asymptotic values are noticeably too small below `T = 500`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::tables::seasonal_finite_sample;
use super::TestResult;
use crate::linalg::ols;
use crate::structural::{frequency, HARMONICS};
use crate::{Error, Result};

/// Shortest series accepted by the seasonal tests (four years).
pub const MIN_SEASONAL_LEN: usize = 48;

/// Which seasonal component is tested.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeasonalTarget {
    /// A single harmonic `j` in `1..=6`.
    Frequency(usize),
    /// Harmonics `j = 2..6` jointly.
    GroupII,
}

impl SeasonalTarget {
    pub fn harmonics(self) -> Vec<usize> {
        match self {
            SeasonalTarget::Frequency(j) => vec![j],
            SeasonalTarget::GroupII => (2..=HARMONICS).collect(),
        }
    }

    pub fn df(self) -> usize {
        self.harmonics()
            .iter()
            .map(|&j| if j == HARMONICS { 1 } else { 2 })
            .sum()
    }

    fn validate(self) -> Result<()> {
        match self {
            SeasonalTarget::Frequency(j) if !(1..=HARMONICS).contains(&j) => {
                Err(Error::validation(format!(
                    "seasonal frequency index must be in 1..=6, got {j}"
                )))
            }
            _ => Ok(()),
        }
    }

    pub fn label(self) -> String {
        match self {
            SeasonalTarget::Frequency(j) => format!("seasonal-{j}"),
            SeasonalTarget::GroupII => "seasonal-ii".to_string(),
        }
    }
}

fn seasonal_design(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, 2 * HARMONICS, |t, c| {
        let i = (t + 1) as f64;
        match c {
            0 => 1.0,
            c if c <= HARMONICS => (frequency(c) * i).cos(),
            c => (frequency(c - HARMONICS) * i).sin(),
        }
    })
}

/// Statistic for `target` on series `x`.
pub fn seasonal_statistic(x: &[f64], target: SeasonalTarget) -> Result<f64> {
    target.validate()?;
    if x.len() < MIN_SEASONAL_LEN {
        return Err(Error::validation(format!(
            "seasonal tests need at least {MIN_SEASONAL_LEN} observations, got {}",
            x.len()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::validation("seasonal tests need finite observations"));
    }
    let n = x.len();
    let (_, e) = ols(&seasonal_design(n), x)?;
    let ss: f64 = e.iter().map(|v| v * v).sum();
    let raw: f64 = x.iter().map(|v| v * v).sum();
    if ss <= 1e-20 * raw.max(f64::MIN_POSITIVE) {
        return Err(Error::degenerate(
            "series is exactly deterministic seasonal; residual variance is zero",
        ));
    }
    let s2 = ss / n as f64;
    let mut total = 0.0;
    for j in target.harmonics() {
        let lam = frequency(j);
        let (mut c, mut s, mut acc) = (0.0, 0.0, 0.0);
        for (t, &v) in e.iter().enumerate() {
            let i = (t + 1) as f64;
            c += v * (lam * i).cos();
            if j < HARMONICS {
                s += v * (lam * i).sin();
                acc += c * c + s * s;
            } else {
                acc += c * c;
            }
        }
        let factor = if j < HARMONICS { 2.0 } else { 1.0 };
        total += factor * acc;
    }
    Ok(total / ((n * n) as f64 * s2))
}

/// Seasonal CvM test against finite-sample critical values.
pub fn seasonal_cvm_test(x: &[f64], target: SeasonalTarget) -> Result<TestResult> {
    let stat = seasonal_statistic(x, target)?;
    let df = target.df();
    let harmonic = match target {
        SeasonalTarget::Frequency(j) => Some(j),
        SeasonalTarget::GroupII => None,
    };
    let cvs = seasonal_finite_sample(harmonic, x.len()).expect("validated target");
    Ok(TestResult::new(&target.label(), stat, cvs, Some(df)))
}
