//! Deterministic trend and seasonality tests, residual diagnostics and
//! Monte Carlo critical values.
//!
//! The trend tests are Cramér-von Mises type statistics on cumulated residuals:
//! RW (level variance zero, no drift), RWD (level variance zero around a linear
//! trend) and IRW (slope variance zero). The seasonal statistics test whether a
//! seasonal harmonic, or the group of harmonics `j = 2..6`, is deterministic.
//! Under their nulls all statistics are location and scale invariant, so null
//! distributions are simulated from standard Gaussian white noise.

mod component;
mod diagnostics;
mod montecarlo;
mod seasonal;
mod tables;
mod trend;

use serde::{Deserialize, Serialize};

pub use component::{component_tests, ComponentTests};
pub use diagnostics::{box_pierce, moment_tests, MomentSummary, BOX_PIERCE_LAGS};
pub use montecarlo::{
    mc_critical_values, null_statistic, null_statistic_names, CvTable, NullStatistic, MC_LEVELS,
};
pub use seasonal::{seasonal_cvm_test, seasonal_statistic, SeasonalTarget, MIN_SEASONAL_LEN};
pub use tables::{
    cvm_asymptotic, irw_finite_sample, rwd_asymptotic, rwd_finite_sample, seasonal_finite_sample,
    FINITE_SIZES, LEVELS,
};
pub use trend::{irw_statistic, irw_test, rw_statistic, rw_test, MIN_TREND_LEN};

/// A critical value at a given significance level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalValue {
    pub level: f64,
    pub value: f64,
}

/// Outcome of an upper-tail test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub name: String,
    pub statistic: f64,
    /// Sorted by decreasing significance level (10%, 5%, 1%).
    pub critical_values: Vec<CriticalValue>,
    pub p_value: Option<f64>,
    pub df: Option<usize>,
    pub decision_at_5pct: bool,
}

impl TestResult {
    pub(crate) fn new(
        name: &str,
        statistic: f64,
        critical_values: Vec<CriticalValue>,
        df: Option<usize>,
    ) -> Self {
        let mut r = Self {
            name: name.to_string(),
            statistic,
            critical_values,
            p_value: None,
            df,
            decision_at_5pct: false,
        };
        r.decision_at_5pct = r.rejects_at(0.05).unwrap_or(false);
        r
    }

    pub fn critical_value(&self, level: f64) -> Option<f64> {
        self.critical_values
            .iter()
            .find(|c| (c.level - level).abs() < 1e-12)
            .map(|c| c.value)
    }

    pub fn rejects_at(&self, level: f64) -> Option<bool> {
        self.critical_value(level).map(|cv| self.statistic > cv)
    }

    /// Replaces the built-in critical values with those of a simulated table and
    /// attaches the Monte Carlo p-value.
    pub fn with_table(mut self, table: &CvTable, n: usize) -> Self {
        self.critical_values = table.critical_values(n);
        self.p_value = Some(table.p_value(n, self.statistic));
        self.decision_at_5pct = self.rejects_at(0.05).unwrap_or(false);
        self
    }

    /// `*`, `**` or `***` for rejection at 10%, 5% or 1%.
    pub fn stars(&self) -> &'static str {
        significance_stars(self.statistic, &self.critical_values)
    }
}

/// Stars for an upper-tail statistic given its critical values.
pub fn significance_stars(statistic: f64, cvs: &[CriticalValue]) -> &'static str {
    let beats = |lvl: f64| {
        cvs.iter()
            .any(|c| (c.level - lvl).abs() < 1e-12 && statistic > c.value)
    };
    if beats(0.01) {
        "***"
    } else if beats(0.05) {
        "**"
    } else if beats(0.10) {
        "*"
    } else {
        ""
    }
}
