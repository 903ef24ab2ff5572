//! RW, RWD and IRW statistics.
//!
//! With `e_t` the residuals from regressing the series on a constant (RW) or a
//! constant and linear time (RWD, IRW) and `s2 = sum e_t^2 / T`:
//!
//! ```text
//! RW, RWD:  (1 / (T^2 s2)) sum_t (sum_{r<=t} e_r)^2
//! IRW:      (1 / (T^4 s2)) sum_t (sum_{s<=t} sum_{r<=s} e_r)^2
//! ```

use super::tables::{cvm_asymptotic, irw_finite_sample, rwd_asymptotic};
use super::TestResult;
use crate::{Error, Result};

/// Shortest series accepted by the trend tests.
pub const MIN_TREND_LEN: usize = 20;

/// Residual sums of squares below this fraction of the centred sum of
/// squares (or of the raw sum of squares for constant input) count as zero.
const DEGENERATE_REL: f64 = 1e-20;

fn check(x: &[f64]) -> Result<()> {
    if x.len() < MIN_TREND_LEN {
        return Err(Error::validation(format!(
            "trend tests need at least {MIN_TREND_LEN} observations, got {}",
            x.len()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::validation("trend tests need finite observations"));
    }
    Ok(())
}

fn scale_ref(x: &[f64]) -> f64 {
    let ss: f64 = x.iter().map(|v| v * v).sum();
    ss.max(f64::MIN_POSITIVE)
}

fn demean(x: &[f64]) -> Result<Vec<f64>> {
    let m = x.iter().sum::<f64>() / x.len() as f64;
    let e: Vec<f64> = x.iter().map(|v| v - m).collect();
    let ss: f64 = e.iter().map(|v| v * v).sum();
    if ss <= DEGENERATE_REL * scale_ref(x) {
        return Err(Error::degenerate(
            "series is constant; residual variance is zero",
        ));
    }
    Ok(e)
}

fn detrend(x: &[f64]) -> Result<Vec<f64>> {
    let n = x.len() as f64;
    let tbar = (n + 1.0) / 2.0;
    let xbar = x.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, v) in x.iter().enumerate() {
        let dt = (i + 1) as f64 - tbar;
        sxy += dt * (v - xbar);
        sxx += dt * dt;
    }
    let b = sxy / sxx;
    let e: Vec<f64> = x
        .iter()
        .enumerate()
        .map(|(i, v)| v - xbar - b * ((i + 1) as f64 - tbar))
        .collect();
    let ss: f64 = e.iter().map(|v| v * v).sum();
    let centred: f64 = x.iter().map(|v| (v - xbar) * (v - xbar)).sum();
    if ss <= DEGENERATE_REL * centred.max(scale_ref(x)) || ss == 0.0 {
        return Err(Error::degenerate(
            "series is exactly linear in time; residual variance is zero",
        ));
    }
    Ok(e)
}

fn cumulated_cvm(e: &[f64], levels: usize) -> f64 {
    let n = e.len() as f64;
    let s2 = e.iter().map(|v| v * v).sum::<f64>() / n;
    let mut acc = vec![0.0; levels];
    let mut total = 0.0;
    for &v in e {
        let mut carry = v;
        for a in acc.iter_mut() {
            *a += carry;
            carry = *a;
        }
        total += carry * carry;
    }
    total / (n.powi(2 * levels as i32) * s2)
}

/// RW (`with_drift = false`) or RWD (`with_drift = true`) statistic.
pub fn rw_statistic(x: &[f64], with_drift: bool) -> Result<f64> {
    check(x)?;
    let e = if with_drift { detrend(x)? } else { demean(x)? };
    Ok(cumulated_cvm(&e, 1))
}

/// IRW statistic with double cumulation of detrended residuals.
pub fn irw_statistic(x: &[f64]) -> Result<f64> {
    check(x)?;
    let e = detrend(x)?;
    Ok(cumulated_cvm(&e, 2))
}

/// RW or RWD test against the asymptotic critical values.
pub fn rw_test(x: &[f64], with_drift: bool) -> Result<TestResult> {
    let stat = rw_statistic(x, with_drift)?;
    Ok(if with_drift {
        TestResult::new("RWD", stat, rwd_asymptotic(), None)
    } else {
        TestResult::new(
            "RW",
            stat,
            cvm_asymptotic(1).expect("df 1 tabulated"),
            Some(1),
        )
    })
}

/// IRW test against the built-in finite-sample table, interpolated in `1/T`.
pub fn irw_test(x: &[f64]) -> Result<TestResult> {
    let stat = irw_statistic(x)?;
    Ok(TestResult::new(
        "IRW",
        stat,
        irw_finite_sample(x.len()),
        None,
    ))
}
