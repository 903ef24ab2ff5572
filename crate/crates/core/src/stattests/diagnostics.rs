//! Box-Pierce portmanteau test and moment-based normality tests.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use super::tables::LEVELS;
use super::{CriticalValue, TestResult};
use crate::{Error, Result};

/// Default number of autocorrelations in the portmanteau test.
pub const BOX_PIERCE_LAGS: usize = 12;

/// Below this length the HAC variance uses no autocovariance terms.
const HAC_MIN_LEN: usize = 100;

/// `Q = T sum_{k<=lags} rho_k^2`, compared with chi-squared(`lags`).
pub fn box_pierce(x: &[f64], lags: usize) -> Result<TestResult> {
    if lags == 0 {
        return Err(Error::validation("Box-Pierce needs at least one lag"));
    }
    if x.len() <= lags {
        return Err(Error::validation(format!(
            "Box-Pierce with {lags} lags needs more than {lags} observations"
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::validation("Box-Pierce needs finite observations"));
    }
    let n = x.len();
    let m = x.iter().sum::<f64>() / n as f64;
    let d: Vec<f64> = x.iter().map(|v| v - m).collect();
    let c0: f64 = d.iter().map(|v| v * v).sum();
    if c0 == 0.0 {
        return Err(Error::degenerate(
            "series is constant; autocorrelations undefined",
        ));
    }
    let q = n as f64
        * (1..=lags)
            .map(|k| {
                let ck: f64 = d[k..].iter().zip(&d[..n - k]).map(|(a, b)| a * b).sum();
                (ck / c0).powi(2)
            })
            .sum::<f64>();
    let chi = ChiSquared::new(lags as f64).expect("positive df");
    let cvs = LEVELS
        .iter()
        .map(|&level| CriticalValue {
            level,
            value: chi.inverse_cdf(1.0 - level),
        })
        .collect();
    let mut r = TestResult::new(&format!("Q({lags})"), q, cvs, Some(lags));
    r.p_value = Some(chi.sf(q));
    Ok(r)
}

/// Sample moments and serial-correlation-robust skewness/kurtosis tests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (divisor `n - 1`).
    pub sd: f64,
    pub skewness: f64,
    pub skewness_stat: f64,
    pub skewness_p: f64,
    /// Raw (not excess) kurtosis; 3 under normality.
    pub kurtosis: f64,
    pub kurtosis_stat: f64,
    pub kurtosis_p: f64,
    /// Joint statistic `skewness_stat^2 + kurtosis_stat^2`.
    pub bn_stat: f64,
    pub bn_p: f64,
    /// Bartlett truncation lag used for the long-run variances.
    pub hac_lag: usize,
}

fn hac_lag(n: usize) -> usize {
    if n < HAC_MIN_LEN {
        0
    } else {
        (4.0 * (n as f64 / 100.0).powf(2.0 / 9.0)).floor() as usize
    }
}

/// Bartlett-kernel long-run covariance of the rows of `z` (`n x k`, mean zero).
fn long_run_cov(z: &DMatrix<f64>, lag: usize) -> DMatrix<f64> {
    let n = z.nrows();
    let gamma = |j: usize| -> DMatrix<f64> {
        let a = z.rows(j, n - j);
        let b = z.rows(0, n - j);
        a.transpose() * b / n as f64
    };
    let mut omega = gamma(0);
    for j in 1..=lag.min(n - 1) {
        let w = 1.0 - j as f64 / (lag as f64 + 1.0);
        let g = gamma(j);
        omega += (&g + g.transpose()) * w;
    }
    omega
}

/// Skewness, kurtosis and their joint normality test with long-run variances
/// estimated by a Bartlett kernel of lag `floor(4 (T/100)^(2/9))`.
pub fn moment_tests(x: &[f64]) -> Result<MomentSummary> {
    let n = x.len();
    if n < 8 {
        return Err(Error::validation(format!(
            "moment tests need at least 8 observations, got {n}"
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::validation("moment tests need finite observations"));
    }
    let nf = n as f64;
    let mean = x.iter().sum::<f64>() / nf;
    let d: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let m2 = d.iter().map(|v| v * v).sum::<f64>() / nf;
    let scale = x.iter().map(|v| v * v).sum::<f64>() / nf;
    if m2 <= 1e-24 * scale.max(f64::MIN_POSITIVE) || m2 == 0.0 {
        return Err(Error::degenerate("series has zero variance"));
    }
    let m3 = d.iter().map(|v| v.powi(3)).sum::<f64>() / nf;
    let m4 = d.iter().map(|v| v.powi(4)).sum::<f64>() / nf;
    let sigma = m2.sqrt();
    let skewness = m3 / sigma.powi(3);
    let kurtosis = m4 / (m2 * m2);
    let lag = hac_lag(n);

    let zs = DMatrix::from_fn(n, 2, |t, c| if c == 0 { d[t].powi(3) - m3 } else { d[t] });
    let alpha = DVector::from_vec(vec![1.0, -3.0 * m2]);
    let vs = (alpha.transpose() * long_run_cov(&zs, lag) * &alpha)[0] / m2.powi(3);

    let zk = DMatrix::from_fn(n, 3, |t, c| match c {
        0 => d[t].powi(4) - m4,
        1 => d[t].powi(3) - m3,
        _ => d[t] * d[t] - m2,
    });
    let beta = DVector::from_vec(vec![1.0, -4.0 * m3, -6.0 * m2]);
    let vk = (beta.transpose() * long_run_cov(&zk, lag) * &beta)[0] / m2.powi(4);

    if !(vs > 0.0 && vk > 0.0) {
        return Err(Error::degenerate(
            "moment test long-run variance is not positive",
        ));
    }
    let skewness_stat = nf.sqrt() * skewness / vs.sqrt();
    let kurtosis_stat = nf.sqrt() * (kurtosis - 3.0) / vk.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let bn_stat = skewness_stat.powi(2) + kurtosis_stat.powi(2);
    let chi2 = ChiSquared::new(2.0).expect("positive df");

    Ok(MomentSummary {
        n,
        mean,
        sd: (m2 * nf / (nf - 1.0)).sqrt(),
        skewness,
        skewness_stat,
        skewness_p: normal.sf(skewness_stat),
        kurtosis,
        kurtosis_stat,
        kurtosis_p: normal.sf(kurtosis_stat),
        bn_stat,
        bn_p: chi2.sf(bn_stat),
        hac_lag: lag,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lag_rule() {
        assert_eq!(hac_lag(50), 0);
        assert_eq!(hac_lag(100), 4);
        assert_eq!(hac_lag(1080), 6);
    }

    #[test]
    fn symmetric_data() {
        let x: Vec<f64> = (0..200)
            .map(|i| ((i * 37 % 101) as f64).powf(1.3))
            .collect();
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let a = moment_tests(&x).unwrap();
        let b = moment_tests(&neg).unwrap();
        assert!((a.kurtosis - b.kurtosis).abs() < 1e-12);
        assert!((a.skewness + b.skewness).abs() < 1e-12);
    }

    #[test]
    fn box_pierce_hand_value() {
        // alternating series: rho_1 = -(n-1)/n exactly for demeaned +-1
        let x: Vec<f64> = (0..10)
            .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        let r = box_pierce(&x, 1).unwrap();
        assert!((r.statistic - 10.0 * 0.81).abs() < 1e-12);
        assert!(box_pierce(&x, 10).is_err());
        assert!(matches!(
            box_pierce(&[2.0; 20], 3),
            Err(Error::Degenerate(_))
        ));
    }
}
