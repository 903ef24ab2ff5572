//! Tests of individual FS-BSM components.
//!
//! The level and seasonal tests set one variance block of the fitted parameters
//! to zero, keep the remaining (nuisance) parameters at their values estimated
//! under the alternative, and apply the white-noise statistic to the
//! standardized one-step prediction errors of that null model. Under the null
//! these errors are i.i.d. N(0, 1), so the white-noise critical values apply.
//!
//! The slope test assumes a fixed level (`sigma2_eta = 0`) and applies the IRW
//! statistic to the observed series minus its smoothed seasonal, whose OLS
//! residuals on a constant and time are white noise under the null. Prediction
//! errors are unsuitable here: the null filter re-estimates the trend as it
//! goes, which strips one order of integration from a stochastic slope and
//! leaves the doubly cumulated statistic with little power.

use serde::{Deserialize, Serialize};

use super::seasonal::{seasonal_cvm_test, SeasonalTarget};
use super::trend::{irw_test, rw_test};
use super::TestResult;
use crate::statespace::{kalman_filter, ObservationPanel};
use crate::structural::{build_fsbsm, extract_components, FsBsmParams, VarianceBlock};
use crate::Result;

/// The four component tests for one series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentTests {
    /// Level variance zero (RWD, or RW when tested without drift).
    pub rwd: TestResult,
    /// Slope variance zero.
    pub irw: TestResult,
    /// Group-I (`j = 1`) seasonal variance zero.
    pub seasonal_i: TestResult,
    /// Group-II (`j = 2..6`) seasonal variance zero.
    pub seasonal_ii: TestResult,
}

fn null_innovations(
    params: &FsBsmParams,
    data: &ObservationPanel,
    block: VarianceBlock,
) -> Result<Vec<Vec<f64>>> {
    let spec = build_fsbsm(&params.with_zeroed(block))?;
    let filt = kalman_filter(&spec, data)?;
    let mut out = vec![Vec::new(); params.dim()];
    for (t, w) in filt.standardized_innovations(true) {
        // only fully observed steps keep a fixed meaning per series
        if filt.observed[t].len() == params.dim() {
            for (i, v) in w.iter().enumerate() {
                out[i].push(*v);
            }
        }
    }
    Ok(out)
}

fn deseasonalized(params: &FsBsmParams, data: &ObservationPanel) -> Result<Vec<Vec<f64>>> {
    let c = extract_components(&build_fsbsm(params)?, params, data)?;
    let y = data.values();
    Ok((0..params.dim())
        .map(|i| {
            (0..data.n_obs())
                .filter(|&t| !y[(t, i)].is_nan())
                .map(|t| y[(t, i)] - c.seasonal[(t, i)])
                .collect()
        })
        .collect())
}

/// RWD (or RW), IRW, H0I and H0II tests for every series of `data`.
pub fn component_tests(
    params: &FsBsmParams,
    data: &ObservationPanel,
    with_drift: bool,
) -> Result<Vec<ComponentTests>> {
    let level = null_innovations(params, data, VarianceBlock::Level)?;
    let slope = deseasonalized(params, data)?;
    let s1 = null_innovations(params, data, VarianceBlock::SeasonalI)?;
    let s2 = null_innovations(params, data, VarianceBlock::SeasonalII)?;
    (0..params.dim())
        .map(|i| {
            Ok(ComponentTests {
                rwd: rw_test(&level[i], with_drift)?,
                irw: irw_test(&slope[i])?,
                seasonal_i: seasonal_cvm_test(&s1[i], SeasonalTarget::Frequency(1))?,
                seasonal_ii: seasonal_cvm_test(&s2[i], SeasonalTarget::GroupII)?,
            })
        })
        .collect()
}
