use nalgebra::{DMatrix, DVector};

use super::{FilterOutput, ObservationPanel, SsmSpec};
use crate::linalg::symmetrize;
use crate::{Error, Result};

/// Fixed-interval smoothed states.
#[derive(Debug, Clone)]
pub struct SmootherOutput {
    /// `E[a_t | y_1..y_n]`
    pub smoothed_mean: Vec<DVector<f64>>,
    /// `Var[a_t | y_1..y_n]`
    pub smoothed_cov: Vec<DMatrix<f64>>,
}

/// Fixed-interval smoother.
///
/// Uses the backward recursions
///
/// ```text
/// r_{t-1} = Z'F^{-1}v_t + L_t' T' r_t
/// N_{t-1} = M_t + L_t' T' N_t T L_t,   M_t = Z'F^{-1}Z,   L_t' = I - M_t P_t
/// ```
///
/// and the filtered-form update `a_{t|n} = a_{t|t} + P_{t|t} T' r_t`,
/// `V_t = P_{t|t} - P_{t|t} T' N_t T P_{t|t}`. No state covariance is
/// inverted, so singular predicted covariances are fine. At the last step
/// `r = 0, N = 0` and the smoothed moments are the filtered ones.
pub fn kalman_smoother(
    spec: &SsmSpec,
    data: &ObservationPanel,
    filt: &FilterOutput,
) -> Result<SmootherOutput> {
    let n = data.n_obs();
    let m = spec.state_dim();
    if data.n_series() != spec.obs_dim() {
        return Err(Error::validation("data width does not match the model"));
    }
    if filt.len() != n || filt.transfer.len() != n {
        return Err(Error::validation(format!(
            "filter output covers {} steps but data has {n}",
            filt.len()
        )));
    }
    if filt.filtered_mean.first().map(|a| a.len()) != Some(m) {
        return Err(Error::validation(
            "filter output state dimension does not match the model",
        ));
    }

    let mut smoothed_mean = vec![DVector::zeros(m); n];
    let mut smoothed_cov = vec![DMatrix::zeros(m, m); n];

    let last = n - 1;
    smoothed_mean[last] = filt.filtered_mean[last].clone();
    smoothed_cov[last] = filt.filtered_cov[last].clone();

    let tmat = spec.t();
    let mut r = DVector::<f64>::zeros(m);
    let mut nmat = DMatrix::<f64>::zeros(m, m);
    for t in (0..last).rev() {
        // fold in step s = t + 1
        let s = t + 1;
        let lt = &filt.transfer[s];
        r = &filt.info_vec[s] + lt * tmat.tr_mul(&r);
        let b = tmat.tr_mul(&nmat) * tmat;
        nmat = &filt.info_mat[s] + lt * b * lt.transpose();
        symmetrize(&mut nmat);

        let pf = &filt.filtered_cov[t];
        smoothed_mean[t] = &filt.filtered_mean[t] + pf * tmat.tr_mul(&r);
        let bt = tmat.tr_mul(&nmat) * tmat;
        let mut v = pf - pf * bt * pf;
        symmetrize(&mut v);
        smoothed_cov[t] = v;
    }
    Ok(SmootherOutput {
        smoothed_mean,
        smoothed_cov,
    })
}
