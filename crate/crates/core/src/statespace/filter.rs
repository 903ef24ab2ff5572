use nalgebra::{DMatrix, DVector};

use super::diffuse::{exact_diffuse_loglik, is_diagonal, ldl};
use super::{ObservationPanel, SparseRows, SsmSpec};
use crate::linalg::symmetrize;
use crate::{Error, Result};

/// Prior variance given to diffuse states.
pub const DIFFUSE_KAPPA: f64 = 1e7;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Output of [`kalman_filter`]. Sequences are indexed by time step `0..T_obs`.
#[derive(Debug, Clone)]
pub struct FilterOutput {
    /// `a_{t|t-1}`
    pub predicted_mean: Vec<DVector<f64>>,
    /// `P_{t|t-1}`
    pub predicted_cov: Vec<DMatrix<f64>>,
    /// `a_{t|t}`
    pub filtered_mean: Vec<DVector<f64>>,
    /// `P_{t|t}`
    pub filtered_cov: Vec<DMatrix<f64>>,
    /// `v_t` over the observed entries at `t`; `None` when nothing was observed.
    pub innovations: Vec<Option<DVector<f64>>>,
    /// `F_t` matching `innovations`.
    pub innovation_cov: Vec<Option<DMatrix<f64>>>,
    /// Indices of the observed series at each step.
    pub observed: Vec<Vec<usize>>,
    /// Whether step `t` fell inside the diffuse burn-in (excluded from `loglik`).
    pub burn_in: Vec<bool>,
    pub loglik: f64,
    /// Number of scalar innovations excluded from `loglik` by the diffuse burn-in.
    pub n_diffuse_skipped: usize,
    /// Number of scalar innovations that contribute to `loglik`.
    pub n_loglik_obs: usize,
    /// `Z_t' F_t^{-1} v_t`, used by the smoother.
    pub(crate) info_vec: Vec<DVector<f64>>,
    /// `Z_t' F_t^{-1} Z_t`, used by the smoother.
    pub(crate) info_mat: Vec<DMatrix<f64>>,
    /// `I - Z_t' F_t^{-1} Z_t P_{t|t-1}`, used by the smoother.
    pub(crate) transfer: Vec<DMatrix<f64>>,
}

impl FilterOutput {
    pub fn len(&self) -> usize {
        self.filtered_mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.filtered_mean.is_empty()
    }

    /// Innovations premultiplied by the inverse Cholesky factor of `F_t`, so that
    /// under a correctly specified model each entry is N(0, 1) and serially
    /// independent. Steps with nothing observed or inside the burn-in are skipped
    /// when `skip_burn_in` is set.
    pub fn standardized_innovations(&self, skip_burn_in: bool) -> Vec<(usize, DVector<f64>)> {
        let mut out = Vec::new();
        for t in 0..self.len() {
            if skip_burn_in && self.burn_in[t] {
                continue;
            }
            if let (Some(v), Some(f)) = (&self.innovations[t], &self.innovation_cov[t]) {
                if let Some(ch) = f.clone().cholesky() {
                    let mut w = v.clone();
                    ch.l_dirty().solve_lower_triangular_mut(&mut w);
                    out.push((t, w));
                }
            }
        }
        out
    }

    /// Scalar standardized innovations of a univariate model, after burn-in.
    pub fn standardized_innovation_series(&self) -> Vec<f64> {
        self.standardized_innovations(true)
            .into_iter()
            .map(|(_, w)| w[0])
            .collect()
    }
}

/// `S X` with `S` given by sparse rows.
pub(crate) fn sparse_mul(s: &SparseRows, x: &DMatrix<f64>) -> DMatrix<f64> {
    let rows = s.rows.len();
    let cols = x.ncols();
    let mut out = DMatrix::zeros(rows, cols);
    for c in 0..cols {
        let xc = x.column(c);
        for (i, row) in s.rows.iter().enumerate() {
            let mut acc = 0.0;
            for &(j, v) in row {
                acc += v * xc[j];
            }
            out[(i, c)] = acc;
        }
    }
    out
}

/// `X S'` with `S` given by sparse rows.
pub(crate) fn mul_sparse_t(x: &DMatrix<f64>, s: &SparseRows) -> DMatrix<f64> {
    let n = x.nrows();
    let mut out = DMatrix::zeros(n, s.rows.len());
    for (r, row) in s.rows.iter().enumerate() {
        for &(j, v) in row {
            let src = x.column(j);
            let mut dst = out.column_mut(r);
            dst.axpy(v, &src, 1.0);
        }
    }
    out
}

pub(crate) fn sparse_vec(s: &SparseRows, x: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(
        s.rows.len(),
        s.rows
            .iter()
            .map(|row| row.iter().map(|&(j, v)| v * x[j]).sum()),
    )
}

fn check_data(spec: &SsmSpec, data: &ObservationPanel) -> Result<()> {
    if data.n_series() != spec.obs_dim() {
        return Err(Error::validation(format!(
            "data has {} series but the model observes {}",
            data.n_series(),
            spec.obs_dim()
        )));
    }
    Ok(())
}

/// Runs the Kalman filter over `data`.
///
/// With diffuse states the state moments use the big-kappa prior while
/// `loglik`, the burn-in flags and the observation counts come from the exact
/// diffuse recursion, so `loglik` always equals [`loglikelihood`].
pub fn kalman_filter(spec: &SsmSpec, data: &ObservationPanel) -> Result<FilterOutput> {
    let mut out = run(spec, data, true)?;
    if spec.n_diffuse() > 0 {
        let exact = exact_diffuse_loglik(spec, data)?;
        out.loglik = exact.loglik;
        out.n_diffuse_skipped = exact.n_skipped;
        out.n_loglik_obs = exact.n_obs;
        out.burn_in = exact.diffuse_steps;
    }
    Ok(out)
}

/// Log-likelihood of `data` under `spec` (the `loglik` field of [`kalman_filter`]),
/// computed without storing the state sequences.
pub fn loglikelihood(spec: &SsmSpec, data: &ObservationPanel) -> Result<f64> {
    if spec.n_diffuse() > 0 {
        check_data(spec, data)?;
        exact_diffuse_loglik(spec, data).map(|o| o.loglik)
    } else {
        run(spec, data, false).map(|o| o.loglik)
    }
}

/// Scalar prediction variances at or below this (relative) level mark a
/// perfectly predicted observation.
pub(crate) fn zero_variance_tol(z: &DVector<f64>, h: f64, p_scale: f64) -> f64 {
    1e-14 * (1.0 + h.abs() + z.dot(z) * p_scale)
}

/// Observed rows at one step as `(z_i, y_i, h_i)` scalars with uncorrelated
/// noise: unchanged for diagonal `H`, otherwise transformed by the unit
/// lower-triangular factor of the observed block of `H`.
pub(crate) fn decorrelated_rows(
    spec: &SsmSpec,
    y: &DMatrix<f64>,
    t: usize,
    obs: &[usize],
    h_diag: bool,
) -> Result<Vec<(DVector<f64>, f64, f64)>> {
    let h = spec.h();
    let z = spec.z();
    let k = obs.len();
    let mut rows: Vec<(DVector<f64>, f64, f64)> = obs
        .iter()
        .map(|&j| (z.row(j).transpose(), y[(t, j)], h[(j, j)]))
        .collect();
    if !h_diag && k > 1 {
        let hw = DMatrix::from_fn(k, k, |r, c| h[(obs[r], obs[c])]);
        let (l, d) = ldl(&hw).ok_or_else(|| Error::Numerical {
            step: t,
            msg: "observation covariance is not positive semidefinite".into(),
        })?;
        for i in 0..k {
            for s in 0..i {
                let lis = l[(i, s)];
                if lis != 0.0 {
                    let (zs, ys) = (rows[s].0.clone(), rows[s].1);
                    rows[i].0.axpy(-lis, &zs, 1.0);
                    rows[i].1 -= lis * ys;
                }
            }
            rows[i].2 = d[i];
        }
    }
    Ok(rows)
}

/// Univariate treatment: each step is processed one (decorrelated) scalar at
/// a time, so no innovation covariance matrix is ever inverted. The smoother
/// quantities `Z'F^{-1}v`, `Z'F^{-1}Z` and `I - Z'F^{-1}Z P` are accumulated
/// along the way; they equal their multivariate counterparts.
fn run(spec: &SsmSpec, data: &ObservationPanel, store: bool) -> Result<FilterOutput> {
    check_data(spec, data)?;
    let n = data.n_obs();
    let m = spec.state_dim();
    let y = data.values();
    let cap = if store { n } else { 0 };

    let mut out = FilterOutput {
        predicted_mean: Vec::with_capacity(cap),
        predicted_cov: Vec::with_capacity(cap),
        filtered_mean: Vec::with_capacity(cap),
        filtered_cov: Vec::with_capacity(cap),
        innovations: Vec::with_capacity(cap),
        innovation_cov: Vec::with_capacity(cap),
        observed: Vec::with_capacity(cap),
        burn_in: Vec::with_capacity(cap),
        loglik: 0.0,
        n_diffuse_skipped: 0,
        n_loglik_obs: 0,
        info_vec: Vec::with_capacity(cap),
        info_mat: Vec::with_capacity(cap),
        transfer: Vec::with_capacity(cap),
    };

    let mut a = spec.a1().clone();
    let mut p = spec.initial_cov();
    let mut burn_remaining = spec.n_diffuse();
    let z_rows = spec.z_rows();
    let h = spec.h();
    let h_diag = is_diagonal(h);

    for t in 0..n {
        let obs: Vec<usize> = (0..spec.obs_dim())
            .filter(|&j| !y[(t, j)].is_nan())
            .collect();
        let k = obs.len();
        let mut af = a.clone();
        let mut pf = p.clone();
        let mut u = DVector::zeros(if store { m } else { 0 });
        let mut mi = DMatrix::zeros(if store { m } else { 0 }, if store { m } else { 0 });
        // product of the per-scalar transfer matrices L_i = I - k_i z_i'
        let mut g = if store {
            DMatrix::identity(m, m)
        } else {
            DMatrix::zeros(0, 0)
        };
        let (mut innov, mut fcov, mut in_burn) = (None, None, false);

        if k > 0 {
            if store {
                let zw = SparseRows {
                    rows: obs.iter().map(|&j| z_rows.rows[j].clone()).collect(),
                };
                let zp = sparse_mul(&zw, &p);
                let mut f = mul_sparse_t(&zp, &zw);
                for (r, &jr) in obs.iter().enumerate() {
                    for (c, &jc) in obs.iter().enumerate() {
                        f[(r, c)] += h[(jr, jc)];
                    }
                }
                symmetrize(&mut f);
                let za = sparse_vec(&zw, &a);
                innov = Some(DVector::from_iterator(
                    k,
                    obs.iter().enumerate().map(|(r, &j)| y[(t, j)] - za[r]),
                ));
                fcov = Some(f);
            }
            in_burn = burn_remaining > 0;
            let p_scale = p.diagonal().amax();
            for (zi, yi, hi) in decorrelated_rows(spec, y, t, &obs, h_diag)? {
                let v = yi - zi.dot(&af);
                let mvec = &pf * &zi;
                let fi = zi.dot(&mvec) + hi;
                if fi <= zero_variance_tol(&zi, hi, p_scale) {
                    // perfectly predicted: carries no information
                    continue;
                }
                if store {
                    let gz = g.tr_mul(&zi);
                    u.axpy(v / fi, &gz, 1.0);
                    mi += &gz * gz.transpose() / fi;
                    let zg = zi.transpose() * &g;
                    g -= &mvec * zg / fi;
                }
                af.axpy(v / fi, &mvec, 1.0);
                pf -= &mvec * mvec.transpose() / fi;
                if burn_remaining > 0 {
                    burn_remaining -= 1;
                    out.n_diffuse_skipped += 1;
                } else {
                    out.loglik -= 0.5 * (LN_2PI + fi.ln() + v * v / fi);
                    out.n_loglik_obs += 1;
                }
            }
            symmetrize(&mut pf);
        }

        let t_rows = spec.t_rows();
        let a_next = sparse_vec(t_rows, &af);
        let tp = sparse_mul(t_rows, &pf);
        let mut p_next = mul_sparse_t(&tp, t_rows) + spec.q();
        symmetrize(&mut p_next);

        if store {
            out.predicted_mean.push(std::mem::replace(&mut a, a_next));
            out.predicted_cov.push(std::mem::replace(&mut p, p_next));
            out.filtered_mean.push(af);
            out.filtered_cov.push(pf);
            out.innovations.push(innov);
            out.innovation_cov.push(fcov);
            out.observed.push(obs);
            out.burn_in.push(in_burn);
            out.info_vec.push(u);
            out.info_mat.push(mi);
            out.transfer.push(g.transpose());
        } else {
            a = a_next;
            p = p_next;
        }
    }
    if !out.loglik.is_finite() {
        return Err(Error::Numerical {
            step: n.saturating_sub(1),
            msg: "log-likelihood is not finite".into(),
        });
    }
    Ok(out)
}
