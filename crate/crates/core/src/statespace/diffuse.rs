//! Exact diffuse log-likelihood.
//!
//! The state covariance is carried as `P* + kappa P_inf` with the limit
//! `kappa -> inf` taken analytically, and observations are processed one
//! scalar at a time after decorrelating the observed block of `H` with a unit
//! lower-triangular factor (which leaves the determinant unchanged). Scalars
//! whose diffuse variance `F_inf` is positive only shrink `P_inf` and are
//! excluded from the log-likelihood, so the result is the density of the
//! remaining data conditional on the diffuse part. Unlike a finite big-kappa
//! prior this involves no cancellation between huge numbers, so the value is
//! smooth in the parameters to near machine precision.

use nalgebra::{DMatrix, DVector};

use super::filter::{decorrelated_rows, mul_sparse_t, sparse_mul, sparse_vec, zero_variance_tol};
use super::{ObservationPanel, SsmSpec};
use crate::linalg::symmetrize;
use crate::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// `P_inf` entries below this are treated as zero (diffuse phase over).
const P_INF_ZERO: f64 = 1e-12;

pub(crate) struct DiffuseLik {
    pub loglik: f64,
    pub n_skipped: usize,
    pub n_obs: usize,
    /// Whether any scalar of step `t` had positive diffuse variance.
    pub diffuse_steps: Vec<bool>,
}

/// `H = L D L'` with unit lower-triangular `L`; zero pivots are allowed for
/// PSD input (their column of `L` is set to zero below the diagonal).
pub(crate) fn ldl(h: &DMatrix<f64>) -> Option<(DMatrix<f64>, Vec<f64>)> {
    let k = h.nrows();
    let mut l = DMatrix::identity(k, k);
    let mut d = vec![0.0; k];
    let scale = (0..k)
        .map(|i| h[(i, i)].abs())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    for j in 0..k {
        let mut dj = h[(j, j)];
        for s in 0..j {
            dj -= l[(j, s)] * l[(j, s)] * d[s];
        }
        if dj < -1e-10 * scale {
            return None;
        }
        d[j] = dj.max(0.0);
        for i in (j + 1)..k {
            let mut v = h[(i, j)];
            for s in 0..j {
                v -= l[(i, s)] * l[(j, s)] * d[s];
            }
            l[(i, j)] = if d[j] > 1e-14 * scale { v / d[j] } else { 0.0 };
        }
    }
    Some((l, d))
}

pub(crate) fn is_diagonal(h: &DMatrix<f64>) -> bool {
    (0..h.nrows()).all(|i| (0..h.ncols()).all(|j| i == j || h[(i, j)] == 0.0))
}

pub(crate) fn exact_diffuse_loglik(spec: &SsmSpec, data: &ObservationPanel) -> Result<DiffuseLik> {
    let n = data.n_obs();
    let m = spec.state_dim();
    let y = data.values();
    let h = spec.h();
    let t_rows = spec.t_rows();

    let mut a = spec.a1().clone();
    let mut p_star = spec.p1().clone();
    let mut p_inf = DMatrix::from_fn(m, m, |i, j| {
        if i == j && spec.diffuse_mask()[i] {
            1.0
        } else {
            0.0
        }
    });
    let mut diffuse = spec.n_diffuse() > 0;

    let mut out = DiffuseLik {
        loglik: 0.0,
        n_skipped: 0,
        n_obs: 0,
        diffuse_steps: vec![false; n],
    };
    let h_diag = is_diagonal(h);

    for t in 0..n {
        let obs: Vec<usize> = (0..spec.obs_dim())
            .filter(|&j| !y[(t, j)].is_nan())
            .collect();
        let k = obs.len();
        if k > 0 {
            let p_scale = p_star.diagonal().amax();
            for (zi, yi, hi) in decorrelated_rows(spec, y, t, &obs, h_diag)? {
                let v = yi - zi.dot(&a);
                let m_star = &p_star * &zi;
                let f_star = zi.dot(&m_star) + hi;
                let (m_inf, f_inf) = if diffuse {
                    let mi = &p_inf * &zi;
                    let fi = zi.dot(&mi);
                    (mi, fi)
                } else {
                    (DVector::zeros(0), 0.0)
                };
                let tol = 1e-9 * (1.0 + zi.dot(&zi));
                if diffuse && f_inf > tol {
                    a.axpy(v / f_inf, &m_inf, 1.0);
                    let cross = &m_star * m_inf.transpose();
                    p_star += &m_inf * m_inf.transpose() * (f_star / (f_inf * f_inf))
                        - (&cross + cross.transpose()) / f_inf;
                    p_inf -= &m_inf * m_inf.transpose() / f_inf;
                    out.n_skipped += 1;
                    out.diffuse_steps[t] = true;
                } else if f_star > zero_variance_tol(&zi, hi, p_scale) {
                    a.axpy(v / f_star, &m_star, 1.0);
                    p_star -= &m_star * m_star.transpose() / f_star;
                    out.loglik -= 0.5 * (LN_2PI + f_star.ln() + v * v / f_star);
                    out.n_obs += 1;
                }
                // otherwise perfectly predicted: carries no information
            }
            symmetrize(&mut p_star);
        }
        a = sparse_vec(t_rows, &a);
        p_star = mul_sparse_t(&sparse_mul(t_rows, &p_star), t_rows) + spec.q();
        symmetrize(&mut p_star);
        if diffuse {
            symmetrize(&mut p_inf);
            p_inf = mul_sparse_t(&sparse_mul(t_rows, &p_inf), t_rows);
            if p_inf.amax() < P_INF_ZERO {
                diffuse = false;
            }
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
