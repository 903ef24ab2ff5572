//! Brute-force joint-Gaussian reference for small state-space systems.
//!
//! Builds the full covariance of the stacked states and observations directly
//! from the model equations and conditions on the observed entries. Shares no
//! code with the recursive filter.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub struct DenseModel {
    pub z: DMatrix<f64>,
    pub t: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub a1: DVector<f64>,
    pub p1: DMatrix<f64>,
}

pub struct BruteForce {
    pub loglik: f64,
    /// conditional means E[a_t | observed y], one per t
    pub cond_mean: Vec<DVector<f64>>,
    pub cond_cov: Vec<DMatrix<f64>>,
}

/// `y` is `n x p` with NaN for missing entries.
pub fn brute_force(model: &DenseModel, y: &DMatrix<f64>) -> BruteForce {
    let n = y.nrows();
    let p = model.z.nrows();
    let m = model.t.nrows();

    // state means and marginal covariances
    let mut mean_a = vec![model.a1.clone()];
    let mut var_a = vec![model.p1.clone()];
    for t in 1..n {
        mean_a.push(&model.t * &mean_a[t - 1]);
        var_a.push(&model.t * &var_a[t - 1] * model.t.transpose() + &model.q);
    }
    // cross covariance Cov(a_s, a_t) = T^{s-t} Var(a_t) for s >= t
    let cov_aa = |s: usize, t: usize| -> DMatrix<f64> {
        if s >= t {
            let mut c = var_a[t].clone();
            for _ in t..s {
                c = &model.t * c;
            }
            c
        } else {
            let mut c = var_a[s].clone();
            for _ in s..t {
                c = &model.t * c;
            }
            c.transpose()
        }
    };

    let obs: Vec<(usize, usize)> = (0..n)
        .flat_map(|t| (0..p).map(move |j| (t, j)))
        .filter(|&(t, j)| !y[(t, j)].is_nan())
        .collect();
    let k = obs.len();
    let mut mu_y = DVector::zeros(k);
    let mut yv = DVector::zeros(k);
    let mut syy = DMatrix::zeros(k, k);
    for (a, &(t, j)) in obs.iter().enumerate() {
        mu_y[a] = (model.z.row(j) * &mean_a[t])[0];
        yv[a] = y[(t, j)];
        for (b, &(s, i)) in obs.iter().enumerate() {
            let mut v = (model.z.row(j) * cov_aa(t, s) * model.z.row(i).transpose())[0];
            if t == s {
                v += model.h[(j, i)];
            }
            syy[(a, b)] = v;
        }
    }
    let chol = syy.clone().cholesky().expect("joint covariance must be PD");
    let resid = &yv - &mu_y;
    let alpha = chol.solve(&resid);
    let log_det: f64 = chol.l().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
    let loglik =
        -0.5 * (k as f64 * (2.0 * std::f64::consts::PI).ln() + log_det + resid.dot(&alpha));

    let mut cond_mean = Vec::with_capacity(n);
    let mut cond_cov = Vec::with_capacity(n);
    for t in 0..n {
        // Cov(a_t, y_obs): m x k
        let mut say = DMatrix::zeros(m, k);
        for (b, &(s, i)) in obs.iter().enumerate() {
            let col = cov_aa(t, s) * model.z.row(i).transpose();
            say.column_mut(b).copy_from(&col);
        }
        cond_mean.push(&mean_a[t] + &say * &alpha);
        let w = chol.solve(&say.transpose());
        cond_cov.push(cov_aa(t, t) - &say * w);
    }
    BruteForce {
        loglik,
        cond_mean,
        cond_cov,
    }
}

fn normal_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize, sd: f64) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| sd * rng.sample::<f64, _>(StandardNormal))
}

/// Per-scalar conditional log densities `log p(y_i | earlier scalars)` in
/// (time, series) order, plus the conditional variances.
pub fn sequential_conditionals(model: &DenseModel, y: &DMatrix<f64>) -> Vec<(f64, f64)> {
    let (mu, yv, syy) = joint_observations(model, y);
    let chol = syy.cholesky().expect("joint covariance must be PD");
    let l = chol.l();
    let w = l
        .solve_lower_triangular(&(&yv - &mu))
        .expect("triangular solve");
    (0..yv.len())
        .map(|i| {
            let d = l[(i, i)];
            let ld = -0.5 * ((2.0 * std::f64::consts::PI).ln() + 2.0 * d.ln() + w[i] * w[i]);
            (ld, d * d)
        })
        .collect()
}

fn joint_observations(
    model: &DenseModel,
    y: &DMatrix<f64>,
) -> (DVector<f64>, DVector<f64>, DMatrix<f64>) {
    let n = y.nrows();
    let p = model.z.nrows();
    let mut mean_a = vec![model.a1.clone()];
    let mut var_a = vec![model.p1.clone()];
    for t in 1..n {
        mean_a.push(&model.t * &mean_a[t - 1]);
        var_a.push(&model.t * &var_a[t - 1] * model.t.transpose() + &model.q);
    }
    let cov_aa = |s: usize, t: usize| -> DMatrix<f64> {
        let (hi, lo) = if s >= t { (s, t) } else { (t, s) };
        let mut c = var_a[lo].clone();
        for _ in lo..hi {
            c = &model.t * c;
        }
        if s >= t {
            c
        } else {
            c.transpose()
        }
    };
    let obs: Vec<(usize, usize)> = (0..n)
        .flat_map(|t| (0..p).map(move |j| (t, j)))
        .filter(|&(t, j)| !y[(t, j)].is_nan())
        .collect();
    let k = obs.len();
    let mut mu = DVector::zeros(k);
    let mut yv = DVector::zeros(k);
    let mut syy = DMatrix::zeros(k, k);
    for (a, &(t, j)) in obs.iter().enumerate() {
        mu[a] = (model.z.row(j) * &mean_a[t])[0];
        yv[a] = y[(t, j)];
        for (b, &(s, i)) in obs.iter().enumerate() {
            let mut v = (model.z.row(j) * cov_aa(t, s) * model.z.row(i).transpose())[0];
            if t == s {
                v += model.h[(j, i)];
            }
            syy[(a, b)] = v;
        }
    }
    (mu, yv, syy)
}

/// Random small model with finite prior and PD observation noise.
pub fn random_model(seed: u64) -> (DenseModel, DMatrix<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = rng.gen_range(1..=4);
    let p = rng.gen_range(1..=2);
    let n = rng.gen_range(2..=8);
    let z = normal_matrix(&mut rng, p, m, 1.0);
    let t = normal_matrix(&mut rng, m, m, 0.6);
    let a = normal_matrix(&mut rng, p, p, 0.7);
    let h = &a * a.transpose() + DMatrix::identity(p, p) * 0.2;
    let rank = rng.gen_range(1..=m);
    let b = normal_matrix(&mut rng, m, rank, 0.7);
    let q = &b * b.transpose();
    let c = normal_matrix(&mut rng, m, m, 0.8);
    let p1 = &c * c.transpose() + DMatrix::identity(m, m) * 0.1;
    let a1 = normal_matrix(&mut rng, m, 1, 1.0).column(0).into_owned();
    let mut y = normal_matrix(&mut rng, n, p, 1.5);
    // sprinkle missing entries, keeping each series observed at least once
    for j in 0..p {
        for i in 1..n {
            if rng.gen_bool(0.15) {
                y[(i, j)] = f64::NAN;
            }
        }
    }
    (DenseModel { z, t, h, q, a1, p1 }, y)
}
