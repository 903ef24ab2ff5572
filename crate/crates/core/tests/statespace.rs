mod common;

use common::oracle::{brute_force, random_model, DenseModel};
use ivts_core::statespace::{
    kalman_filter, kalman_smoother, loglikelihood, ObservationPanel, SsmSpec, YearMonth,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn start() -> YearMonth {
    YearMonth::new(1990, 1).unwrap()
}

fn to_spec(m: &DenseModel) -> SsmSpec {
    SsmSpec::new(
        m.z.clone(),
        m.t.clone(),
        m.h.clone(),
        m.q.clone(),
        m.a1.clone(),
        m.p1.clone(),
        vec![false; m.t.nrows()],
    )
    .unwrap()
}

fn scalar(v: f64) -> DMatrix<f64> {
    DMatrix::from_element(1, 1, v)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn loglik_matches_joint_gaussian(seed in any::<u64>()) {
        let (model, y) = random_model(seed);
        let spec = to_spec(&model);
        let panel = ObservationPanel::new(y.clone(), start().range(y.nrows())).unwrap();
        let ll = loglikelihood(&spec, &panel).unwrap();
        let bf = brute_force(&model, &y);
        prop_assert!((ll - bf.loglik).abs() < 1e-8, "kalman {ll} brute {}", bf.loglik);
    }

    #[test]
    fn smoother_matches_conditional_moments(seed in any::<u64>()) {
        let (model, y) = random_model(seed);
        let spec = to_spec(&model);
        let panel = ObservationPanel::new(y.clone(), start().range(y.nrows())).unwrap();
        let filt = kalman_filter(&spec, &panel).unwrap();
        let smooth = kalman_smoother(&spec, &panel, &filt).unwrap();
        let bf = brute_force(&model, &y);
        for t in 0..y.nrows() {
            let dm = (&smooth.smoothed_mean[t] - &bf.cond_mean[t]).amax();
            let dv = (&smooth.smoothed_cov[t] - &bf.cond_cov[t]).amax();
            prop_assert!(dm < 1e-8, "mean diff {dm} at t={t}");
            prop_assert!(dv < 1e-8, "cov diff {dv} at t={t}");
        }
        let last = y.nrows() - 1;
        prop_assert_eq!(&smooth.smoothed_mean[last], &filt.filtered_mean[last]);
        prop_assert_eq!(&smooth.smoothed_cov[last], &filt.filtered_cov[last]);
    }

    #[test]
    fn smoothed_cov_dominated_by_filtered(seed in any::<u64>()) {
        let (model, y) = random_model(seed);
        let spec = to_spec(&model);
        let panel = ObservationPanel::new(y.clone(), start().range(y.nrows())).unwrap();
        let filt = kalman_filter(&spec, &panel).unwrap();
        let smooth = kalman_smoother(&spec, &panel, &filt).unwrap();
        for t in 0..y.nrows() {
            let m = filt.filtered_cov[t].nrows();
            let diff = &filt.filtered_cov[t] - &smooth.smoothed_cov[t] + DMatrix::identity(m, m) * 1e-10;
            prop_assert!(diff.symmetric_eigenvalues().min() >= 0.0);
            prop_assert!(ivts_core::linalg::max_asymmetry(&filt.filtered_cov[t]) < 1e-10);
        }
    }

    #[test]
    fn loglik_scaling_identity(seed in any::<u64>(), c in 0.1f64..10.0) {
        let (mut model, y) = random_model(seed);
        model.a1.fill(0.0);
        let spec = to_spec(&model);
        let panel = ObservationPanel::new(y.clone(), start().range(y.nrows())).unwrap();
        let out = kalman_filter(&spec, &panel).unwrap();
        let scaled = SsmSpec::new(model.z.clone(), model.t.clone(), &model.h * c, &model.q * c, model.a1.clone(), &model.p1 * c, vec![false; model.t.nrows()]).unwrap();
        let ys = y.map(|v| v * c.sqrt());
        let panel_s = ObservationPanel::new(ys, start().range(y.nrows())).unwrap();
        let ll_s = loglikelihood(&scaled, &panel_s).unwrap();
        let want = out.loglik - 0.5 * out.n_loglik_obs as f64 * c.ln();
        prop_assert!((ll_s - want).abs() < 1e-9 * (1.0 + want.abs()));
    }
}

/// Textbook dense filter (standard covariance update, no row deletion) used as
/// a second reference on fully observed data.
fn dense_reference_loglik(m: &DenseModel, y: &DMatrix<f64>) -> f64 {
    let mut a = m.a1.clone();
    let mut p = m.p1.clone();
    let mut ll = 0.0;
    for t in 0..y.nrows() {
        let yt = y.row(t).transpose();
        let v = &yt - &m.z * &a;
        let f = &m.z * &p * m.z.transpose() + &m.h;
        let finv = f.clone().try_inverse().unwrap();
        ll -= 0.5
            * (yt.len() as f64 * (2.0 * std::f64::consts::PI).ln()
                + f.determinant().ln()
                + (v.transpose() * &finv * &v)[0]);
        let k = &p * m.z.transpose() * &finv;
        a = &a + &k * v;
        p = &p - &k * &m.z * &p;
        a = &m.t * a;
        p = &m.t * p * m.t.transpose() + &m.q;
    }
    ll
}

#[test]
fn fully_observed_matches_dense_textbook_filter() {
    for seed in 0..40 {
        let (model, mut y) = random_model(seed);
        y.iter_mut().for_each(|v| {
            if v.is_nan() {
                *v = 0.25
            }
        });
        let spec = to_spec(&model);
        let panel = ObservationPanel::new(y.clone(), start().range(y.nrows())).unwrap();
        let ll = loglikelihood(&spec, &panel).unwrap();
        let want = dense_reference_loglik(&model, &y);
        assert!((ll - want).abs() < 1e-9, "seed {seed}: {ll} vs {want}");
    }
}

#[test]
fn diffuse_local_level_matches_conditional_joint_gaussian() {
    // H = Q = 1, flat prior on the level. Given X1, the level is N(X1, H), so
    // (X2, X3) | X1 has mean (X1, X1), variances 3 and 4, covariance 2.
    let spec = SsmSpec::new(
        scalar(1.0),
        scalar(1.0),
        scalar(1.0),
        scalar(1.0),
        DVector::zeros(1),
        scalar(0.0),
        vec![true],
    )
    .unwrap();
    let x = [1.0, 2.0, 3.0];
    let panel = ObservationPanel::from_series(&x, start()).unwrap();
    let out = kalman_filter(&spec, &panel).unwrap();

    let cov = DMatrix::from_row_slice(2, 2, &[3.0, 2.0, 2.0, 4.0]);
    let r = DVector::from_vec(vec![x[1] - x[0], x[2] - x[0]]);
    let quad = (r.transpose() * cov.clone().try_inverse().unwrap() * &r)[0];
    let want = -0.5 * (2.0 * (2.0 * std::f64::consts::PI).ln() + cov.determinant().ln() + quad);
    assert_eq!(out.n_diffuse_skipped, 1);
    assert!((out.loglik - want).abs() < 1e-6, "{} vs {want}", out.loglik);
}

#[test]
fn local_level_smoother_matches_brute_force() {
    let model = DenseModel {
        z: scalar(1.0),
        t: scalar(1.0),
        h: scalar(1.0),
        q: scalar(1.0),
        a1: DVector::zeros(1),
        p1: scalar(4.0),
    };
    let y = DMatrix::from_column_slice(3, 1, &[1.0, 2.0, 3.0]);
    let spec = to_spec(&model);
    let panel = ObservationPanel::new(y.clone(), start().range(3)).unwrap();
    let filt = kalman_filter(&spec, &panel).unwrap();
    let smooth = kalman_smoother(&spec, &panel, &filt).unwrap();
    let bf = brute_force(&model, &y);
    for t in 0..3 {
        assert!((smooth.smoothed_mean[t][0] - bf.cond_mean[t][0]).abs() < 1e-12);
    }
}

#[test]
fn deterministic_spec_smoothed_equals_filtered() {
    let t = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
    let z = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
    let spec = SsmSpec::new(
        z,
        t,
        scalar(0.0),
        DMatrix::zeros(2, 2),
        DVector::from_vec(vec![3.0, 0.5]),
        DMatrix::zeros(2, 2),
        vec![false; 2],
    )
    .unwrap();
    let panel = ObservationPanel::from_series(&[0.0, 1.0, 7.0, 2.0, 9.0], start()).unwrap();
    let filt = kalman_filter(&spec, &panel).unwrap();
    let smooth = kalman_smoother(&spec, &panel, &filt).unwrap();
    for t in 0..5 {
        assert_eq!(smooth.smoothed_mean[t], filt.filtered_mean[t]);
    }
}

#[test]
fn smoother_rejects_mismatched_filter_output() {
    let spec = SsmSpec::new(
        scalar(1.0),
        scalar(1.0),
        scalar(1.0),
        scalar(1.0),
        DVector::zeros(1),
        scalar(1.0),
        vec![false],
    )
    .unwrap();
    let a = ObservationPanel::from_series(&[1.0, 2.0, 3.0], start()).unwrap();
    let b = ObservationPanel::from_series(&[1.0, 2.0], start()).unwrap();
    let filt = kalman_filter(&spec, &b).unwrap();
    assert!(kalman_smoother(&spec, &a, &filt).is_err());
}

/// Copy of `model` whose states in `mask` get prior variance `kappa`, zero
/// mean and no correlation with the rest.
fn with_diffuse_prior(model: &DenseModel, mask: &[bool], kappa: f64) -> DenseModel {
    let m = mask.len();
    let mut p1 = model.p1.clone();
    let mut a1 = model.a1.clone();
    for i in 0..m {
        if mask[i] {
            a1[i] = 0.0;
            for j in 0..m {
                p1[(i, j)] = 0.0;
                p1[(j, i)] = 0.0;
            }
            p1[(i, i)] = kappa;
        }
    }
    DenseModel {
        z: model.z.clone(),
        t: model.t.clone(),
        h: model.h.clone(),
        q: model.q.clone(),
        a1,
        p1,
    }
}

/// Limit of the joint-Gaussian density with the diffuse scalars (those whose
/// conditional variance grows with kappa) conditioned on rather than scored.
/// Two kappas are combined by Richardson extrapolation to cancel the 1/kappa
/// term. Returns `None` when some scalar is neither clearly diffuse nor
/// clearly settled at these kappas, which the oracle cannot resolve.
fn diffuse_reference(model: &DenseModel, mask: &[bool], y: &DMatrix<f64>) -> Option<(f64, usize)> {
    let (k1, k2) = (1e6, 2e6);
    let c1 = common::oracle::sequential_conditionals(&with_diffuse_prior(model, mask, k1), y);
    let c2 = common::oracle::sequential_conditionals(&with_diffuse_prior(model, mask, k2), y);
    let mut ll = 0.0;
    let mut skipped = 0;
    for ((l1, v1), (l2, v2)) in c1.into_iter().zip(c2) {
        let ratio = v2 / v1;
        if ratio > 1.9 {
            skipped += 1;
        } else if ratio < 1.0 + 1e-4 {
            ll += 2.0 * l2 - l1;
        } else {
            return None;
        }
    }
    Some((ll, skipped))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn exact_diffuse_loglik_matches_conditional_density(seed in any::<u64>(), bits in 1u8..16) {
        let (model, y) = random_model(seed);
        let m = model.t.nrows();
        let mask: Vec<bool> = (0..m).map(|i| bits >> i & 1 == 1).collect();
        prop_assume!(mask.iter().any(|&d| d));
        let spec = SsmSpec::new(model.z.clone(), model.t.clone(), model.h.clone(), model.q.clone(), model.a1.clone(), model.p1.clone(), mask.clone()).unwrap();
        let panel = ObservationPanel::new(y.clone(), start().range(y.nrows())).unwrap();
        let ll = loglikelihood(&spec, &panel).unwrap();
        let out = kalman_filter(&spec, &panel).unwrap();
        prop_assert_eq!(out.loglik, ll);
        let reference = diffuse_reference(&model, &mask, &y);
        prop_assume!(reference.is_some());
        let (want, skipped) = reference.unwrap();
        prop_assert_eq!(out.n_diffuse_skipped, skipped);
        prop_assert!((ll - want).abs() < 1e-5 * (1.0 + want.abs()), "exact {ll} reference {want}");
    }
}
