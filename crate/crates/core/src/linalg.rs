//! Small dense linear-algebra helpers shared by the model modules.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Absolute tolerance used when checking symmetry and positive semi-definiteness.
pub const PSD_TOL: f64 = 1e-10;

/// Replaces `p` by `(p + p') / 2` in place.
pub fn symmetrize(p: &mut DMatrix<f64>) {
    let n = p.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (p[(i, j)] + p[(j, i)]);
            p[(i, j)] = v;
            p[(j, i)] = v;
        }
    }
}

pub fn max_asymmetry(p: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..p.nrows() {
        for j in (i + 1)..p.ncols() {
            worst = worst.max((p[(i, j)] - p[(j, i)]).abs());
        }
    }
    worst
}

/// Checks that `p` is square, symmetric and PSD within [`PSD_TOL`]
/// (scaled by the largest diagonal entry when that exceeds one).
pub fn check_psd(name: &str, p: &DMatrix<f64>) -> Result<()> {
    if p.nrows() != p.ncols() {
        return Err(Error::validation(format!("{name} must be square")));
    }
    if p.iter().any(|v| !v.is_finite()) {
        return Err(Error::validation(format!("{name} has non-finite entries")));
    }
    if p.nrows() == 0 {
        return Ok(());
    }
    let scale = p.diagonal().iter().fold(1.0f64, |a, &b| a.max(b.abs()));
    if max_asymmetry(p) > PSD_TOL * scale {
        return Err(Error::validation(format!("{name} is not symmetric")));
    }
    let mut s = p.clone();
    symmetrize(&mut s);
    let min_eig = s.symmetric_eigenvalues().min();
    if min_eig < -PSD_TOL * scale {
        return Err(Error::validation(format!(
            "{name} is not positive semi-definite (min eigenvalue {min_eig:e})"
        )));
    }
    Ok(())
}

/// Symmetric square root `L` with `L L' = p` for a PSD matrix (negative
/// eigenvalues from rounding are clamped to zero).
pub fn psd_sqrt(p: &DMatrix<f64>) -> DMatrix<f64> {
    let n = p.nrows();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    // Diagonal matrices are common (FS-BSM blocks, factor models); skip the eigen solve.
    let diagonal = (0..n).all(|i| (0..n).all(|j| i == j || p[(i, j)] == 0.0));
    if diagonal {
        return DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                p[(i, i)].max(0.0).sqrt()
            } else {
                0.0
            }
        });
    }
    let mut s = p.clone();
    symmetrize(&mut s);
    let eig = s.symmetric_eigen();
    let mut root = eig.eigenvectors.clone();
    for (j, &lam) in eig.eigenvalues.iter().enumerate() {
        let r = lam.max(0.0).sqrt();
        root.column_mut(j).scale_mut(r);
    }
    root
}

/// Ordinary least squares of `y` on the columns of `x`; returns
/// `(coefficients, residuals)`.
pub fn ols(x: &DMatrix<f64>, y: &[f64]) -> Result<(DVector<f64>, Vec<f64>)> {
    if x.nrows() != y.len() {
        return Err(Error::validation("regressor and response lengths differ"));
    }
    if x.nrows() < x.ncols() {
        return Err(Error::validation("fewer observations than regressors"));
    }
    let yv = DVector::from_column_slice(y);
    let qr = x.clone().qr();
    let r = qr.r();
    for i in 0..r.ncols() {
        if r[(i, i)].abs() < 1e-12 * r[(0, 0)].abs().max(1e-300) {
            return Err(Error::validation("regressor matrix is rank deficient"));
        }
    }
    let qty = qr.q().transpose() * &yv;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::validation("regressor matrix is rank deficient"))?;
    let fitted = x * &beta;
    let resid = y.iter().zip(fitted.iter()).map(|(a, b)| a - b).collect();
    Ok((beta, resid))
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Variance with divisor `n` (not `n - 1`).
pub fn variance_pop(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64
}

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let mx = mean(x);
    let my = mean(y);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn ols_recovers_exact_line() {
        let n = 10;
        let x = DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { i as f64 });
        let y: Vec<f64> = (0..n).map(|i| 2.0 + 0.5 * i as f64).collect();
        let (b, e) = ols(&x, &y).unwrap();
        assert_abs_diff_eq!(b[0], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b[1], 0.5, epsilon = 1e-12);
        assert!(e.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn psd_checks() {
        let good = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        assert!(check_psd("good", &good).is_ok());
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(check_psd("bad", &bad).is_err());
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(check_psd("asym", &asym).is_err());
    }

    #[test]
    fn psd_sqrt_reconstructs() {
        let p = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 0.5, 0.0, 0.5, 1.0]);
        let l = psd_sqrt(&p);
        let back = &l * l.transpose();
        assert!((back - p).amax() < 1e-12);
    }
}
