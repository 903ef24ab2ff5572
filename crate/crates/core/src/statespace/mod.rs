//! Linear Gaussian state-space engine.
//!
//! The model is
//!
//! ```text
//! y_t       = Z a_t + e_t,      e_t ~ N(0, H)
//! a_{t+1}   = T a_t + n_t,      n_t ~ N(0, Q)
//! a_1       ~ N(a1, P1)
//! ```
//!
//! States flagged in the diffuse mask have an improper flat prior. The
//! log-likelihood uses the exact diffuse recursion and excludes the scalar
//! observations absorbed by the diffuse part (normally the first `d`, with `d`
//! the number of diffuse states); filtered and smoothed moments use a
//! big-kappa prior variance ([`DIFFUSE_KAPPA`]). Missing observations (NaN) are
//! handled by deleting the corresponding rows of `Z` and `H`.

mod diffuse;
mod filter;
mod panel;
mod simulate;
mod smoother;

pub use filter::{kalman_filter, loglikelihood, FilterOutput, DIFFUSE_KAPPA};
pub use panel::{ObservationPanel, YearMonth};
pub use simulate::{simulate, simulate_with, SimulateOptions, Simulation};
pub use smoother::{kalman_smoother, SmootherOutput};

use nalgebra::{DMatrix, DVector};

use crate::linalg::check_psd;
use crate::{Error, Result};

/// Row-wise sparse copy of a dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct SparseRows {
    pub rows: Vec<Vec<(usize, f64)>>,
}

impl SparseRows {
    fn from_dense(m: &DMatrix<f64>) -> Self {
        let rows = (0..m.nrows())
            .map(|i| {
                (0..m.ncols())
                    .filter(|&j| m[(i, j)] != 0.0)
                    .map(|j| (j, m[(i, j)]))
                    .collect()
            })
            .collect();
        Self { rows }
    }
}

/// A validated time-invariant linear Gaussian state-space system.
#[derive(Debug, Clone, PartialEq)]
pub struct SsmSpec {
    z: DMatrix<f64>,
    t: DMatrix<f64>,
    h: DMatrix<f64>,
    q: DMatrix<f64>,
    a1: DVector<f64>,
    p1: DMatrix<f64>,
    diffuse: Vec<bool>,
    z_sparse: SparseRows,
    t_sparse: SparseRows,
}

impl SsmSpec {
    /// Validates dimensions and the PSD property of `H`, `Q`, `P1`.
    ///
    /// Rows and columns of `P1` belonging to diffuse states are ignored (the
    /// filter replaces them by the big-kappa prior), and their `a1` entries are
    /// treated as zero.
    pub fn new(
        z: DMatrix<f64>,
        t: DMatrix<f64>,
        h: DMatrix<f64>,
        q: DMatrix<f64>,
        a1: DVector<f64>,
        p1: DMatrix<f64>,
        diffuse: Vec<bool>,
    ) -> Result<Self> {
        let m = t.nrows();
        let p = z.nrows();
        if m == 0 || t.ncols() != m {
            return Err(Error::validation(
                "T must be square with at least one state",
            ));
        }
        if p == 0 || z.ncols() != m {
            return Err(Error::validation(format!(
                "Z must be p x {m}, got {} x {}",
                z.nrows(),
                z.ncols()
            )));
        }
        if h.nrows() != p || h.ncols() != p {
            return Err(Error::validation(format!("H must be {p} x {p}")));
        }
        if q.nrows() != m || q.ncols() != m {
            return Err(Error::validation(format!("Q must be {m} x {m}")));
        }
        if p1.nrows() != m || p1.ncols() != m {
            return Err(Error::validation(format!("P1 must be {m} x {m}")));
        }
        if a1.len() != m || diffuse.len() != m {
            return Err(Error::validation(format!(
                "a1 and diffuse mask must have length {m}"
            )));
        }
        if z.iter()
            .chain(t.iter())
            .chain(a1.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::validation("Z, T and a1 must be finite"));
        }
        check_psd("H", &h)?;
        check_psd("Q", &q)?;
        let mut p1 = p1;
        let mut a1 = a1;
        for i in 0..m {
            if diffuse[i] {
                a1[i] = 0.0;
                for j in 0..m {
                    p1[(i, j)] = 0.0;
                    p1[(j, i)] = 0.0;
                }
            }
        }
        check_psd("P1", &p1)?;
        let z_sparse = SparseRows::from_dense(&z);
        let t_sparse = SparseRows::from_dense(&t);
        Ok(Self {
            z,
            t,
            h,
            q,
            a1,
            p1,
            diffuse,
            z_sparse,
            t_sparse,
        })
    }

    pub fn z(&self) -> &DMatrix<f64> {
        &self.z
    }
    pub fn t(&self) -> &DMatrix<f64> {
        &self.t
    }
    pub fn h(&self) -> &DMatrix<f64> {
        &self.h
    }
    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }
    pub fn a1(&self) -> &DVector<f64> {
        &self.a1
    }
    /// Finite part of the initial covariance (diffuse rows/columns zeroed).
    pub fn p1(&self) -> &DMatrix<f64> {
        &self.p1
    }
    pub fn diffuse_mask(&self) -> &[bool] {
        &self.diffuse
    }
    pub fn n_diffuse(&self) -> usize {
        self.diffuse.iter().filter(|&&d| d).count()
    }
    pub fn state_dim(&self) -> usize {
        self.t.nrows()
    }
    pub fn obs_dim(&self) -> usize {
        self.z.nrows()
    }

    /// Initial covariance actually used by the filter.
    pub fn initial_cov(&self) -> DMatrix<f64> {
        let mut p = self.p1.clone();
        for (i, &d) in self.diffuse.iter().enumerate() {
            if d {
                p[(i, i)] = DIFFUSE_KAPPA;
            }
        }
        p
    }

    /// Copy of the spec with diffuse states replaced by a finite prior variance.
    pub fn with_finite_prior(&self, variance: f64) -> Result<Self> {
        let mut p1 = self.p1.clone();
        for (i, &d) in self.diffuse.iter().enumerate() {
            if d {
                p1[(i, i)] = variance;
            }
        }
        Self::new(
            self.z.clone(),
            self.t.clone(),
            self.h.clone(),
            self.q.clone(),
            self.a1.clone(),
            p1,
            vec![false; self.state_dim()],
        )
    }

    pub(crate) fn z_rows(&self) -> &SparseRows {
        &self.z_sparse
    }

    pub(crate) fn t_rows(&self) -> &SparseRows {
        &self.t_sparse
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    #[test]
    fn rejects_bad_dimensions_and_non_psd() {
        let ok = SsmSpec::new(
            scalar(1.0),
            scalar(1.0),
            scalar(1.0),
            scalar(1.0),
            DVector::zeros(1),
            scalar(1.0),
            vec![false],
        );
        assert!(ok.is_ok());
        let neg = SsmSpec::new(
            scalar(1.0),
            scalar(1.0),
            scalar(-1.0),
            scalar(1.0),
            DVector::zeros(1),
            scalar(1.0),
            vec![false],
        );
        assert!(matches!(neg, Err(Error::Validation(_))));
        let dims = SsmSpec::new(
            DMatrix::zeros(1, 2),
            scalar(1.0),
            scalar(1.0),
            scalar(1.0),
            DVector::zeros(1),
            scalar(1.0),
            vec![false],
        );
        assert!(dims.is_err());
    }

    #[test]
    fn diffuse_entries_are_zeroed() {
        let s = SsmSpec::new(
            scalar(1.0),
            scalar(1.0),
            scalar(1.0),
            scalar(1.0),
            DVector::from_element(1, 3.0),
            scalar(9.0),
            vec![true],
        )
        .unwrap();
        assert_eq!(s.a1()[0], 0.0);
        assert_eq!(s.p1()[(0, 0)], 0.0);
        assert_eq!(s.initial_cov()[(0, 0)], DIFFUSE_KAPPA);
    }
}
