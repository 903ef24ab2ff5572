//! Frequency-specific basic structural model (FS-BSM).
//!
//! For a `dim`-variate series (1 = centre or log-range alone, 2 = both jointly):
//!
//! ```text
//! X_t      = mu_t - sum_j gamma_t^(j) + eps_t
//! mu_t     = mu_{t-1} + beta_{t-1} + eta_t
//! beta_t   = beta_{t-1} + zeta_t
//! gamma^(j), gamma*^(j) rotate by lambda_j = pi j / 6, j = 1..6
//! ```
//!
//! The observation loads with `-1` on every `gamma^(j)` state, matching the
//! published measurement matrix; the reported seasonal component is the loaded
//! sum, so `trend + seasonal + irregular` reproduces the data. The `j = 6`
//! harmonic has no `gamma*` partner. Seasonal disturbances use two covariance
//! groups: group I on `j = 1` and group II shared by `j = 2..6`.
//!
//! State order for `dim = 2` is
//! `(mu1, mu2, beta1, beta2, g1_1, g1_2, g1*_1, g1*_2, ..., g6_1, g6_2)`,
//! 26 states in total; `dim = 1` gives the analogous 13-state system.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::linalg::check_psd;
use crate::statespace::{kalman_filter, kalman_smoother, ObservationPanel, SsmSpec, YearMonth};
use crate::{Error, Result};

/// Number of seasonal harmonics for monthly data.
pub const HARMONICS: usize = 6;

/// 1.96, the two-sided 95% Gaussian multiplier.
pub const BAND_95: f64 = 1.96;

/// The five disturbance covariance blocks of the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceBlock {
    Irregular,
    Level,
    Slope,
    SeasonalI,
    SeasonalII,
}

impl VarianceBlock {
    pub const ALL: [VarianceBlock; 5] = [
        VarianceBlock::Irregular,
        VarianceBlock::Level,
        VarianceBlock::Slope,
        VarianceBlock::SeasonalI,
        VarianceBlock::SeasonalII,
    ];
}

/// Disturbance covariances of an FS-BSM.
#[derive(Debug, Clone, PartialEq)]
pub struct FsBsmParams {
    dim: usize,
    pub irregular: DMatrix<f64>,
    pub level: DMatrix<f64>,
    pub slope: DMatrix<f64>,
    pub seasonal_i: DMatrix<f64>,
    pub seasonal_ii: DMatrix<f64>,
}

impl FsBsmParams {
    pub fn new(
        irregular: DMatrix<f64>,
        level: DMatrix<f64>,
        slope: DMatrix<f64>,
        seasonal_i: DMatrix<f64>,
        seasonal_ii: DMatrix<f64>,
    ) -> Result<Self> {
        let dim = irregular.nrows();
        let p = Self {
            dim,
            irregular,
            level,
            slope,
            seasonal_i,
            seasonal_ii,
        };
        p.validate()?;
        Ok(p)
    }

    /// Scalar variances `(eps, eta, zeta, omega_I, omega_II)`.
    pub fn univariate(eps: f64, eta: f64, zeta: f64, omega_i: f64, omega_ii: f64) -> Result<Self> {
        let s = |v: f64| DMatrix::from_element(1, 1, v);
        Self::new(s(eps), s(eta), s(zeta), s(omega_i), s(omega_ii))
    }

    /// All blocks zero except the irregular.
    pub fn zeros(dim: usize) -> Self {
        let z = DMatrix::zeros(dim, dim);
        Self {
            dim,
            irregular: z.clone(),
            level: z.clone(),
            slope: z.clone(),
            seasonal_i: z.clone(),
            seasonal_ii: z,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dim == 1 || self.dim == 2) {
            return Err(Error::validation(format!(
                "FS-BSM dimension must be 1 or 2, got {}",
                self.dim
            )));
        }
        for b in VarianceBlock::ALL {
            let m = self.block(b);
            if m.nrows() != self.dim || m.ncols() != self.dim {
                return Err(Error::validation(format!(
                    "{b:?} block must be {0}x{0}",
                    self.dim
                )));
            }
            check_psd(&format!("{b:?} covariance"), m)?;
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn block(&self, b: VarianceBlock) -> &DMatrix<f64> {
        match b {
            VarianceBlock::Irregular => &self.irregular,
            VarianceBlock::Level => &self.level,
            VarianceBlock::Slope => &self.slope,
            VarianceBlock::SeasonalI => &self.seasonal_i,
            VarianceBlock::SeasonalII => &self.seasonal_ii,
        }
    }

    pub fn block_mut(&mut self, b: VarianceBlock) -> &mut DMatrix<f64> {
        match b {
            VarianceBlock::Irregular => &mut self.irregular,
            VarianceBlock::Level => &mut self.level,
            VarianceBlock::Slope => &mut self.slope,
            VarianceBlock::SeasonalI => &mut self.seasonal_i,
            VarianceBlock::SeasonalII => &mut self.seasonal_ii,
        }
    }

    /// Copy with one block set to zero (used to build null models).
    pub fn with_zeroed(&self, b: VarianceBlock) -> Self {
        let mut out = self.clone();
        out.block_mut(b).fill(0.0);
        out
    }
}

/// Index arithmetic for the FS-BSM state vector.
#[derive(Debug, Clone, Copy)]
pub struct Layout {
    pub dim: usize,
}

impl Layout {
    pub fn state_dim(self) -> usize {
        13 * self.dim
    }
    pub fn level(self, i: usize) -> usize {
        i
    }
    pub fn slope(self, i: usize) -> usize {
        self.dim + i
    }
    /// `gamma^(j)` for series `i`, `j` in `1..=6`.
    pub fn gamma(self, j: usize, i: usize) -> usize {
        2 * self.dim + (j - 1) * 2 * self.dim + i
    }
    /// `gamma*^(j)` for series `i`, `j` in `1..=5`.
    pub fn gamma_star(self, j: usize, i: usize) -> usize {
        debug_assert!(j < HARMONICS);
        self.gamma(j, i) + self.dim
    }
    /// Observation weights picking out the seasonal component of series `i`.
    pub fn seasonal_weights(self, i: usize) -> DVector<f64> {
        let mut w = DVector::zeros(self.state_dim());
        for j in 1..=HARMONICS {
            w[self.gamma(j, i)] = -1.0;
        }
        w
    }
}

/// Seasonal frequency `lambda_j = pi j / 6`.
pub fn frequency(j: usize) -> f64 {
    PI * j as f64 / 6.0
}

fn place_block(target: &mut DMatrix<f64>, block: &DMatrix<f64>, idx: &[usize]) {
    for (a, &r) in idx.iter().enumerate() {
        for (b, &c) in idx.iter().enumerate() {
            target[(r, c)] = block[(a, b)];
        }
    }
}

/// State-space form of the FS-BSM. All states are diffuse.
pub fn build_fsbsm(params: &FsBsmParams) -> Result<SsmSpec> {
    params.validate()?;
    let d = params.dim();
    let lay = Layout { dim: d };
    let m = lay.state_dim();

    let mut z = DMatrix::zeros(d, m);
    let mut t = DMatrix::zeros(m, m);
    let mut q = DMatrix::zeros(m, m);

    for i in 0..d {
        z[(i, lay.level(i))] = 1.0;
        for j in 1..=HARMONICS {
            z[(i, lay.gamma(j, i))] = -1.0;
        }
        t[(lay.level(i), lay.level(i))] = 1.0;
        t[(lay.level(i), lay.slope(i))] = 1.0;
        t[(lay.slope(i), lay.slope(i))] = 1.0;
        for j in 1..HARMONICS {
            let (c, s) = (frequency(j).cos(), frequency(j).sin());
            let (g, gs) = (lay.gamma(j, i), lay.gamma_star(j, i));
            t[(g, g)] = c;
            t[(g, gs)] = s;
            t[(gs, g)] = -s;
            t[(gs, gs)] = c;
        }
        // cos(pi) = -1 exactly; avoid the 1.2e-16 residue of sin(pi)
        t[(lay.gamma(HARMONICS, i), lay.gamma(HARMONICS, i))] = -1.0;
    }

    let series: Vec<usize> = (0..d).collect();
    let idx = |f: &dyn Fn(usize) -> usize| series.iter().map(|&i| f(i)).collect::<Vec<_>>();
    place_block(&mut q, &params.level, &idx(&|i| lay.level(i)));
    place_block(&mut q, &params.slope, &idx(&|i| lay.slope(i)));
    for j in 1..=HARMONICS {
        let block = if j == 1 {
            &params.seasonal_i
        } else {
            &params.seasonal_ii
        };
        place_block(&mut q, block, &idx(&|i| lay.gamma(j, i)));
        if j < HARMONICS {
            place_block(&mut q, block, &idx(&|i| lay.gamma_star(j, i)));
        }
    }

    SsmSpec::new(
        z,
        t,
        params.irregular.clone(),
        q,
        DVector::zeros(m),
        DMatrix::zeros(m, m),
        vec![true; m],
    )
}

/// Smoothed components of an FS-BSM fit; each matrix is `T_obs x dim`.
#[derive(Debug, Clone)]
pub struct ComponentSet {
    pub dates: Vec<YearMonth>,
    pub trend: DMatrix<f64>,
    pub slope: DMatrix<f64>,
    pub seasonal: DMatrix<f64>,
    /// `data - Z a_{t|n}`; NaN where the data are missing.
    pub irregular: DMatrix<f64>,
    pub trend_se: DMatrix<f64>,
    pub slope_se: DMatrix<f64>,
    pub seasonal_se: DMatrix<f64>,
    pub irregular_se: DMatrix<f64>,
}

/// End-of-sample level and slope with standard errors for one series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TerminalComponents {
    pub mu_t: f64,
    pub mu_t_se: f64,
    pub beta_t: f64,
    pub beta_t_se: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    Trend,
    Slope,
    Seasonal,
    Irregular,
}

impl ComponentSet {
    pub fn estimate(&self, c: Component) -> &DMatrix<f64> {
        match c {
            Component::Trend => &self.trend,
            Component::Slope => &self.slope,
            Component::Seasonal => &self.seasonal,
            Component::Irregular => &self.irregular,
        }
    }

    pub fn standard_error(&self, c: Component) -> &DMatrix<f64> {
        match c {
            Component::Trend => &self.trend_se,
            Component::Slope => &self.slope_se,
            Component::Seasonal => &self.seasonal_se,
            Component::Irregular => &self.irregular_se,
        }
    }

    /// `(estimate, lo95, hi95)` for series `i`.
    pub fn band95(&self, c: Component, i: usize) -> Vec<(f64, f64, f64)> {
        let est = self.estimate(c);
        let se = self.standard_error(c);
        (0..est.nrows())
            .map(|t| {
                let e = est[(t, i)];
                let s = se[(t, i)];
                (e, e - BAND_95 * s, e + BAND_95 * s)
            })
            .collect()
    }

    pub fn terminal(&self, i: usize) -> TerminalComponents {
        let last = self.trend.nrows() - 1;
        TerminalComponents {
            mu_t: self.trend[(last, i)],
            mu_t_se: self.trend_se[(last, i)],
            beta_t: self.slope[(last, i)],
            beta_t_se: self.slope_se[(last, i)],
        }
    }
}

fn check_built_from(spec: &SsmSpec, params: &FsBsmParams, data: &ObservationPanel) -> Result<()> {
    if *spec != build_fsbsm(params)? {
        return Err(Error::validation(
            "state-space spec was not built from these FS-BSM parameters",
        ));
    }
    if data.n_series() != params.dim() {
        return Err(Error::validation(format!(
            "model is {}-variate but data has {} series",
            params.dim(),
            data.n_series()
        )));
    }
    Ok(())
}

/// Smoothed trend, slope, seasonal and irregular with standard errors.
pub fn extract_components(
    spec: &SsmSpec,
    params: &FsBsmParams,
    data: &ObservationPanel,
) -> Result<ComponentSet> {
    check_built_from(spec, params, data)?;
    let filt = kalman_filter(spec, data)?;
    let sm = kalman_smoother(spec, data, &filt)?;
    let n = data.n_obs();
    let d = params.dim();
    let lay = Layout { dim: d };
    let y = data.values();

    let mut out = ComponentSet {
        dates: data.time_index().to_vec(),
        trend: DMatrix::zeros(n, d),
        slope: DMatrix::zeros(n, d),
        seasonal: DMatrix::zeros(n, d),
        irregular: DMatrix::zeros(n, d),
        trend_se: DMatrix::zeros(n, d),
        slope_se: DMatrix::zeros(n, d),
        seasonal_se: DMatrix::zeros(n, d),
        irregular_se: DMatrix::zeros(n, d),
    };
    let weights: Vec<DVector<f64>> = (0..d).map(|i| lay.seasonal_weights(i)).collect();
    for t in 0..n {
        let a = &sm.smoothed_mean[t];
        let v = &sm.smoothed_cov[t];
        for i in 0..d {
            let (l, s) = (lay.level(i), lay.slope(i));
            out.trend[(t, i)] = a[l];
            out.slope[(t, i)] = a[s];
            out.trend_se[(t, i)] = v[(l, l)].max(0.0).sqrt();
            out.slope_se[(t, i)] = v[(s, s)].max(0.0).sqrt();
            let w = &weights[i];
            out.seasonal[(t, i)] = w.dot(a);
            out.seasonal_se[(t, i)] = (w.transpose() * v * w)[0].max(0.0).sqrt();
            let zrow = spec.z().row(i).transpose();
            let fitted = zrow.dot(a);
            out.irregular[(t, i)] = y[(t, i)] - fitted;
            out.irregular_se[(t, i)] = (zrow.transpose() * v * &zrow)[0].max(0.0).sqrt();
        }
    }
    Ok(out)
}

/// Subtracts the filtered (not smoothed) seasonal component from the data.
/// Missing entries stay missing.
pub fn deseasonalize(
    data: &ObservationPanel,
    spec: &SsmSpec,
    params: &FsBsmParams,
) -> Result<ObservationPanel> {
    check_built_from(spec, params, data)?;
    let filt = kalman_filter(spec, data)?;
    let d = params.dim();
    let lay = Layout { dim: d };
    let weights: Vec<DVector<f64>> = (0..d).map(|i| lay.seasonal_weights(i)).collect();
    let y = data.values();
    let out = DMatrix::from_fn(data.n_obs(), d, |t, i| {
        y[(t, i)] - weights[i].dot(&filt.filtered_mean[t])
    });
    ObservationPanel::with_names(out, data.time_index().to_vec(), data.names().to_vec())
}
