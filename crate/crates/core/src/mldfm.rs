//! Multi-level dynamic factor model.
//!
//! Standardized series load on one global factor and on the factor of their
//! own region only:
//!
//! ```text
//! y_it = p_gi F_gt + p_ri F_{r(i),t} + eps_it
//! ```
//!
//! The global factor is an integrated random walk (or a random walk) and each
//! regional factor is a stationary AR(1). Parameters come from the two-step
//! procedure: principal components give factors and loadings, simple
//! regressions give the dynamics, and the Kalman smoother on the assembled
//! state-space system gives the final factor paths.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::linalg::{mean, ols, variance_pop};
use crate::rng::stream_rng;
use crate::statespace::{
    kalman_filter, kalman_smoother, simulate_with, ObservationPanel, SimulateOptions, Simulation,
    SsmSpec,
};
use crate::{Error, Result};

/// Bound applied to estimated AR coefficients.
pub const PHI_BOUND: f64 = 0.999;

/// Dynamics of the global factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GlobalDynamics {
    /// Level plus a random-walk slope; the level has no own disturbance.
    Irw,
    /// Random-walk level, no slope state.
    Rw,
}

impl GlobalDynamics {
    fn n_states(self) -> usize {
        match self {
            GlobalDynamics::Irw => 2,
            GlobalDynamics::Rw => 1,
        }
    }
}

/// Parameters of a multi-level DFM on standardized data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlDfmSpec {
    region_of: Vec<usize>,
    /// `N x (1 + R)`: global column, then one column per region.
    loadings: Vec<Vec<f64>>,
    global: GlobalDynamics,
    sigma2_xi: f64,
    phi: Vec<f64>,
    sigma2_eta: Vec<f64>,
    sigma2_eps: Vec<f64>,
    /// Regions whose AR coefficient was clipped to the stationarity bound.
    phi_clipped: Vec<bool>,
}

impl MlDfmSpec {
    /// `region_of[i]` is the 1-based region of series `i`. `global_loadings`
    /// and `regional_loadings` have one entry per series; the full loading
    /// matrix is built with the zero pattern already in place.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        region_of: Vec<usize>,
        global_loadings: Vec<f64>,
        regional_loadings: Vec<f64>,
        global: GlobalDynamics,
        sigma2_xi: f64,
        phi: Vec<f64>,
        sigma2_eta: Vec<f64>,
        sigma2_eps: Vec<f64>,
    ) -> Result<Self> {
        let n = region_of.len();
        let r = validate_regions(&region_of)?;
        if global_loadings.len() != n || regional_loadings.len() != n || sigma2_eps.len() != n {
            return Err(Error::validation(format!(
                "loadings and idiosyncratic variances need one entry per series ({n})"
            )));
        }
        if phi.len() != r || sigma2_eta.len() != r {
            return Err(Error::validation(format!(
                "AR coefficients and regional variances need one entry per region ({r})"
            )));
        }
        let loadings = (0..n)
            .map(|i| {
                let mut row = vec![0.0; 1 + r];
                row[0] = global_loadings[i];
                row[region_of[i]] = regional_loadings[i];
                row
            })
            .collect();
        let spec = Self {
            region_of,
            loadings,
            global,
            sigma2_xi,
            phi,
            sigma2_eta,
            sigma2_eps,
            phi_clipped: vec![false; r],
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.region_of.len();
        let r = validate_regions(&self.region_of)?;
        if self.loadings.len() != n || self.loadings.iter().any(|row| row.len() != 1 + r) {
            return Err(Error::validation("loading matrix must be N x (1 + R)"));
        }
        for (i, row) in self.loadings.iter().enumerate() {
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::validation(format!(
                    "loadings of series {i} must be finite"
                )));
            }
            for (j, &v) in row.iter().enumerate().skip(1) {
                if j != self.region_of[i] && v != 0.0 {
                    return Err(Error::validation(format!(
                        "series {i} in region {} has a nonzero loading on region {j}",
                        self.region_of[i]
                    )));
                }
            }
        }
        if self.phi.len() != r || self.sigma2_eta.len() != r || self.phi_clipped.len() != r {
            return Err(Error::validation(
                "regional dynamics need one entry per region",
            ));
        }
        if let Some(p) = self.phi.iter().find(|p| !(p.abs() < 1.0)) {
            return Err(Error::validation(format!(
                "AR coefficient {p} is not stationary"
            )));
        }
        let variances = std::iter::once(&self.sigma2_xi)
            .chain(&self.sigma2_eta)
            .chain(&self.sigma2_eps);
        if variances
            .into_iter()
            .any(|v| !(*v >= 0.0) || !v.is_finite())
        {
            return Err(Error::validation(
                "variances must be finite and non-negative",
            ));
        }
        Ok(())
    }

    pub fn n_series(&self) -> usize {
        self.region_of.len()
    }

    pub fn n_regions(&self) -> usize {
        self.phi.len()
    }

    pub fn region_of(&self) -> &[usize] {
        &self.region_of
    }

    pub fn loadings(&self) -> DMatrix<f64> {
        let r = self.n_regions();
        DMatrix::from_fn(self.n_series(), 1 + r, |i, j| self.loadings[i][j])
    }

    pub fn global_loading(&self, i: usize) -> f64 {
        self.loadings[i][0]
    }

    pub fn regional_loading(&self, i: usize) -> f64 {
        self.loadings[i][self.region_of[i]]
    }

    pub fn global_dynamics(&self) -> GlobalDynamics {
        self.global
    }

    pub fn sigma2_xi(&self) -> f64 {
        self.sigma2_xi
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn sigma2_eta(&self) -> &[f64] {
        &self.sigma2_eta
    }

    pub fn sigma2_eps(&self) -> &[f64] {
        &self.sigma2_eps
    }

    pub fn phi_clipped(&self) -> &[bool] {
        &self.phi_clipped
    }

    /// Index of region `j`'s factor in the assembled state vector.
    pub fn regional_state(&self, j: usize) -> usize {
        self.global.n_states() + j - 1
    }
}

/// Checks labels are `1..=R` with every region non-empty; returns `R`.
fn validate_regions(region_of: &[usize]) -> Result<usize> {
    if region_of.is_empty() {
        return Err(Error::validation("at least one series is required"));
    }
    let r = *region_of.iter().max().expect("non-empty");
    if region_of.contains(&0) {
        return Err(Error::validation("region labels are 1-based"));
    }
    for j in 1..=r {
        if !region_of.contains(&j) {
            return Err(Error::validation(format!("region {j} has no series")));
        }
    }
    Ok(r)
}

/// First principal component with loadings of unit mean square.
#[derive(Debug, Clone, PartialEq)]
pub struct PrincipalComponent {
    pub factor: Vec<f64>,
    pub loadings: Vec<f64>,
}

fn columns_have_no_missing(x: &DMatrix<f64>) -> Result<()> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::validation(
            "principal components need a complete panel; fill gaps before factor extraction",
        ));
    }
    Ok(())
}

/// Centers each column and, if `scale`, divides by its standard deviation
/// (divisor `T`). Returns the transformed matrix with the means and sds.
pub fn standardize(x: &DMatrix<f64>, scale: bool) -> Result<(DMatrix<f64>, Vec<f64>, Vec<f64>)> {
    columns_have_no_missing(x)?;
    let mut out = x.clone();
    let mut means = Vec::with_capacity(x.ncols());
    let mut sds = Vec::with_capacity(x.ncols());
    for j in 0..x.ncols() {
        let col: Vec<f64> = x.column(j).iter().copied().collect();
        let m = mean(&col);
        let sd = variance_pop(&col).sqrt();
        let magnitude = col.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if !(sd > 1e-12 * magnitude.max(f64::MIN_POSITIVE)) {
            return Err(Error::validation(format!("series {j} has zero variance")));
        }
        let s = if scale { sd } else { 1.0 };
        out.column_mut(j).iter_mut().for_each(|v| *v = (*v - m) / s);
        means.push(m);
        sds.push(sd);
    }
    Ok((out, means, sds))
}

/// First principal component of the columns of `x` (centered, and scaled to
/// unit variance if `standardize`). The loadings have unit mean square, the
/// factor is `X l / N`, and the sign makes the mean loading non-negative.
pub fn pc_extract_matrix(x: &DMatrix<f64>, standardize_cols: bool) -> Result<PrincipalComponent> {
    let n = x.ncols();
    if n < 2 {
        return Err(Error::validation(
            "principal components need at least two series",
        ));
    }
    let (xs, _, _) = standardize(x, standardize_cols)?;
    Ok(first_pc(&xs))
}

/// First PC of an already centered matrix.
fn first_pc(xs: &DMatrix<f64>) -> PrincipalComponent {
    let n = xs.ncols();
    let eig = SymmetricEigen::new(xs.transpose() * xs);
    let k = eig.eigenvalues.imax();
    let mut l: DVector<f64> = eig.eigenvectors.column(k) * (n as f64).sqrt();
    if l.sum() < 0.0 {
        l.neg_mut();
    }
    let f = xs * &l / n as f64;
    PrincipalComponent {
        factor: f.iter().copied().collect(),
        loadings: l.iter().copied().collect(),
    }
}

/// [`pc_extract_matrix`] on a panel.
pub fn pc_extract(panel: &ObservationPanel, standardize_cols: bool) -> Result<PrincipalComponent> {
    pc_extract_matrix(panel.values(), standardize_cols)
}

/// Principal-component factors of the two-step procedure.
#[derive(Debug, Clone)]
pub struct PcFactors {
    pub global: PrincipalComponent,
    /// One per region; loadings in the order of that region's members.
    pub regional: Vec<PrincipalComponent>,
    /// `T x N` idiosyncratic residuals.
    pub idiosyncratic: DMatrix<f64>,
    /// `T x N` residuals after removing the global component.
    pub global_residuals: DMatrix<f64>,
}

fn members(region_of: &[usize], j: usize) -> Vec<usize> {
    (0..region_of.len())
        .filter(|&i| region_of[i] == j)
        .collect()
}

/// Step one of the two-step estimator: global PC on the standardized panel,
/// then one PC per region on the residuals.
pub fn pc_factors(panel: &ObservationPanel, region_of: &[usize]) -> Result<PcFactors> {
    if region_of.len() != panel.n_series() {
        return Err(Error::validation(format!(
            "region map has {} entries for {} series",
            region_of.len(),
            panel.n_series()
        )));
    }
    let r = validate_regions(region_of)?;
    for j in 1..=r {
        let m = members(region_of, j).len();
        if m < 2 {
            return Err(Error::validation(format!(
                "region {j} has {m} series; at least 2 are required"
            )));
        }
    }
    if panel.n_series() < 2 {
        return Err(Error::validation(
            "principal components need at least two series",
        ));
    }
    let (xs, _, _) = standardize(panel.values(), true)?;
    let global = first_pc(&xs);
    let f = DVector::from_column_slice(&global.factor);
    let l = DVector::from_column_slice(&global.loadings);
    let u = &xs - &f * l.transpose();

    let regional: Vec<PrincipalComponent> = (1..=r)
        .into_par_iter()
        .map(|j| {
            let idx = members(region_of, j);
            let sub = DMatrix::from_fn(u.nrows(), idx.len(), |t, c| u[(t, idx[c])]);
            first_pc(&sub)
        })
        .collect();

    let mut eps = u.clone();
    for (j, pc) in regional.iter().enumerate() {
        for (c, &i) in members(region_of, j + 1).iter().enumerate() {
            for t in 0..eps.nrows() {
                eps[(t, i)] -= pc.loadings[c] * pc.factor[t];
            }
        }
    }
    Ok(PcFactors {
        global,
        regional,
        idiosyncratic: eps,
        global_residuals: u,
    })
}

/// Correlation matrix of the standardized series after the global PC
/// component is removed; this is where the regional block structure lives.
pub fn residual_correlation(panel: &ObservationPanel) -> Result<DMatrix<f64>> {
    let (xs, _, _) = standardize(panel.values(), true)?;
    if xs.ncols() < 2 {
        return Err(Error::validation("correlations need at least two series"));
    }
    let g = first_pc(&xs);
    let u = &xs
        - DVector::from_column_slice(&g.factor)
            * DVector::from_column_slice(&g.loadings).transpose();
    let n = u.ncols();
    let norms: Vec<f64> = (0..n).map(|j| u.column(j).norm()).collect();
    if let Some(j) = norms
        .iter()
        .position(|&v| !(v > 1e-12 * (xs.nrows() as f64).sqrt()))
    {
        return Err(Error::validation(format!(
            "series {j} is fully explained by the global factor"
        )));
    }
    Ok(DMatrix::from_fn(n, n, |a, b| {
        if a == b {
            1.0
        } else {
            u.column(a).dot(&u.column(b)) / (norms[a] * norms[b])
        }
    }))
}

fn differences(x: &[f64], order: usize) -> Vec<f64> {
    let mut d = x.to_vec();
    for _ in 0..order {
        d = d.windows(2).map(|w| w[1] - w[0]).collect();
    }
    d
}

/// Two-step estimate of the model parameters on the standardized panel.
///
/// AR coefficients outside `(-0.999, 0.999)` are clipped and flagged in
/// [`MlDfmSpec::phi_clipped`].
pub fn two_step_estimate(
    panel: &ObservationPanel,
    region_of: &[usize],
    global: GlobalDynamics,
) -> Result<MlDfmSpec> {
    let t_obs = panel.n_obs();
    if t_obs < 4 {
        return Err(Error::validation(
            "two-step estimation needs at least 4 time points",
        ));
    }
    let pcs = pc_factors(panel, region_of)?;
    let n = panel.n_series();
    let r = pcs.regional.len();

    let mut regional_loadings = vec![0.0; n];
    for (j, pc) in pcs.regional.iter().enumerate() {
        for (c, &i) in members(region_of, j + 1).iter().enumerate() {
            regional_loadings[i] = pc.loadings[c];
        }
    }
    let sigma2_eps = (0..n)
        .map(|i| {
            variance_pop(
                &pcs.idiosyncratic
                    .column(i)
                    .iter()
                    .copied()
                    .collect::<Vec<_>>(),
            )
        })
        .collect();

    let mut phi = Vec::with_capacity(r);
    let mut sigma2_eta = Vec::with_capacity(r);
    let mut clipped = Vec::with_capacity(r);
    for (j, pc) in pcs.regional.iter().enumerate() {
        let f = &pc.factor;
        let x = DMatrix::from_fn(t_obs - 1, 2, |t, c| if c == 0 { 1.0 } else { f[t] });
        let (beta, resid) = ols(&x, &f[1..]).map_err(|e| {
            Error::validation(format!("AR(1) regression for region {} failed: {e}", j + 1))
        })?;
        let raw = beta[1];
        let p = raw.clamp(-PHI_BOUND, PHI_BOUND);
        if p != raw {
            log::warn!("region {}: AR coefficient {raw:.4} clipped to {p}", j + 1);
        }
        clipped.push(p != raw);
        phi.push(p);
        sigma2_eta.push(resid.iter().map(|e| e * e).sum::<f64>() / resid.len() as f64);
    }
    let order = match global {
        GlobalDynamics::Irw => 2,
        GlobalDynamics::Rw => 1,
    };
    let sigma2_xi = variance_pop(&differences(&pcs.global.factor, order));

    let mut spec = MlDfmSpec::new(
        region_of.to_vec(),
        pcs.global.loadings.clone(),
        regional_loadings,
        global,
        sigma2_xi,
        phi,
        sigma2_eta,
        sigma2_eps,
    )?;
    spec.phi_clipped = clipped;
    Ok(spec)
}

/// State-space form: states `(F_g, beta, F_1..F_R)` for IRW dynamics or
/// `(F_g, F_1..F_R)` for RW dynamics. Global states are diffuse; regional
/// factors start at their stationary law.
pub fn assemble_ssm(spec: &MlDfmSpec) -> Result<SsmSpec> {
    spec.validate()?;
    let n = spec.n_series();
    let r = spec.n_regions();
    let g = spec.global.n_states();
    let m = g + r;
    let mut z = DMatrix::zeros(n, m);
    for i in 0..n {
        z[(i, 0)] = spec.global_loading(i);
        z[(i, spec.regional_state(spec.region_of[i]))] = spec.regional_loading(i);
    }
    let mut t = DMatrix::zeros(m, m);
    let mut q = DMatrix::zeros(m, m);
    let mut p1 = DMatrix::zeros(m, m);
    t[(0, 0)] = 1.0;
    match spec.global {
        GlobalDynamics::Irw => {
            t[(0, 1)] = 1.0;
            t[(1, 1)] = 1.0;
            q[(1, 1)] = spec.sigma2_xi;
        }
        GlobalDynamics::Rw => q[(0, 0)] = spec.sigma2_xi,
    }
    for j in 0..r {
        let s = g + j;
        let phi = spec.phi[j];
        t[(s, s)] = phi;
        q[(s, s)] = spec.sigma2_eta[j];
        p1[(s, s)] = spec.sigma2_eta[j] / (1.0 - phi * phi);
    }
    let h = DMatrix::from_diagonal(&DVector::from_column_slice(&spec.sigma2_eps));
    let diffuse = (0..m).map(|s| s < g).collect();
    SsmSpec::new(z, t, h, q, DVector::zeros(m), p1, diffuse)
}

/// Shares of a standardized series' sample variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceShares {
    pub global: f64,
    pub regional: f64,
    pub idiosyncratic: f64,
}

/// Smoothed factors and their summaries.
#[derive(Debug, Clone)]
pub struct FactorEstimate {
    pub global: Vec<f64>,
    pub global_se: Vec<f64>,
    /// Present for IRW global dynamics.
    pub slope: Option<Vec<f64>>,
    pub slope_se: Option<Vec<f64>>,
    /// `regional[j]` is the path of region `j + 1`.
    pub regional: Vec<Vec<f64>>,
    pub regional_se: Vec<Vec<f64>>,
    /// `N x (1 + R)` loadings on the standardized scale.
    pub loadings: DMatrix<f64>,
    pub shares: Vec<VarianceShares>,
}

/// Runs the smoother of the assembled system on the standardized panel.
///
/// Shares are `loading^2 var(factor path) / var(series)` for the common
/// parts; the idiosyncratic share is the remainder, floored at zero. The
/// smoothed paths are not orthogonal in-sample, so the common shares alone
/// can sum to slightly more than one.
pub fn extract_factors(spec: &MlDfmSpec, panel: &ObservationPanel) -> Result<FactorEstimate> {
    if spec.n_series() != panel.n_series() {
        return Err(Error::validation(format!(
            "model has {} series, panel has {}",
            spec.n_series(),
            panel.n_series()
        )));
    }
    let ssm = assemble_ssm(spec)?;
    let (xs, _, _) = standardize(panel.values(), true)?;
    let std_panel = ObservationPanel::with_names(
        xs.clone(),
        panel.time_index().to_vec(),
        panel.names().to_vec(),
    )?;
    let filt = kalman_filter(&ssm, &std_panel)?;
    let smooth = kalman_smoother(&ssm, &std_panel, &filt)?;

    let path = |s: usize| -> (Vec<f64>, Vec<f64>) {
        let est = smooth.smoothed_mean.iter().map(|a| a[s]).collect();
        let se = smooth
            .smoothed_cov
            .iter()
            .map(|p| p[(s, s)].max(0.0).sqrt())
            .collect();
        (est, se)
    };
    let (global, global_se) = path(0);
    let (slope, slope_se) = match spec.global {
        GlobalDynamics::Irw => {
            let (a, b) = path(1);
            (Some(a), Some(b))
        }
        GlobalDynamics::Rw => (None, None),
    };
    let (regional, regional_se): (Vec<_>, Vec<_>) = (1..=spec.n_regions())
        .map(|j| path(spec.regional_state(j)))
        .unzip();

    let var_g = variance_pop(&global);
    let var_r: Vec<f64> = regional.iter().map(|f| variance_pop(f)).collect();
    let shares = (0..spec.n_series())
        .map(|i| {
            let y: Vec<f64> = xs.column(i).iter().copied().collect();
            let vy = variance_pop(&y);
            let j = spec.region_of[i];
            let (lg, lr) = (spec.global_loading(i), spec.regional_loading(i));
            let global = lg * lg * var_g / vy;
            let regional = lr * lr * var_r[j - 1] / vy;
            VarianceShares {
                global,
                regional,
                idiosyncratic: (1.0 - global - regional).max(0.0),
            }
        })
        .collect();

    Ok(FactorEstimate {
        global,
        global_se,
        slope,
        slope_se,
        regional,
        regional_se,
        loadings: spec.loadings(),
        shares,
    })
}

/// Draws a panel from the model; the global states start at zero.
pub fn simulate_mldfm(spec: &MlDfmSpec, n: usize, seed: u64) -> Result<Simulation> {
    let ssm = assemble_ssm(spec)?;
    simulate_with(&ssm, n, seed, SimulateOptions::default())
}

/// Random ML-DFM parameters for simulation studies. Regions are contiguous
/// blocks of series, regional factors have unit stationary variance
/// (`sigma2_eta = 1 - phi^2`), and the remaining quantities are drawn
/// uniformly from the given ranges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomDesign {
    pub n_series: usize,
    pub n_regions: usize,
    pub global: GlobalDynamics,
    pub sigma2_xi: f64,
    pub global_loading: (f64, f64),
    pub regional_loading: (f64, f64),
    pub phi: (f64, f64),
    pub sigma2_eps: (f64, f64),
}

impl RandomDesign {
    /// Centre-type panel: IRW global factor, five regions.
    pub fn centre(n_series: usize) -> Self {
        Self {
            n_series,
            n_regions: 5,
            global: GlobalDynamics::Irw,
            sigma2_xi: 1e-6,
            global_loading: (0.5, 1.5),
            regional_loading: (0.3, 1.0),
            phi: (0.4, 0.7),
            sigma2_eps: (0.05, 0.2),
        }
    }

    /// Log-range-type panel: RW global factor, three regions.
    pub fn log_range(n_series: usize) -> Self {
        Self {
            n_series,
            n_regions: 3,
            global: GlobalDynamics::Rw,
            sigma2_xi: 3e-2,
            global_loading: (0.5, 1.0),
            regional_loading: (0.5, 1.0),
            phi: (0.4, 0.7),
            sigma2_eps: (0.05, 0.2),
        }
    }

    /// Region of series `i` (1-based): contiguous, nearly equal blocks.
    pub fn region_of(&self) -> Vec<usize> {
        (0..self.n_series)
            .map(|i| i * self.n_regions / self.n_series + 1)
            .collect()
    }

    pub fn draw(&self, seed: u64) -> Result<MlDfmSpec> {
        if self.n_regions == 0 || self.n_series < 2 * self.n_regions {
            return Err(Error::validation(format!(
                "{} series cannot fill {} regions of at least two",
                self.n_series, self.n_regions
            )));
        }
        let ranges = [
            self.global_loading,
            self.regional_loading,
            self.phi,
            self.sigma2_eps,
        ];
        if ranges.iter().any(|r| !(r.0 <= r.1)) {
            return Err(Error::validation("design ranges must satisfy lo <= hi"));
        }
        let mut rng = stream_rng(seed, 0);
        let mut uniform = |r: (f64, f64)| {
            if r.0 == r.1 {
                r.0
            } else {
                rng.gen_range(r.0..r.1)
            }
        };
        let n = self.n_series;
        let lg: Vec<f64> = (0..n).map(|_| uniform(self.global_loading)).collect();
        let lr: Vec<f64> = (0..n).map(|_| uniform(self.regional_loading)).collect();
        let phi: Vec<f64> = (0..self.n_regions).map(|_| uniform(self.phi)).collect();
        let eps: Vec<f64> = (0..n).map(|_| uniform(self.sigma2_eps)).collect();
        let eta = phi.iter().map(|p| 1.0 - p * p).collect();
        MlDfmSpec::new(
            self.region_of(),
            lg,
            lr,
            self.global,
            self.sigma2_xi,
            phi,
            eta,
            eps,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec(global: GlobalDynamics) -> MlDfmSpec {
        MlDfmSpec::new(
            vec![1, 1, 2, 2, 2],
            vec![1.0, 0.8, 1.2, 0.9, 1.1],
            vec![0.5, 0.7, 0.6, 0.4, 0.8],
            global,
            1e-3,
            vec![0.5, -0.3],
            vec![0.2, 0.3],
            vec![0.5; 5],
        )
        .unwrap()
    }

    #[test]
    fn zero_pattern_is_built_and_enforced() {
        let spec = small_spec(GlobalDynamics::Irw);
        let l = spec.loadings();
        assert_eq!(l[(0, 2)], 0.0);
        assert_eq!(l[(3, 1)], 0.0);
        let mut bad = spec.clone();
        bad.loadings[0][2] = 0.1;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn state_dimensions() {
        assert_eq!(
            assemble_ssm(&small_spec(GlobalDynamics::Irw))
                .unwrap()
                .state_dim(),
            4
        );
        assert_eq!(
            assemble_ssm(&small_spec(GlobalDynamics::Rw))
                .unwrap()
                .state_dim(),
            3
        );
        let five = MlDfmSpec::new(
            (0..10).map(|i| i / 2 + 1).collect(),
            vec![1.0; 10],
            vec![1.0; 10],
            GlobalDynamics::Irw,
            1e-4,
            vec![0.5; 5],
            vec![1.0; 5],
            vec![1.0; 10],
        )
        .unwrap();
        assert_eq!(assemble_ssm(&five).unwrap().state_dim(), 7);
    }

    #[test]
    fn validation_errors() {
        assert!(MlDfmSpec::new(
            vec![1, 3],
            vec![1.0; 2],
            vec![1.0; 2],
            GlobalDynamics::Rw,
            0.0,
            vec![0.1; 3],
            vec![1.0; 3],
            vec![1.0; 2]
        )
        .is_err());
        assert!(MlDfmSpec::new(
            vec![1, 1],
            vec![1.0; 2],
            vec![1.0; 2],
            GlobalDynamics::Rw,
            0.0,
            vec![1.0],
            vec![1.0],
            vec![1.0; 2]
        )
        .is_err());
        assert!(MlDfmSpec::new(
            vec![1, 1],
            vec![1.0; 2],
            vec![1.0; 2],
            GlobalDynamics::Rw,
            -1.0,
            vec![0.1],
            vec![1.0],
            vec![1.0; 2]
        )
        .is_err());
    }

    #[test]
    fn identical_series_give_equal_loadings() {
        let base: Vec<f64> = (0..50)
            .map(|t| (t as f64 * 0.3).sin() + 0.01 * t as f64)
            .collect();
        let x = DMatrix::from_fn(50, 4, |t, _| base[t]);
        let pc = pc_extract_matrix(&x, true).unwrap();
        for l in &pc.loadings {
            assert!((l - 1.0).abs() < 1e-10);
        }
        let xs = standardize(&x, true).unwrap().0;
        for t in 0..50 {
            assert!((pc.factor[t] - xs[(t, 0)]).abs() < 1e-10);
        }
    }

    #[test]
    fn sign_flip_flips_factor_only() {
        let x = DMatrix::from_fn(40, 3, |t, j| ((t * (j + 2)) as f64).sin() + t as f64 * 0.05);
        let a = pc_extract_matrix(&x, true).unwrap();
        let b = pc_extract_matrix(&(-&x), true).unwrap();
        assert!(a.loadings.iter().sum::<f64>() >= 0.0 && b.loadings.iter().sum::<f64>() >= 0.0);
        for t in 0..40 {
            assert!((a.factor[t] + b.factor[t]).abs() < 1e-10);
        }
    }

    #[test]
    fn missing_and_constant_inputs_are_rejected() {
        let mut x = DMatrix::from_fn(10, 2, |t, j| (t + j) as f64);
        x[(3, 1)] = f64::NAN;
        assert!(matches!(
            pc_extract_matrix(&x, true),
            Err(Error::Validation(_))
        ));
        let c = DMatrix::from_fn(10, 2, |t, j| if j == 0 { 1.0 } else { t as f64 });
        assert!(matches!(
            pc_extract_matrix(&c, true),
            Err(Error::Validation(_))
        ));
    }
}
