//! Maximum likelihood estimation of FS-BSM variances.
//!
//! The optimizer works on unconstrained coordinates: each free variance enters
//! as `log sigma^2` and each free 2x2 correlation as `atanh rho`. A
//! [`ParamTemplate`] says which blocks are estimated, diagonal-only or pinned
//! at zero. The objective is the Kalman-filter log-likelihood divided by the
//! number of contributing observations; series are rescaled internally by the
//! standard deviation of their first differences so all starts are on a
//! common scale.

mod optim;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use optim::{
    fd_gradient, fd_hessian, optimizer, optimizer_names, Bfgs, NelderMead, OptimOptions,
    OptimResult, Optimizer, FD_STEP,
};

use crate::statespace::{kalman_filter, loglikelihood, ObservationPanel};
use crate::structural::{build_fsbsm, FsBsmParams, VarianceBlock};
use crate::{Error, Result};

/// Estimation status of one covariance block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockShape {
    /// Variances and (for two series) the correlation are estimated.
    Free,
    /// Variances estimated, correlation fixed at zero.
    Diagonal,
    /// Pinned at zero.
    Zero,
}

/// Which parameters are estimated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamTemplate {
    pub dim: usize,
    /// Shapes in the order of [`VarianceBlock::ALL`].
    pub shapes: [BlockShape; 5],
}

/// Variance below which log coordinates are clamped (keeps `exp` finite).
const LOG_VAR_MIN: f64 = -60.0;
const LOG_VAR_MAX: f64 = 30.0;
const ATANH_MAX: f64 = 18.0;

impl ParamTemplate {
    /// Every block free.
    pub fn full(dim: usize) -> Self {
        Self {
            dim,
            shapes: [BlockShape::Free; 5],
        }
    }

    pub fn with(mut self, block: VarianceBlock, shape: BlockShape) -> Self {
        self.shapes[Self::index(block)] = shape;
        self
    }

    pub fn shape(&self, block: VarianceBlock) -> BlockShape {
        self.shapes[Self::index(block)]
    }

    fn index(block: VarianceBlock) -> usize {
        VarianceBlock::ALL
            .iter()
            .position(|&b| b == block)
            .expect("listed")
    }

    fn validate(&self) -> Result<()> {
        if !(self.dim == 1 || self.dim == 2) {
            return Err(Error::validation(format!(
                "template dimension must be 1 or 2, got {}",
                self.dim
            )));
        }
        if self.shape(VarianceBlock::Irregular) == BlockShape::Zero {
            return Err(Error::validation(
                "the irregular variance cannot be pinned at zero",
            ));
        }
        Ok(())
    }

    fn has_corr(&self, shape: BlockShape) -> bool {
        shape == BlockShape::Free && self.dim == 2
    }

    /// Number of unconstrained coordinates.
    pub fn n_params(&self) -> usize {
        self.shapes
            .iter()
            .map(|&s| match s {
                BlockShape::Zero => 0,
                _ => self.dim + usize::from(self.has_corr(s)),
            })
            .sum()
    }

    /// Coordinate labels, e.g. `level[0]` or `irregular.rho`.
    pub fn labels(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (b, &s) in VarianceBlock::ALL.iter().zip(&self.shapes) {
            if s == BlockShape::Zero {
                continue;
            }
            let name = block_name(*b);
            for i in 0..self.dim {
                out.push(format!("{name}[{i}]"));
            }
            if self.has_corr(s) {
                out.push(format!("{name}.rho"));
            }
        }
        out
    }

    /// Maps parameters to unconstrained coordinates. Zero variances map to
    /// the lower clamp.
    pub fn to_unconstrained(&self, p: &FsBsmParams) -> Result<DVector<f64>> {
        self.validate()?;
        if p.dim() != self.dim {
            return Err(Error::validation(
                "parameter dimension does not match the template",
            ));
        }
        let mut out = Vec::with_capacity(self.n_params());
        for (b, &s) in VarianceBlock::ALL.iter().zip(&self.shapes) {
            if s == BlockShape::Zero {
                continue;
            }
            let m = p.block(*b);
            for i in 0..self.dim {
                out.push(m[(i, i)].max(0.0).ln().clamp(LOG_VAR_MIN, LOG_VAR_MAX));
            }
            if self.has_corr(s) {
                let denom = (m[(0, 0)] * m[(1, 1)]).sqrt();
                let rho = if denom > 0.0 {
                    (m[(0, 1)] / denom).clamp(-1.0, 1.0)
                } else {
                    0.0
                };
                out.push(rho.atanh().clamp(-ATANH_MAX, ATANH_MAX));
            }
        }
        Ok(DVector::from_vec(out))
    }

    /// Inverse of [`Self::to_unconstrained`].
    pub fn from_unconstrained(&self, theta: &DVector<f64>) -> Result<FsBsmParams> {
        self.validate()?;
        if theta.len() != self.n_params() {
            return Err(Error::validation(format!(
                "expected {} coordinates, got {}",
                self.n_params(),
                theta.len()
            )));
        }
        let mut p = FsBsmParams::zeros(self.dim);
        let mut k = 0;
        for (b, &s) in VarianceBlock::ALL.iter().zip(&self.shapes) {
            if s == BlockShape::Zero {
                continue;
            }
            let m = p.block_mut(*b);
            for i in 0..self.dim {
                m[(i, i)] = theta[k].clamp(LOG_VAR_MIN, LOG_VAR_MAX).exp();
                k += 1;
            }
            if self.has_corr(s) {
                let rho = theta[k].clamp(-ATANH_MAX, ATANH_MAX).tanh();
                let c = rho * (m[(0, 0)] * m[(1, 1)]).sqrt();
                m[(0, 1)] = c;
                m[(1, 0)] = c;
                k += 1;
            }
        }
        Ok(p)
    }
}

fn block_name(b: VarianceBlock) -> &'static str {
    match b {
        VarianceBlock::Irregular => "irregular",
        VarianceBlock::Level => "level",
        VarianceBlock::Slope => "slope",
        VarianceBlock::SeasonalI => "seasonal_i",
        VarianceBlock::SeasonalII => "seasonal_ii",
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitOptions {
    pub max_iter: usize,
    pub gtol: f64,
    pub optimizer: String,
    /// Optimizer tried when the primary one stops without converging.
    pub fallback: Option<String>,
    pub multi_start: usize,
    pub seed: u64,
    pub standard_errors: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            gtol: 1e-6,
            optimizer: "bfgs".to_string(),
            fallback: Some("nelder-mead".to_string()),
            multi_start: 3,
            seed: 0,
            standard_errors: false,
        }
    }
}

/// Standard error of one estimated coordinate, reported on the natural scale
/// (variance or correlation) by the delta method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamStandardError {
    pub label: String,
    pub value: f64,
    pub se: f64,
}

/// Outcome of one start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartOutcome {
    pub start_loglik: f64,
    pub loglik: f64,
    pub converged: bool,
    pub optimizer: String,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub params: FsBsmParams,
    pub loglik: f64,
    pub n_iter: usize,
    pub converged: bool,
    /// Infinity norm of the objective gradient in unconstrained coordinates.
    pub gradient_norm: f64,
    pub param_standard_errors: Option<Vec<ParamStandardError>>,
    /// Log-likelihood after each accepted iteration of the winning start.
    pub loglik_trace: Vec<f64>,
    pub template: ParamTemplate,
    pub optimizer: String,
    pub starts: Vec<StartOutcome>,
    /// Unconstrained coordinates of `params` on the internally rescaled data.
    pub theta: DVector<f64>,
    /// Per-series scale applied to the data before optimizing.
    pub scales: Vec<f64>,
}

/// Variances below this fraction of the irregular variance are reported as 0.
pub const BOUNDARY_REL: f64 = 1e-8;

impl FitResult {
    /// Parameters with boundary variances (and their covariances) set to zero.
    pub fn summary_params(&self) -> FsBsmParams {
        let mut p = self.params.clone();
        let irr: Vec<f64> = (0..p.dim()).map(|i| p.irregular[(i, i)]).collect();
        for b in VarianceBlock::ALL {
            if b == VarianceBlock::Irregular {
                continue;
            }
            let m = p.block_mut(b);
            for i in 0..irr.len() {
                if m[(i, i)] < BOUNDARY_REL * irr[i] {
                    for j in 0..irr.len() {
                        m[(i, j)] = 0.0;
                        m[(j, i)] = 0.0;
                    }
                }
            }
        }
        p
    }
}

fn series_scales(data: &ObservationPanel) -> Vec<f64> {
    (0..data.n_series())
        .map(|j| {
            let x = data.series(j);
            let d: Vec<f64> = x
                .windows(2)
                .filter(|w| w[0].is_finite() && w[1].is_finite())
                .map(|w| w[1] - w[0])
                .collect();
            let obs: Vec<f64> = x.iter().copied().filter(|v| v.is_finite()).collect();
            let sd = |v: &[f64]| {
                if v.len() > 1 {
                    crate::linalg::variance_pop(v).sqrt()
                } else {
                    0.0
                }
            };
            let s = sd(&d);
            if s > 0.0 {
                s
            } else if sd(&obs) > 0.0 {
                sd(&obs)
            } else {
                1.0
            }
        })
        .collect()
}

fn rescale(data: &ObservationPanel, scales: &[f64]) -> Result<ObservationPanel> {
    let v = DMatrix::from_fn(data.n_obs(), data.n_series(), |t, j| {
        data.values()[(t, j)] / scales[j]
    });
    ObservationPanel::with_names(v, data.time_index().to_vec(), data.names().to_vec())
}

/// Undo the rescaling: `Sigma = D Sigma_scaled D`.
fn unscale(p: &FsBsmParams, scales: &[f64]) -> FsBsmParams {
    let mut out = p.clone();
    for b in VarianceBlock::ALL {
        let m = out.block_mut(b);
        for i in 0..scales.len() {
            for j in 0..scales.len() {
                m[(i, j)] *= scales[i] * scales[j];
            }
        }
    }
    out
}

/// Starting values on the rescaled data (first differences have unit variance).
fn start_points(
    template: &ParamTemplate,
    data: &ObservationPanel,
    n: usize,
    seed: u64,
) -> Result<Vec<FsBsmParams>> {
    let d = template.dim;
    let mut moments = Vec::with_capacity(d);
    for j in 0..d {
        let x = data.series(j);
        let dx: Vec<f64> = x
            .windows(2)
            .filter(|w| w[0].is_finite() && w[1].is_finite())
            .map(|w| w[1] - w[0])
            .collect();
        let m = crate::linalg::mean(&dx);
        let g0 = dx.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / dx.len() as f64;
        let g1 = dx.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum::<f64>() / dx.len() as f64;
        // local level: var(dx) = 2 eps + eta, cov(dx_t, dx_{t-1}) = -eps
        let eps = (-g1).clamp(0.05 * g0, 0.5 * g0);
        let eta = (g0 - 2.0 * eps).max(0.01 * g0);
        moments.push((eps, eta));
    }
    let diag =
        |f: &dyn Fn(usize) -> f64| DMatrix::from_fn(d, d, |i, j| if i == j { f(i) } else { 0.0 });
    let make = |eps: &dyn Fn(usize) -> f64,
                eta: &dyn Fn(usize) -> f64,
                zeta: f64,
                seas: f64|
     -> Result<FsBsmParams> {
        FsBsmParams::new(
            diag(eps),
            diag(eta),
            diag(&|_| zeta),
            diag(&|_| seas),
            diag(&|_| seas),
        )
    };
    let mut out = vec![
        make(&|i| moments[i].0, &|i| moments[i].1, 1e-4, 1e-3)?,
        make(&|_| 0.3, &|_| 1e-3, 1e-6, 1e-5)?,
        make(&|_| 0.5, &|_| 0.2, 1e-2, 1e-2)?,
    ];
    let mut k = 0u64;
    while out.len() < n {
        // further starts jitter the moment start in log space
        use rand::Rng;
        let mut rng = crate::rng::stream_rng(seed, k);
        k += 1;
        let mut jitter = |v: f64| v * (rng.gen_range(-2.0..2.0f64)).exp();
        let p = make(&|i| moments[i].0, &|i| moments[i].1, 1e-4, 1e-3)?;
        let mut q = p.clone();
        for b in VarianceBlock::ALL {
            let m = q.block_mut(b);
            for i in 0..d {
                m[(i, i)] = jitter(m[(i, i)]);
            }
        }
        out.push(q);
    }
    out.truncate(n.max(1));
    // pin template zeros so starts live in the template's space
    for p in out.iter_mut() {
        for b in VarianceBlock::ALL {
            if template.shape(b) == BlockShape::Zero {
                p.block_mut(b).fill(0.0);
            }
        }
    }
    Ok(out)
}

/// Maximum likelihood fit of the FS-BSM variances.
///
/// Never fails for lack of convergence: the best start is returned with
/// `converged = false`. Fails for invalid templates, options, or data shorter
/// than five observations per estimated coordinate.
pub fn fit_ml(
    template: &ParamTemplate,
    data: &ObservationPanel,
    opts: &FitOptions,
) -> Result<FitResult> {
    template.validate()?;
    if data.n_series() != template.dim {
        return Err(Error::validation(format!(
            "template is {}-variate but data has {} series",
            template.dim,
            data.n_series()
        )));
    }
    if opts.max_iter == 0 || !(opts.gtol > 0.0) || opts.multi_start == 0 {
        return Err(Error::validation(
            "max_iter, gtol and multi_start must be positive",
        ));
    }
    let primary = optimizer(&opts.optimizer)
        .ok_or_else(|| Error::validation(format!("unknown optimizer '{}'", opts.optimizer)))?;
    let fallback = match &opts.fallback {
        Some(name) => Some(
            optimizer(name)
                .ok_or_else(|| Error::validation(format!("unknown optimizer '{name}'")))?,
        ),
        None => None,
    };
    let k = template.n_params();
    if data.n_obs() < 5 * k {
        return Err(Error::validation(format!(
            "{} observations are too few for {k} parameters (need at least {})",
            data.n_obs(),
            5 * k
        )));
    }

    let scales = series_scales(data);
    let scaled = rescale(data, &scales)?;
    let n_eff = {
        let mut probe = FsBsmParams::zeros(template.dim);
        probe.irregular = DMatrix::identity(template.dim, template.dim);
        kalman_filter(&build_fsbsm(&probe)?, &scaled)?
            .n_loglik_obs
            .max(1) as f64
    };
    let objective = |theta: &DVector<f64>| -> f64 {
        match template
            .from_unconstrained(theta)
            .and_then(|p| build_fsbsm(&p))
            .and_then(|s| loglikelihood(&s, &scaled))
        {
            Ok(ll) => -ll / n_eff,
            Err(_) => f64::INFINITY,
        }
    };
    let oopts = OptimOptions {
        max_iter: opts.max_iter,
        gtol: opts.gtol,
    };
    let starts = start_points(template, &scaled, opts.multi_start, opts.seed)?;

    let runs: Vec<(OptimResult, String, f64)> = starts
        .par_iter()
        .map(|p0| -> Result<(OptimResult, String, f64)> {
            let x0 = template.to_unconstrained(p0)?;
            let f0 = objective(&x0);
            let mut r = primary.minimize(&objective, x0, &oopts);
            let mut name = primary.name().to_string();
            if !r.converged {
                if let Some(fb) = &fallback {
                    let r2 = fb.minimize(&objective, r.x.clone(), &oopts);
                    if r2.fx <= r.fx {
                        let mut trace = r.trace.clone();
                        trace.extend(r2.trace.iter().skip(1));
                        r = OptimResult {
                            trace,
                            n_iter: r.n_iter + r2.n_iter,
                            ..r2
                        };
                        name = format!("{}+{}", primary.name(), fb.name());
                    }
                }
            }
            Ok((r, name, f0))
        })
        .collect::<Result<_>>()?;

    let best = (0..runs.len())
        .min_by(|&a, &b| {
            runs[a]
                .0
                .fx
                .partial_cmp(&runs[b].0.fx)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        })
        .expect("at least one start");
    let (r, name, _) = &runs[best];
    if !r.fx.is_finite() {
        return Err(Error::degenerate(
            "log-likelihood is not finite at any start",
        ));
    }

    let params_scaled = template.from_unconstrained(&r.x)?;
    let params = unscale(&params_scaled, &scales);
    let loglik = loglikelihood(&build_fsbsm(&params)?, data)?;
    // the rescaling shifts the log-likelihood by a constant
    let offset = loglik + r.fx * n_eff;
    let loglik_trace = r.trace.iter().map(|f| -f * n_eff + offset).collect();

    let param_standard_errors = if opts.standard_errors {
        Some(standard_errors(template, &objective, &r.x, n_eff, &scales)?)
    } else {
        None
    };

    Ok(FitResult {
        params,
        loglik,
        n_iter: r.n_iter,
        converged: r.converged,
        gradient_norm: r.grad_inf,
        param_standard_errors,
        loglik_trace,
        template: template.clone(),
        optimizer: name.clone(),
        starts: runs
            .iter()
            .map(|(r, name, f0)| StartOutcome {
                start_loglik: -f0 * n_eff + offset,
                loglik: -r.fx * n_eff + offset,
                converged: r.converged,
                optimizer: name.clone(),
            })
            .collect(),
        theta: r.x.clone(),
        scales,
    })
}

fn standard_errors(
    template: &ParamTemplate,
    objective: &dyn Fn(&DVector<f64>) -> f64,
    theta: &DVector<f64>,
    n_eff: f64,
    scales: &[f64],
) -> Result<Vec<ParamStandardError>> {
    // observed information of the total log-likelihood in unconstrained coordinates
    let info = fd_hessian(objective, theta) * n_eff;
    let cov = info
        .clone()
        .try_inverse()
        .unwrap_or_else(|| DMatrix::from_element(theta.len(), theta.len(), f64::NAN));
    let labels = template.labels();
    let mut out = Vec::with_capacity(theta.len());
    let mut k = 0;
    for &s in &template.shapes {
        if s == BlockShape::Zero {
            continue;
        }
        for i in 0..template.dim {
            let v = theta[k].clamp(LOG_VAR_MIN, LOG_VAR_MAX).exp() * scales[i] * scales[i];
            let var_theta = cov[(k, k)];
            let se = if var_theta >= 0.0 {
                v * var_theta.sqrt()
            } else {
                f64::NAN
            };
            out.push(ParamStandardError {
                label: labels[k].clone(),
                value: v,
                se,
            });
            k += 1;
        }
        if template.dim == 2 && s == BlockShape::Free {
            let rho = theta[k].tanh();
            let var_theta = cov[(k, k)];
            let se = if var_theta >= 0.0 {
                (1.0 - rho * rho) * var_theta.sqrt()
            } else {
                f64::NAN
            };
            out.push(ParamStandardError {
                label: labels[k].clone(),
                value: rho,
                se,
            });
            k += 1;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_counts() {
        assert_eq!(ParamTemplate::full(1).n_params(), 5);
        assert_eq!(ParamTemplate::full(2).n_params(), 15);
        let irw = ParamTemplate::full(1).with(VarianceBlock::Level, BlockShape::Zero);
        assert_eq!(irw.n_params(), 4);
        let diag = ParamTemplate::full(2).with(VarianceBlock::Slope, BlockShape::Diagonal);
        assert_eq!(diag.n_params(), 14);
        assert_eq!(diag.labels().len(), 14);
        assert!(ParamTemplate::full(1)
            .with(VarianceBlock::Irregular, BlockShape::Zero)
            .validate()
            .is_err());
    }

    #[test]
    fn round_trip_interior() {
        let t = ParamTemplate::full(2);
        let theta = DVector::from_vec((0..15).map(|i| ((i as f64) * 0.37).sin()).collect());
        let p = t.from_unconstrained(&theta).unwrap();
        let back = t.to_unconstrained(&p).unwrap();
        assert!((back - theta).amax() < 1e-12);
    }

    #[test]
    fn boundary_summary() {
        let p = FsBsmParams::univariate(2.0, 1e-12, 0.5, 0.0, 1e-3).unwrap();
        let r = FitResult {
            params: p,
            loglik: 0.0,
            n_iter: 0,
            converged: true,
            gradient_norm: 0.0,
            param_standard_errors: None,
            loglik_trace: vec![],
            template: ParamTemplate::full(1),
            optimizer: "bfgs".into(),
            starts: vec![],
            theta: DVector::zeros(5),
            scales: vec![1.0],
        };
        let s = r.summary_params();
        assert_eq!(s.level[(0, 0)], 0.0);
        assert_eq!(s.slope[(0, 0)], 0.5);
        assert_eq!(s.seasonal_ii[(0, 0)], 1e-3);
    }
}
