use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::{ObservationPanel, SsmSpec, YearMonth};
use crate::linalg::psd_sqrt;
use crate::rng::stream_rng;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct SimulateOptions {
    /// Variance used in place of the big-kappa prior for diffuse states.
    pub diffuse_start_variance: f64,
    pub start: YearMonth,
}

impl Default for SimulateOptions {
    fn default() -> Self {
        Self {
            diffuse_start_variance: 0.0,
            start: YearMonth {
                year: 2000,
                month: 1,
            },
        }
    }
}

/// Simulated observations together with the latent state path.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub panel: ObservationPanel,
    pub states: Vec<DVector<f64>>,
}

/// Draws `n` observations from `spec` with default options.
pub fn simulate(spec: &SsmSpec, n: usize, seed: u64) -> Result<Simulation> {
    simulate_with(spec, n, seed, SimulateOptions::default())
}

pub fn simulate_with(
    spec: &SsmSpec,
    n: usize,
    seed: u64,
    opts: SimulateOptions,
) -> Result<Simulation> {
    if n == 0 {
        return Err(Error::validation("simulation length must be at least 1"));
    }
    if !(opts.diffuse_start_variance >= 0.0) {
        return Err(Error::validation(
            "diffuse start variance must be non-negative",
        ));
    }
    let m = spec.state_dim();
    let p = spec.obs_dim();
    let mut rng = stream_rng(seed, 0);
    let mut draw =
        |k: usize| DVector::from_iterator(k, (0..k).map(|_| rng.sample::<f64, _>(StandardNormal)));

    let mut p1 = spec.p1().clone();
    for (i, &d) in spec.diffuse_mask().iter().enumerate() {
        if d {
            p1[(i, i)] = opts.diffuse_start_variance;
        }
    }
    let p1_root = psd_sqrt(&p1);
    let h_root = psd_sqrt(spec.h());
    let q_root = psd_sqrt(spec.q());

    let mut alpha = spec.a1() + &p1_root * draw(m);
    let mut states = Vec::with_capacity(n);
    let mut y = DMatrix::zeros(n, p);
    for t in 0..n {
        let obs = spec.z() * &alpha + &h_root * draw(p);
        y.row_mut(t).copy_from(&obs.transpose());
        let next = spec.t() * &alpha + &q_root * draw(m);
        states.push(std::mem::replace(&mut alpha, next));
    }
    let panel = ObservationPanel::new(y, opts.start.range(n))?;
    Ok(Simulation { panel, states })
}
