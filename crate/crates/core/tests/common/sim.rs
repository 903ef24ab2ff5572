//! Simulation helpers shared by the integration suites.

#![allow(dead_code)]

use ivts_core::statespace::{
    simulate_with, ObservationPanel, SimulateOptions, Simulation, YearMonth,
};
use ivts_core::structural::{build_fsbsm, FsBsmParams};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn start() -> YearMonth {
    YearMonth::new(1901, 1).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn white_noise(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// Univariate FS-BSM variances `(eps, eta, zeta, omega_I, omega_II)`.
pub fn univariate(v: [f64; 5]) -> FsBsmParams {
    FsBsmParams::univariate(v[0], v[1], v[2], v[3], v[4]).unwrap()
}

/// Simulates a univariate FS-BSM whose states start at zero.
pub fn fsbsm(v: [f64; 5], n: usize, seed: u64) -> Simulation {
    let spec = build_fsbsm(&univariate(v)).unwrap();
    simulate_with(
        &spec,
        n,
        seed,
        SimulateOptions {
            start: start(),
            ..SimulateOptions::default()
        },
    )
    .unwrap()
}

pub fn panel(x: &[f64]) -> ObservationPanel {
    ObservationPanel::from_series(x, start()).unwrap()
}

pub fn corr(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Lag-`k` sample autocorrelation.
pub fn acf(x: &[f64], k: usize) -> f64 {
    let n = x.len();
    let m = x.iter().sum::<f64>() / n as f64;
    let c0: f64 = x.iter().map(|v| (v - m) * (v - m)).sum();
    let ck: f64 = (k..n).map(|t| (x[t] - m) * (x[t - k] - m)).sum();
    ck / c0
}
