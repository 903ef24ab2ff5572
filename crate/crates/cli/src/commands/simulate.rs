//! `simulate`: an interval panel with known components, written in the
//! input format, plus the true parameters (and factor paths for the factor
//! model) for checking recovery.
//!
//! Centre and log-range are built separately and mapped back with
//! `tmin = C - e^R / 2`, `tmax = C + e^R / 2`, so every month has
//! `tmax > tmin`.

use std::f64::consts::PI;

use ivts_core::dataio::{write_panel, IntervalPanel, Location};
use ivts_core::mldfm::{simulate_mldfm, MlDfmSpec, RandomDesign};
use ivts_core::rng::{child_seed, stream_rng};
use ivts_core::statespace::{simulate_with, SimulateOptions, YearMonth};
use ivts_core::structural::{build_fsbsm, FsBsmParams};
use nalgebra::DMatrix;
use rand::Rng;
use serde::Serialize;

use super::Run;
use crate::artifacts::{header, num};
use crate::config::{RunConfig, SimModel};
use crate::UsageError;

/// FS-BSM variances of simulated centres `(eps, eta, zeta, omega_I, omega_II)`.
pub const CENTRE_VARIANCES: [f64; 5] = [1.0, 0.0, 1e-7, 3e-4, 3e-5];

/// FS-BSM variances of simulated log-ranges.
pub const LOG_RANGE_VARIANCES: [f64; 5] = [4e-3, 1e-5, 0.0, 1e-5, 1e-6];

/// Scale of the factor-model log-range around its mean.
const LOG_RANGE_FACTOR_SCALE: f64 = 0.05;

#[derive(Serialize)]
struct Deterministic {
    mean: f64,
    /// Amplitude of `-cos(2 pi (month - 1) / 12)`: lowest in January.
    amplitude: f64,
}

#[derive(Serialize)]
struct FsBsmTruth {
    variances: [f64; 5],
    deterministic: Deterministic,
}

#[derive(Serialize)]
struct LocationTruth {
    id: String,
    centre: FsBsmTruth,
    log_range: FsBsmTruth,
}

#[derive(Serialize)]
struct FsBsmReport {
    model: SimModel,
    variance_order: [&'static str; 5],
    locations: Vec<LocationTruth>,
}

#[derive(Serialize)]
struct SeriesScale {
    id: String,
    centre_mean: f64,
    centre_scale: f64,
    centre_amplitude: f64,
    log_range_mean: f64,
    log_range_amplitude: f64,
}

#[derive(Serialize)]
struct MlDfmReport<'a> {
    model: SimModel,
    centre_design: &'a RandomDesign,
    centre_spec: &'a MlDfmSpec,
    log_range_design: &'a RandomDesign,
    log_range_spec: &'a MlDfmSpec,
    log_range_factor_scale: f64,
    locations: Vec<SeriesScale>,
}

fn annual(month: u32) -> f64 {
    -(2.0 * PI * (month as f64 - 1.0) / 12.0).cos()
}

fn locations(n: usize, seed: u64) -> Vec<Location> {
    let mut rng = stream_rng(seed, 0);
    (0..n)
        .map(|i| Location {
            id: format!("L{:03}", i + 1),
            name: format!("Location {}", i + 1),
            lat: (rng.gen_range(36.0..43.5f64) * 1e4).round() / 1e4,
            lon: (rng.gen_range(-9.0..3.3f64) * 1e4).round() / 1e4,
        })
        .collect()
}

fn write_interval_panel(
    run: &mut Run,
    locs: Vec<Location>,
    dates: Vec<YearMonth>,
    centre: &DMatrix<f64>,
    log_range: &DMatrix<f64>,
) -> anyhow::Result<()> {
    let (tmin, tmax) = ivts_core::dataio::from_centre_logrange(centre, log_range)?;
    let panel = IntervalPanel::new(locs, dates, tmin, tmax)?;
    let mut buf = format!("{}\n", run.art.comment_line()).into_bytes();
    write_panel(&mut buf, &panel)?;
    let path = run.art.write_raw("simulated.csv", &buf)?;
    run.record(path);
    Ok(())
}

fn simulate_fsbsm(cfg: &RunConfig, run: &mut Run, start: YearMonth) -> anyhow::Result<()> {
    let s = &cfg.simulate;
    let (n, t) = (s.n_locations, s.n_obs);
    let locs = locations(n, child_seed(cfg.seed, 0));
    let dates = start.range(t);
    let mut centre = DMatrix::zeros(t, n);
    let mut log_range = DMatrix::zeros(t, n);
    let mut truth = Vec::with_capacity(n);
    let opts = SimulateOptions {
        start,
        ..SimulateOptions::default()
    };
    let spec_of = |v: [f64; 5]| -> anyhow::Result<_> {
        Ok(build_fsbsm(&FsBsmParams::univariate(
            v[0], v[1], v[2], v[3], v[4],
        )?)?)
    };
    let (spec_c, spec_r) = (spec_of(CENTRE_VARIANCES)?, spec_of(LOG_RANGE_VARIANCES)?);
    for (i, loc) in locs.iter().enumerate() {
        let seed = child_seed(cfg.seed, 1 + i as u64);
        let mut rng = stream_rng(seed, 0);
        let dc = Deterministic {
            mean: rng.gen_range(10.0..18.0),
            amplitude: if s.seasonal {
                rng.gen_range(5.0..9.0)
            } else {
                0.0
            },
        };
        let dr = Deterministic {
            mean: rng.gen_range(8.0f64..14.0).ln(),
            amplitude: if s.seasonal {
                rng.gen_range(0.05..0.2)
            } else {
                0.0
            },
        };
        let xc = simulate_with(&spec_c, t, child_seed(seed, 1), opts)?
            .panel
            .series(0);
        let xr = simulate_with(&spec_r, t, child_seed(seed, 2), opts)?
            .panel
            .series(0);
        for (k, d) in dates.iter().enumerate() {
            centre[(k, i)] = dc.mean + dc.amplitude * annual(d.month) + xc[k];
            log_range[(k, i)] = dr.mean + dr.amplitude * annual(d.month) + xr[k];
        }
        truth.push(LocationTruth {
            id: loc.id.clone(),
            centre: FsBsmTruth {
                variances: CENTRE_VARIANCES,
                deterministic: dc,
            },
            log_range: FsBsmTruth {
                variances: LOG_RANGE_VARIANCES,
                deterministic: dr,
            },
        });
    }
    write_interval_panel(run, locs, dates, &centre, &log_range)?;
    let path = run.art.write_json(
        "truth.json",
        &FsBsmReport {
            model: SimModel::Fsbsm,
            variance_order: [
                "sigma2_eps",
                "sigma2_eta",
                "sigma2_zeta",
                "sigma2_omega_I",
                "sigma2_omega_II",
            ],
            locations: truth,
        },
    )?;
    run.record(path);
    Ok(())
}

fn regions_csv(
    run: &mut Run,
    rel: &str,
    locs: &[Location],
    spec: &MlDfmSpec,
) -> anyhow::Result<()> {
    let rows = locs
        .iter()
        .zip(spec.region_of())
        .map(|(l, r)| vec![l.id.clone(), r.to_string()]);
    let path = run
        .art
        .write_csv(rel, &header(&["location_id", "region"]), rows)?;
    run.record(path);
    Ok(())
}

fn simulate_factor_panels(cfg: &RunConfig, run: &mut Run, start: YearMonth) -> anyhow::Result<()> {
    let s = &cfg.simulate;
    let (n, t) = (s.n_locations, s.n_obs);
    let dc = RandomDesign::centre(n);
    let dr = RandomDesign::log_range(n);
    if n < 2 * dc.n_regions {
        return Err(UsageError(format!(
            "the factor-model panel needs at least {} locations",
            2 * dc.n_regions
        ))
        .into());
    }
    let spec_c = dc.draw(child_seed(cfg.seed, 1))?;
    let spec_r = dr.draw(child_seed(cfg.seed, 2))?;
    let sim_c = simulate_mldfm(&spec_c, t, child_seed(cfg.seed, 3))?;
    let sim_r = simulate_mldfm(&spec_r, t, child_seed(cfg.seed, 4))?;
    let locs = locations(n, child_seed(cfg.seed, 0));
    let dates = start.range(t);
    let mut rng = stream_rng(child_seed(cfg.seed, 5), 0);
    let mut scales = Vec::with_capacity(n);
    let mut centre = DMatrix::zeros(t, n);
    let mut log_range = DMatrix::zeros(t, n);
    for (i, loc) in locs.iter().enumerate() {
        let sc = SeriesScale {
            id: loc.id.clone(),
            centre_mean: rng.gen_range(10.0..18.0),
            centre_scale: rng.gen_range(1.0..2.0),
            centre_amplitude: if s.seasonal {
                rng.gen_range(5.0..9.0)
            } else {
                0.0
            },
            log_range_mean: rng.gen_range(8.0f64..14.0).ln(),
            log_range_amplitude: if s.seasonal {
                rng.gen_range(0.05..0.2)
            } else {
                0.0
            },
        };
        let (xc, xr) = (sim_c.panel.series(i), sim_r.panel.series(i));
        for (k, d) in dates.iter().enumerate() {
            let a = annual(d.month);
            centre[(k, i)] = sc.centre_mean + sc.centre_amplitude * a + sc.centre_scale * xc[k];
            log_range[(k, i)] =
                sc.log_range_mean + sc.log_range_amplitude * a + LOG_RANGE_FACTOR_SCALE * xr[k];
        }
        scales.push(sc);
    }
    write_interval_panel(run, locs.clone(), dates.clone(), &centre, &log_range)?;
    regions_csv(run, "regions_centre.csv", &locs, &spec_c)?;
    regions_csv(run, "regions_log_range.csv", &locs, &spec_r)?;

    let mut cols = vec!["date".to_string(), "centre_global".to_string()];
    cols.extend((1..=dc.n_regions).map(|j| format!("centre_region_{j}")));
    cols.push("log_range_global".into());
    cols.extend((1..=dr.n_regions).map(|j| format!("log_range_region_{j}")));
    let rows = dates.iter().enumerate().map(|(k, d)| {
        let mut r = vec![d.to_string(), num(sim_c.states[k][0])];
        r.extend((1..=dc.n_regions).map(|j| num(sim_c.states[k][spec_c.regional_state(j)])));
        r.push(num(sim_r.states[k][0]));
        r.extend((1..=dr.n_regions).map(|j| num(sim_r.states[k][spec_r.regional_state(j)])));
        r
    });
    let path = run.art.write_csv("truth_factors.csv", &cols, rows)?;
    run.record(path);
    let path = run.art.write_json(
        "truth.json",
        &MlDfmReport {
            model: SimModel::Mldfm,
            centre_design: &dc,
            centre_spec: &spec_c,
            log_range_design: &dr,
            log_range_spec: &spec_r,
            log_range_factor_scale: LOG_RANGE_FACTOR_SCALE,
            locations: scales,
        },
    )?;
    run.record(path);
    Ok(())
}

pub fn run(cfg: &RunConfig, run: &mut Run) -> anyhow::Result<usize> {
    let s = &cfg.simulate;
    if s.n_locations == 0 || s.n_obs < 2 {
        return Err(
            UsageError("simulate needs at least one location and two months".into()).into(),
        );
    }
    let start: YearMonth = s
        .start
        .parse()
        .map_err(|e| UsageError(format!("bad start month '{}': {e}", s.start)))?;
    match s.model {
        SimModel::Fsbsm => simulate_fsbsm(cfg, run, start)?,
        SimModel::Mldfm => simulate_factor_panels(cfg, run, start)?,
    }
    Ok(s.n_locations)
}
