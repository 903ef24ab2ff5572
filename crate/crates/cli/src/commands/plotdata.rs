//! `plotdata`: tables behind the standard figures. Polar coordinates of
//! every monthly value (angle by calendar month), the spatial correlation
//! matrices of centres and log-ranges, and per-location centre/log-range
//! correlations; optionally the smoothed components with 95% bands.

use std::f64::consts::PI;

use ivts_core::dataio::{correlation_matrix, correlation_of_columns};
use ivts_core::statespace::ObservationPanel;

use super::cluster::write_square;
use super::fit::write_components;
use super::Run;
use crate::artifacts::{header, num};
use crate::config::{Mode, RunConfig};
use crate::pipeline::{self, fit_jobs, jobs, Loaded};

fn polar(run: &mut Run, loaded: &Loaded, mode: Mode) -> anyhow::Result<()> {
    let p: &ObservationPanel = loaded.series(mode);
    let mut rows = Vec::new();
    for (j, id) in p.names().iter().enumerate() {
        for (t, d) in p.time_index().iter().enumerate() {
            let v = p.values()[(t, j)];
            if v.is_nan() {
                continue;
            }
            rows.push(vec![
                id.clone(),
                d.to_string(),
                d.month.to_string(),
                num(2.0 * PI * (d.month as f64 - 1.0) / 12.0),
                num(v),
            ]);
        }
    }
    let path = run.art.write_csv(
        &format!("plot/polar_{}.csv", mode.label()),
        &header(&["location_id", "date", "month", "angle", "radius"]),
        rows,
    )?;
    run.record(path);
    Ok(())
}

pub fn run(cfg: &RunConfig, run: &mut Run) -> anyhow::Result<usize> {
    let loaded = pipeline::load(cfg)?;
    let n = loaded.panel.n_locations();
    for mode in [Mode::Centre, Mode::LogRange] {
        polar(run, &loaded, mode)?;
        let p = loaded.series(mode);
        match correlation_matrix(&[p]) {
            Ok(corr) => write_square(
                run,
                &format!("plot/correlation_{}.csv", mode.label()),
                p.names(),
                &corr,
            )?,
            Err(e) => run.fail("*", mode.label(), &format!("correlation matrix: {e}")),
        }
    }

    let mut rows = Vec::with_capacity(n);
    for (j, l) in loaded.panel.locations().iter().enumerate() {
        let cols = [loaded.centre.series(j), loaded.log_range.series(j)];
        let names = [format!("{}:centre", l.id), format!("{}:log_range", l.id)];
        let rho = match correlation_of_columns(&cols, &names) {
            Ok(m) => m[(0, 1)],
            Err(e) => {
                run.fail(&l.id, "joint", &e.to_string());
                f64::NAN
            }
        };
        rows.push(vec![
            l.id.clone(),
            l.name.clone(),
            num(l.lat),
            num(l.lon),
            num(rho),
        ]);
    }
    let path = run.art.write_csv(
        "plot/locations.csv",
        &header(&[
            "location_id",
            "location_name",
            "lat",
            "lon",
            "corr_centre_log_range",
        ]),
        rows,
    )?;
    run.record(path);

    if cfg.plot_components {
        let js = jobs(n, cfg.model.joint);
        let fits = fit_jobs(cfg, &loaded, &js)?;
        for (job, res) in js.iter().zip(fits) {
            let id = loaded.panel.locations()[job.location].id.clone();
            match res {
                Ok(sf) => write_components(
                    run,
                    "plot/components",
                    &id,
                    job.kind.series_labels(),
                    &sf.components,
                )?,
                Err(e) => run.fail(&id, job.kind.label(), &e),
            }
        }
    }
    Ok(n)
}
