//! `deseasonalize`: every series minus its filtered seasonal, as wide CSVs
//! (`date` then one column per location).

use ivts_core::rng::child_seed;
use ivts_core::structural::{build_fsbsm, deseasonalize};
use nalgebra::DMatrix;

use super::Run;
use crate::artifacts::num;
use crate::config::RunConfig;
use crate::pipeline;

pub fn run(cfg: &RunConfig, run: &mut Run) -> anyhow::Result<usize> {
    let loaded = pipeline::load(cfg)?;
    let n_loc = loaded.panel.n_locations();
    let n = loaded.panel.n_obs();
    let jobs = pipeline::jobs(n_loc, cfg.model.joint);
    let out = pipeline::par_map(cfg, &jobs, |i, job| -> Result<Vec<Vec<f64>>, String> {
        let data = pipeline::job_data(&loaded, *job).map_err(|e| e.to_string())?;
        let sf = pipeline::fit_series(cfg, data, child_seed(cfg.seed, i as u64))
            .map_err(|e| e.to_string())?;
        let spec = build_fsbsm(&sf.fit.params).map_err(|e| e.to_string())?;
        let ds = deseasonalize(&sf.data, &spec, &sf.fit.params).map_err(|e| e.to_string())?;
        Ok((0..ds.n_series()).map(|k| ds.series(k)).collect())
    })?;

    // columns: centre block then log-range block, NaN for failures
    let mut centre = DMatrix::from_element(n, n_loc, f64::NAN);
    let mut log_range = DMatrix::from_element(n, n_loc, f64::NAN);
    for (job, res) in jobs.iter().zip(out) {
        let id = &loaded.panel.locations()[job.location].id;
        match res {
            Ok(cols) => {
                for (label, col) in job.kind.series_labels().iter().zip(cols) {
                    let target = if *label == "centre" {
                        &mut centre
                    } else {
                        &mut log_range
                    };
                    for (t, v) in col.into_iter().enumerate() {
                        target[(t, job.location)] = v;
                    }
                }
            }
            Err(e) => {
                log::error!("{id} {}: {e}", job.kind.label());
                run.fail(id, job.kind.label(), e);
            }
        }
    }
    let mut head = vec!["date".to_string()];
    head.extend(loaded.panel.locations().iter().map(|l| l.id.clone()));
    for (name, m) in [("centre", &centre), ("log_range", &log_range)] {
        let rows = loaded.panel.dates().iter().enumerate().map(|(t, d)| {
            let mut r = vec![d.to_string()];
            r.extend((0..n_loc).map(|j| num(m[(t, j)])));
            r
        });
        let path = run
            .art
            .write_csv(&format!("deseasonalized/{name}.csv"), &head, rows)?;
        run.record(path);
    }
    Ok(n_loc)
}
