//! `cluster`: complete-linkage clustering of locations on `1 - rho`.

use anyhow::Context;
use ivts_core::dataio::{cluster_complete_linkage, correlation_matrix, ClusterAssignment};
use ivts_core::mldfm::residual_correlation;
use ivts_core::statespace::ObservationPanel;
use nalgebra::DMatrix;

use super::Run;
use crate::artifacts::{header, num};
use crate::config::{CorrelationKind, Mode, RunConfig};
use crate::pipeline::{self, Loaded};
use crate::UsageError;

/// The panel a factor or cluster analysis runs on.
pub(super) fn source_panel(
    cfg: &RunConfig,
    loaded: &Loaded,
    mode: Mode,
    deseasonalize: bool,
) -> anyhow::Result<ObservationPanel> {
    if deseasonalize {
        log::info!("removing filtered seasonals from {} series", mode.label());
        pipeline::deseasonalized_panel(cfg, loaded, mode)
    } else {
        Ok(loaded.series(mode).clone())
    }
}

pub(super) fn correlation(
    panel: &ObservationPanel,
    kind: CorrelationKind,
) -> anyhow::Result<DMatrix<f64>> {
    match kind {
        CorrelationKind::Raw => Ok(correlation_matrix(&[panel])?),
        CorrelationKind::Residual => {
            if panel.has_missing() {
                return Err(UsageError(
                    "residual correlation needs a complete panel; use --interpolate-gaps or --correlation raw"
                        .into(),
                )
                .into());
            }
            Ok(residual_correlation(panel)?)
        }
    }
}

/// Square `N x N` CSV: a header of ids, then one row of values per id.
pub(super) fn write_square(
    run: &mut Run,
    rel: &str,
    ids: &[String],
    m: &DMatrix<f64>,
) -> anyhow::Result<()> {
    let rows = (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| num(m[(i, j)])).collect());
    let path = run.art.write_csv(rel, ids, rows)?;
    run.record(path);
    Ok(())
}

pub(super) fn check_k(k: Option<usize>, n: usize) -> anyhow::Result<usize> {
    let k = k.ok_or_else(|| UsageError("the number of clusters is required (use -k)".into()))?;
    if k == 0 || k > n {
        return Err(UsageError(format!("k must be between 1 and {n}, got {k}")).into());
    }
    Ok(k)
}

pub(super) fn write_assignment(
    run: &mut Run,
    dir: &str,
    loaded: &Loaded,
    a: &ClusterAssignment,
) -> anyhow::Result<()> {
    let rows = loaded
        .panel
        .locations()
        .iter()
        .zip(&a.labels)
        .map(|(l, c)| {
            vec![
                l.id.clone(),
                l.name.clone(),
                num(l.lat),
                num(l.lon),
                c.to_string(),
            ]
        });
    let path = run.art.write_csv(
        &format!("{dir}/assignments.csv"),
        &header(&["location_id", "location_name", "lat", "lon", "cluster"]),
        rows,
    )?;
    run.record(path);
    let rows = a
        .heights
        .iter()
        .enumerate()
        .map(|(s, h)| vec![(s + 1).to_string(), num(*h)]);
    let path = run.art.write_csv(
        &format!("{dir}/heights.csv"),
        &header(&["merge", "height"]),
        rows,
    )?;
    run.record(path);
    Ok(())
}

pub fn run(cfg: &RunConfig, run: &mut Run) -> anyhow::Result<usize> {
    let c = &cfg.cluster;
    let loaded = pipeline::load(cfg)?;
    let n = loaded.panel.n_locations();
    let k = check_k(c.k, n)?;
    let panel = source_panel(cfg, &loaded, c.mode, c.deseasonalize)?;
    let corr = correlation(&panel, c.correlation)?;
    let a = cluster_complete_linkage(&corr, k).context("clustering")?;
    write_assignment(run, "cluster", &loaded, &a)?;
    write_square(run, "cluster/correlation.csv", panel.names(), &corr)?;
    Ok(n)
}
