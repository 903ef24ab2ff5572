//! `mldfm`: multi-level dynamic factor model of centres or log-ranges.
//!
//! Regions come from a `location_id,region` CSV or from clustering the
//! residual correlation into `k` groups. Region labels from a file keep their
//! order of first appearance.

use std::collections::HashMap;
use std::path::Path;

use anyhow::Context;
use ivts_core::dataio::cluster_complete_linkage;
use ivts_core::mldfm::{
    extract_factors, two_step_estimate, GlobalDynamics, MlDfmSpec, VarianceShares,
};
use serde::Serialize;

use super::cluster::{check_k, correlation, source_panel, write_assignment, write_square};
use super::Run;
use crate::artifacts::{header, num};
use crate::config::{CorrelationKind, Mode, RunConfig};
use crate::pipeline::{self, Loaded};
use crate::UsageError;

struct Regions {
    /// 1-based region of each location, in panel order.
    region_of: Vec<usize>,
    labels: Vec<String>,
    source: String,
}

fn read_regions(path: &Path, loaded: &Loaded) -> anyhow::Result<Regions> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("opening regions file {}", path.display()))?;
    let head = rdr.headers()?.clone();
    let col = |name: &str| {
        head.iter().position(|h| h == name).ok_or_else(|| {
            UsageError(format!(
                "regions file {} lacks a '{name}' column",
                path.display()
            ))
        })
    };
    let (ci, cr) = (col("location_id")?, col("region")?);
    let mut by_id: HashMap<String, String> = HashMap::new();
    let mut labels: Vec<String> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.with_context(|| format!("reading {}", path.display()))?;
        let (id, label) = (rec[ci].to_string(), rec[cr].to_string());
        if !labels.contains(&label) {
            labels.push(label.clone());
        }
        if by_id.insert(id.clone(), label).is_some() {
            return Err(
                UsageError(format!("location '{id}' appears twice in the regions file")).into(),
            );
        }
    }
    let mut region_of = Vec::new();
    for l in loaded.panel.locations() {
        let label = by_id.get(&l.id).ok_or_else(|| {
            UsageError(format!(
                "location '{}' has no region in {}",
                l.id,
                path.display()
            ))
        })?;
        region_of.push(labels.iter().position(|x| x == label).expect("label seen") + 1);
    }
    // drop labels that only name locations absent from the panel
    let used: Vec<usize> = (1..=labels.len())
        .filter(|r| region_of.contains(r))
        .collect();
    let remap: HashMap<usize, usize> = used.iter().enumerate().map(|(k, &r)| (r, k + 1)).collect();
    let labels = used.iter().map(|&r| labels[r - 1].clone()).collect();
    let region_of = region_of.iter().map(|r| remap[r]).collect();
    Ok(Regions {
        region_of,
        labels,
        source: path.display().to_string(),
    })
}

fn check_sizes(r: &Regions) -> anyhow::Result<()> {
    for (j, label) in r.labels.iter().enumerate() {
        let m = r.region_of.iter().filter(|&&x| x == j + 1).count();
        if m < 2 {
            anyhow::bail!("region '{label}' has {m} series; each region needs at least 2");
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct RegionSummary<'a> {
    index: usize,
    label: &'a str,
    n_series: usize,
    phi: f64,
    phi_clipped: bool,
    sigma2_eta: f64,
}

#[derive(Serialize)]
struct ModelReport<'a> {
    mode: Mode,
    global: GlobalDynamics,
    deseasonalized: bool,
    regions_source: &'a str,
    sigma2_xi: f64,
    regions: Vec<RegionSummary<'a>>,
    mean_shares: VarianceShares,
    spec: &'a MlDfmSpec,
}

pub fn run(cfg: &RunConfig, run: &mut Run) -> anyhow::Result<usize> {
    let d = &cfg.dfm;
    if d.regions_file.is_none() && d.k.is_none() {
        return Err(
            UsageError("give a regions file (--regions) or a region count (-k)".into()).into(),
        );
    }
    let loaded = pipeline::load(cfg)?;
    let n = loaded.panel.n_locations();
    let panel = source_panel(cfg, &loaded, d.mode, d.deseasonalize)?;
    if panel.has_missing() {
        return Err(UsageError(
            "factor extraction needs a complete panel; use --interpolate-gaps".into(),
        )
        .into());
    }

    let regions = match &d.regions_file {
        Some(p) => read_regions(p, &loaded)?,
        None => {
            let k = check_k(d.k, n)?;
            let corr = correlation(&panel, CorrelationKind::Residual)?;
            let a = cluster_complete_linkage(&corr, k).context("clustering")?;
            write_assignment(run, "mldfm/clusters", &loaded, &a)?;
            write_square(run, "mldfm/clusters/correlation.csv", panel.names(), &corr)?;
            Regions {
                region_of: a.labels.clone(),
                labels: (1..=k).map(|j| j.to_string()).collect(),
                source: format!("complete-linkage clustering, k = {k}"),
            }
        }
    };
    check_sizes(&regions)?;

    let global = d.global.map(Into::into).unwrap_or(d.mode.default_global());
    let spec = two_step_estimate(&panel, &regions.region_of, global)?;
    let fe = extract_factors(&spec, &panel)?;

    let mut cols = vec!["date".to_string(), "global".to_string()];
    if fe.slope.is_some() {
        cols.push("slope".into());
    }
    cols.extend(regions.labels.iter().map(|l| format!("region_{l}")));
    for (rel, paths) in [
        ("mldfm/factors.csv", (&fe.global, &fe.slope, &fe.regional)),
        (
            "mldfm/factor_se.csv",
            (&fe.global_se, &fe.slope_se, &fe.regional_se),
        ),
    ] {
        let (g, s, r) = paths;
        let rows = panel.time_index().iter().enumerate().map(|(t, date)| {
            let mut row = vec![date.to_string(), num(g[t])];
            if let Some(s) = s {
                row.push(num(s[t]));
            }
            row.extend(r.iter().map(|f| num(f[t])));
            row
        });
        let path = run.art.write_csv(rel, &cols, rows)?;
        run.record(path);
    }

    let rows = loaded.panel.locations().iter().enumerate().map(|(i, l)| {
        let sh = fe.shares[i];
        vec![
            l.id.clone(),
            l.name.clone(),
            num(l.lat),
            num(l.lon),
            regions.labels[regions.region_of[i] - 1].clone(),
            num(spec.global_loading(i)),
            num(spec.regional_loading(i)),
            num(sh.global),
            num(sh.regional),
            num(sh.idiosyncratic),
        ]
    });
    let path = run.art.write_csv(
        "mldfm/loadings.csv",
        &header(&[
            "location_id",
            "location_name",
            "lat",
            "lon",
            "region",
            "global_loading",
            "regional_loading",
            "share_global",
            "share_regional",
            "share_idiosyncratic",
        ]),
        rows,
    )?;
    run.record(path);

    let nf = n as f64;
    let mean_shares = VarianceShares {
        global: fe.shares.iter().map(|s| s.global).sum::<f64>() / nf,
        regional: fe.shares.iter().map(|s| s.regional).sum::<f64>() / nf,
        idiosyncratic: fe.shares.iter().map(|s| s.idiosyncratic).sum::<f64>() / nf,
    };
    let report = ModelReport {
        mode: d.mode,
        global,
        deseasonalized: d.deseasonalize,
        regions_source: &regions.source,
        sigma2_xi: spec.sigma2_xi(),
        regions: regions
            .labels
            .iter()
            .enumerate()
            .map(|(j, label)| RegionSummary {
                index: j + 1,
                label,
                n_series: regions.region_of.iter().filter(|&&r| r == j + 1).count(),
                phi: spec.phi()[j],
                phi_clipped: spec.phi_clipped()[j],
                sigma2_eta: spec.sigma2_eta()[j],
            })
            .collect(),
        mean_shares,
        spec: &spec,
    };
    let path = run.art.write_json("mldfm/model.json", &report)?;
    run.record(path);
    Ok(n)
}
