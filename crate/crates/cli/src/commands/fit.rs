//! `fit` and `test`: per-location estimates in the layout of the
//! estimation-results table (variances, component tests with significance
//! stars, terminal level and slope), smoothed component bands, and annual
//! descriptive statistics.

use std::collections::BTreeMap;

use ivts_core::dataio::{annual_descriptives, AnnualDescriptives, Location};
use ivts_core::stattests::{ComponentTests, TestResult};
use ivts_core::structural::{Component, ComponentSet, VarianceBlock};
use serde::Serialize;

use super::Run;
use crate::artifacts::{file_stem, header, num};
use crate::config::RunConfig;
use crate::pipeline::{self, Job, SeriesFit};

#[derive(Debug, Serialize)]
pub struct TestSummary {
    pub name: String,
    pub statistic: f64,
    pub stars: String,
    pub reject_5pct: bool,
    pub critical_5pct: Option<f64>,
    pub p_value: Option<f64>,
}

impl From<&TestResult> for TestSummary {
    fn from(t: &TestResult) -> Self {
        Self {
            name: t.name.clone(),
            statistic: t.statistic,
            stars: t.stars().to_string(),
            reject_5pct: t.decision_at_5pct,
            critical_5pct: t.critical_value(0.05),
            p_value: t.p_value,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Estimate {
    pub estimate: f64,
    pub se: f64,
}

/// One column of the estimation-results table.
#[derive(Debug, Serialize)]
pub struct Table2Row {
    pub sigma2_eps: f64,
    pub sigma2_eta: f64,
    #[serde(rename = "RWD")]
    pub rwd: TestSummary,
    pub sigma2_zeta: f64,
    #[serde(rename = "IRW")]
    pub irw: TestSummary,
    #[serde(rename = "sigma2_omega_I")]
    pub sigma2_omega_i: f64,
    #[serde(rename = "H0I")]
    pub h0i: TestSummary,
    #[serde(rename = "sigma2_omega_II")]
    pub sigma2_omega_ii: f64,
    #[serde(rename = "H0II")]
    pub h0ii: TestSummary,
    #[serde(rename = "mu_T")]
    pub mu_t: Estimate,
    #[serde(rename = "beta_T")]
    pub beta_t: Estimate,
}

#[derive(Debug, Serialize)]
struct SeriesReport {
    #[serde(flatten)]
    table: Table2Row,
    loglik: f64,
    converged: bool,
    n_iter: usize,
    optimizer: String,
}

#[derive(Debug, Serialize)]
struct ModelSummary {
    joint: bool,
    trend: crate::config::TrendVariant,
    seasonal: crate::config::SeasonalVariant,
}

#[derive(Debug, Serialize)]
struct LocationFit<'a> {
    location: &'a Location,
    model: ModelSummary,
    series: BTreeMap<&'static str, SeriesReport>,
    /// Cross-series disturbance correlations of a joint fit.
    #[serde(skip_serializing_if = "Option::is_none")]
    correlations: Option<BTreeMap<&'static str, Option<f64>>>,
}

#[derive(Debug, Serialize)]
struct SeriesTests {
    component_tests: ComponentTests,
    annual_differences: Option<AnnualDescriptives>,
}

#[derive(Debug, Serialize)]
struct LocationTests<'a> {
    location: &'a Location,
    series: BTreeMap<&'static str, SeriesTests>,
}

fn block_label(b: VarianceBlock) -> &'static str {
    match b {
        VarianceBlock::Irregular => "irregular",
        VarianceBlock::Level => "level",
        VarianceBlock::Slope => "slope",
        VarianceBlock::SeasonalI => "seasonal_i",
        VarianceBlock::SeasonalII => "seasonal_ii",
    }
}

fn table_row(sf: &SeriesFit, tests: &ComponentTests, i: usize) -> Table2Row {
    let p = sf.fit.summary_params();
    let d = |b: VarianceBlock| p.block(b)[(i, i)];
    let term = sf.components.terminal(i);
    Table2Row {
        sigma2_eps: d(VarianceBlock::Irregular),
        sigma2_eta: d(VarianceBlock::Level),
        rwd: (&tests.rwd).into(),
        sigma2_zeta: d(VarianceBlock::Slope),
        irw: (&tests.irw).into(),
        sigma2_omega_i: d(VarianceBlock::SeasonalI),
        h0i: (&tests.seasonal_i).into(),
        sigma2_omega_ii: d(VarianceBlock::SeasonalII),
        h0ii: (&tests.seasonal_ii).into(),
        mu_t: Estimate {
            estimate: term.mu_t,
            se: term.mu_t_se,
        },
        beta_t: Estimate {
            estimate: term.beta_t,
            se: term.beta_t_se,
        },
    }
}

const COMPONENTS: [(Component, &str); 4] = [
    (Component::Trend, "trend"),
    (Component::Slope, "slope"),
    (Component::Seasonal, "seasonal"),
    (Component::Irregular, "irregular"),
];

/// `<dir>/<id>_<series>_<component>.csv` with columns date, estimate, lo95, hi95.
pub fn write_components(
    run: &mut Run,
    dir: &str,
    location_id: &str,
    series: &[&str],
    comps: &ComponentSet,
) -> anyhow::Result<()> {
    let stem = file_stem(location_id);
    for (i, s) in series.iter().enumerate() {
        for (c, cname) in COMPONENTS {
            let band = comps.band95(c, i);
            let rows = comps
                .dates
                .iter()
                .zip(band)
                .map(|(d, (e, lo, hi))| vec![d.to_string(), num(e), num(lo), num(hi)]);
            let path = run.art.write_csv(
                &format!("{dir}/{stem}_{s}_{cname}.csv"),
                &header(&["date", "estimate", "lo95", "hi95"]),
                rows,
            )?;
            run.record(path);
        }
    }
    Ok(())
}

fn correlation(m: &nalgebra::DMatrix<f64>) -> Option<f64> {
    let den = (m[(0, 0)] * m[(1, 1)]).sqrt();
    (den > 0.0).then(|| m[(0, 1)] / den)
}

struct Fitted {
    jobs: Vec<Job>,
    results: Vec<Result<(SeriesFit, Vec<ComponentTests>), String>>,
}

fn fit_and_test(cfg: &RunConfig, loaded: &pipeline::Loaded) -> anyhow::Result<Fitted> {
    let jobs = pipeline::jobs(loaded.panel.n_locations(), cfg.model.joint);
    let tables = pipeline::mc_tables(cfg, loaded.panel.n_obs())?;
    let fits = pipeline::fit_jobs(cfg, loaded, &jobs)?;
    let results = fits
        .into_iter()
        .map(|r| {
            r.and_then(|sf| {
                let t =
                    pipeline::series_tests(cfg, &sf, tables.as_ref()).map_err(|e| e.to_string())?;
                Ok((sf, t))
            })
        })
        .collect();
    Ok(Fitted { jobs, results })
}

const TABLE_COLUMNS: [&str; 21] = [
    "location_id",
    "series",
    "sigma2_eps",
    "sigma2_eta",
    "RWD",
    "RWD_stars",
    "sigma2_zeta",
    "IRW",
    "IRW_stars",
    "sigma2_omega_I",
    "H0I",
    "H0I_stars",
    "sigma2_omega_II",
    "H0II",
    "H0II_stars",
    "mu_T",
    "mu_T_se",
    "beta_T",
    "beta_T_se",
    "loglik",
    "converged",
];

fn table_csv_row(id: &str, series: &str, r: &SeriesReport) -> Vec<String> {
    let t = &r.table;
    vec![
        id.to_string(),
        series.to_string(),
        num(t.sigma2_eps),
        num(t.sigma2_eta),
        num(t.rwd.statistic),
        t.rwd.stars.clone(),
        num(t.sigma2_zeta),
        num(t.irw.statistic),
        t.irw.stars.clone(),
        num(t.sigma2_omega_i),
        num(t.h0i.statistic),
        t.h0i.stars.clone(),
        num(t.sigma2_omega_ii),
        num(t.h0ii.statistic),
        t.h0ii.stars.clone(),
        num(t.mu_t.estimate),
        num(t.mu_t.se),
        num(t.beta_t.estimate),
        num(t.beta_t.se),
        num(r.loglik),
        r.converged.to_string(),
    ]
}

pub fn run_fit(cfg: &RunConfig, run: &mut Run) -> anyhow::Result<usize> {
    let loaded = pipeline::load(cfg)?;
    let fitted = fit_and_test(cfg, &loaded)?;
    let locs = loaded.panel.locations();
    let mut per_loc: Vec<LocationFit> = locs
        .iter()
        .map(|l| LocationFit {
            location: l,
            model: ModelSummary {
                joint: cfg.model.joint,
                trend: cfg.model.trend,
                seasonal: cfg.model.seasonal,
            },
            series: BTreeMap::new(),
            correlations: None,
        })
        .collect();
    let mut table_rows = Vec::new();
    for (job, res) in fitted.jobs.iter().zip(&fitted.results) {
        let id = &locs[job.location].id;
        match res {
            Ok((sf, tests)) => {
                let labels = job.kind.series_labels();
                for (i, s) in labels.iter().enumerate() {
                    let rep = SeriesReport {
                        table: table_row(sf, &tests[i], i),
                        loglik: sf.fit.loglik,
                        converged: sf.fit.converged,
                        n_iter: sf.fit.n_iter,
                        optimizer: sf.fit.optimizer.clone(),
                    };
                    table_rows.push(table_csv_row(id, s, &rep));
                    per_loc[job.location].series.insert(s, rep);
                }
                if labels.len() == 2 {
                    let p = sf.fit.summary_params();
                    per_loc[job.location].correlations = Some(
                        VarianceBlock::ALL
                            .iter()
                            .map(|&b| (block_label(b), correlation(p.block(b))))
                            .collect(),
                    );
                }
                write_components(run, "components", id, labels, &sf.components)?;
            }
            Err(e) => run.fail(id, job.kind.label(), e.clone()),
        }
    }
    for lf in &per_loc {
        let path = run
            .art
            .write_json(&format!("fit/{}.json", file_stem(&lf.location.id)), lf)?;
        run.record(path);
    }
    let path = run
        .art
        .write_csv("table2.csv", &header(&TABLE_COLUMNS), table_rows)?;
    run.record(path);
    Ok(locs.len())
}

const TEST_COLUMNS: [&str; 14] = [
    "location_id",
    "series",
    "level_test",
    "level_stat",
    "level_stars",
    "IRW",
    "IRW_stars",
    "H0I",
    "H0I_stars",
    "H0II",
    "H0II_stars",
    "annual_skewness",
    "annual_kurtosis",
    "annual_box_pierce",
];

pub fn run_test(cfg: &RunConfig, run: &mut Run) -> anyhow::Result<usize> {
    let loaded = pipeline::load(cfg)?;
    let fitted = fit_and_test(cfg, &loaded)?;
    let locs = loaded.panel.locations();
    let mut per_loc: Vec<LocationTests> = locs
        .iter()
        .map(|l| LocationTests {
            location: l,
            series: BTreeMap::new(),
        })
        .collect();
    let mut rows = Vec::new();
    for (job, res) in fitted.jobs.iter().zip(&fitted.results) {
        let id = &locs[job.location].id;
        let (sf, tests) = match res {
            Ok(v) => v,
            Err(e) => {
                run.fail(id, job.kind.label(), e.clone());
                continue;
            }
        };
        for (i, s) in job.kind.series_labels().iter().enumerate() {
            let annual = match annual_descriptives(&sf.data.series(i)) {
                Ok(a) => Some(a),
                Err(e) => {
                    run.fail(id, s, format!("annual descriptives: {e}"));
                    None
                }
            };
            let t = &tests[i];
            let (sk, ku, bp) = annual
                .as_ref()
                .map(|a| {
                    (
                        num(a.moments.skewness),
                        num(a.moments.kurtosis),
                        num(a.box_pierce.statistic),
                    )
                })
                .unwrap_or_default();
            rows.push(vec![
                id.clone(),
                s.to_string(),
                t.rwd.name.clone(),
                num(t.rwd.statistic),
                t.rwd.stars().to_string(),
                num(t.irw.statistic),
                t.irw.stars().to_string(),
                num(t.seasonal_i.statistic),
                t.seasonal_i.stars().to_string(),
                num(t.seasonal_ii.statistic),
                t.seasonal_ii.stars().to_string(),
                sk,
                ku,
                bp,
            ]);
            per_loc[job.location].series.insert(
                s,
                SeriesTests {
                    component_tests: t.clone(),
                    annual_differences: annual,
                },
            );
        }
    }
    for lt in &per_loc {
        let path = run
            .art
            .write_json(&format!("tests/{}.json", file_stem(&lt.location.id)), lt)?;
        run.record(path);
    }
    let path = run
        .art
        .write_csv("tests.csv", &header(&TEST_COLUMNS), rows)?;
    run.record(path);
    Ok(locs.len())
}
