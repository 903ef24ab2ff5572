//! Steps shared by several commands: loading the input panel, fitting one
//! FS-BSM per location (or per location and series) on a bounded worker
//! pool, and removing filtered seasonals.

use anyhow::Context;
use ivts_core::dataio::{load_panel, to_centre_logrange, InputFormat, IntervalPanel, LoadOptions};
use ivts_core::estimation::{fit_ml, BlockShape, FitOptions, FitResult, ParamTemplate};
use ivts_core::rng::child_seed;
use ivts_core::statespace::ObservationPanel;
use ivts_core::stattests::{
    component_tests, mc_critical_values, null_statistic, ComponentTests, CvTable,
};
use ivts_core::structural::VarianceBlock;
use ivts_core::structural::{build_fsbsm, deseasonalize, extract_components, ComponentSet};
use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::config::{Mode, ModelOptions, RunConfig, SeasonalVariant, TrendVariant};
use crate::UsageError;

/// Seed label of the simulated critical-value tables.
const MC_SEED_LABEL: u64 = 1 << 40;

pub struct Loaded {
    pub panel: IntervalPanel,
    pub centre: ObservationPanel,
    pub log_range: ObservationPanel,
}

impl Loaded {
    pub fn series(&self, mode: Mode) -> &ObservationPanel {
        match mode {
            Mode::Centre => &self.centre,
            Mode::LogRange => &self.log_range,
        }
    }
}

pub fn load(cfg: &RunConfig) -> anyhow::Result<Loaded> {
    let path = cfg
        .input
        .as_ref()
        .ok_or_else(|| UsageError("no input file given (use --input)".into()))?;
    let meta = std::fs::metadata(path)
        .map_err(|e| UsageError(format!("cannot read input {}: {e}", path.display())))?;
    let text_rows = if meta.len() == 0 {
        0
    } else {
        std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?
            .lines()
            .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
            .skip(1)
            .count()
    };
    if text_rows == 0 {
        return Err(UsageError(format!("input {} has no observations", path.display())).into());
    }
    let panel = load_panel(
        path,
        InputFormat::LongCsv,
        LoadOptions {
            interpolate_gaps: cfg.interpolate_gaps,
        },
    )
    .with_context(|| format!("loading {}", path.display()))?;
    let (centre, log_range) = to_centre_logrange(&panel)?;
    log::info!(
        "loaded {} locations x {} months from {}",
        panel.n_locations(),
        panel.n_obs(),
        path.display()
    );
    Ok(Loaded {
        panel,
        centre,
        log_range,
    })
}

pub fn template(model: &ModelOptions, dim: usize) -> ParamTemplate {
    let mut t = ParamTemplate::full(dim);
    match model.trend {
        TrendVariant::Full => {}
        TrendVariant::Rw => t = t.with(VarianceBlock::Slope, BlockShape::Zero),
        TrendVariant::Irw => t = t.with(VarianceBlock::Level, BlockShape::Zero),
        TrendVariant::Deterministic => {
            t = t
                .with(VarianceBlock::Level, BlockShape::Zero)
                .with(VarianceBlock::Slope, BlockShape::Zero)
        }
    }
    if model.seasonal == SeasonalVariant::Deterministic {
        t = t
            .with(VarianceBlock::SeasonalI, BlockShape::Zero)
            .with(VarianceBlock::SeasonalII, BlockShape::Zero);
    }
    t
}

/// What one fit covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesKind {
    Centre,
    LogRange,
    /// Centre and log-range in one bivariate model.
    Joint,
}

impl SeriesKind {
    pub fn label(self) -> &'static str {
        match self {
            SeriesKind::Centre => "centre",
            SeriesKind::LogRange => "log_range",
            SeriesKind::Joint => "joint",
        }
    }

    /// Series labels in the order of the model's observation vector.
    pub fn series_labels(self) -> &'static [&'static str] {
        match self {
            SeriesKind::Centre => &["centre"],
            SeriesKind::LogRange => &["log_range"],
            SeriesKind::Joint => &["centre", "log_range"],
        }
    }
}

impl From<Mode> for SeriesKind {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Centre => SeriesKind::Centre,
            Mode::LogRange => SeriesKind::LogRange,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Job {
    pub location: usize,
    pub kind: SeriesKind,
}

/// Location-major job list for `fit`, `test` and `deseasonalize`.
pub fn jobs(n_locations: usize, joint: bool) -> Vec<Job> {
    let kinds: &[SeriesKind] = if joint {
        &[SeriesKind::Joint]
    } else {
        &[SeriesKind::Centre, SeriesKind::LogRange]
    };
    (0..n_locations)
        .flat_map(|location| kinds.iter().map(move |&kind| Job { location, kind }))
        .collect()
}

pub fn job_data(loaded: &Loaded, job: Job) -> anyhow::Result<ObservationPanel> {
    let j = job.location;
    Ok(match job.kind {
        SeriesKind::Centre => loaded.centre.select(&[j])?,
        SeriesKind::LogRange => loaded.log_range.select(&[j])?,
        SeriesKind::Joint => {
            let c = loaded.centre.series(j);
            let r = loaded.log_range.series(j);
            let n = c.len();
            let values = DMatrix::from_fn(n, 2, |t, k| if k == 0 { c[t] } else { r[t] });
            let id = &loaded.centre.names()[j];
            ObservationPanel::with_names(
                values,
                loaded.centre.time_index().to_vec(),
                vec![format!("{id}:centre"), format!("{id}:log_range")],
            )?
        }
    })
}

pub struct SeriesFit {
    pub data: ObservationPanel,
    pub fit: FitResult,
    pub components: ComponentSet,
}

pub fn fit_options(cfg: &RunConfig, seed: u64) -> FitOptions {
    FitOptions {
        max_iter: cfg.model.max_iter,
        optimizer: cfg.model.optimizer.clone(),
        fallback: cfg.model.fallback.clone(),
        multi_start: cfg.model.multi_start,
        seed,
        ..FitOptions::default()
    }
}

pub fn fit_series(
    cfg: &RunConfig,
    data: ObservationPanel,
    seed: u64,
) -> ivts_core::Result<SeriesFit> {
    let tmpl = template(&cfg.model, data.n_series());
    let fit = fit_ml(&tmpl, &data, &fit_options(cfg, seed))?;
    if !fit.converged {
        log::warn!(
            "{}: optimizer stopped without converging (gradient {:.2e})",
            data.names().join("+"),
            fit.gradient_norm
        );
    }
    let spec = build_fsbsm(&fit.params)?;
    let components = extract_components(&spec, &fit.params, &data)?;
    Ok(SeriesFit {
        data,
        fit,
        components,
    })
}

/// Component tests of a fit, with simulated tables attached when given
/// (`tables` in the order level, slope, group I, group II).
pub fn series_tests(
    cfg: &RunConfig,
    sf: &SeriesFit,
    tables: Option<&[CvTable; 4]>,
) -> ivts_core::Result<Vec<ComponentTests>> {
    let mut tests = component_tests(&sf.fit.params, &sf.data, cfg.tests.with_drift)?;
    if let Some(t) = tables {
        let n = sf.data.n_obs();
        for ct in tests.iter_mut() {
            ct.rwd = ct.rwd.clone().with_table(&t[0], n);
            ct.irw = ct.irw.clone().with_table(&t[1], n);
            ct.seasonal_i = ct.seasonal_i.clone().with_table(&t[2], n);
            ct.seasonal_ii = ct.seasonal_ii.clone().with_table(&t[3], n);
        }
    }
    Ok(tests)
}

/// Simulated tables for the component tests at length `n`, or `None` when
/// the built-in tables are requested.
pub fn mc_tables(cfg: &RunConfig, n: usize) -> anyhow::Result<Option<[CvTable; 4]>> {
    if cfg.tests.mc_reps == 0 {
        return Ok(None);
    }
    let level = if cfg.tests.with_drift { "rwd" } else { "rw" };
    let names = [level, "irw", "seasonal-1", "seasonal-ii"];
    let mut out = Vec::with_capacity(4);
    for (k, name) in names.iter().enumerate() {
        let stat = null_statistic(name).expect("registered statistic");
        let seed = child_seed(cfg.seed, MC_SEED_LABEL + k as u64);
        log::info!(
            "simulating {name} critical values ({} reps, T={n})",
            cfg.tests.mc_reps
        );
        out.push(mc_critical_values(
            stat.as_ref(),
            &[n],
            cfg.tests.mc_reps,
            seed,
        )?);
    }
    Ok(Some(out.try_into().expect("four tables")))
}

/// Runs `f` over `items` on a pool of `cfg.jobs` workers; results keep the
/// input order.
pub fn par_map<T, R, F>(cfg: &RunConfig, items: &[T], f: F) -> anyhow::Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .context("starting worker pool")?;
    Ok(pool.install(|| items.par_iter().enumerate().map(|(i, x)| f(i, x)).collect()))
}

/// Fits every job; failures are kept as messages so callers can report them
/// and carry on.
pub fn fit_jobs(
    cfg: &RunConfig,
    loaded: &Loaded,
    jobs: &[Job],
) -> anyhow::Result<Vec<Result<SeriesFit, String>>> {
    par_map(cfg, jobs, |i, job| {
        let id = &loaded.panel.locations()[job.location].id;
        let res = job_data(loaded, *job)
            .map_err(|e| e.to_string())
            .and_then(|data| {
                fit_series(cfg, data, child_seed(cfg.seed, i as u64)).map_err(|e| e.to_string())
            });
        match &res {
            Ok(sf) => log::info!(
                "{id} {}: loglik {:.3} ({} iterations)",
                job.kind.label(),
                sf.fit.loglik,
                sf.fit.n_iter
            ),
            Err(e) => log::error!("{id} {}: {e}", job.kind.label()),
        }
        res
    })
}

/// Each location's series with its filtered seasonal removed. Any failure is
/// a hard error because the downstream panel must be complete.
pub fn deseasonalized_panel(
    cfg: &RunConfig,
    loaded: &Loaded,
    mode: Mode,
) -> anyhow::Result<ObservationPanel> {
    let src = loaded.series(mode);
    let cols: Vec<usize> = (0..src.n_series()).collect();
    let out = par_map(cfg, &cols, |i, &j| -> anyhow::Result<Vec<f64>> {
        let data = src.select(&[j])?;
        let sf = fit_series(cfg, data, child_seed(cfg.seed, i as u64))
            .with_context(|| format!("fitting {} of {}", mode.label(), src.names()[j]))?;
        let spec = build_fsbsm(&sf.fit.params)?;
        Ok(deseasonalize(&sf.data, &spec, &sf.fit.params)?.series(0))
    })?;
    let cols: Vec<Vec<f64>> = out.into_iter().collect::<anyhow::Result<_>>()?;
    let n = src.n_obs();
    let values = DMatrix::from_fn(n, cols.len(), |t, j| cols[j][t]);
    Ok(ObservationPanel::with_names(
        values,
        src.time_index().to_vec(),
        src.names().to_vec(),
    )?)
}
