//! `ivts`: command-line pipeline for interval-valued temperature panels.
//!
//! Settings come from built-in defaults, then an optional `--config` JSON
//! file, then flags. The output directory falls back to `$IVTS_OUTPUT_DIR`
//! and then to `ivts-out`. Logs go to stderr and results only to files.
//! Exit status is 0 on success, 1 on a hard error and 2 on a usage error.

mod artifacts;
mod commands;
mod config;
mod pipeline;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{
    CorrelationKind, GlobalChoice, Mode, RunConfig, SeasonalVariant, SimModel, TrendVariant,
    OUTPUT_DIR_ENV,
};

/// Invalid invocation: missing or contradictory inputs.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser, Debug)]
#[command(
    name = "ivts",
    version,
    about = "Structural models for interval-valued temperature panels"
)]
struct Cli {
    /// JSON file with run settings; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory [default: $IVTS_OUTPUT_DIR, then ivts-out].
    #[arg(long, short = 'o', global = true)]
    output_dir: Option<PathBuf>,
    /// Root seed for every random draw of the run.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = one per CPU).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// error, warn, info, debug or trace.
    #[arg(long, global = true)]
    log_level: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct InputArgs {
    /// Long-format CSV: location_id,location_name,lat,lon,date,tmin_c,tmax_c.
    #[arg(long, short = 'i')]
    input: Option<PathBuf>,
    /// Linearly fill interior gaps of at most two months.
    #[arg(long)]
    interpolate_gaps: bool,
}

#[derive(Args, Debug, Default)]
struct ModelArgs {
    /// Fit centre and log-range jointly with the bivariate model.
    #[arg(long)]
    joint: bool,
    #[arg(long, value_enum)]
    trend: Option<TrendVariant>,
    #[arg(long, value_enum)]
    seasonal: Option<SeasonalVariant>,
    /// Optimizer name (bfgs, nelder-mead).
    #[arg(long)]
    optimizer: Option<String>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    multi_start: Option<usize>,
}

#[derive(Args, Debug, Default)]
struct TestArgs {
    /// Test the level without drift (RW instead of RWD).
    #[arg(long)]
    no_drift: bool,
    /// Simulate critical values with this many replications.
    #[arg(long)]
    mc_reps: Option<usize>,
}

#[derive(Args, Debug, Default)]
struct ClusterArgs {
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Number of clusters.
    #[arg(long, short = 'k')]
    k: Option<usize>,
    #[arg(long, value_enum)]
    correlation: Option<CorrelationKind>,
    /// Use the series as given, without removing seasonals.
    #[arg(long)]
    no_deseasonalize: bool,
}

#[derive(Args, Debug, Default)]
struct DfmArgs {
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// CSV with columns location_id,region.
    #[arg(long)]
    regions: Option<PathBuf>,
    /// Find this many regions by clustering.
    #[arg(long, short = 'k')]
    k: Option<usize>,
    /// Global factor dynamics [default: irw for centre, rw for log-range].
    #[arg(long, value_enum)]
    global: Option<GlobalChoice>,
    /// Use the series as given, without removing seasonals.
    #[arg(long)]
    no_deseasonalize: bool,
}

#[derive(Args, Debug, Default)]
struct SimArgs {
    #[arg(long, value_enum)]
    model: Option<SimModel>,
    #[arg(long)]
    locations: Option<usize>,
    #[arg(long)]
    months: Option<usize>,
    /// First month, YYYY-MM.
    #[arg(long)]
    start: Option<String>,
    /// Leave out the deterministic annual cycle.
    #[arg(long)]
    no_seasonal: bool,
}

#[derive(Args, Debug, Default)]
struct McArgs {
    /// Null statistic (repeatable): rw, rwd, irw, seasonal-1..6, seasonal-ii.
    #[arg(long = "statistic")]
    statistics: Vec<String>,
    /// Sample size (repeatable).
    #[arg(long = "size")]
    sizes: Vec<usize>,
    #[arg(long)]
    reps: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit FS-BSMs per location; write estimates, tests and component bands.
    Fit {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        tests: TestArgs,
    },
    /// Component tests and annual descriptive statistics per location.
    Test {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        tests: TestArgs,
    },
    /// Remove the filtered seasonal from every series.
    Deseasonalize {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Complete-linkage clustering of locations.
    Cluster {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        cluster: ClusterArgs,
    },
    /// Multi-level dynamic factor model with global and regional factors.
    Mldfm {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        dfm: DfmArgs,
    },
    /// Simulate an interval panel with known components.
    Simulate {
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Monte Carlo critical values of the white-noise statistics.
    McCritvals {
        #[command(flatten)]
        mc: McArgs,
    },
    /// Plot-ready CSVs: seasonal polar data, correlation maps, bands.
    Plotdata {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        model: ModelArgs,
        /// Also fit models and emit component bands.
        #[arg(long)]
        components: bool,
    },
}

fn apply_input(cfg: &mut RunConfig, a: InputArgs) {
    if a.input.is_some() {
        cfg.input = a.input;
    }
    cfg.interpolate_gaps |= a.interpolate_gaps;
}

fn apply_model(cfg: &mut RunConfig, a: ModelArgs) {
    let m = &mut cfg.model;
    m.joint |= a.joint;
    if let Some(v) = a.trend {
        m.trend = v;
    }
    if let Some(v) = a.seasonal {
        m.seasonal = v;
    }
    if let Some(v) = a.optimizer {
        m.optimizer = v;
    }
    if let Some(v) = a.max_iter {
        m.max_iter = v;
    }
    if let Some(v) = a.multi_start {
        m.multi_start = v;
    }
}

fn apply_tests(cfg: &mut RunConfig, a: TestArgs) {
    if a.no_drift {
        cfg.tests.with_drift = false;
    }
    if let Some(v) = a.mc_reps {
        cfg.tests.mc_reps = v;
    }
}

fn build_config(cli: Cli) -> anyhow::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::from_file(p).map_err(|e| UsageError(format!("{e:#}")))?,
        None => RunConfig::default(),
    };
    if let Some(v) = cli.output_dir {
        cfg.output_dir = Some(v);
    }
    if cfg.output_dir.is_none() {
        cfg.output_dir = std::env::var_os(OUTPUT_DIR_ENV)
            .filter(|v| !v.is_empty())
            .map(PathBuf::from);
    }
    if let Some(v) = cli.seed {
        cfg.seed = v;
    }
    if let Some(v) = cli.jobs {
        cfg.jobs = v;
    }
    if let Some(v) = cli.log_level {
        cfg.log_level = v;
    }
    let name = match cli.command {
        Command::Fit {
            input,
            model,
            tests,
        } => {
            apply_input(&mut cfg, input);
            apply_model(&mut cfg, model);
            apply_tests(&mut cfg, tests);
            "fit"
        }
        Command::Test {
            input,
            model,
            tests,
        } => {
            apply_input(&mut cfg, input);
            apply_model(&mut cfg, model);
            apply_tests(&mut cfg, tests);
            "test"
        }
        Command::Deseasonalize { input, model } => {
            apply_input(&mut cfg, input);
            apply_model(&mut cfg, model);
            "deseasonalize"
        }
        Command::Cluster {
            input,
            model,
            cluster,
        } => {
            apply_input(&mut cfg, input);
            apply_model(&mut cfg, model);
            let c = &mut cfg.cluster;
            if let Some(v) = cluster.mode {
                c.mode = v;
            }
            if cluster.k.is_some() {
                c.k = cluster.k;
            }
            if let Some(v) = cluster.correlation {
                c.correlation = v;
            }
            if cluster.no_deseasonalize {
                c.deseasonalize = false;
            }
            "cluster"
        }
        Command::Mldfm { input, model, dfm } => {
            apply_input(&mut cfg, input);
            apply_model(&mut cfg, model);
            let d = &mut cfg.dfm;
            if let Some(v) = dfm.mode {
                d.mode = v;
            }
            if dfm.regions.is_some() {
                d.regions_file = dfm.regions;
            }
            if dfm.k.is_some() {
                d.k = dfm.k;
            }
            if dfm.global.is_some() {
                d.global = dfm.global;
            }
            if dfm.no_deseasonalize {
                d.deseasonalize = false;
            }
            "mldfm"
        }
        Command::Simulate { sim } => {
            let s = &mut cfg.simulate;
            if let Some(v) = sim.model {
                s.model = v;
            }
            if let Some(v) = sim.locations {
                s.n_locations = v;
            }
            if let Some(v) = sim.months {
                s.n_obs = v;
            }
            if let Some(v) = sim.start {
                s.start = v;
            }
            if sim.no_seasonal {
                s.seasonal = false;
            }
            "simulate"
        }
        Command::McCritvals { mc } => {
            if !mc.statistics.is_empty() {
                cfg.mc.statistics = mc.statistics;
            }
            if !mc.sizes.is_empty() {
                cfg.mc.sizes = mc.sizes;
            }
            if let Some(v) = mc.reps {
                cfg.mc.reps = v;
            }
            "mc-critvals"
        }
        Command::Plotdata {
            input,
            model,
            components,
        } => {
            apply_input(&mut cfg, input);
            apply_model(&mut cfg, model);
            cfg.plot_components |= components;
            "plotdata"
        }
    };
    cfg.command = name.to_string();
    Ok(cfg)
}

fn init_logging(level: &str) -> anyhow::Result<()> {
    let filter: log::LevelFilter = level
        .parse()
        .map_err(|_| UsageError(format!("unknown log level '{level}'")))?;
    env_logger::Builder::new()
        .filter_level(filter)
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .try_init()
        .ok();
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = build_config(cli)?;
    init_logging(&cfg.log_level)?;
    commands::run(&cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
