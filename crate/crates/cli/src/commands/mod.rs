//! One module per subcommand. Each writes its artifacts and finishes with a
//! machine-readable `report.json` listing soft failures.

mod cluster;
mod deseasonalize;
mod fit;
mod mc;
mod mldfm;
mod plotdata;
mod simulate;

use std::path::PathBuf;

use serde::Serialize;

use crate::artifacts::{Artifacts, Meta, TOOL, VERSION};
use crate::config::RunConfig;

/// A per-location problem that did not stop the run.
#[derive(Debug, Clone, Serialize)]
pub struct Failure {
    pub location_id: String,
    pub series: String,
    pub error: String,
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub command: String,
    pub status: &'static str,
    pub n_locations: usize,
    pub n_failed: usize,
    pub failures: Vec<Failure>,
    /// Paths relative to the output directory, sorted.
    pub artifacts: Vec<String>,
}

/// Collects written paths and soft failures for `report.json`.
pub struct Run {
    pub art: Artifacts,
    written: Vec<PathBuf>,
    failures: Vec<Failure>,
}

impl Run {
    fn new(cfg: &RunConfig) -> anyhow::Result<Self> {
        let meta = Meta {
            tool: TOOL,
            version: VERSION,
            command: cfg.command.clone(),
            config_sha256: cfg.hash(),
            seed: cfg.seed,
        };
        Ok(Self {
            art: Artifacts::new(&cfg.output_dir(), meta)?,
            written: Vec::new(),
            failures: Vec::new(),
        })
    }

    pub fn record(&mut self, path: PathBuf) {
        self.written.push(path);
    }

    pub fn fail(&mut self, location_id: &str, series: &str, error: impl Into<String>) {
        self.failures.push(Failure {
            location_id: location_id.to_string(),
            series: series.to_string(),
            error: error.into(),
        });
    }

    fn finish(mut self, n_locations: usize) -> anyhow::Result<()> {
        let root = self.art.root().to_path_buf();
        let mut artifacts: Vec<String> = self
            .written
            .iter()
            .map(|p| {
                p.strip_prefix(&root)
                    .unwrap_or(p)
                    .to_string_lossy()
                    .replace('\\', "/")
            })
            .collect();
        artifacts.sort();
        let report = Report {
            command: self.art.meta().command.clone(),
            status: if self.failures.is_empty() {
                "ok"
            } else {
                "partial"
            },
            n_locations,
            n_failed: self.failures.len(),
            failures: std::mem::take(&mut self.failures),
            artifacts,
        };
        self.art.write_json("report.json", &report)?;
        if report.n_failed > 0 {
            log::warn!("{} item(s) failed; see report.json", report.n_failed);
        }
        log::info!("artifacts written to {}", root.display());
        Ok(())
    }
}

pub fn run(cfg: &RunConfig) -> anyhow::Result<()> {
    let mut r = Run::new(cfg)?;
    let n = match cfg.command.as_str() {
        "fit" => fit::run_fit(cfg, &mut r)?,
        "test" => fit::run_test(cfg, &mut r)?,
        "deseasonalize" => deseasonalize::run(cfg, &mut r)?,
        "cluster" => cluster::run(cfg, &mut r)?,
        "mldfm" => mldfm::run(cfg, &mut r)?,
        "simulate" => simulate::run(cfg, &mut r)?,
        "mc-critvals" => mc::run(cfg, &mut r)?,
        "plotdata" => plotdata::run(cfg, &mut r)?,
        other => anyhow::bail!("unknown command '{other}'"),
    };
    r.finish(n)
}
