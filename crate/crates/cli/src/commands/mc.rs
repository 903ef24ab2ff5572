//! `mc-critvals`: simulated null critical values for the registered
//! statistics, one JSON table per statistic plus a summary CSV.

use ivts_core::rng::child_seed;
use ivts_core::stattests::{mc_critical_values, null_statistic, null_statistic_names};

use super::Run;
use crate::artifacts::{header, num};
use crate::config::RunConfig;
use crate::UsageError;

pub fn run(cfg: &RunConfig, run: &mut Run) -> anyhow::Result<usize> {
    let mc = &cfg.mc;
    if mc.statistics.is_empty() || mc.sizes.is_empty() {
        return Err(UsageError("give at least one statistic and one sample size".into()).into());
    }
    let known = null_statistic_names();
    let mut stats = Vec::with_capacity(mc.statistics.len());
    for name in &mc.statistics {
        let stat = null_statistic(name).ok_or_else(|| {
            UsageError(format!(
                "unknown statistic '{name}' (known: {})",
                known.join(", ")
            ))
        })?;
        if let Some(&n) = mc.sizes.iter().find(|&&n| n < stat.min_len()) {
            return Err(UsageError(format!(
                "{name} needs series of at least {} observations, got {n}",
                stat.min_len()
            ))
            .into());
        }
        stats.push(stat);
    }
    let mut rows = Vec::new();
    for stat in &stats {
        // seed by registry position so a table does not depend on which
        // other statistics were requested
        let label = known
            .iter()
            .position(|k| k == stat.name())
            .expect("registered") as u64;
        let seed = child_seed(cfg.seed, label);
        log::info!(
            "{}: {} replications at T = {:?}",
            stat.name(),
            mc.reps,
            mc.sizes
        );
        let table = mc_critical_values(stat.as_ref(), &mc.sizes, mc.reps, seed)?;
        for (i, &n) in table.sample_sizes.iter().enumerate() {
            for (k, &level) in table.levels.iter().enumerate() {
                rows.push(vec![
                    table.test.clone(),
                    n.to_string(),
                    num(level),
                    num(table.quantiles[i][k]),
                ]);
            }
        }
        let path = run
            .art
            .write_json(&format!("critvals/{}.json", stat.name()), &table)?;
        run.record(path);
    }
    let path = run.art.write_csv(
        "critvals/summary.csv",
        &header(&["statistic", "n_obs", "level", "critical_value"]),
        rows,
    )?;
    run.record(path);
    Ok(0)
}
