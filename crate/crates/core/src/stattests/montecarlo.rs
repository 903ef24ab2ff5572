//! Simulated null distributions.
//!
//! A [`NullStatistic`] knows how to compute its statistic; the harness feeds it
//! Gaussian white noise (every statistic here is location, trend and scale
//! invariant under its null, so the deterministic part is irrelevant).
//! Replication `r` at sample size `T` draws from `stream_rng(child_seed(seed, T), r)`,
//! which makes tables independent of thread scheduling.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::seasonal::{seasonal_statistic, SeasonalTarget};
use super::tables::LEVELS;
use super::trend::{irw_statistic, rw_statistic};
use super::CriticalValue;
use crate::rng::{child_seed, stream_rng};
use crate::{Error, Result};

/// Levels reported by simulated tables.
pub const MC_LEVELS: [f64; 3] = LEVELS;

/// Number of points in the stored quantile grid (probabilities `k / GRID`).
const GRID: usize = 1000;

/// Minimum replications accepted by [`mc_critical_values`].
const MIN_REPS: usize = 1000;

pub trait NullStatistic: Send + Sync {
    fn name(&self) -> &str;
    fn statistic(&self, x: &[f64]) -> Result<f64>;
    fn min_len(&self) -> usize;
}

struct Rw {
    drift: bool,
}

impl NullStatistic for Rw {
    fn name(&self) -> &str {
        if self.drift {
            "rwd"
        } else {
            "rw"
        }
    }
    fn statistic(&self, x: &[f64]) -> Result<f64> {
        rw_statistic(x, self.drift)
    }
    fn min_len(&self) -> usize {
        super::trend::MIN_TREND_LEN
    }
}

struct Irw;

impl NullStatistic for Irw {
    fn name(&self) -> &str {
        "irw"
    }
    fn statistic(&self, x: &[f64]) -> Result<f64> {
        irw_statistic(x)
    }
    fn min_len(&self) -> usize {
        super::trend::MIN_TREND_LEN
    }
}

struct Seasonal {
    target: SeasonalTarget,
    name: String,
}

impl NullStatistic for Seasonal {
    fn name(&self) -> &str {
        &self.name
    }
    fn statistic(&self, x: &[f64]) -> Result<f64> {
        seasonal_statistic(x, self.target)
    }
    fn min_len(&self) -> usize {
        super::seasonal::MIN_SEASONAL_LEN
    }
}

/// Names accepted by [`null_statistic`].
pub fn null_statistic_names() -> Vec<String> {
    let mut v: Vec<String> = ["rw", "rwd", "irw"].iter().map(|s| s.to_string()).collect();
    v.extend((1..=6).map(|j| format!("seasonal-{j}")));
    v.push("seasonal-ii".to_string());
    v
}

/// Looks up a null statistic by name.
pub fn null_statistic(name: &str) -> Option<Box<dyn NullStatistic>> {
    let seasonal = |target: SeasonalTarget| -> Box<dyn NullStatistic> {
        Box::new(Seasonal {
            target,
            name: target.label(),
        })
    };
    match name {
        "rw" => Some(Box::new(Rw { drift: false })),
        "rwd" => Some(Box::new(Rw { drift: true })),
        "irw" => Some(Box::new(Irw)),
        "seasonal-ii" => Some(seasonal(SeasonalTarget::GroupII)),
        s => {
            let j: usize = s.strip_prefix("seasonal-")?.parse().ok()?;
            (1..=6)
                .contains(&j)
                .then(|| seasonal(SeasonalTarget::Frequency(j)))
        }
    }
}

/// Simulated critical values for one statistic at one or more sample sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvTable {
    pub test: String,
    pub sample_sizes: Vec<usize>,
    pub levels: Vec<f64>,
    /// `quantiles[i][k]`: upper-`levels[k]` quantile at `sample_sizes[i]`.
    pub quantiles: Vec<Vec<f64>>,
    /// `grid[i][k]`: quantile at probability `(k + 1) / (grid_len + 1)`.
    pub grid: Vec<Vec<f64>>,
    pub reps: usize,
    pub seed: u64,
}

fn empirical_quantile(sorted: &[f64], p: f64) -> f64 {
    // linear interpolation between order statistics (type 7)
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

impl CvTable {
    fn row(&self, n: usize) -> usize {
        // nearest tabulated size in 1/T
        let x = 1.0 / n.max(1) as f64;
        (0..self.sample_sizes.len())
            .min_by(|&a, &b| {
                let da = (1.0 / self.sample_sizes[a] as f64 - x).abs();
                let db = (1.0 / self.sample_sizes[b] as f64 - x).abs();
                da.partial_cmp(&db).expect("finite")
            })
            .expect("non-empty table")
    }

    pub fn critical_values(&self, n: usize) -> Vec<CriticalValue> {
        let r = self.row(n);
        self.levels
            .iter()
            .zip(&self.quantiles[r])
            .map(|(&level, &value)| CriticalValue { level, value })
            .collect()
    }

    /// Upper-tail p-value from the stored quantile grid, clamped to the grid's
    /// resolution.
    pub fn p_value(&self, n: usize, statistic: f64) -> f64 {
        let g = &self.grid[self.row(n)];
        let m = g.len() as f64 + 1.0;
        let k = g.partition_point(|&q| q <= statistic);
        if k == 0 {
            return 1.0 - 1.0 / m;
        }
        if k == g.len() {
            return 1.0 / m;
        }
        let (a, b) = (g[k - 1], g[k]);
        let frac = if b > a {
            (statistic - a) / (b - a)
        } else {
            0.0
        };
        let cdf = (k as f64 + frac) / m;
        1.0 - cdf
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::validation(format!("serializing table: {e}")))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let t: CvTable = serde_json::from_str(s).map_err(|e| Error::Format {
            line: e.line() as u64,
            msg: e.to_string(),
        })?;
        if t.sample_sizes.is_empty()
            || t.quantiles.len() != t.sample_sizes.len()
            || t.grid.len() != t.sample_sizes.len()
        {
            return Err(Error::validation(
                "critical-value table rows do not match its sample sizes",
            ));
        }
        Ok(t)
    }
}

/// Simulates `reps` null replications of `stat` at each size in `sizes`.
pub fn mc_critical_values(
    stat: &dyn NullStatistic,
    sizes: &[usize],
    reps: usize,
    seed: u64,
) -> Result<CvTable> {
    if reps < MIN_REPS {
        return Err(Error::validation(format!(
            "Monte Carlo tables need at least {MIN_REPS} replications, got {reps}"
        )));
    }
    if sizes.is_empty() {
        return Err(Error::validation("no sample sizes requested"));
    }
    if let Some(&n) = sizes.iter().find(|&&n| n < stat.min_len()) {
        return Err(Error::validation(format!(
            "{} needs T >= {}, got {n}",
            stat.name(),
            stat.min_len()
        )));
    }
    let mut quantiles = Vec::with_capacity(sizes.len());
    let mut grid = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let root = child_seed(seed, n as u64);
        let mut draws: Vec<f64> = (0..reps)
            .into_par_iter()
            .map(|r| {
                let mut rng = stream_rng(root, r as u64);
                let x: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
                stat.statistic(&x)
            })
            .collect::<Result<_>>()?;
        draws.sort_by(|a, b| a.partial_cmp(b).expect("finite statistic"));
        quantiles.push(
            MC_LEVELS
                .iter()
                .map(|&l| empirical_quantile(&draws, 1.0 - l))
                .collect(),
        );
        grid.push(
            (1..GRID)
                .map(|k| empirical_quantile(&draws, k as f64 / GRID as f64))
                .collect(),
        );
    }
    Ok(CvTable {
        test: stat.name().to_string(),
        sample_sizes: sizes.to_vec(),
        levels: MC_LEVELS.to_vec(),
        quantiles,
        grid,
        reps,
        seed,
    })
}
