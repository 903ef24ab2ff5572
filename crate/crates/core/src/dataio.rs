//! Interval panels: CSV ingestion, centre/log-range transform, descriptive
//! statistics, correlations and complete-linkage clustering.
//!
//! The canonical input is a long-format CSV with header
//! `location_id,location_name,lat,lon,date,tmin_c,tmax_c`, dates as `YYYY-MM`.
//! Empty fields or `NA` mark a missing month, and lines starting with `#` are
//! comments. Clustering uses the distance
//! `1 - rho` between locations.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::statespace::{ObservationPanel, YearMonth};
use crate::stattests::{box_pierce, moment_tests, MomentSummary, TestResult, BOX_PIERCE_LAGS};
use crate::{Error, Result};

/// Longest interior gap filled by linear interpolation.
pub const MAX_INTERPOLATED_GAP: usize = 2;

/// Shortest series accepted by [`annual_descriptives`].
pub const MIN_ANNUAL_LEN: usize = 24;

const HEADER: [&str; 7] = [
    "location_id",
    "location_name",
    "lat",
    "lon",
    "date",
    "tmin_c",
    "tmax_c",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Location {
    pub id: String,
    pub name: String,
    pub lat: f64,
    pub lon: f64,
}

/// Monthly minimum and maximum temperatures, `T x N`, NaN where missing.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalPanel {
    locations: Vec<Location>,
    dates: Vec<YearMonth>,
    tmin: DMatrix<f64>,
    tmax: DMatrix<f64>,
}

impl IntervalPanel {
    /// Validates shapes, contiguous dates and `tmax > tmin` on every
    /// observed cell; a cell must be missing in both or neither matrix.
    pub fn new(
        locations: Vec<Location>,
        dates: Vec<YearMonth>,
        tmin: DMatrix<f64>,
        tmax: DMatrix<f64>,
    ) -> Result<Self> {
        let (t, n) = (dates.len(), locations.len());
        if t == 0 || n == 0 {
            return Err(Error::validation(
                "panel needs at least one location and one month",
            ));
        }
        if tmin.shape() != (t, n) || tmax.shape() != (t, n) {
            return Err(Error::validation(format!(
                "tmin and tmax must be {t} x {n}"
            )));
        }
        for w in dates.windows(2) {
            if w[1] != w[0].add_months(1) {
                return Err(Error::validation(format!(
                    "dates are not contiguous after {}",
                    w[0]
                )));
            }
        }
        let mut bad = Vec::new();
        for j in 0..n {
            for i in 0..t {
                let (lo, hi) = (tmin[(i, j)], tmax[(i, j)]);
                if lo.is_nan() != hi.is_nan() {
                    bad.push(format!(
                        "{} {}: only one of tmin/tmax present",
                        locations[j].id, dates[i]
                    ));
                } else if !lo.is_nan() && !(hi > lo && lo.is_finite() && hi.is_finite()) {
                    bad.push(format!(
                        "{} {}: tmin={lo} tmax={hi}",
                        locations[j].id, dates[i]
                    ));
                }
            }
        }
        if !bad.is_empty() {
            return Err(Error::validation(format!(
                "{} invalid cells (tmax must exceed tmin): {}",
                bad.len(),
                bad.join("; ")
            )));
        }
        Ok(Self {
            locations,
            dates,
            tmin,
            tmax,
        })
    }

    pub fn locations(&self) -> &[Location] {
        &self.locations
    }

    pub fn dates(&self) -> &[YearMonth] {
        &self.dates
    }

    pub fn tmin(&self) -> &DMatrix<f64> {
        &self.tmin
    }

    pub fn tmax(&self) -> &DMatrix<f64> {
        &self.tmax
    }

    pub fn n_locations(&self) -> usize {
        self.locations.len()
    }

    pub fn n_obs(&self) -> usize {
        self.dates.len()
    }

    pub fn has_missing(&self) -> bool {
        self.tmin.iter().any(|v| v.is_nan())
    }

    /// Sub-panel with the given location columns.
    pub fn select(&self, cols: &[usize]) -> Result<Self> {
        if let Some(&c) = cols.iter().find(|&&c| c >= self.n_locations()) {
            return Err(Error::validation(format!(
                "location index {c} out of range"
            )));
        }
        let pick =
            |m: &DMatrix<f64>| DMatrix::from_fn(self.n_obs(), cols.len(), |t, k| m[(t, cols[k])]);
        Self::new(
            cols.iter().map(|&c| self.locations[c].clone()).collect(),
            self.dates.clone(),
            pick(&self.tmin),
            pick(&self.tmax),
        )
    }
}

/// Supported input layouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputFormat {
    #[default]
    LongCsv,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadOptions {
    /// Fill interior gaps of at most [`MAX_INTERPOLATED_GAP`] months linearly.
    pub interpolate_gaps: bool,
}

/// Reads and validates a panel file.
pub fn load_panel(path: &Path, format: InputFormat, opts: LoadOptions) -> Result<IntervalPanel> {
    let file = std::fs::File::open(path)?;
    read_panel(file, format, opts)
}

fn parse_value(field: &str, line: u64, what: &str) -> Result<f64> {
    let s = field.trim();
    if s.is_empty() || s.eq_ignore_ascii_case("na") || s.eq_ignore_ascii_case("nan") {
        return Ok(f64::NAN);
    }
    s.parse::<f64>().map_err(|_| Error::Format {
        line,
        msg: format!("cannot parse {what} '{s}'"),
    })
}

fn parse_date(field: &str, line: u64) -> Result<YearMonth> {
    let bad = || Error::Format {
        line,
        msg: format!("date '{field}' is not YYYY-MM"),
    };
    let (y, m) = field.trim().split_once('-').ok_or_else(bad)?;
    let year: i32 = y.parse().map_err(|_| bad())?;
    let month: u32 = m.parse().map_err(|_| bad())?;
    YearMonth::new(year, month).map_err(|_| bad())
}

/// Parses a panel from any reader.
pub fn read_panel<R: Read>(
    reader: R,
    format: InputFormat,
    opts: LoadOptions,
) -> Result<IntervalPanel> {
    let InputFormat::LongCsv = format;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| Error::Format {
            line: 1,
            msg: e.to_string(),
        })?
        .clone();
    let cols: Vec<&str> = header.iter().collect();
    if cols != HEADER {
        return Err(Error::Format {
            line: 1,
            msg: format!(
                "expected header {}, got {}",
                HEADER.join(","),
                cols.join(",")
            ),
        });
    }

    let mut locations: Vec<Location> = Vec::new();
    let mut loc_index: HashMap<String, usize> = HashMap::new();
    let mut cells: HashMap<(usize, i64), (f64, f64, u64)> = HashMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Format {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            msg: e.to_string(),
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != HEADER.len() {
            return Err(Error::Format {
                line,
                msg: format!("expected {} fields, got {}", HEADER.len(), rec.len()),
            });
        }
        let id = rec[0].to_string();
        if id.is_empty() {
            return Err(Error::Format {
                line,
                msg: "empty location_id".into(),
            });
        }
        let lat = parse_value(&rec[2], line, "lat")?;
        let lon = parse_value(&rec[3], line, "lon")?;
        let date = parse_date(&rec[4], line)?;
        let tmin = parse_value(&rec[5], line, "tmin_c")?;
        let tmax = parse_value(&rec[6], line, "tmax_c")?;
        let j = match loc_index.get(&id) {
            Some(&j) => {
                let loc = &locations[j];
                if loc.name != rec[1]
                    || loc.lat.to_bits() != lat.to_bits()
                    || loc.lon.to_bits() != lon.to_bits()
                {
                    return Err(Error::Format {
                        line,
                        msg: format!("metadata of location '{id}' changes between rows"),
                    });
                }
                j
            }
            None => {
                locations.push(Location {
                    id: id.clone(),
                    name: rec[1].to_string(),
                    lat,
                    lon,
                });
                loc_index.insert(id.clone(), locations.len() - 1);
                locations.len() - 1
            }
        };
        if cells
            .insert((j, date.ordinal()), (tmin, tmax, line))
            .is_some()
        {
            return Err(Error::Format {
                line,
                msg: format!("duplicate row for location '{id}' at {date}"),
            });
        }
    }
    if cells.is_empty() {
        return Err(Error::validation("input contains no data rows"));
    }
    let first = cells.keys().map(|k| k.1).min().expect("non-empty");
    let last = cells.keys().map(|k| k.1).max().expect("non-empty");
    let t = (last - first + 1) as usize;
    let n = locations.len();
    let mut tmin = DMatrix::from_element(t, n, f64::NAN);
    let mut tmax = DMatrix::from_element(t, n, f64::NAN);
    let mut bad = Vec::new();
    let mut keys: Vec<_> = cells.keys().copied().collect();
    keys.sort_unstable();
    for key in keys {
        let (lo, hi, line) = cells[&key];
        let (j, ord) = key;
        if lo.is_nan() != hi.is_nan() || (!lo.is_nan() && !(hi > lo)) {
            bad.push(format!(
                "line {line} ({} {}): tmin={lo} tmax={hi}",
                locations[j].id,
                YearMonth::from_ordinal(ord)
            ));
        }
        tmin[((ord - first) as usize, j)] = lo;
        tmax[((ord - first) as usize, j)] = hi;
    }
    if !bad.is_empty() {
        return Err(Error::validation(format!(
            "{} rows violate tmax > tmin: {}",
            bad.len(),
            bad.join("; ")
        )));
    }
    if opts.interpolate_gaps {
        for j in 0..n {
            let filled = fill_gaps(&mut tmin, &mut tmax, j);
            if filled > 0 {
                log::warn!(
                    "location {}: linearly interpolated {filled} missing months",
                    locations[j].id
                );
            }
        }
    }
    let dates = YearMonth::from_ordinal(first).range(t);
    IntervalPanel::new(locations, dates, tmin, tmax)
}

/// Fills interior runs of at most `MAX_INTERPOLATED_GAP` missing months in
/// column `j`; returns the number of filled months.
fn fill_gaps(tmin: &mut DMatrix<f64>, tmax: &mut DMatrix<f64>, j: usize) -> usize {
    let t = tmin.nrows();
    let mut filled = 0;
    let mut i = 0;
    while i < t {
        if !tmin[(i, j)].is_nan() {
            i += 1;
            continue;
        }
        let start = i;
        while i < t && tmin[(i, j)].is_nan() {
            i += 1;
        }
        let len = i - start;
        if start == 0 || i == t || len > MAX_INTERPOLATED_GAP {
            continue;
        }
        let (a, b) = (start - 1, i);
        for k in start..i {
            let w = (k - a) as f64 / (b - a) as f64;
            tmin[(k, j)] = (1.0 - w) * tmin[(a, j)] + w * tmin[(b, j)];
            tmax[(k, j)] = (1.0 - w) * tmax[(a, j)] + w * tmax[(b, j)];
        }
        filled += len;
    }
    filled
}

/// Writes a panel in the long CSV format; missing cells become empty fields.
pub fn write_panel<W: Write>(writer: W, panel: &IntervalPanel) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e.to_string()));
    w.write_record(HEADER).map_err(csv_err)?;
    let fmt = |v: f64| {
        if v.is_nan() {
            String::new()
        } else {
            format!("{v}")
        }
    };
    for (j, loc) in panel.locations.iter().enumerate() {
        for (i, d) in panel.dates.iter().enumerate() {
            w.write_record([
                loc.id.clone(),
                loc.name.clone(),
                fmt(loc.lat),
                fmt(loc.lon),
                d.to_string(),
                fmt(panel.tmin[(i, j)]),
                fmt(panel.tmax[(i, j)]),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Centre `(max + min) / 2` and log-range `ln(max - min)` panels, named by
/// location id.
pub fn to_centre_logrange(panel: &IntervalPanel) -> Result<(ObservationPanel, ObservationPanel)> {
    let c = panel.tmax.zip_map(&panel.tmin, |hi, lo| (hi + lo) / 2.0);
    let r = panel.tmax.zip_map(&panel.tmin, |hi, lo| (hi - lo).ln());
    let names: Vec<String> = panel.locations.iter().map(|l| l.id.clone()).collect();
    Ok((
        ObservationPanel::with_names(c, panel.dates.clone(), names.clone())?,
        ObservationPanel::with_names(r, panel.dates.clone(), names)?,
    ))
}

/// Inverse transform: `(tmin, tmax) = (C - e^R / 2, C + e^R / 2)`.
pub fn from_centre_logrange(
    centre: &DMatrix<f64>,
    log_range: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if centre.shape() != log_range.shape() {
        return Err(Error::validation(
            "centre and log-range panels differ in shape",
        ));
    }
    let half = log_range.map(|r| r.exp() / 2.0);
    Ok((centre - &half, centre + &half))
}

/// Moment and portmanteau summaries of the 12-month differences of a series.
#[derive(Debug, Clone, Serialize)]
pub struct AnnualDescriptives {
    pub n: usize,
    pub moments: MomentSummary,
    pub box_pierce: TestResult,
}

/// Differences `x_t - x_{t-12}` (pairs with a missing end are dropped), then
/// [`moment_tests`] and [`box_pierce`] on them.
pub fn annual_descriptives(series: &[f64]) -> Result<AnnualDescriptives> {
    if series.len() < MIN_ANNUAL_LEN {
        return Err(Error::validation(format!(
            "annual descriptives need at least {MIN_ANNUAL_LEN} months, got {}",
            series.len()
        )));
    }
    let d: Vec<f64> = series
        .windows(13)
        .map(|w| w[12] - w[0])
        .filter(|v| !v.is_nan())
        .collect();
    let moments = moment_tests(&d)?;
    let box_pierce = box_pierce(&d, BOX_PIERCE_LAGS)?;
    Ok(AnnualDescriptives {
        n: d.len(),
        moments,
        box_pierce,
    })
}

/// Pearson correlation over the months where both series are observed.
fn pairwise_pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let pairs: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| !a.is_nan() && !b.is_nan())
        .map(|(a, b)| (*a, *b))
        .collect();
    if pairs.len() < 2 {
        return None;
    }
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in &pairs {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    (sxx > 0.0 && syy > 0.0).then(|| (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Pearson correlations between all columns of the given panels (stacked
/// left to right), with pairwise-complete handling of missing months.
pub fn correlation_matrix(panels: &[&ObservationPanel]) -> Result<DMatrix<f64>> {
    let first = panels
        .first()
        .ok_or_else(|| Error::validation("no panels given"))?;
    if panels.iter().any(|p| p.n_obs() != first.n_obs()) {
        return Err(Error::validation("panels must have the same length"));
    }
    let mut cols = Vec::new();
    let mut names = Vec::new();
    for p in panels {
        for j in 0..p.n_series() {
            cols.push(p.series(j));
            names.push(p.names()[j].clone());
        }
    }
    correlation_of_columns(&cols, &names)
}

/// [`correlation_matrix`] on plain columns.
pub fn correlation_of_columns(cols: &[Vec<f64>], names: &[String]) -> Result<DMatrix<f64>> {
    let n = cols.len();
    for (c, name) in cols.iter().zip(names) {
        let obs: Vec<f64> = c.iter().copied().filter(|v| !v.is_nan()).collect();
        let m = obs.iter().sum::<f64>() / obs.len().max(1) as f64;
        if obs.len() < 2 || obs.iter().all(|v| (v - m).abs() == 0.0) {
            return Err(Error::validation(format!(
                "series '{name}' has zero variance; correlation undefined"
            )));
        }
    }
    let rows: Vec<Vec<Option<f64>>> = (0..n)
        .into_par_iter()
        .map(|a| {
            (0..n)
                .map(|b| {
                    if a == b {
                        Some(1.0)
                    } else if b < a {
                        None
                    } else {
                        pairwise_pearson(&cols[a], &cols[b])
                    }
                })
                .collect()
        })
        .collect();
    let mut out = DMatrix::from_element(n, n, 1.0);
    for a in 0..n {
        for b in (a + 1)..n {
            let v = rows[a][b].ok_or_else(|| {
                Error::validation(format!("series '{}' and '{}' share fewer than two observed months or one is constant on the overlap", names[a], names[b]))
            })?;
            out[(a, b)] = v;
            out[(b, a)] = v;
        }
    }
    Ok(out)
}

/// Result of cutting a complete-linkage dendrogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub k: usize,
    /// 1-based labels, numbered by the smallest member index of each cluster.
    pub labels: Vec<usize>,
    /// Merge heights of the full agglomeration (`N - 1` values).
    pub heights: Vec<f64>,
}

/// Agglomerative complete-linkage clustering on `d = 1 - rho`, cut at `k`
/// clusters. Ties merge the pair whose smallest members have the lowest
/// indices.
pub fn cluster_complete_linkage(corr: &DMatrix<f64>, k: usize) -> Result<ClusterAssignment> {
    let n = corr.nrows();
    if n == 0 || corr.ncols() != n {
        return Err(Error::validation(
            "correlation matrix must be square and non-empty",
        ));
    }
    if !(1..=n).contains(&k) {
        return Err(Error::validation(format!("k must be in 1..={n}, got {k}")));
    }
    for a in 0..n {
        if (corr[(a, a)] - 1.0).abs() > 1e-10 {
            return Err(Error::validation(format!("diagonal entry {a} is not 1")));
        }
        for b in 0..n {
            let v = corr[(a, b)];
            if !v.is_finite() || v.abs() > 1.0 + 1e-10 || (v - corr[(b, a)]).abs() > 1e-10 {
                return Err(Error::validation(format!(
                    "entry ({a}, {b}) is not a valid symmetric correlation"
                )));
            }
        }
    }
    // clusters keyed by their smallest member; distances by cluster pair
    let mut members: Vec<Option<Vec<usize>>> = (0..n).map(|i| Some(vec![i])).collect();
    let mut dist = corr.map(|r| 1.0 - r);
    let mut heights = Vec::with_capacity(n.saturating_sub(1));
    let mut labels_at_k = None;
    let mut active = n;
    if k == n {
        labels_at_k = Some(label_clusters(&members, n));
    }
    while active > 1 {
        let mut best: Option<(f64, usize, usize)> = None;
        for a in 0..n {
            if members[a].is_none() {
                continue;
            }
            for b in (a + 1)..n {
                if members[b].is_none() {
                    continue;
                }
                let d = dist[(a, b)];
                // strict comparison keeps the lexicographically first pair on ties
                if best.is_none_or(|(bd, _, _)| d < bd) {
                    best = Some((d, a, b));
                }
            }
        }
        let (d, a, b) = best.expect("at least two active clusters");
        let moved = members[b].take().expect("active");
        members[a].as_mut().expect("active").extend(moved);
        for c in 0..n {
            if c != a && members[c].is_some() {
                let v = dist[(a, c)].max(dist[(b, c)]);
                dist[(a, c)] = v;
                dist[(c, a)] = v;
            }
        }
        heights.push(d);
        active -= 1;
        if active == k {
            labels_at_k = Some(label_clusters(&members, n));
        }
    }
    Ok(ClusterAssignment {
        k,
        labels: labels_at_k.expect("cut reached"),
        heights,
    })
}

fn label_clusters(members: &[Option<Vec<usize>>], n: usize) -> Vec<usize> {
    // slot index equals the smallest member, so slot order gives the labels
    let mut labels = vec![0; n];
    for (label, m) in members.iter().flatten().enumerate() {
        for &i in m {
            labels[i] = label + 1;
        }
    }
    labels
}

/// Whether two labelings describe the same partition.
pub fn same_partition(a: &[usize], b: &[usize]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let mut ab: HashMap<usize, usize> = HashMap::new();
    let mut ba: HashMap<usize, usize> = HashMap::new();
    a.iter()
        .zip(b)
        .all(|(&x, &y)| *ab.entry(x).or_insert(y) == y && *ba.entry(y).or_insert(x) == x)
}

#[cfg(test)]
mod tests {
    use super::*;

    const CSV: &str = "location_id,location_name,lat,lon,date,tmin_c,tmax_c\n\
        A,Alpha,40.1,-3.5,2000-01,1.0,9.0\n\
        A,Alpha,40.1,-3.5,2000-02,2.0,10.0\n\
        B,Beta,41.0,2.1,2000-01,5.0,12.0\n\
        B,Beta,41.0,2.1,2000-02,6.0,13.5\n";

    #[test]
    fn reads_long_csv() {
        let p = read_panel(CSV.as_bytes(), InputFormat::LongCsv, LoadOptions::default()).unwrap();
        assert_eq!(p.n_locations(), 2);
        assert_eq!(p.n_obs(), 2);
        assert_eq!(p.tmax()[(1, 1)], 13.5);
        assert_eq!(p.locations()[1].name, "Beta");
    }

    #[test]
    fn equal_min_max_is_rejected_with_location_and_date() {
        let bad = CSV.replace("2000-02,6.0,13.5", "2000-02,15,15");
        let err =
            read_panel(bad.as_bytes(), InputFormat::LongCsv, LoadOptions::default()).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::Validation(_)));
        assert!(
            msg.contains("B") && msg.contains("2000-02") && msg.contains("line 5"),
            "{msg}"
        );
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let bad = CSV.replace("2000-02,2.0", "2000-02,abc");
        match read_panel(bad.as_bytes(), InputFormat::LongCsv, LoadOptions::default()) {
            Err(Error::Format { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let bad_date = CSV.replace("2000-01,1.0", "2000/01,1.0");
        assert!(matches!(
            read_panel(
                bad_date.as_bytes(),
                InputFormat::LongCsv,
                LoadOptions::default()
            ),
            Err(Error::Format { line: 2, .. })
        ));
    }

    #[test]
    fn short_gaps_are_interpolated() {
        let mut s = String::from("location_id,location_name,lat,lon,date,tmin_c,tmax_c\n");
        for (m, v) in [
            (1, Some(0.0)),
            (2, None),
            (3, None),
            (4, Some(3.0)),
            (5, None),
            (6, None),
            (7, None),
            (8, Some(1.0)),
        ] {
            match v {
                Some(x) => s.push_str(&format!("A,A,0,0,2001-{m:02},{x},{}\n", x + 10.0)),
                None => s.push_str(&format!("A,A,0,0,2001-{m:02},,\n")),
            }
        }
        let raw = read_panel(s.as_bytes(), InputFormat::LongCsv, LoadOptions::default()).unwrap();
        assert!(raw.tmin()[(1, 0)].is_nan());
        let p = read_panel(
            s.as_bytes(),
            InputFormat::LongCsv,
            LoadOptions {
                interpolate_gaps: true,
            },
        )
        .unwrap();
        assert!((p.tmin()[(1, 0)] - 1.0).abs() < 1e-12);
        assert!((p.tmax()[(2, 0)] - 12.0).abs() < 1e-12);
        assert!(p.tmin()[(5, 0)].is_nan());
    }

    #[test]
    fn transform_formulas() {
        let dates = YearMonth::new(2000, 1).unwrap().range(2);
        let loc = |id: &str| Location {
            id: id.into(),
            name: id.into(),
            lat: 0.0,
            lon: 0.0,
        };
        let p = IntervalPanel::new(
            vec![loc("a")],
            dates,
            DMatrix::from_column_slice(2, 1, &[10.0, -1.0]),
            DMatrix::from_column_slice(2, 1, &[20.0, 1.0]),
        )
        .unwrap();
        let (c, r) = to_centre_logrange(&p).unwrap();
        assert_eq!(c.values()[(0, 0)], 15.0);
        assert!((r.values()[(0, 0)] - 10f64.ln()).abs() < 1e-15);
        assert_eq!(c.values()[(1, 0)], 0.0);
        assert!((r.values()[(1, 0)] - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn linkage_trivial_cuts() {
        let corr = DMatrix::from_row_slice(3, 3, &[1.0, 0.9, 0.1, 0.9, 1.0, 0.2, 0.1, 0.2, 1.0]);
        let all = cluster_complete_linkage(&corr, 3).unwrap();
        assert_eq!(all.labels, vec![1, 2, 3]);
        let two = cluster_complete_linkage(&corr, 2).unwrap();
        assert_eq!(two.labels, vec![1, 1, 2]);
        assert_eq!(two.heights.len(), 2);
        assert!((two.heights[0] - 0.1).abs() < 1e-15 && (two.heights[1] - 0.9).abs() < 1e-15);
        assert!(cluster_complete_linkage(&corr, 0).is_err());
        assert!(cluster_complete_linkage(&corr, 4).is_err());
    }

    #[test]
    fn partition_comparison() {
        assert!(same_partition(&[1, 1, 2], &[2, 2, 1]));
        assert!(!same_partition(&[1, 1, 2], &[1, 2, 2]));
        assert!(!same_partition(&[1, 2, 3], &[1, 1, 1]));
    }
}
