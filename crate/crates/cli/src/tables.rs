//! CSV tables written by the pipeline and read back by the per-stage commands.
//!
//! Column order is fixed:
//!
//! | file | columns |
//! |---|---|
//! | `entropy.csv`, `counts.csv` | country,month,hour,stat,mean,sem,n |
//! | `heatmaps/*.csv` | month,hour,mean,sem,n |
//! | `cosinor*.csv` | group,amplitude,acrophase_h,r2,p_lr,p_fdr,mesor |
//! | `solar.csv` | group,month,sunrise_mean,sunrise_sd,sunset_mean,sunset_sd,sites |
//! | `seasonal.csv` | group,month,peak_hour,trough_hour,sunrise,sunset |
//! | `correlations.csv` | group,analysis,r,p,n,slope,intercept |
//!
//! Pooled (all-month) rows carry `all` in the month column. Missing values
//! are empty fields.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use chronoseme_core::entropy::{CellStat, GridLayout, HeatmapGrid};
use chronoseme_core::geo::SolarProfile;
use chronoseme_core::rhythm::{CorrelationResult, CosinorFit, PeakTroughTable};

pub const ENTROPY_HEADER: [&str; 7] = ["country", "month", "hour", "stat", "mean", "sem", "n"];
pub const HEATMAP_HEADER: [&str; 5] = ["month", "hour", "mean", "sem", "n"];
pub const COSINOR_HEADER: [&str; 7] = ["group", "amplitude", "acrophase_h", "r2", "p_lr", "p_fdr", "mesor"];
pub const SOLAR_HEADER: [&str; 7] = [
    "group",
    "month",
    "sunrise_mean",
    "sunrise_sd",
    "sunset_mean",
    "sunset_sd",
    "sites",
];
pub const SEASONAL_HEADER: [&str; 6] = ["group", "month", "peak_hour", "trough_hour", "sunrise", "sunset"];
pub const CORRELATION_HEADER: [&str; 7] = ["group", "analysis", "r", "p", "n", "slope", "intercept"];

pub const POOLED_MONTH: &str = "all";

/// Month × hour and pooled hourly grids of one statistic.
#[derive(Debug, Clone, PartialEq)]
pub struct StatGrids {
    pub grid: HeatmapGrid,
    pub hourly: HeatmapGrid,
}

impl StatGrids {
    pub fn empty(stat: &str) -> Self {
        Self {
            grid: HeatmapGrid::empty(stat, GridLayout::MonthHour),
            hourly: HeatmapGrid::empty(stat, GridLayout::Pooled),
        }
    }
}

/// group → statistic → grids.
pub type GridTable = BTreeMap<String, BTreeMap<String, StatGrids>>;

/// Shortest representation that parses back to the same value.
pub fn num(x: f64) -> String {
    if !x.is_finite() {
        String::new()
    } else if x == 0.0 || (1e-5..1e15).contains(&x.abs()) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>> {
    w.into_inner().map_err(|e| anyhow::anyhow!("csv buffer: {e}"))
}

fn month_field(m: Option<u8>) -> String {
    m.map_or_else(|| POOLED_MONTH.to_owned(), |m| m.to_string())
}

/// Long-format table of the given statistics; cells without a mean are left out.
pub fn grid_table_csv(table: &GridTable, stats: &[&str]) -> Result<Vec<u8>> {
    let mut w = writer();
    w.write_record(ENTROPY_HEADER)?;
    for (group, by_stat) in table {
        for stat in stats {
            let Some(g) = by_stat.get(*stat) else { continue };
            for grid in [&g.grid, &g.hourly] {
                for (month, hour, cell) in grid.iter() {
                    if cell.mean.is_none() {
                        continue;
                    }
                    w.write_record([
                        group.clone(),
                        month_field(month),
                        hour.to_string(),
                        (*stat).to_owned(),
                        opt(cell.mean),
                        opt(cell.sem),
                        cell.n.to_string(),
                    ])?;
                }
            }
        }
    }
    finish(w)
}

fn parse_opt(field: &str, line: u64) -> Result<Option<f64>> {
    if field.is_empty() {
        return Ok(None);
    }
    field
        .parse::<f64>()
        .map(Some)
        .with_context(|| format!("line {line}: `{field}` is not a number"))
}

fn check_header(headers: &csv::StringRecord, want: &[&str], path: &Path) -> Result<()> {
    if headers.iter().ne(want.iter().copied()) {
        bail!(
            "{}: expected columns {}, found {}",
            path.display(),
            want.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        );
    }
    Ok(())
}

/// Reads an `entropy.csv`/`counts.csv` file and merges its cells into `table`.
pub fn read_grid_table(path: &Path, table: &mut GridTable) -> Result<()> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    check_header(rdr.headers()?, &ENTROPY_HEADER, path)?;
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let month = match &rec[1] {
            POOLED_MONTH => None,
            m => Some(m.parse::<u8>().with_context(|| format!("line {line}: bad month `{m}`"))?),
        };
        let hour: u8 = rec[2].parse().with_context(|| format!("line {line}: bad hour"))?;
        let n: usize = rec[6].parse().with_context(|| format!("line {line}: bad n"))?;
        let cell = CellStat {
            mean: parse_opt(&rec[4], line)?,
            sem: parse_opt(&rec[5], line)?,
            n,
        };
        let stat = rec[3].to_owned();
        let grids = table
            .entry(rec[0].to_owned())
            .or_default()
            .entry(stat.clone())
            .or_insert_with(|| StatGrids::empty(&stat));
        let target = if month.is_some() { &mut grids.grid } else { &mut grids.hourly };
        target
            .set(month, hour, cell)
            .with_context(|| format!("{} line {line}", path.display()))?;
    }
    Ok(())
}

pub fn heatmap_csv(grid: &HeatmapGrid) -> Result<Vec<u8>> {
    let mut w = writer();
    w.write_record(HEATMAP_HEADER)?;
    for (month, hour, cell) in grid.iter() {
        w.write_record([
            month_field(month),
            hour.to_string(),
            opt(cell.mean),
            opt(cell.sem),
            cell.n.to_string(),
        ])?;
    }
    finish(w)
}

/// One row of a cosinor table.
#[derive(Debug, Clone, PartialEq)]
pub struct CosinorRow {
    pub group: String,
    pub amplitude: f64,
    pub acrophase_h: f64,
    pub r2: f64,
    pub p_lr: f64,
    pub p_fdr: Option<f64>,
    pub mesor: f64,
}

impl CosinorRow {
    pub fn from_fit(group: &str, fit: &CosinorFit) -> Self {
        Self {
            group: group.to_owned(),
            amplitude: fit.amplitude,
            acrophase_h: fit.acrophase_h,
            r2: fit.r2,
            p_lr: fit.p_lr,
            p_fdr: fit.p_fdr,
            mesor: fit.mesor,
        }
    }
}

pub fn cosinor_csv(rows: &[CosinorRow]) -> Result<Vec<u8>> {
    let mut w = writer();
    w.write_record(COSINOR_HEADER)?;
    for r in rows {
        w.write_record([
            r.group.clone(),
            num(r.amplitude),
            num(r.acrophase_h),
            num(r.r2),
            num(r.p_lr),
            opt(r.p_fdr),
            num(r.mesor),
        ])?;
    }
    finish(w)
}

pub fn read_cosinor_csv(path: &Path) -> Result<Vec<CosinorRow>> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    check_header(rdr.headers()?, &COSINOR_HEADER, path)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let req = |i: usize| -> Result<f64> {
            parse_opt(&rec[i], line)?.with_context(|| format!("line {line}: column {} is empty", COSINOR_HEADER[i]))
        };
        out.push(CosinorRow {
            group: rec[0].to_owned(),
            amplitude: req(1)?,
            acrophase_h: req(2)?,
            r2: req(3)?,
            p_lr: req(4)?,
            p_fdr: parse_opt(&rec[5], line)?,
            mesor: req(6)?,
        });
    }
    Ok(out)
}

pub fn solar_csv(profiles: &BTreeMap<String, SolarProfile>) -> Result<Vec<u8>> {
    let mut w = writer();
    w.write_record(SOLAR_HEADER)?;
    for (group, p) in profiles {
        for m in &p.months {
            w.write_record([
                group.clone(),
                m.month.to_string(),
                opt(m.sunrise_mean),
                opt(m.sunrise_sd),
                opt(m.sunset_mean),
                opt(m.sunset_sd),
                m.sites.to_string(),
            ])?;
        }
    }
    finish(w)
}

pub fn read_solar_csv(path: &Path) -> Result<BTreeMap<String, SolarProfile>> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    check_header(rdr.headers()?, &SOLAR_HEADER, path)?;
    let mut out: BTreeMap<String, SolarProfile> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let m = chronoseme_core::geo::MonthlySolar {
            month: rec[1].parse().with_context(|| format!("line {line}: bad month"))?,
            sunrise_mean: parse_opt(&rec[2], line)?,
            sunrise_sd: parse_opt(&rec[3], line)?,
            sunset_mean: parse_opt(&rec[4], line)?,
            sunset_sd: parse_opt(&rec[5], line)?,
            sites: rec[6].parse().with_context(|| format!("line {line}: bad site count"))?,
        };
        out.entry(rec[0].to_owned()).or_default().months.push(m);
    }
    Ok(out)
}

pub fn seasonal_csv(
    tables: &BTreeMap<String, PeakTroughTable>,
    solar: &BTreeMap<String, SolarProfile>,
) -> Result<Vec<u8>> {
    let mut w = writer();
    w.write_record(SEASONAL_HEADER)?;
    for (group, t) in tables {
        let profile = solar.get(group);
        for row in &t.rows {
            let s = row.month.and_then(|m| profile.and_then(|p| p.month(u32::from(m))));
            w.write_record([
                group.clone(),
                month_field(row.month),
                row.peak_hour.map(|h| h.to_string()).unwrap_or_default(),
                row.trough_hour.map(|h| h.to_string()).unwrap_or_default(),
                opt(s.and_then(|s| s.sunrise_mean)),
                opt(s.and_then(|s| s.sunset_mean)),
            ])?;
        }
    }
    finish(w)
}

pub fn correlations_csv(rows: &[(String, String, CorrelationResult)]) -> Result<Vec<u8>> {
    let mut w = writer();
    w.write_record(CORRELATION_HEADER)?;
    for (group, analysis, c) in rows {
        w.write_record([
            group.clone(),
            analysis.clone(),
            num(c.r),
            num(c.p),
            c.n.to_string(),
            num(c.slope),
            num(c.intercept),
        ])?;
    }
    finish(w)
}

/// File-name-safe form of a group name.
pub fn file_stem(group: &str) -> String {
    let s: String = group
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect();
    if s.is_empty() {
        "_".into()
    } else {
        s
    }
}
