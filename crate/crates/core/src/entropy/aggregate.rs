use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{BinIndex, BinResolution};
use crate::rhythm::iqr_filter;
use crate::stats::{mean, sample_sd};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CellStat {
    pub mean: Option<f64>,
    pub sem: Option<f64>,
    pub n: usize,
}

impl CellStat {
    /// Mean and SEM (sample SD / √n) of `values`.
    pub fn from_values(values: &[f64]) -> Self {
        let n = values.len();
        Self {
            mean: mean(values),
            sem: sample_sd(values).map(|sd| sd / (n as f64).sqrt()),
            n,
        }
    }

    /// A cell carrying one precomputed value derived from `n` samples.
    pub fn single(value: f64, n: usize) -> Self {
        Self {
            mean: Some(value),
            sem: None,
            n,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridLayout {
    /// Twelve month rows.
    MonthHour,
    /// One row pooled over months.
    Pooled,
}

impl GridLayout {
    pub fn rows(self) -> usize {
        match self {
            GridLayout::MonthHour => 12,
            GridLayout::Pooled => 1,
        }
    }
}

/// Month × hour (or pooled × hour) grid of a per-cell statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapGrid {
    pub statistic: String,
    pub layout: GridLayout,
    cells: Vec<CellStat>,
}

impl HeatmapGrid {
    pub fn empty(statistic: impl Into<String>, layout: GridLayout) -> Self {
        Self {
            statistic: statistic.into(),
            layout,
            cells: vec![CellStat::default(); layout.rows() * 24],
        }
    }

    pub fn rows(&self) -> usize {
        self.layout.rows()
    }

    /// Month label of a row, `None` for the pooled row.
    pub fn row_month(&self, row: usize) -> Option<u8> {
        match self.layout {
            GridLayout::MonthHour => Some(row as u8 + 1),
            GridLayout::Pooled => None,
        }
    }

    fn index(&self, month: Option<u8>, hour: u8) -> Option<usize> {
        if hour > 23 {
            return None;
        }
        let row = match (self.layout, month) {
            (GridLayout::MonthHour, Some(m)) if (1..=12).contains(&m) => m as usize - 1,
            (GridLayout::Pooled, _) => 0,
            _ => return None,
        };
        Some(row * 24 + hour as usize)
    }

    pub fn get(&self, month: Option<u8>, hour: u8) -> Option<&CellStat> {
        self.index(month, hour).map(|i| &self.cells[i])
    }

    pub fn set(&mut self, month: Option<u8>, hour: u8, cell: CellStat) -> Result<()> {
        let i = self
            .index(month, hour)
            .ok_or_else(|| Error::InvalidArgument(format!("no cell for month {month:?} hour {hour}")))?;
        self.cells[i] = cell;
        Ok(())
    }

    pub fn row(&self, row: usize) -> &[CellStat] {
        &self.cells[row * 24..(row + 1) * 24]
    }

    /// Cells in month-major, hour-minor order.
    pub fn iter(&self) -> impl Iterator<Item = (Option<u8>, u8, &CellStat)> + '_ {
        self.cells
            .iter()
            .enumerate()
            .map(move |(i, c)| (self.row_month(i / 24), (i % 24) as u8, c))
    }

    pub fn cells(&self) -> &[CellStat] {
        &self.cells
    }

    pub fn non_empty(&self) -> usize {
        self.cells.iter().filter(|c| c.mean.is_some()).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutlierPolicy {
    /// Tukey fences at 1.5 × IQR within each cell.
    #[default]
    #[serde(alias = "iqr")]
    Iqr1p5,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregated {
    /// Month × hour when the bins are month × hour, otherwise pooled.
    pub grid: HeatmapGrid,
    /// All months pooled per hour.
    pub hourly: HeatmapGrid,
}

fn cell_stat(rows: &[usize], values: &[Option<f64>], policy: OutlierPolicy) -> CellStat {
    let v: Vec<f64> = rows.iter().filter_map(|&r| values.get(r).copied().flatten()).collect();
    match policy {
        OutlierPolicy::Iqr1p5 => CellStat::from_values(&iqr_filter(&v)),
        OutlierPolicy::None => CellStat::from_values(&v),
    }
}

/// Per-cell mean and SEM of a per-record statistic. `values[row]` is `None`
/// for records without a usable value.
pub fn aggregate(
    statistic: &str,
    values: &[Option<f64>],
    bins: &BinIndex,
    policy: OutlierPolicy,
) -> Result<Aggregated> {
    let layout = match bins.resolution() {
        BinResolution::MonthHour => GridLayout::MonthHour,
        BinResolution::Hour => GridLayout::Pooled,
    };
    let mut grid = HeatmapGrid::empty(statistic, layout);
    for (key, rows) in bins.iter() {
        grid.set(key.month, key.hour, cell_stat(rows, values, policy))?;
    }
    let pooled = bins.pooled_by_hour();
    let mut hourly = HeatmapGrid::empty(statistic, GridLayout::Pooled);
    for (key, rows) in pooled.iter() {
        hourly.set(None, key.hour, cell_stat(rows, values, policy))?;
    }
    Ok(Aggregated { grid, hourly })
}

/// Standardizes cell means over the non-empty cells; SEMs are divided by
/// the same SD.
pub fn zscore_grid(grid: &HeatmapGrid) -> Result<HeatmapGrid> {
    let means: Vec<f64> = grid.cells.iter().filter_map(|c| c.mean).collect();
    if means.len() < 2 {
        return Err(Error::InsufficientData {
            what: "z-scored grid cells",
            have: means.len(),
            need: 2,
        });
    }
    let mu = mean(&means).unwrap_or(0.0);
    let sd = sample_sd(&means).unwrap_or(0.0);
    if sd == 0.0 || !sd.is_finite() {
        return Err(Error::Degenerate(format!(
            "grid `{}` has zero spread",
            grid.statistic
        )));
    }
    let mut out = grid.clone();
    out.statistic = format!("{}_z", grid.statistic);
    for c in &mut out.cells {
        c.mean = c.mean.map(|m| (m - mu) / sd);
        c.sem = c.sem.map(|s| s / sd);
    }
    Ok(out)
}
