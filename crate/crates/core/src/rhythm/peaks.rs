use serde::{Deserialize, Serialize};

use super::correlation::{pearson, CorrelationResult};
use crate::entropy::HeatmapGrid;
use crate::error::{Error, Result};
use crate::geo::SolarProfile;

/// Half-open hour window `[start, end)`; wraps past midnight when `start > end`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HourWindow {
    pub start: u8,
    pub end: u8,
}

impl HourWindow {
    pub const MORNING: HourWindow = HourWindow { start: 0, end: 12 };
    pub const EVENING: HourWindow = HourWindow { start: 12, end: 24 };

    pub fn new(start: u8, end: u8) -> Result<Self> {
        if start > 23 || end > 24 || start == end {
            return Err(Error::InvalidArgument(format!("bad hour window [{start}, {end})")));
        }
        Ok(Self { start, end })
    }

    /// Hours in window order.
    pub fn hours(self) -> Vec<u8> {
        let len = (i32::from(self.end) - i32::from(self.start)).rem_euclid(24);
        let len = if len == 0 { 24 } else { len };
        (0..len).map(|i| ((i32::from(self.start) + i) % 24) as u8).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakTrough {
    pub month: Option<u8>,
    pub peak_hour: Option<u8>,
    pub trough_hour: Option<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakTroughTable {
    pub peak_window: HourWindow,
    pub trough_window: HourWindow,
    pub rows: Vec<PeakTrough>,
}

fn extreme(row: &[crate::entropy::CellStat], window: HourWindow, want_max: bool) -> Option<u8> {
    let mut best: Option<(u8, f64)> = None;
    for h in window.hours() {
        if let Some(m) = row[h as usize].mean {
            // Strict comparison keeps the earliest hour on ties.
            let better = match best {
                None => true,
                Some((_, b)) => (want_max && m > b) || (!want_max && m < b),
            };
            if better {
                best = Some((h, m));
            }
        }
    }
    best.map(|(h, _)| h)
}

/// Per grid row, the hour of maximum mean within `peak_window` and of minimum
/// mean within `trough_window`. Rows with both windows empty are omitted.
pub fn extract_peak_trough(grid: &HeatmapGrid, peak_window: HourWindow, trough_window: HourWindow) -> PeakTroughTable {
    let rows = (0..grid.rows())
        .filter_map(|r| {
            let row = grid.row(r);
            let peak_hour = extreme(row, peak_window, true);
            let trough_hour = extreme(row, trough_window, false);
            (peak_hour.is_some() || trough_hour.is_some()).then_some(PeakTrough {
                month: grid.row_month(r),
                peak_hour,
                trough_hour,
            })
        })
        .collect();
    PeakTroughTable {
        peak_window,
        trough_window,
        rows,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeasonalCorrelation {
    pub sunrise_peak: CorrelationResult,
    pub sunset_trough: CorrelationResult,
}

/// Month-paired Pearson correlations of sunrise with peak hour and sunset
/// with trough hour.
pub fn seasonal_correlation(table: &PeakTroughTable, solar: &SolarProfile) -> Result<SeasonalCorrelation> {
    let mut rise = (Vec::new(), Vec::new());
    let mut set = (Vec::new(), Vec::new());
    for row in &table.rows {
        let Some(m) = row.month else { continue };
        let Some(s) = solar.month(u32::from(m)) else { continue };
        if let (Some(sr), Some(p)) = (s.sunrise_mean, row.peak_hour) {
            rise.0.push(sr);
            rise.1.push(f64::from(p));
        }
        if let (Some(ss), Some(t)) = (s.sunset_mean, row.trough_hour) {
            set.0.push(ss);
            set.1.push(f64::from(t));
        }
    }
    Ok(SeasonalCorrelation {
        sunrise_peak: pearson(&rise.0, &rise.1)?,
        sunset_trough: pearson(&set.0, &set.1)?,
    })
}
