use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::solar::solar_times;
use crate::error::Result;

/// Number of submissions from one located site in one month.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteMonthCount {
    pub lat: f64,
    pub lon: f64,
    pub tzid: String,
    pub year: i32,
    pub month: u32,
    pub count: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonthlySolar {
    pub month: u32,
    pub sunrise_mean: Option<f64>,
    /// Population standard deviation across sites.
    pub sunrise_sd: Option<f64>,
    pub sunset_mean: Option<f64>,
    pub sunset_sd: Option<f64>,
    pub sites: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolarProfile {
    pub months: Vec<MonthlySolar>,
}

impl SolarProfile {
    pub fn month(&self, month: u32) -> Option<&MonthlySolar> {
        self.months.iter().find(|m| m.month == month)
    }
}

/// Weighted mean and weighted population SD. `None` for zero total weight.
pub fn weighted_mean_sd(values: &[(f64, f64)]) -> Option<(f64, f64)> {
    let w: f64 = values.iter().map(|&(_, w)| w).sum();
    if w <= 0.0 {
        return None;
    }
    let mean = values.iter().map(|&(v, w)| v * w).sum::<f64>() / w;
    let var = values.iter().map(|&(v, w)| w * (v - mean).powi(2)).sum::<f64>() / w;
    Some((mean, var.sqrt()))
}

/// Per-month submission-weighted mean and SD of site sunrise/sunset times.
/// Sites in polar day or night that month do not contribute to that event.
pub fn monthly_solar_profile(sites: &[SiteMonthCount]) -> Result<SolarProfile> {
    let mut by_month: BTreeMap<u32, (Vec<(f64, f64)>, Vec<(f64, f64)>, usize)> = BTreeMap::new();
    for s in sites.iter().filter(|s| s.count > 0) {
        let t = solar_times(s.lat, s.lon, &s.tzid, s.year, s.month)?;
        let entry = by_month.entry(s.month).or_default();
        let w = s.count as f64;
        if let Some(h) = t.sunrise.hours() {
            entry.0.push((h, w));
        }
        if let Some(h) = t.sunset.hours() {
            entry.1.push((h, w));
        }
        entry.2 += 1;
    }
    let months = by_month
        .into_iter()
        .map(|(month, (rise, set, sites))| {
            let r = weighted_mean_sd(&rise);
            let s = weighted_mean_sd(&set);
            MonthlySolar {
                month,
                sunrise_mean: r.map(|x| x.0),
                sunrise_sd: r.map(|x| x.1),
                sunset_mean: s.map(|x| x.0),
                sunset_sd: s.map(|x| x.1),
                sites,
            }
        })
        .collect();
    Ok(SolarProfile { months })
}
