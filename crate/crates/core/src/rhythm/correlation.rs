use std::path::Path;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::entropy::HeatmapGrid;
use crate::error::{Error, Result};
use crate::stats::{mean, sample_sd};

/// Parameters of the 95% confidence band of the regression mean response.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceBand {
    pub t_crit: f64,
    pub residual_se: f64,
    pub x_mean: f64,
    pub sxx: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub r: f64,
    pub p: f64,
    pub n: usize,
    pub slope: f64,
    pub intercept: f64,
    pub band: ConfidenceBand,
}

impl CorrelationResult {
    /// Lower and upper 95% limits of the fitted mean at `x`.
    pub fn band_at(&self, x: f64) -> (f64, f64) {
        let b = &self.band;
        let fit = self.intercept + self.slope * x;
        let half = b.t_crit
            * b.residual_se
            * (1.0 / self.n as f64 + (x - b.x_mean).powi(2) / b.sxx).sqrt();
        (fit - half, fit + half)
    }
}

fn students_t(df: f64) -> Result<StudentsT> {
    StudentsT::new(0.0, 1.0, df).map_err(|e| Error::Degenerate(format!("t distribution with df {df}: {e}")))
}

/// Pearson product-moment correlation with a two-sided t-test on n − 2 df.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<CorrelationResult> {
    if x.len() != y.len() {
        return Err(Error::InvalidArgument(format!(
            "paired vectors differ in length ({} vs {})",
            x.len(),
            y.len()
        )));
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::InsufficientData {
            what: "correlation pairs",
            have: n,
            need: 3,
        });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite value in correlation input".into()));
    }
    let mx = mean(x).unwrap_or(0.0);
    let my = mean(y).unwrap_or(0.0);
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate("constant input to correlation".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let df = (n - 2) as f64;
    let tdist = students_t(df)?;
    let p = if r.abs() >= 1.0 {
        0.0
    } else {
        let t = r * (df / (1.0 - r * r)).sqrt();
        (2.0 * tdist.sf(t.abs())).min(1.0)
    };
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    Ok(CorrelationResult {
        r,
        p,
        n,
        slope,
        intercept,
        band: ConfidenceBand {
            t_crit: tdist.inverse_cdf(0.975),
            residual_se: (rss / df).sqrt(),
            x_mean: mx,
            sxx,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t: f64,
    pub df: f64,
    pub p: f64,
}

/// Welch's unequal-variance two-sample t-test, two-sided.
pub fn t_test_two_sample(a: &[f64], b: &[f64]) -> Result<TTestResult> {
    for (name, g) in [("first group", a), ("second group", b)] {
        if g.len() < 2 {
            return Err(Error::InsufficientData {
                what: if name == "first group" { "t-test first group" } else { "t-test second group" },
                have: g.len(),
                need: 2,
            });
        }
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, mb) = (mean(a).unwrap_or(0.0), mean(b).unwrap_or(0.0));
    let va = sample_sd(a).unwrap_or(0.0).powi(2) / na;
    let vb = sample_sd(b).unwrap_or(0.0).powi(2) / nb;
    let se2 = va + vb;
    if se2 == 0.0 {
        let df = na + nb - 2.0;
        return Ok(if ma == mb {
            TTestResult { t: 0.0, df, p: 1.0 }
        } else {
            TTestResult {
                t: (ma - mb).signum() * f64::INFINITY,
                df,
                p: 0.0,
            }
        });
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    let p = (2.0 * students_t(df)?.sf(t.abs())).min(1.0);
    Ok(TTestResult { t, df, p })
}

/// Pearson correlation over cells where both grids have a mean.
pub fn grid_correlation(a: &HeatmapGrid, b: &HeatmapGrid) -> Result<CorrelationResult> {
    if a.layout != b.layout {
        return Err(Error::InvalidArgument("grids have different shapes".into()));
    }
    let (x, y): (Vec<f64>, Vec<f64>) = a
        .cells()
        .iter()
        .zip(b.cells())
        .filter_map(|(p, q)| Some((p.mean?, q.mean?)))
        .unzip();
    pearson(&x, &y)
}

/// Reads `hour,value` rows; a non-numeric first line is treated as a header.
pub fn read_reference_csv(path: impl AsRef<Path>) -> Result<Vec<(f64, f64)>> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))?;
        let parsed = (rec.get(0).map(str::parse::<f64>), rec.get(1).map(str::parse::<f64>));
        match parsed {
            (Some(Ok(h)), Some(Ok(v))) => out.push((h, v)),
            _ if i == 0 => continue,
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "{}: line {} is not `hour,value`",
                    path.display(),
                    i + 1
                )))
            }
        }
    }
    Ok(out)
}

/// Reference value at integer `hour`: exact match, otherwise linear
/// interpolation between the nearest bracketing points (no wrap at midnight).
fn reference_at(reference: &[(f64, f64)], hour: f64) -> Option<f64> {
    if let Some(&(_, v)) = reference.iter().find(|(h, _)| *h == hour) {
        return Some(v);
    }
    let below = reference
        .iter()
        .filter(|(h, _)| *h < hour)
        .max_by(|a, b| a.0.total_cmp(&b.0))?;
    let above = reference
        .iter()
        .filter(|(h, _)| *h > hour)
        .min_by(|a, b| a.0.total_cmp(&b.0))?;
    let w = (hour - below.0) / (above.0 - below.0);
    Some(below.1 + w * (above.1 - below.1))
}

/// Correlates an hourly profile (index = hour) with an external hourly series.
pub fn compare_external(profile: &[Option<f64>], reference: &[(f64, f64)]) -> Result<CorrelationResult> {
    let (x, y): (Vec<f64>, Vec<f64>) = profile
        .iter()
        .enumerate()
        .filter_map(|(h, p)| Some(((*p)?, reference_at(reference, h as f64)?)))
        .unzip();
    if x.len() < 3 {
        return Err(Error::InsufficientData {
            what: "hours overlapping the reference series",
            have: x.len(),
            need: 3,
        });
    }
    pearson(&x, &y)
}
