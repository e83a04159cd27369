use serde::{Deserialize, Serialize};

use crate::entropy::{entropy_from_eigenvalues, symmetric_eigenvalues, HeatmapGrid};
use crate::error::{Error, Result};
use crate::stats::{mean, ols_line};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellOrdering {
    /// Month-major, hour-minor.
    #[default]
    Chronological,
    /// Ascending post count, chronological among ties.
    ByCountAsc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntropyMagnitude {
    #[default]
    Absolute,
    Raw,
}

impl EntropyMagnitude {
    fn apply(self, h: f64) -> f64 {
        match self {
            EntropyMagnitude::Absolute => h.abs(),
            EntropyMagnitude::Raw => h,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitBasis {
    /// Early segment holds points up to `split` of the final cumulative volume.
    #[default]
    Volume,
    /// Early segment holds the first `split` fraction of points.
    Bins,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainPoint {
    pub cum_posts: f64,
    pub cum_entropy: f64,
    /// Central difference; `None` at the two endpoints.
    pub marginal_gain: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalGainCurve {
    pub ordering: String,
    pub points: Vec<GainPoint>,
}

/// Second-order central differences on an unequally spaced grid; endpoints
/// are left undefined.
pub fn central_gradient(x: &[f64], f: &[f64]) -> Vec<Option<f64>> {
    let n = x.len().min(f.len());
    (0..n)
        .map(|i| {
            if i == 0 || i + 1 >= n {
                return None;
            }
            let h0 = x[i] - x[i - 1];
            let h1 = x[i + 1] - x[i];
            Some((h0 * h0 * f[i + 1] - h1 * h1 * f[i - 1] + (h1 * h1 - h0 * h0) * f[i]) / (h0 * h1 * (h0 + h1)))
        })
        .collect()
}

/// Builds a curve from cumulative sequences, checking strict growth of `cum_posts`.
pub fn gain_curve(ordering: &str, cum_posts: Vec<f64>, cum_entropy: Vec<f64>) -> Result<MarginalGainCurve> {
    if cum_posts.len() != cum_entropy.len() {
        return Err(Error::InvalidArgument("cumulative sequences differ in length".into()));
    }
    if cum_posts.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("cumulative post counts must strictly increase".into()));
    }
    let g = central_gradient(&cum_posts, &cum_entropy);
    let points = cum_posts
        .into_iter()
        .zip(cum_entropy)
        .zip(g)
        .map(|((cum_posts, cum_entropy), marginal_gain)| GainPoint {
            cum_posts,
            cum_entropy,
            marginal_gain,
        })
        .collect();
    Ok(MarginalGainCurve {
        ordering: ordering.to_owned(),
        points,
    })
}

/// Marginal entropy gain over grid cells: cells with a positive count and an
/// entropy value are ordered, cumulated and differentiated.
pub fn marginal_gain(
    count_grid: &HeatmapGrid,
    entropy_grid: &HeatmapGrid,
    ordering: CellOrdering,
    magnitude: EntropyMagnitude,
) -> Result<MarginalGainCurve> {
    if count_grid.layout != entropy_grid.layout {
        return Err(Error::InvalidArgument("count and entropy grids differ in shape".into()));
    }
    let mut cells: Vec<(f64, f64)> = count_grid
        .cells()
        .iter()
        .zip(entropy_grid.cells())
        .filter_map(|(c, h)| {
            let count = c.mean?;
            (count > 0.0).then_some((count, magnitude.apply(h.mean?)))
        })
        .collect();
    if cells.len() < 5 {
        return Err(Error::InsufficientData {
            what: "paired count/entropy cells",
            have: cells.len(),
            need: 5,
        });
    }
    if ordering == CellOrdering::ByCountAsc {
        cells.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    let mut cp = 0.0;
    let mut ce = 0.0;
    let (posts, ent): (Vec<f64>, Vec<f64>) = cells
        .iter()
        .map(|&(c, h)| {
            cp += c;
            ce += h;
            (cp, ce)
        })
        .unzip();
    let name = match ordering {
        CellOrdering::Chronological => "chronological",
        CellOrdering::ByCountAsc => "by_count_asc",
    };
    gain_curve(name, posts, ent)
}

/// Gain of the global entropy of the growing corpus: at every `step` rows
/// (and at the end) the Gaussian entropy of all rows so far is recorded.
/// Sums are accumulated in row order, so the result is thread-count free.
pub fn prefix_gain_curve(
    rows: &[&[f64]],
    step: usize,
    epsilon: f64,
    magnitude: EntropyMagnitude,
) -> Result<MarginalGainCurve> {
    if step < 2 {
        return Err(Error::InvalidArgument("checkpoint step must be at least 2".into()));
    }
    let n = rows.len();
    if n < 5 * step {
        return Err(Error::InsufficientData {
            what: "rows for prefix gain checkpoints",
            have: n,
            need: 5 * step,
        });
    }
    let d = rows[0].len();
    let mut sum = vec![0.0; d];
    let mut scatter = vec![0.0; d * d];
    let mut posts = Vec::new();
    let mut ent = Vec::new();
    for (i, r) in rows.iter().enumerate() {
        if r.len() != d {
            return Err(Error::InvalidArgument("rows have unequal dimension".into()));
        }
        for a in 0..d {
            sum[a] += r[a];
            for b in a..d {
                scatter[a * d + b] += r[a] * r[b];
            }
        }
        let m = i + 1;
        if m % step == 0 || m == n {
            let mf = m as f64;
            let cov = nalgebra::DMatrix::from_fn(d, d, |a, b| {
                let (a, b) = if a <= b { (a, b) } else { (b, a) };
                (scatter[a * d + b] - sum[a] * sum[b] / mf) / (mf - 1.0)
            });
            posts.push(mf);
            ent.push(magnitude.apply(entropy_from_eigenvalues(&symmetric_eigenvalues(cov), epsilon)));
        }
    }
    gain_curve("arrival", posts, ent)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentFit {
    pub split_fraction: f64,
    pub split_basis: SplitBasis,
    pub early_slope: f64,
    pub late_slope: f64,
    pub early_intercept: f64,
    pub late_intercept: f64,
    pub early_mean_gain: f64,
    pub late_mean_gain: f64,
    pub reduction: f64,
    pub early_points: usize,
    pub late_points: usize,
    /// Interior points left out of the log fits because their gain was not positive.
    pub excluded_nonpositive: usize,
}

struct Segment {
    slope: f64,
    intercept: f64,
    mean_gain: f64,
    points: usize,
    excluded: usize,
}

fn fit_segment(name: &str, pts: &[(f64, f64)]) -> Result<Segment> {
    let (x, y): (Vec<f64>, Vec<f64>) = pts
        .iter()
        .filter(|p| p.1 > 0.0)
        .map(|&(c, g)| (c.ln(), g.ln()))
        .unzip();
    let excluded = pts.len() - x.len();
    if x.len() < 3 {
        return Err(Error::Degenerate(format!(
            "{name} segment has {} usable points, need 3",
            x.len()
        )));
    }
    let (slope, intercept) =
        ols_line(&x, &y).ok_or_else(|| Error::Degenerate(format!("{name} segment has no spread")))?;
    let gains: Vec<f64> = pts.iter().map(|p| p.1).collect();
    Ok(Segment {
        slope,
        intercept,
        mean_gain: mean(&gains).unwrap_or(0.0),
        points: x.len(),
        excluded,
    })
}

/// Separate log-log fits of marginal gain against cumulative posts for an
/// early and a late segment.
pub fn segment_fit(curve: &MarginalGainCurve, split: f64, basis: SplitBasis) -> Result<SegmentFit> {
    if !(split > 0.0 && split < 1.0) {
        return Err(Error::InvalidArgument(format!("split fraction {split} outside (0, 1)")));
    }
    let total = curve.points.last().map(|p| p.cum_posts).unwrap_or(0.0);
    let cut = (split * curve.points.len() as f64).ceil() as usize;
    let (mut early, mut late) = (Vec::new(), Vec::new());
    for (i, p) in curve.points.iter().enumerate() {
        let Some(g) = p.marginal_gain else { continue };
        let is_early = match basis {
            SplitBasis::Volume => p.cum_posts <= split * total,
            SplitBasis::Bins => i < cut,
        };
        if is_early { &mut early } else { &mut late }.push((p.cum_posts, g));
    }
    let e = fit_segment("early", &early)?;
    let l = fit_segment("late", &late)?;
    let reduction = if e.mean_gain != 0.0 {
        1.0 - l.mean_gain / e.mean_gain
    } else {
        f64::NAN
    };
    Ok(SegmentFit {
        split_fraction: split,
        split_basis: basis,
        early_slope: e.slope,
        late_slope: l.slope,
        early_intercept: e.intercept,
        late_intercept: l.intercept,
        early_mean_gain: e.mean_gain,
        late_mean_gain: l.mean_gain,
        reduction,
        early_points: e.points,
        late_points: l.points,
        excluded_nonpositive: e.excluded + l.excluded,
    })
}
