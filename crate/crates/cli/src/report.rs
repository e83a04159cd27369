//! Figure emission from finished tables.

use std::collections::BTreeMap;

use chronoseme_core::geo::SolarProfile;
use chronoseme_core::scaling::{SegmentFit, SplitBasis};

use crate::figures::{heatmap_svg, loglog_svg, profile_svg, scatter_svg, CosinorCurve, FitLine};
use crate::stages::{GainReport, ScalingReport, H_GLOBAL, H_LOCAL};
use crate::tables::{file_stem, CosinorRow, GridTable};

/// Relative path → file contents.
pub type Artifacts = BTreeMap<String, Vec<u8>>;

/// stat → group → curve.
pub type Curves = BTreeMap<String, BTreeMap<String, CosinorCurve>>;

pub fn curves_from_rows(stat: &str, rows: &[CosinorRow], into: &mut Curves) {
    let m = into.entry(stat.to_owned()).or_default();
    for r in rows {
        m.insert(
            r.group.clone(),
            CosinorCurve {
                mesor: r.mesor,
                amplitude: r.amplitude,
                acrophase_h: r.acrophase_h,
            },
        );
    }
}

fn push(out: &mut Artifacts, warnings: &mut Vec<String>, name: String, svg: Option<String>, why: &str) {
    match svg {
        Some(s) => {
            out.insert(name, s.into_bytes());
        }
        None => warnings.push(format!("figure {name} skipped: {why}")),
    }
}

fn segment_lines(g: &GainReport, fit: &SegmentFit) -> Vec<FitLine> {
    let pts = &g.curve.points;
    let xs: Vec<f64> = pts
        .iter()
        .filter(|p| p.marginal_gain.is_some_and(|v| v > 0.0))
        .map(|p| p.cum_posts.ln())
        .collect();
    let (Some(&lo), Some(&hi)) = (xs.first(), xs.last()) else {
        return Vec::new();
    };
    let total = pts.last().map_or(1.0, |p| p.cum_posts);
    let cut = match fit.split_basis {
        SplitBasis::Volume => (fit.split_fraction * total).ln(),
        SplitBasis::Bins => {
            let i = ((fit.split_fraction * pts.len() as f64).ceil() as usize).clamp(1, pts.len());
            pts[i - 1].cum_posts.ln()
        }
    }
    .clamp(lo, hi);
    vec![
        FitLine {
            slope: fit.early_slope,
            intercept: fit.early_intercept,
            x0: lo,
            x1: cut,
        },
        FitLine {
            slope: fit.late_slope,
            intercept: fit.late_intercept,
            x0: cut,
            x1: hi,
        },
    ]
}

fn gain_figure(title: &str, g: &GainReport) -> Option<String> {
    let pts: Vec<(f64, f64)> = g
        .curve
        .points
        .iter()
        .filter_map(|p| {
            let v = p.marginal_gain?;
            (v > 0.0).then(|| (p.cum_posts.ln(), v.ln()))
        })
        .collect();
    let lines = g.segments.ok().map(|f| segment_lines(g, f)).unwrap_or_default();
    loglog_svg(title, "ln cumulative posts", "ln marginal entropy gain", &pts, &lines)
}

/// Every figure that the given tables support. Missing inputs skip the
/// figure with a warning.
pub fn render_figures(
    table: &GridTable,
    curves: &Curves,
    solar: &BTreeMap<String, SolarProfile>,
    scaling: Option<&ScalingReport>,
) -> (Artifacts, Vec<String>) {
    let mut out = Artifacts::new();
    let mut warnings = Vec::new();
    for (group, stats) in table {
        let stem = file_stem(group);
        for stat in [H_LOCAL, H_GLOBAL] {
            let Some(g) = stats.get(stat) else {
                warnings.push(format!("figures for {group} {stat} skipped: no table"));
                continue;
            };
            let curve = curves.get(stat).and_then(|c| c.get(group)).copied();
            if curve.is_none() {
                warnings.push(format!("{group} {stat} profile drawn without a cosinor curve"));
            }
            push(
                &mut out,
                &mut warnings,
                format!("figures/{stem}_{stat}_profile.svg"),
                profile_svg(&format!("{group} hourly {stat}"), &g.hourly, curve),
                "no hourly values",
            );
            push(
                &mut out,
                &mut warnings,
                format!("figures/{stem}_{stat}_heatmap.svg"),
                heatmap_svg(&format!("{group} {stat} by month and hour"), &g.grid, solar.get(group.as_str())),
                "no cell values",
            );
        }
    }
    let Some(s) = scaling else {
        warnings.push("scaling figures skipped: no scaling report".into());
        return (out, warnings);
    };
    for (name, g) in [("cells", &s.gain_cells), ("arrival", &s.gain_arrival)] {
        let fig = g.ok().and_then(|g| gain_figure(&format!("marginal entropy gain ({})", g.curve.ordering), g));
        push(&mut out, &mut warnings, format!("figures/scaling_gain_{name}.svg"), fig, "no gain curve");
    }
    let sizes = s.powerlaw.ok().and_then(|p| {
        let xs: Vec<f64> = p.points.iter().map(|q| q.0).collect();
        let line = FitLine {
            slope: p.exponent,
            intercept: p.intercept,
            x0: xs.iter().copied().fold(f64::INFINITY, f64::min),
            x1: xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        };
        loglog_svg("cluster size distribution", "ln size", "ln frequency", &p.points, &[line])
    });
    push(&mut out, &mut warnings, "figures/scaling_sizes.svg".into(), sizes, "no power-law fit");
    let pca = s
        .pca
        .ok()
        .and_then(|p| scatter_svg("embedding projection by cluster", &p.coords, &p.labels));
    push(&mut out, &mut warnings, "figures/scaling_pca.svg".into(), pca, "no projection");
    (out, warnings)
}
