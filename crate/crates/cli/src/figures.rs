//! Static SVG figures built as plain strings.

use std::fmt::Write;

use chronoseme_core::entropy::HeatmapGrid;
use chronoseme_core::geo::SolarProfile;
use chronoseme_core::OMEGA_24H;

const W: f64 = 640.0;
const H: f64 = 400.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

/// Cosinor curve parameters as stored in the cosinor tables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CosinorCurve {
    pub mesor: f64,
    pub amplitude: f64,
    pub acrophase_h: f64,
}

impl CosinorCurve {
    pub fn at(&self, t: f64) -> f64 {
        self.mesor + self.amplitude * (OMEGA_24H * (t - self.acrophase_h)).cos()
    }
}

/// A fitted line `y = slope·x + intercept` drawn over `[x0, x1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitLine {
    pub slope: f64,
    pub intercept: f64,
    pub x0: f64,
    pub x1: f64,
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn new(xs: impl Iterator<Item = f64> + Clone, ys: impl Iterator<Item = f64> + Clone) -> Self {
        let (x0, x1) = bounds(xs);
        let (y0, y1) = bounds(ys);
        Self { x0, x1, y0, y1 }
    }

    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x0) / (self.x1 - self.x0) * (W - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        H - BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (H - TOP - BOTTOM)
    }
}

fn bounds(v: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for x in v.filter(|x| x.is_finite()) {
        lo = lo.min(x);
        hi = hi.max(x);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let pad = if hi > lo { 0.05 * (hi - lo) } else { 0.5 };
    (lo - pad, hi + pad)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn open(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text class="title" x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        W / 2.0,
        escape(title)
    );
    s
}

fn axes(s: &mut String, f: &Frame, xlabel: &str, ylabel: &str) {
    let (bx, by) = (LEFT, H - BOTTOM);
    let _ = writeln!(
        s,
        r#"<path class="axes" d="M{LEFT} {TOP} L{bx} {by} L{} {by}" fill="none" stroke="black"/>"#,
        W - RIGHT
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        (LEFT + W - RIGHT) / 2.0,
        H - 12.0,
        escape(xlabel)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        (TOP + H - BOTTOM) / 2.0,
        (TOP + H - BOTTOM) / 2.0,
        escape(ylabel)
    );
    for (v, anchor) in [(f.y0, by), (f.y1, TOP)] {
        let _ = writeln!(s, r#"<text x="{}" y="{anchor:.2}" text-anchor="end">{v:.3}</text>"#, LEFT - 4.0);
    }
}

/// Hourly means with ± SEM bars and, when given, the fitted cosinor curve.
/// Returns `None` when the grid has no values.
pub fn profile_svg(title: &str, hourly: &HeatmapGrid, curve: Option<CosinorCurve>) -> Option<String> {
    let pts: Vec<(f64, f64, f64)> = hourly
        .iter()
        .filter_map(|(_, h, c)| Some((f64::from(h), c.mean?, c.sem.unwrap_or(0.0))))
        .collect();
    if pts.is_empty() {
        return None;
    }
    let curve_ys: Vec<f64> = curve
        .map(|c| (0..=96).map(|i| c.at(f64::from(i) * 0.25)).collect())
        .unwrap_or_default();
    let f = Frame {
        x0: -0.5,
        x1: 23.5,
        ..Frame::new(
            std::iter::empty(),
            pts.iter().flat_map(|p| [p.1 - p.2, p.1 + p.2]).chain(curve_ys.iter().copied()),
        )
    };
    let mut s = open(title);
    axes(&mut s, &f, "local hour", hourly.statistic.as_str());
    for h in (0..24).step_by(6) {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{}" text-anchor="middle">{h}</text>"#,
            f.px(f64::from(h)),
            H - BOTTOM + 16.0
        );
    }
    for &(x, m, e) in &pts {
        let px = f.px(x);
        let _ = writeln!(
            s,
            r##"<line class="errbar" x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="#1f4e9c"/>"##,
            f.py(m - e),
            f.py(m + e)
        );
        let _ = writeln!(s, r##"<circle class="point" cx="{px:.2}" cy="{:.2}" r="3" fill="#1f4e9c"/>"##, f.py(m));
    }
    if curve.is_some() {
        let mut d = String::new();
        for (i, y) in curve_ys.iter().enumerate() {
            let t = i as f64 * 0.25;
            let _ = write!(d, "{}{:.2} {:.2}", if i == 0 { "M" } else { " L" }, f.px(t), f.py(*y));
        }
        let _ = writeln!(s, r##"<path class="cosinor-fit" d="{d}" fill="none" stroke="#c0392b" stroke-width="2"/>"##);
    }
    s.push_str("</svg>\n");
    Some(s)
}

// Linear blend from dark blue to yellow.
fn color(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let lerp = |a: f64, b: f64| (a + (b - a) * t).round() as u8;
    format!("#{:02x}{:02x}{:02x}", lerp(68.0, 253.0), lerp(1.0, 231.0), lerp(84.0, 37.0))
}

/// Month × hour heatmap. With a solar profile, each month with a sunrise gets
/// an up-triangle and each month with a sunset a down-triangle.
pub fn heatmap_svg(title: &str, grid: &HeatmapGrid, solar: Option<&SolarProfile>) -> Option<String> {
    let means: Vec<f64> = grid.iter().filter_map(|(_, _, c)| c.mean).collect();
    if means.is_empty() {
        return None;
    }
    let lo = means.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let rows = grid.rows();
    let cw = (W - LEFT - RIGHT) / 24.0;
    let ch = (H - TOP - BOTTOM) / rows as f64;
    let mut s = open(title);
    for (r, (month, hour, c)) in grid.iter().enumerate() {
        let row = r / 24;
        let fill = match c.mean {
            Some(m) if hi > lo => color((m - lo) / (hi - lo)),
            Some(_) => color(0.5),
            None => "#dddddd".into(),
        };
        let _ = writeln!(
            s,
            r#"<rect class="cell" x="{:.2}" y="{:.2}" width="{cw:.2}" height="{ch:.2}" fill="{fill}"><title>{} {hour}h</title></rect>"#,
            LEFT + f64::from(hour) * cw,
            TOP + row as f64 * ch,
            month.map_or_else(|| "all".to_owned(), |m| format!("month {m}"))
        );
    }
    for r in 0..rows {
        let label = grid.row_month(r).map_or_else(|| "all".to_owned(), |m| m.to_string());
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.2}" text-anchor="end">{label}</text>"#,
            LEFT - 4.0,
            TOP + (r as f64 + 0.65) * ch
        );
    }
    for h in (0..24).step_by(6) {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{}" text-anchor="middle">{h}</text>"#,
            LEFT + (f64::from(h) + 0.5) * cw,
            H - BOTTOM + 16.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">local hour (range {lo:.3} to {hi:.3})</text>"#,
        (LEFT + W - RIGHT) / 2.0,
        H - 12.0
    );
    if let Some(p) = solar {
        for r in 0..rows {
            let Some(month) = grid.row_month(r) else { continue };
            let Some(m) = p.month(u32::from(month)) else { continue };
            let cy = TOP + (r as f64 + 0.5) * ch;
            let half = (ch * 0.35).min(6.0);
            if let Some(t) = m.sunrise_mean {
                let cx = LEFT + t * cw;
                let _ = writeln!(
                    s,
                    r#"<polygon class="sunrise" points="{:.2},{:.2} {:.2},{:.2} {:.2},{:.2}" fill="white" stroke="black"/>"#,
                    cx,
                    cy - half,
                    cx - half,
                    cy + half,
                    cx + half,
                    cy + half
                );
            }
            if let Some(t) = m.sunset_mean {
                let cx = LEFT + t * cw;
                let _ = writeln!(
                    s,
                    r#"<polygon class="sunset" points="{:.2},{:.2} {:.2},{:.2} {:.2},{:.2}" fill="black" stroke="white"/>"#,
                    cx,
                    cy + half,
                    cx - half,
                    cy - half,
                    cx + half,
                    cy - half
                );
            }
        }
    }
    s.push_str("</svg>\n");
    Some(s)
}

/// Scatter of already log-transformed points with fitted lines, each
/// annotated with its slope to two decimals.
pub fn loglog_svg(title: &str, xlabel: &str, ylabel: &str, points: &[(f64, f64)], fits: &[FitLine]) -> Option<String> {
    if points.is_empty() {
        return None;
    }
    let f = Frame::new(
        points.iter().map(|p| p.0).chain(fits.iter().flat_map(|l| [l.x0, l.x1])),
        points
            .iter()
            .map(|p| p.1)
            .chain(fits.iter().flat_map(|l| [l.slope * l.x0 + l.intercept, l.slope * l.x1 + l.intercept])),
    );
    let mut s = open(title);
    axes(&mut s, &f, xlabel, ylabel);
    for &(x, y) in points {
        let _ = writeln!(
            s,
            r##"<circle class="point" cx="{:.2}" cy="{:.2}" r="2.5" fill="#1f4e9c"/>"##,
            f.px(x),
            f.py(y)
        );
    }
    for (i, l) in fits.iter().enumerate() {
        let (ya, yb) = (l.slope * l.x0 + l.intercept, l.slope * l.x1 + l.intercept);
        let _ = writeln!(
            s,
            r#"<line class="fit" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{}" stroke-width="2"/>"#,
            f.px(l.x0),
            f.py(ya),
            f.px(l.x1),
            f.py(yb),
            PALETTE[(i + 3) % PALETTE.len()]
        );
        let _ = writeln!(
            s,
            r#"<text class="slope" x="{:.2}" y="{:.2}">slope={}</text>"#,
            f.px((l.x0 + l.x1) / 2.0) + 6.0,
            f.py((ya + yb) / 2.0) - 6.0,
            slope_label(l.slope)
        );
    }
    s.push_str("</svg>\n");
    Some(s)
}

fn slope_label(x: f64) -> String {
    let s = format!("{x:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

/// Two-dimensional projection colored by cluster label; noise is grey.
pub fn scatter_svg(title: &str, coords: &[Vec<f64>], labels: &[i64]) -> Option<String> {
    if coords.is_empty() || coords.iter().any(|c| c.len() < 2) {
        return None;
    }
    let f = Frame::new(coords.iter().map(|c| c[0]), coords.iter().map(|c| c[1]));
    let mut s = open(title);
    axes(&mut s, &f, "PC1", "PC2");
    for (c, &l) in coords.iter().zip(labels) {
        let fill = if l < 0 { "#bbbbbb" } else { PALETTE[l as usize % PALETTE.len()] };
        let _ = writeln!(
            s,
            r#"<circle class="point" cx="{:.2}" cy="{:.2}" r="1.5" fill="{fill}"/>"#,
            f.px(c[0]),
            f.py(c[1])
        );
    }
    s.push_str("</svg>\n");
    Some(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chronoseme_core::entropy::{CellStat, GridLayout};
    use chronoseme_core::geo::MonthlySolar;

    fn count(s: &str, pat: &str) -> usize {
        s.matches(pat).count()
    }

    #[test]
    fn profile_glyphs() {
        let mut g = HeatmapGrid::empty("h_local", GridLayout::Pooled);
        for h in 0..24u8 {
            g.set(None, h, CellStat { mean: Some(f64::from(h).sin()), sem: Some(0.1), n: 5 }).unwrap();
        }
        let c = CosinorCurve { mesor: 0.0, amplitude: 1.0, acrophase_h: 6.0 };
        let svg = profile_svg("p", &g, Some(c)).unwrap();
        assert_eq!(count(&svg, r#"class="errbar""#), 24);
        assert_eq!(count(&svg, r#"class="cosinor-fit""#), 1);
        let bare = profile_svg("p", &g, None).unwrap();
        assert_eq!(count(&bare, r#"class="cosinor-fit""#), 0);
    }

    #[test]
    fn empty_profile_skipped() {
        let g = HeatmapGrid::empty("h_local", GridLayout::Pooled);
        assert!(profile_svg("p", &g, None).is_none());
    }

    #[test]
    fn heatmap_triangles() {
        let mut g = HeatmapGrid::empty("h_local", GridLayout::MonthHour);
        let mut months = Vec::new();
        for m in 1..=12u8 {
            for h in 0..24u8 {
                g.set(Some(m), h, CellStat::single(f64::from(m) + f64::from(h) / 24.0, 1)).unwrap();
            }
            months.push(MonthlySolar {
                month: u32::from(m),
                sunrise_mean: Some(6.0),
                sunrise_sd: Some(0.0),
                sunset_mean: Some(18.0),
                sunset_sd: Some(0.0),
                sites: 1,
            });
        }
        let p = SolarProfile { months };
        let svg = heatmap_svg("h", &g, Some(&p)).unwrap();
        assert_eq!(count(&svg, r#"class="sunrise""#), 12);
        assert_eq!(count(&svg, r#"class="sunset""#), 12);
        assert_eq!(count(&svg, r#"class="cell""#), 288);
        let plain = heatmap_svg("h", &g, None).unwrap();
        assert_eq!(count(&plain, "polygon"), 0);
    }

    #[test]
    fn planted_slope_annotation() {
        let pts: Vec<(f64, f64)> = (1..20).map(|i| (f64::from(i) * 0.3, -0.5 * f64::from(i) * 0.3 + 1.0)).collect();
        let line = FitLine { slope: -0.5, intercept: 1.0, x0: 0.3, x1: 5.7 };
        let svg = loglog_svg("s", "ln x", "ln y", &pts, &[line]).unwrap();
        assert!(svg.contains("slope=-0.50"));
        assert_eq!(slope_label(-0.004), "0.00");
    }

    #[test]
    fn text_escaped() {
        let svg = loglog_svg("a<b & c", "x", "y", &[(0.0, 0.0)], &[]).unwrap();
        assert!(svg.contains("a&lt;b &amp; c"));
    }

    #[test]
    fn scatter_colors_noise_grey() {
        let svg = scatter_svg("pca", &[vec![0.0, 0.0], vec![1.0, 1.0]], &[-1, 0]).unwrap();
        assert!(svg.contains("#bbbbbb"));
        assert!(svg.contains(PALETTE[0]));
    }
}
