//! Self-contained SVG plots: log-log series with a fitted slope, field
//! heatmaps with overlaid curves, and plain polylines on equal axes.
//!
//! Output depends only on the input values, so identical data give
//! byte-identical documents.

use std::fmt::Write as _;

use crate::error::{LabError, Result};
use crate::frequency::least_squares;
use crate::grid::ScalarField;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 440.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 150.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];
/// Longest side of a heatmap in pixels; finer fields are block-averaged.
const HEATMAP_MAX_CELLS: usize = 192;

#[derive(Clone, Debug)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Series { label: label.into(), points }
    }

    /// Several curves in one series, separated by pen lifts.
    pub fn from_polylines(label: impl Into<String>, lines: &[Vec<[f64; 2]>]) -> Self {
        let mut points = Vec::new();
        for (k, line) in lines.iter().enumerate() {
            if k > 0 {
                points.push((f64::NAN, f64::NAN));
            }
            points.extend(line.iter().map(|p| (p[0], p[1])));
        }
        Series { label: label.into(), points }
    }
}

#[derive(Clone, Copy, Debug)]
pub enum PlotKind<'a> {
    /// Log-log axes; the slope of the first series is annotated.
    LogLog,
    /// The field as a colour map with the series drawn on top.
    FieldHeatmap(&'a ScalarField),
    /// Linear axes with equal scales.
    Polyline,
}

pub fn emit_plot(title: &str, series: &[Series], kind: PlotKind<'_>) -> Result<String> {
    if series.is_empty() || series.iter().all(|s| s.points.is_empty()) {
        return Err(LabError::Argument("plot needs at least one non-empty series".into()));
    }
    match kind {
        PlotKind::LogLog => loglog(title, series),
        PlotKind::FieldHeatmap(field) => heatmap(title, field, series),
        PlotKind::Polyline => polyline(title, series),
    }
}

/// Affine map from data coordinates to the plot area.
struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    px0: f64,
    px1: f64,
    py0: f64,
    py1: f64,
}

impl Frame {
    fn new(x: (f64, f64), y: (f64, f64), area: (f64, f64, f64, f64)) -> Self {
        let pad = |(a, b): (f64, f64)| if b > a { (a, b) } else { (a - 0.5, b + 0.5) };
        let (x0, x1) = pad(x);
        let (y0, y1) = pad(y);
        Frame { x0, x1, y0, y1, px0: area.0, px1: area.1, py0: area.2, py1: area.3 }
    }

    fn px(&self, x: f64) -> f64 {
        self.px0 + (x - self.x0) / (self.x1 - self.x0) * (self.px1 - self.px0)
    }

    fn py(&self, y: f64) -> f64 {
        self.py1 - (y - self.y0) / (self.y1 - self.y0) * (self.py1 - self.py0)
    }
}

fn plot_area() -> (f64, f64, f64, f64) {
    (MARGIN_L, WIDTH - MARGIN_R, MARGIN_T, HEIGHT - MARGIN_B)
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        (MARGIN_L + WIDTH - MARGIN_R) / 2.0,
        escape(title)
    );
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn range(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    vals.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)))
}

fn axes(out: &mut String, f: &Frame, xticks: &[(f64, String)], yticks: &[(f64, String)]) {
    let _ = writeln!(
        out,
        r#"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="black"/>"#,
        f.px0,
        f.py0,
        f.px1 - f.px0,
        f.py1 - f.py0
    );
    for (v, label) in xticks {
        let x = f.px(*v);
        let _ = writeln!(out, r#"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="black"/>"#, f.py1, f.py1 + 5.0);
        let _ = writeln!(out, r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">{label}</text>"#, f.py1 + 18.0);
    }
    for (v, label) in yticks {
        let y = f.py(*v);
        let _ = writeln!(out, r#"<line x1="{:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="black"/>"#, f.px0 - 5.0, f.px0);
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{label}</text>"#, f.px0 - 8.0, y + 4.0);
    }
}

fn legend(out: &mut String, series: &[Series], offset: usize) {
    for (k, s) in series.iter().enumerate() {
        let y = MARGIN_T + 10.0 + 18.0 * k as f64;
        let x = WIDTH - MARGIN_R + 12.0;
        let c = COLORS[(k + offset) % COLORS.len()];
        let _ = writeln!(out, r#"<line x1="{x:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="{c}" stroke-width="2"/>"#, x + 20.0);
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}">{}</text>"#, x + 26.0, y + 4.0, escape(&s.label));
    }
}

fn path(out: &mut String, f: &Frame, pts: &[(f64, f64)], color: &str, markers: bool) {
    if pts.is_empty() {
        return;
    }
    let mut d = String::new();
    let mut pen_up = true;
    for &(x, y) in pts {
        if !(x.is_finite() && y.is_finite()) {
            pen_up = true;
            continue;
        }
        let _ = write!(d, "{}{:.2},{:.2} ", if pen_up { "M" } else { "L" }, f.px(x), f.py(y));
        pen_up = false;
    }
    let _ = writeln!(out, r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, d.trim_end());
    if markers {
        for &(x, y) in pts.iter().filter(|p| p.0.is_finite() && p.1.is_finite()) {
            let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{color}"/>"#, f.px(x), f.py(y));
        }
    }
}

fn linear_ticks(a: f64, b: f64) -> Vec<(f64, String)> {
    let span = b - a;
    if span <= 0.0 {
        return vec![(a, fmt_tick(a))];
    }
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| span / s <= 6.0).unwrap_or(10.0 * mag);
    let first = (a / step).ceil() as i64;
    let last = (b / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).map(|v| (v, fmt_tick(v))).collect()
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e-2 && v.abs() < 1e3 {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.0e}")
    }
}

fn loglog(title: &str, series: &[Series]) -> Result<String> {
    let logs: Vec<Series> = series
        .iter()
        .map(|s| Series {
            label: s.label.clone(),
            points: s.points.iter().filter(|p| p.0 > 0.0 && p.1 > 0.0).map(|p| (p.0.log10(), p.1.log10())).collect(),
        })
        .collect();
    if logs.iter().all(|s| s.points.is_empty()) {
        return Err(LabError::Argument("log-log plot needs positive data".into()));
    }
    let xr = range(logs.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let yr = range(logs.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
    let f = Frame::new(xr, yr, plot_area());
    let decades = |a: f64, b: f64| -> Vec<(f64, String)> {
        let (lo, hi) = (a.floor() as i32, b.ceil() as i32);
        let mut t: Vec<(f64, String)> = (lo..=hi).map(|k| (k as f64, format!("1e{k}"))).filter(|(v, _)| *v >= a - 1e-9 && *v <= b + 1e-9).collect();
        if t.len() < 2 {
            t = vec![(a, format!("{:.2e}", 10f64.powf(a))), (b, format!("{:.2e}", 10f64.powf(b)))];
        }
        t
    };
    let mut out = String::new();
    header(&mut out, title);
    axes(&mut out, &f, &decades(f.x0, f.x1), &decades(f.y0, f.y1));
    for (k, s) in logs.iter().enumerate() {
        path(&mut out, &f, &s.points, COLORS[k % COLORS.len()], true);
    }
    legend(&mut out, series, 0);
    let first = &logs[0].points;
    if first.len() >= 2 {
        let (slope, _, _) = least_squares(first);
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}">slope {slope:.2}</text>"#,
            WIDTH - MARGIN_R + 12.0,
            HEIGHT - MARGIN_B - 10.0
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

fn polyline(title: &str, series: &[Series]) -> Result<String> {
    let xr = range(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let yr = range(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
    let f = equal_frame(xr, yr);
    let mut out = String::new();
    header(&mut out, title);
    axes(&mut out, &f, &linear_ticks(f.x0, f.x1), &linear_ticks(f.y0, f.y1));
    for (k, s) in series.iter().enumerate() {
        path(&mut out, &f, &s.points, COLORS[k % COLORS.len()], false);
    }
    legend(&mut out, series, 0);
    out.push_str("</svg>\n");
    Ok(out)
}

/// Frame with one data unit the same length on both axes.
fn equal_frame(xr: (f64, f64), yr: (f64, f64)) -> Frame {
    let (ax0, ax1, ay0, ay1) = plot_area();
    let (w, h) = (ax1 - ax0, ay1 - ay0);
    let dx = (xr.1 - xr.0).max(1e-300);
    let dy = (yr.1 - yr.0).max(1e-300);
    let scale = (w / dx).min(h / dy);
    let (pw, ph) = (dx * scale, dy * scale);
    let (ox, oy) = (ax0 + (w - pw) / 2.0, ay0 + (h - ph) / 2.0);
    Frame::new(xr, yr, (ox, ox + pw, oy, oy + ph))
}

/// Piecewise linear colour map from dark blue through teal to yellow.
fn colour(t: f64) -> String {
    const STOPS: [(f64, [f64; 3]); 4] = [
        (0.0, [68.0, 1.0, 84.0]),
        (0.35, [49.0, 104.0, 142.0]),
        (0.7, [53.0, 183.0, 121.0]),
        (1.0, [253.0, 231.0, 37.0]),
    ];
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let k = STOPS.windows(2).position(|w| t <= w[1].0).unwrap_or(STOPS.len() - 2);
    let (a, b) = (STOPS[k], STOPS[k + 1]);
    let s = (t - a.0) / (b.0 - a.0);
    let c: Vec<u8> = (0..3).map(|i| (a.1[i] + s * (b.1[i] - a.1[i])).round() as u8).collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

fn heatmap(title: &str, field: &ScalarField, series: &[Series]) -> Result<String> {
    let spec = *field.spec();
    let h = spec.spacing;
    let n = spec.cells();
    let (j_lo, j_hi) = (spec.j_min(), n);
    let (i_lo, i_hi) = (-n, n);
    let longest = ((i_hi - i_lo) as usize).max((j_hi - j_lo) as usize);
    let block = longest.div_ceil(HEATMAP_MAX_CELLS).max(1) as i64;
    let (lo, hi) = (field.min(), field.max());
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(LabError::Argument("heatmap needs a field with masked values".into()));
    }
    let span = if hi > lo { hi - lo } else { 1.0 };
    let x0 = i_lo as f64 * h;
    let y0 = j_lo as f64 * h;
    let f = equal_frame((x0, i_hi as f64 * h), (y0, j_hi as f64 * h));
    let mut out = String::new();
    header(&mut out, title);
    let cell = block as f64 * h;
    let mut bj = j_lo;
    while bj < j_hi {
        let mut bi = i_lo;
        while bi < i_hi {
            let mut sum = 0.0;
            let mut cnt = 0usize;
            for j in bj..(bj + block).min(j_hi + 1) {
                for i in bi..(bi + block).min(i_hi + 1) {
                    if let Some(k) = spec.index(i, j) {
                        if field.is_masked(k) {
                            sum += field.at(k);
                            cnt += 1;
                        }
                    }
                }
            }
            if cnt > 0 {
                let (x, y) = (bi as f64 * h, bj as f64 * h);
                let (px, py) = (f.px(x), f.py(y + cell));
                let _ = writeln!(
                    out,
                    r#"<rect x="{px:.2}" y="{py:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                    f.px(x + cell) - px,
                    f.py(y) - py,
                    colour((sum / cnt as f64 - lo) / span)
                );
            }
            bi += block;
        }
        bj += block;
    }
    axes(&mut out, &f, &linear_ticks(f.x0, f.x1), &linear_ticks(f.y0, f.y1));
    for (k, s) in series.iter().enumerate() {
        path(&mut out, &f, &s.points, COLORS[(k + 1) % COLORS.len()], false);
    }
    legend(&mut out, series, 1);
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}">range [{}, {}]</text>"#,
        WIDTH - MARGIN_R + 12.0,
        HEIGHT - MARGIN_B - 10.0,
        fmt_tick(lo),
        fmt_tick(hi)
    );
    out.push_str("</svg>\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::DomainGeometry;

    fn cube() -> Series {
        Series::new("H", (0..10).map(|k| 0.1 * 10f64.powf(-(k as f64) / 9.0)).map(|r| (r, r.powi(3))).collect())
    }

    #[test]
    fn loglog_annotates_the_slope() {
        let svg = emit_plot("H(r)", &[cube()], PlotKind::LogLog).unwrap();
        assert!(svg.contains("slope 3.00"));
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn output_is_deterministic() {
        let a = emit_plot("H(r)", &[cube()], PlotKind::LogLog).unwrap();
        let b = emit_plot("H(r)", &[cube()], PlotKind::LogLog).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_series_is_an_argument_error() {
        assert!(matches!(emit_plot("x", &[], PlotKind::Polyline), Err(LabError::Argument(_))));
        let empty = [Series::new("e", vec![])];
        assert!(matches!(emit_plot("x", &empty, PlotKind::LogLog), Err(LabError::Argument(_))));
    }

    #[test]
    fn heatmap_draws_blocks_and_overlay() {
        let geo = DomainGeometry::half_disk(1.0, 1.0 / 16.0).unwrap();
        let u = geo.field_from_fn(|p| p[1]).unwrap();
        let line = Series::new("F", vec![(-1.0, 0.5), (1.0, 0.5)]);
        let svg = emit_plot("u", &[line], PlotKind::FieldHeatmap(&u)).unwrap();
        assert!(svg.matches("<rect").count() > 100);
        assert!(svg.contains("<path"));
        assert!(svg.contains(">F<"));
    }

    #[test]
    fn pen_lifts_split_a_series() {
        let s = Series::from_polylines("F", &[vec![[0.0, 0.0], [1.0, 1.0]], vec![[2.0, 0.0], [3.0, 1.0]]]);
        let svg = emit_plot("two", &[s], PlotKind::Polyline).unwrap();
        let d = svg.split("d=\"").nth(1).unwrap();
        assert_eq!(d.matches('M').count(), 2);
    }

    #[test]
    fn colour_map_endpoints() {
        assert_eq!(colour(0.0), "#440154");
        assert_eq!(colour(1.0), "#fde725");
        assert_eq!(colour(f64::NAN), "#440154");
    }
}
