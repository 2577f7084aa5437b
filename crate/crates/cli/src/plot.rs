//! Self-contained SVG plots rendered from the written CSV tables.
//!
//! Output is a pure function of the CSV text: coordinates are printed with
//! fixed precision and series are ordered by first appearance.

use std::fmt::Write as _;
use std::path::Path;

use sctf_core::fit::fit_loglog;

use crate::error::CliError;
use crate::output::{PlotKind, PlotSpec};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 90.0;
const RIGHT: f64 = 30.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const COLORBAR: f64 = 60.0;
/// Largest series length drawn with point markers.
const MAX_MARKERS: usize = 200;
/// Largest number of heatmap bins per axis.
pub const MAX_BINS: usize = 125;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

/// A CSV table read back from disk.
#[derive(Debug, Clone)]
pub struct CsvData {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvData {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let mut r = csv::Reader::from_path(path)?;
        let header = r.headers()?.iter().map(str::to_string).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|r| r.iter().map(str::to_string).collect()))
            .collect::<Result<Vec<Vec<String>>, _>>()?;
        Ok(Self { header, rows })
    }

    fn index(&self, name: &str) -> Result<usize, CliError> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Plot(format!("column `{name}` missing from [{}]", self.header.join(", "))))
    }

    /// A numeric column.
    pub fn column(&self, name: &str) -> Result<Vec<f64>, CliError> {
        let i = self.index(name)?;
        self.rows
            .iter()
            .map(|r| {
                r[i].parse::<f64>()
                    .map_err(|_| CliError::Plot(format!("column `{name}` holds non-numeric `{}`", r[i])))
            })
            .collect()
    }

    fn text_column(&self, name: &str) -> Result<Vec<String>, CliError> {
        let i = self.index(name)?;
        Ok(self.rows.iter().map(|r| r[i].clone()).collect())
    }
}

/// Renders `spec` from the CSV at `csv_path`.
pub fn emit_plot(csv_path: &Path, spec: &PlotSpec) -> Result<String, CliError> {
    let data = CsvData::read(csv_path)?;
    render(&data, spec)
}

/// Renders `spec` from parsed CSV data. Missing columns are a schema
/// mismatch; an empty table gives empty axes with a "no data" note.
pub fn render(data: &CsvData, spec: &PlotSpec) -> Result<String, CliError> {
    match &spec.kind {
        PlotKind::LogLogFit { x, y } => loglog(data, &spec.title, x, y),
        PlotKind::Heatmap { x, y, value } => heatmap(data, &spec.title, x, y, value),
        PlotKind::Profile { x, ys, group } => profile(data, &spec.title, x, ys, group.as_deref()),
    }
}

/// Least-squares slope of `log y` against `log x` over the positive pairs,
/// as shown on log-log plots.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let (px, py): (Vec<f64>, Vec<f64>) = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0 && x.is_finite() && y.is_finite())
        .map(|(x, y)| (*x, *y))
        .unzip();
    fit_loglog(&px, &py).ok().map(|f| f.slope)
}

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn new(values: &[f64], log: bool) -> Self {
        let vals: Vec<f64> = values
            .iter()
            .filter(|v| v.is_finite() && (!log || **v > 0.0))
            .map(|v| if log { v.log10() } else { *v })
            .collect();
        let (mut lo, mut hi) = vals
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
        if !lo.is_finite() {
            lo = 0.0;
            hi = 1.0;
        }
        if hi - lo < 1e-12 * lo.abs().max(1.0) {
            lo -= 0.5;
            hi += 0.5;
        } else {
            let pad = 0.05 * (hi - lo);
            lo -= pad;
            hi += pad;
        }
        Self { lo, hi, log }
    }

    fn unit(&self, v: f64) -> f64 {
        let v = if self.log { v.log10() } else { v };
        (v - self.lo) / (self.hi - self.lo)
    }

    fn ticks(&self) -> Vec<(f64, String)> {
        if self.log {
            let (a, b) = (self.lo.ceil() as i64, self.hi.floor() as i64);
            let stride = ((b - a) / 8 + 1).max(1);
            return (a..=b)
                .filter(|e| (e - a) % stride == 0)
                .map(|e| (10f64.powi(e as i32), format!("1e{e}")))
                .collect();
        }
        let raw = (self.hi - self.lo) / 6.0;
        let mag = 10f64.powf(raw.log10().floor());
        let step = [1.0, 2.0, 5.0, 10.0]
            .iter()
            .map(|m| m * mag)
            .find(|s| *s >= raw)
            .unwrap_or(10.0 * mag);
        let first = (self.lo / step).ceil() as i64;
        let last = (self.hi / step).floor() as i64;
        (first..=last)
            .map(|i| {
                let v = i as f64 * step;
                (v, tick_label(v))
            })
            .collect()
    }
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if (1e-3..1e4).contains(&a) {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.1e}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct Canvas {
    svg: String,
    right: f64,
}

impl Canvas {
    fn new(title: &str, right: f64) -> Self {
        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(svg, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
            WIDTH / 2.0,
            escape(title)
        );
        Self { svg, right }
    }

    fn plot_width(&self) -> f64 {
        WIDTH - LEFT - self.right
    }

    fn px(&self, u: f64) -> f64 {
        LEFT + u * self.plot_width()
    }

    fn py(&self, u: f64) -> f64 {
        HEIGHT - BOTTOM - u * (HEIGHT - TOP - BOTTOM)
    }

    fn axes(&mut self, xa: &Axis, ya: &Axis, xlabel: &str, ylabel: &str) {
        let (x0, x1, y0, y1) = (self.px(0.0), self.px(1.0), self.py(0.0), self.py(1.0));
        let _ = writeln!(
            self.svg,
            r#"<rect x="{x0:.2}" y="{y1:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
            x1 - x0,
            y0 - y1
        );
        for (v, label) in xa.ticks() {
            let x = self.px(xa.unit(v));
            let _ = writeln!(
                self.svg,
                r#"<line x1="{x:.2}" y1="{y0:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                y0 + 5.0,
                y0 + 18.0,
                escape(&label)
            );
        }
        for (v, label) in ya.ticks() {
            let y = self.py(ya.unit(v));
            let _ = writeln!(
                self.svg,
                r#"<line x1="{:.2}" y1="{y:.2}" x2="{x0:.2}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
                x0 - 5.0,
                x0 - 8.0,
                y + 4.0,
                escape(&label)
            );
        }
        let _ = writeln!(
            self.svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            (x0 + x1) / 2.0,
            HEIGHT - 15.0,
            escape(xlabel)
        );
        let _ = writeln!(
            self.svg,
            r#"<text x="20" y="{:.2}" text-anchor="middle" transform="rotate(-90 20 {:.2})">{}</text>"#,
            (y0 + y1) / 2.0,
            (y0 + y1) / 2.0,
            escape(ylabel)
        );
    }

    fn note(&mut self, text: &str) {
        let _ = writeln!(
            self.svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="16" fill="gray">{}</text>"#,
            (self.px(0.0) + self.px(1.0)) / 2.0,
            (self.py(0.0) + self.py(1.0)) / 2.0,
            escape(text)
        );
    }

    fn legend(&mut self, entries: &[(String, &str)]) {
        for (i, (label, color)) in entries.iter().enumerate() {
            let y = self.py(1.0) + 16.0 + 16.0 * i as f64;
            let x = self.px(1.0) - 150.0;
            let _ = writeln!(
                self.svg,
                r#"<line x1="{x:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{}</text>"#,
                y - 4.0,
                x + 18.0,
                y - 4.0,
                x + 24.0,
                y,
                escape(label)
            );
        }
    }

    fn finish(mut self) -> String {
        self.svg.push_str("</svg>\n");
        self.svg
    }
}

fn loglog(data: &CsvData, title: &str, x: &str, y: &str) -> Result<String, CliError> {
    let xs = data.column(x)?;
    let ys = data.column(y)?;
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(&ys)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0 && a.is_finite() && b.is_finite())
        .map(|(a, b)| (*a, *b))
        .collect();
    let px: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let py: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let xa = Axis::new(&px, true);
    let ya = Axis::new(&py, true);
    let mut c = Canvas::new(title, RIGHT);
    c.axes(&xa, &ya, x, y);
    if pts.is_empty() {
        c.note("no data");
        return Ok(c.finish());
    }
    if let Ok(fit) = fit_loglog(&px, &py) {
        let (lo, hi) = (10f64.powf(xa.lo), 10f64.powf(xa.hi));
        let line = |v: f64| (fit.intercept + fit.slope * v.ln()).exp();
        let (x0, y0) = (c.px(xa.unit(lo)), c.py(ya.unit(line(lo))));
        let (x1, y1) = (c.px(xa.unit(hi)), c.py(ya.unit(line(hi))));
        let _ = writeln!(
            c.svg,
            r#"<line x1="{x0:.2}" y1="{y0:.2}" x2="{x1:.2}" y2="{y1:.2}" stroke="{}" stroke-dasharray="6 4"/>"#,
            PALETTE[1]
        );
        let _ = writeln!(
            c.svg,
            r#"<text x="{:.2}" y="{:.2}" font-size="14">slope = {:.3}</text>"#,
            c.px(0.0) + 12.0,
            c.py(1.0) + 20.0,
            fit.slope
        );
    }
    for (a, b) in &pts {
        let _ = writeln!(
            c.svg,
            r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="{}"/>"#,
            c.px(xa.unit(*a)),
            c.py(ya.unit(*b)),
            PALETTE[0]
        );
    }
    Ok(c.finish())
}

/// Viridis-like ramp on `[0, 1]`.
fn ramp(u: f64) -> String {
    const STOPS: [(f64, f64, f64); 5] = [
        (68.0, 1.0, 84.0),
        (59.0, 82.0, 139.0),
        (33.0, 145.0, 140.0),
        (94.0, 201.0, 98.0),
        (253.0, 231.0, 37.0),
    ];
    let u = u.clamp(0.0, 1.0) * (STOPS.len() - 1) as f64;
    let i = (u.floor() as usize).min(STOPS.len() - 2);
    let f = u - i as f64;
    let (a, b) = (STOPS[i], STOPS[i + 1]);
    let mix = |p: f64, q: f64| (p + f * (q - p)).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

/// Decades shown by a logarithmic heatmap scale.
const HEATMAP_DECADES: f64 = 16.0;

fn heatmap(data: &CsvData, title: &str, x: &str, y: &str, value: &str) -> Result<String, CliError> {
    let xs = data.column(x)?;
    let ys = data.column(y)?;
    let vs = data.column(value)?;
    let mut c = Canvas::new(title, RIGHT + COLORBAR);
    let xa = Axis::new(&xs, false);
    let ya = Axis::new(&ys, false);
    c.axes(&xa, &ya, x, y);
    if xs.is_empty() {
        c.note("no data");
        return Ok(c.finish());
    }
    let range = |v: &[f64]| v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(*x), b.max(*x)));
    let distinct = |v: &[f64]| {
        let mut s: Vec<f64> = v.to_vec();
        s.sort_by(f64::total_cmp);
        s.dedup();
        s.len()
    };
    let (nx, ny) = (distinct(&xs).min(MAX_BINS), distinct(&ys).min(MAX_BINS));
    let ((xlo, xhi), (ylo, yhi)) = (range(&xs), range(&ys));
    let bin = |v: f64, lo: f64, hi: f64, n: usize| {
        if hi > lo {
            (((v - lo) / (hi - lo) * n as f64) as usize).min(n - 1)
        } else {
            0
        }
    };
    let mut grid = vec![f64::NEG_INFINITY; nx * ny];
    for ((a, b), v) in xs.iter().zip(&ys).zip(&vs) {
        let k = bin(*a, xlo, xhi, nx) * ny + bin(*b, ylo, yhi, ny);
        grid[k] = grid[k].max(*v);
    }
    let vmax = vs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let vmin = vs.iter().cloned().fold(f64::INFINITY, f64::min);
    let log = vmin > 0.0 || (vmin >= 0.0 && vmax > 0.0);
    let (lo, hi) = if log {
        let floor = vs.iter().filter(|v| **v > 0.0).cloned().fold(f64::INFINITY, f64::min);
        (floor.max(vmax * 10f64.powf(-HEATMAP_DECADES)).log10(), vmax.log10())
    } else {
        (vmin, vmax)
    };
    let scale = |v: f64| {
        let t = if log { v.max(f64::MIN_POSITIVE).log10() } else { v };
        if hi > lo {
            (t - lo) / (hi - lo)
        } else {
            1.0
        }
    };
    let cell_x = |i: usize| xlo + (xhi - xlo) * i as f64 / nx as f64;
    let cell_y = |j: usize| ylo + (yhi - ylo) * j as f64 / ny as f64;
    let (wx, wy) = if nx > 1 { ((xhi - xlo) / nx as f64, (yhi - ylo) / ny.max(1) as f64) } else { (1.0, 1.0) };
    for i in 0..nx {
        for j in 0..ny {
            let v = grid[i * ny + j];
            if v == f64::NEG_INFINITY {
                continue;
            }
            let (ax0, ax1) = (c.px(xa.unit(cell_x(i))), c.px(xa.unit(cell_x(i) + wx.max(0.0))));
            let (ay0, ay1) = (c.py(ya.unit(cell_y(j))), c.py(ya.unit(cell_y(j) + wy.max(0.0))));
            let _ = writeln!(
                c.svg,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                ax0.min(ax1),
                ay1.min(ay0),
                (ax1 - ax0).abs().max(0.5),
                (ay0 - ay1).abs().max(0.5),
                ramp(scale(v))
            );
        }
    }
    let bx = WIDTH - RIGHT - COLORBAR + 15.0;
    for k in 0..50 {
        let u0 = k as f64 / 50.0;
        let _ = writeln!(
            c.svg,
            r#"<rect x="{bx:.2}" y="{:.2}" width="15" height="{:.2}" fill="{}"/>"#,
            c.py(u0 + 0.02),
            c.py(u0) - c.py(u0 + 0.02),
            ramp(u0 + 0.01)
        );
    }
    let fmt = |v: f64| if log { format!("1e{:.1}", v) } else { tick_label(v) };
    let _ = writeln!(
        c.svg,
        r#"<text x="{:.2}" y="{:.2}" font-size="10">{}</text><text x="{:.2}" y="{:.2}" font-size="10">{}</text>"#,
        bx,
        c.py(1.0) - 4.0,
        escape(&fmt(hi)),
        bx,
        c.py(0.0) + 12.0,
        escape(&fmt(lo))
    );
    Ok(c.finish())
}

fn profile(data: &CsvData, title: &str, x: &str, ys: &[String], group: Option<&str>) -> Result<String, CliError> {
    let xs = data.column(x)?;
    let cols = ys.iter().map(|y| data.column(y)).collect::<Result<Vec<_>, _>>()?;
    let groups = match group {
        Some(g) => data.text_column(g)?,
        None => vec![String::new(); xs.len()],
    };
    let mut order: Vec<String> = Vec::new();
    for g in &groups {
        if !order.contains(g) {
            order.push(g.clone());
        }
    }
    let all_y: Vec<f64> = cols.iter().flatten().cloned().collect();
    let xa = Axis::new(&xs, false);
    let ya = Axis::new(&all_y, false);
    let mut c = Canvas::new(title, RIGHT);
    let ylabel = ys.join(", ");
    c.axes(&xa, &ya, x, &ylabel);
    if xs.is_empty() {
        c.note("no data");
        return Ok(c.finish());
    }
    let mut legend = Vec::new();
    let mut series = 0usize;
    for g in &order {
        for (name, col) in ys.iter().zip(&cols) {
            let color = PALETTE[series % PALETTE.len()];
            series += 1;
            let mut pts: Vec<(f64, f64)> = xs
                .iter()
                .zip(col)
                .zip(&groups)
                .filter(|((a, b), gg)| *gg == g && a.is_finite() && b.is_finite())
                .map(|((a, b), _)| (*a, *b))
                .collect();
            pts.sort_by(|p, q| p.0.total_cmp(&q.0));
            let path: Vec<String> = pts
                .iter()
                .map(|(a, b)| format!("{:.2},{:.2}", c.px(xa.unit(*a)), c.py(ya.unit(*b))))
                .collect();
            let _ = writeln!(
                c.svg,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                path.join(" ")
            );
            let markers = if path.len() <= MAX_MARKERS { path.as_slice() } else { &[] };
            for p in markers {
                let (cx, cy) = p.split_once(',').expect("formatted pair");
                let _ = writeln!(c.svg, r#"<circle cx="{cx}" cy="{cy}" r="2.5" fill="{color}"/>"#);
            }
            let label = match group {
                Some(gname) => format!("{name} ({gname} = {})", short(g)),
                None => name.clone(),
            };
            legend.push((label, color));
        }
    }
    if legend.len() > 1 {
        c.legend(&legend);
    }
    Ok(c.finish())
}

fn short(s: &str) -> String {
    s.parse::<f64>().map(tick_label).unwrap_or_else(|_| s.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data(header: &[&str], rows: &[&[&str]]) -> CsvData {
        CsvData {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: rows.iter().map(|r| r.iter().map(|s| s.to_string()).collect()).collect(),
        }
    }

    #[test]
    fn empty_table_gives_no_data_note() {
        let d = data(&["hbar", "error"], &[]);
        for spec in [
            PlotSpec::loglog("t", "hbar", "error", "e"),
            PlotSpec::profile("t", "hbar", &["error"], None, "e"),
            PlotSpec::heatmap("t", "hbar", "error", "error", "e"),
        ] {
            let svg = render(&d, &spec).unwrap();
            assert!(svg.contains("no data") && svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        }
    }

    #[test]
    fn schema_mismatch_is_an_error() {
        let d = data(&["hbar", "error"], &[&["1.0", "2.0"]]);
        let spec = PlotSpec::loglog("t", "hbar", "residual", "e");
        assert!(matches!(render(&d, &spec), Err(CliError::Plot(_))));
    }

    #[test]
    fn slope_label_has_three_decimals() {
        let rows: Vec<[String; 2]> = [0.4f64, 0.2, 0.1, 0.05]
            .iter()
            .map(|h| [format!("{h:.16e}"), format!("{:.16e}", 3.0 * h.powf(1.5))])
            .collect();
        let refs: Vec<Vec<&str>> = rows.iter().map(|r| vec![r[0].as_str(), r[1].as_str()]).collect();
        let slices: Vec<&[&str]> = refs.iter().map(|r| r.as_slice()).collect();
        let d = data(&["hbar", "residual"], &slices);
        let svg = render(&d, &PlotSpec::loglog("t", "hbar", "residual", "r")).unwrap();
        assert!(svg.contains("slope = 1.500"), "{svg}");
    }

    #[test]
    fn heatmap_bins_are_capped() {
        let rows: Vec<[String; 3]> = (0..400)
            .map(|i| [i.to_string(), (i % 7).to_string(), format!("{:.3e}", 1.0 + i as f64)])
            .collect();
        let refs: Vec<Vec<&str>> = rows.iter().map(|r| r.iter().map(String::as_str).collect()).collect();
        let slices: Vec<&[&str]> = refs.iter().map(|r| r.as_slice()).collect();
        let d = data(&["lambda", "mu", "magnitude"], &slices);
        let svg = render(&d, &PlotSpec::heatmap("m", "lambda", "mu", "magnitude", "m")).unwrap();
        let cells = svg.matches("<rect").count();
        assert!(cells <= MAX_BINS * 7 + 52, "{cells}");
    }

    #[test]
    fn rendering_is_deterministic() {
        let d = data(&["t", "a", "g"], &[&["0", "1", "x"], &["1", "2", "x"], &["0", "3", "y"], &["1", "1", "y"]]);
        let spec = PlotSpec::profile("p", "t", &["a"], Some("g"), "p");
        assert_eq!(render(&d, &spec).unwrap(), render(&d, &spec).unwrap());
    }
}
