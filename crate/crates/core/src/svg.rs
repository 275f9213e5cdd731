//! Minimal SVG output: heatmaps with line overlays and plain line plots.

use std::fmt::Write as _;

const W: f64 = 640.0;
const H: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#111111"];

#[derive(Debug, Clone, Copy)]
struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x0) / (self.x1 - self.x0).max(f64::MIN_POSITIVE) * (W - LEFT - RIGHT)
    }

    /// y grows upwards on the plot.
    fn py(&self, y: f64) -> f64 {
        H - BOTTOM - (y - self.y0) / (self.y1 - self.y0).max(f64::MIN_POSITIVE) * (H - TOP - BOTTOM)
    }

    fn grow(&mut self, x: f64, y: f64) {
        self.x0 = self.x0.min(x);
        self.x1 = self.x1.max(x);
        self.y0 = self.y0.min(y);
        self.y1 = self.y1.max(y);
    }

    fn empty() -> Frame {
        Frame {
            x0: f64::INFINITY,
            x1: f64::NEG_INFINITY,
            y0: f64::INFINITY,
            y1: f64::NEG_INFINITY,
        }
    }

    fn settled(mut self) -> Frame {
        if !self.x0.is_finite() {
            self = Frame {
                x0: 0.0,
                x1: 1.0,
                y0: 0.0,
                y1: 1.0,
            };
        }
        if self.x1 == self.x0 {
            self.x1 = self.x0 + 1.0;
        }
        if self.y1 == self.y0 {
            self.y1 = self.y0 + 1.0;
        }
        self
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Diverging colour for a value in [−1, 1]: blue for negative, red for positive.
fn colour(v: f64) -> String {
    let v = v.clamp(-1.0, 1.0);
    let fade = |a: f64| (255.0 * (1.0 - a)).round() as u8;
    if v >= 0.0 {
        format!("#ff{0:02x}{0:02x}", fade(v))
    } else {
        format!("#{0:02x}{0:02x}ff", fade(-v))
    }
}

fn frame_svg(out: &mut String, f: &Frame, title: &str, xlabel: &str, ylabel: &str) {
    let _ = writeln!(
        out,
        r#"<rect x="{LEFT}" y="{TOP}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - LEFT - RIGHT,
        H - TOP - BOTTOM
    );
    for k in 0..=4 {
        let s = k as f64 / 4.0;
        let x = f.x0 + s * (f.x1 - f.x0);
        let y = f.y0 + s * (f.y1 - f.y0);
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="middle">{}</text>"#,
            f.px(x),
            H - BOTTOM + 16.0,
            tick(x)
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="end">{}</text>"#,
            LEFT - 6.0,
            f.py(y) + 4.0,
            tick(y)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="22" font-size="14" text-anchor="middle">{}</text>"#,
        W / 2.0,
        escape(title)
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">{}</text>"#,
        (LEFT + W - RIGHT) / 2.0,
        H - 12.0,
        escape(xlabel)
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{:.1}" font-size="12" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
        (TOP + H - BOTTOM) / 2.0,
        (TOP + H - BOTTOM) / 2.0,
        escape(ylabel)
    );
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn polyline(out: &mut String, f: &Frame, pts: &[(f64, f64)], colour: &str) {
    let mut d = String::new();
    for &(x, y) in pts.iter().filter(|p| p.0.is_finite() && p.1.is_finite()) {
        let _ = write!(d, "{:.1},{:.1} ", f.px(x), f.py(y));
    }
    let _ = writeln!(
        out,
        r#"<polyline points="{}" fill="none" stroke="{colour}" stroke-width="1.5"/>"#,
        d.trim_end()
    );
}

fn legend(out: &mut String, labels: &[String]) {
    for (k, label) in labels.iter().enumerate() {
        let y = TOP + 14.0 + 14.0 * k as f64;
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{y:.1}" font-size="11" fill="{}">{}</text>"#,
            LEFT + 8.0,
            PALETTE[k % PALETTE.len()],
            escape(label)
        );
    }
}

/// Cell heatmap with optional overlaid lines, values expected in [−1, 1].
#[derive(Debug, Clone, Default)]
pub struct Heatmap {
    title: String,
    xlabel: String,
    ylabel: String,
    x: Vec<f64>,
    y: Vec<f64>,
    cells: Vec<Vec<f64>>,
    lines: Vec<(Vec<(f64, f64)>, String)>,
}

impl Heatmap {
    pub fn new(title: &str, xlabel: &str, ylabel: &str) -> Self {
        Heatmap {
            title: title.into(),
            xlabel: xlabel.into(),
            ylabel: ylabel.into(),
            ..Default::default()
        }
    }

    /// `value(row, col)` is sampled at `(x[col], y[row])`.
    pub fn set_grid(&mut self, x: &[f64], y: &[f64], value: impl Fn(usize, usize) -> f64) {
        self.x = x.to_vec();
        self.y = y.to_vec();
        self.cells = (0..y.len())
            .map(|r| (0..x.len()).map(|c| value(r, c)).collect())
            .collect();
    }

    pub fn add_line(&mut self, pts: &[(f64, f64)], label: &str) {
        self.lines.push((pts.to_vec(), label.into()));
    }

    pub fn render(&self) -> String {
        let mut f = Frame::empty();
        for &x in &self.x {
            for &y in [self.y.first(), self.y.last()].into_iter().flatten() {
                f.grow(x, y);
            }
        }
        for (pts, _) in &self.lines {
            for &(x, y) in pts {
                f.grow(x, y);
            }
        }
        let f = f.settled();
        let mut out = header();
        let half = |axis: &[f64], k: usize| -> (f64, f64) {
            let lo = if k == 0 { axis[0] } else { 0.5 * (axis[k - 1] + axis[k]) };
            let hi = if k + 1 == axis.len() {
                axis[k]
            } else {
                0.5 * (axis[k] + axis[k + 1])
            };
            (lo, hi)
        };
        for (r, row) in self.cells.iter().enumerate() {
            let (y_lo, y_hi) = half(&self.y, r);
            for (c, &v) in row.iter().enumerate() {
                if v == 0.0 {
                    continue;
                }
                let (x_lo, x_hi) = half(&self.x, c);
                let _ = writeln!(
                    out,
                    r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                    f.px(x_lo),
                    f.py(y_hi),
                    (f.px(x_hi) - f.px(x_lo)).max(0.5),
                    (f.py(y_lo) - f.py(y_hi)).max(0.5),
                    colour(v)
                );
            }
        }
        for (k, (pts, _)) in self.lines.iter().enumerate() {
            polyline(&mut out, &f, pts, PALETTE[k % PALETTE.len()]);
        }
        frame_svg(&mut out, &f, &self.title, &self.xlabel, &self.ylabel);
        legend(
            &mut out,
            &self.lines.iter().map(|(_, l)| l.clone()).collect::<Vec<_>>(),
        );
        out.push_str("</svg>\n");
        out
    }
}

/// Line plot of one or more series.
#[derive(Debug, Clone, Default)]
pub struct LinePlot {
    title: String,
    xlabel: String,
    ylabel: String,
    series: Vec<(Vec<(f64, f64)>, String)>,
}

impl LinePlot {
    pub fn new(title: &str, xlabel: &str, ylabel: &str) -> Self {
        LinePlot {
            title: title.into(),
            xlabel: xlabel.into(),
            ylabel: ylabel.into(),
            series: Vec::new(),
        }
    }

    pub fn add_series(&mut self, pts: &[(f64, f64)], label: &str) {
        self.series.push((pts.to_vec(), label.into()));
    }

    pub fn render(&self) -> String {
        let mut f = Frame::empty();
        for (pts, _) in &self.series {
            for &(x, y) in pts.iter().filter(|p| p.0.is_finite() && p.1.is_finite()) {
                f.grow(x, y);
            }
        }
        let f = f.settled();
        let mut out = header();
        for (k, (pts, _)) in self.series.iter().enumerate() {
            polyline(&mut out, &f, pts, PALETTE[k % PALETTE.len()]);
        }
        frame_svg(&mut out, &f, &self.title, &self.xlabel, &self.ylabel);
        legend(
            &mut out,
            &self.series.iter().map(|(_, l)| l.clone()).collect::<Vec<_>>(),
        );
        out.push_str("</svg>\n");
        out
    }
}

fn header() -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn colours_are_diverging() {
        assert_eq!(colour(0.0), "#ffffff");
        assert_eq!(colour(1.0), "#ff0000");
        assert_eq!(colour(-1.0), "#0000ff");
    }

    #[test]
    fn renders_well_formed_documents() {
        let mut p = LinePlot::new("a < b", "x", "y");
        p.add_series(&[(0.0, 1.0), (1.0, 2.0), (2.0, f64::NAN)], "s");
        let s = p.render();
        assert!(s.starts_with("<svg") && s.ends_with("</svg>\n"));
        assert!(s.contains("a &lt; b"));
        let mut h = Heatmap::new("m", "x", "y");
        h.set_grid(&[0.0, 1.0], &[0.0, 1.0, 2.0], |r, c| (r + c) as f64 / 3.0);
        assert_eq!(h.render().matches("<rect").count(), 2 + 5);
    }
}
