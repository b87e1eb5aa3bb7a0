//! Minimal hand-emitted SVG plots: multi-series line charts and stability
//! verdict heatmaps. No plotting dependency — the CSV files are the
//! interface of record and these pictures are a quick-look convenience.

use std::fmt::Write as _;

use crate::num::Real;
use crate::sem::{CellVerdict, StabilityGrid};

const PALETTE: &[&str] =
    &["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"];

const STABLE_FILL: &str = "#2c7fb8";
const UNSTABLE_FILL: &str = "#fdae61";
const ERROR_FILL: &str = "#999999";

/// One named curve; `x` and `y` must have equal length. Non-finite points
/// (and non-positive ones on a log axis) are dropped.
#[derive(Debug, Clone, Copy)]
pub struct Series<'a, T> {
    pub name: &'a str,
    pub x: &'a [T],
    pub y: &'a [T],
}

#[derive(Debug, Clone, Copy)]
pub struct PlotOptions<'a> {
    pub title: &'a str,
    pub x_label: &'a str,
    pub y_label: &'a str,
    pub width: u32,
    pub height: u32,
    /// Plot log10(y); points with y ≤ 0 are dropped.
    pub log_y: bool,
}

impl Default for PlotOptions<'_> {
    fn default() -> Self {
        PlotOptions { title: "", x_label: "", y_label: "", width: 800, height: 500, log_y: false }
    }
}

fn esc(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

/// Drops trailing fractional zeros: "1.500" → "1.5", "2.000" → "2".
fn trim_num(mut s: String) -> String {
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    s
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let a = v.abs();
    if (1e-3..1e5).contains(&a) {
        trim_num(format!("{v:.3}"))
    } else {
        format!("{v:.1e}")
    }
}

fn tick_positions(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

struct Frame {
    left: f64,
    top: f64,
    right: f64,
    bottom: f64,
    width: f64,
    height: f64,
}

impl Frame {
    fn new(width: u32, height: u32) -> Self {
        let (width, height) = (width as f64, height as f64);
        Frame { left: 70.0, top: 34.0, right: width - 20.0, bottom: height - 52.0, width, height }
    }
}

fn open_svg(out: &mut String, f: &Frame, title: &str) {
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" \
         viewBox=\"0 0 {0} {1}\" font-family=\"sans-serif\" font-size=\"12\">",
        f.width, f.height
    );
    let _ = writeln!(out, "<rect width=\"{}\" height=\"{}\" fill=\"white\"/>", f.width, f.height);
    if !title.is_empty() {
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">{}</text>",
            f.width / 2.0,
            esc(title)
        );
    }
}

fn axis_labels(out: &mut String, f: &Frame, x_label: &str, y_label: &str) {
    if !x_label.is_empty() {
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
            (f.left + f.right) / 2.0,
            f.height - 12.0,
            esc(x_label)
        );
    }
    if !y_label.is_empty() {
        let _ = writeln!(
            out,
            "<text x=\"16\" y=\"{0:.1}\" text-anchor=\"middle\" \
             transform=\"rotate(-90 16 {0:.1})\">{1}</text>",
            (f.top + f.bottom) / 2.0,
            esc(y_label)
        );
    }
}

/// Renders one or more curves into a complete SVG document.
pub fn line_plot<T: Real>(series: &[Series<T>], opts: &PlotOptions) -> String {
    let f = Frame::new(opts.width, opts.height);
    // Project to f64 and drop points a linear (or log) axis cannot place.
    let curves: Vec<(String, Vec<(f64, f64)>)> = series
        .iter()
        .map(|s| {
            let pts = s
                .x
                .iter()
                .zip(s.y)
                .filter_map(|(&x, &y)| {
                    let (x, mut y) = (x.as_f64(), y.as_f64());
                    if opts.log_y {
                        if !(y > 0.0) {
                            return None;
                        }
                        y = y.log10();
                    }
                    (x.is_finite() && y.is_finite()).then_some((x, y))
                })
                .collect();
            (s.name.to_string(), pts)
        })
        .collect();

    let all = curves.iter().flat_map(|(_, pts)| pts.iter().copied());
    let (mut x0, mut x1, mut y0, mut y1) =
        all.fold((f64::MAX, f64::MIN, f64::MAX, f64::MIN), |(a, b, c, d), (x, y)| {
            (a.min(x), b.max(x), c.min(y), d.max(y))
        });
    if x0 > x1 {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x0 == x1 {
        x0 -= 1.0;
        x1 += 1.0;
    }
    let pad = if y0 == y1 { 1.0 } else { 0.05 * (y1 - y0) };
    y0 -= pad;
    y1 += pad;
    let sx = |x: f64| f.left + (x - x0) / (x1 - x0) * (f.right - f.left);
    let sy = |y: f64| f.bottom - (y - y0) / (y1 - y0) * (f.bottom - f.top);

    let mut out = String::with_capacity(4096);
    open_svg(&mut out, &f, opts.title);
    for t in tick_positions(x0, x1, 5) {
        let px = sx(t);
        let _ = writeln!(
            out,
            "<line x1=\"{px:.1}\" y1=\"{:.1}\" x2=\"{px:.1}\" y2=\"{:.1}\" stroke=\"#ddd\"/>",
            f.top, f.bottom
        );
        let _ = writeln!(
            out,
            "<text x=\"{px:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
            f.bottom + 16.0,
            fmt_tick(t)
        );
    }
    for t in tick_positions(y0, y1, 5) {
        let py = sy(t);
        let label =
            if opts.log_y { format!("1e{}", trim_num(format!("{t:.2}"))) } else { fmt_tick(t) };
        let _ = writeln!(
            out,
            "<line x1=\"{:.1}\" y1=\"{py:.1}\" x2=\"{:.1}\" y2=\"{py:.1}\" stroke=\"#ddd\"/>",
            f.left, f.right
        );
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{label}</text>",
            f.left - 6.0,
            py + 4.0
        );
    }
    let _ = writeln!(
        out,
        "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"{:.1}\" height=\"{:.1}\" \
         fill=\"none\" stroke=\"#333\"/>",
        f.left,
        f.top,
        f.right - f.left,
        f.bottom - f.top
    );
    axis_labels(&mut out, &f, opts.x_label, opts.y_label);

    for (i, (name, pts)) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        if !pts.is_empty() {
            let mut attr = String::with_capacity(pts.len() * 14);
            for (x, y) in pts {
                let _ = write!(attr, "{:.2},{:.2} ", sx(*x), sy(*y));
            }
            let _ = writeln!(
                out,
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>",
                attr.trim_end()
            );
        }
        let ly = f.top + 14.0 + 18.0 * i as f64;
        let _ = writeln!(
            out,
            "<line x1=\"{0:.1}\" y1=\"{ly:.1}\" x2=\"{1:.1}\" y2=\"{ly:.1}\" \
             stroke=\"{color}\" stroke-width=\"2\"/>",
            f.right - 150.0,
            f.right - 126.0
        );
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\">{}</text>",
            f.right - 120.0,
            ly + 4.0,
            esc(name)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Renders one τ-slice of a stability grid: α on x, β on y, one rectangle
/// per cell colored by verdict.
pub fn stability_heatmap<T: Real>(grid: &StabilityGrid<T>, ti: usize, title: &str) -> String {
    assert!(ti < grid.tau_values.len(), "tau index out of range");
    let f = Frame::new(720, 560);
    let (na, nb) = (grid.alpha_values.len(), grid.beta_values.len());
    let cw = (f.right - f.left) / na as f64;
    let ch = (f.bottom - f.top) / nb as f64;

    let mut out = String::with_capacity(na * nb * 64 + 2048);
    open_svg(&mut out, &f, title);
    for ai in 0..na {
        for bi in 0..nb {
            let fill = match grid.cell(ai, bi, ti).verdict {
                CellVerdict::Stable => STABLE_FILL,
                CellVerdict::Unstable => UNSTABLE_FILL,
                CellVerdict::Error => ERROR_FILL,
            };
            // β grows upward, SVG y grows downward.
            let _ = writeln!(
                out,
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{fill}\"/>",
                f.left + ai as f64 * cw,
                f.top + (nb - 1 - bi) as f64 * ch,
                cw,
                ch
            );
        }
    }

    // Ticks run through cell centers so the labels sit over the data.
    let (a0, a1) = (grid.alpha_values[0].as_f64(), grid.alpha_values[na - 1].as_f64());
    let (b0, b1) = (grid.beta_values[0].as_f64(), grid.beta_values[nb - 1].as_f64());
    let center_x = |v: f64| {
        let frac = if a1 > a0 { (v - a0) / (a1 - a0) } else { 0.5 };
        f.left + (frac * (na - 1) as f64 + 0.5) * cw
    };
    let center_y = |v: f64| {
        let frac = if b1 > b0 { (v - b0) / (b1 - b0) } else { 0.5 };
        f.bottom - (frac * (nb - 1) as f64 + 0.5) * ch
    };
    let nticks = 5.min(na.max(2)).min(nb.max(2));
    for t in tick_positions(a0, a1, nticks.max(2)) {
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
            center_x(t),
            f.bottom + 16.0,
            fmt_tick(t)
        );
    }
    for t in tick_positions(b0, b1, nticks.max(2)) {
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>",
            f.left - 6.0,
            center_y(t) + 4.0,
            fmt_tick(t)
        );
    }
    let _ = writeln!(
        out,
        "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"{:.1}\" height=\"{:.1}\" \
         fill=\"none\" stroke=\"#333\"/>",
        f.left,
        f.top,
        f.right - f.left,
        f.bottom - f.top
    );
    axis_labels(&mut out, &f, "alpha", "beta");

    for (i, (fill, label)) in
        [(STABLE_FILL, "stable"), (UNSTABLE_FILL, "unstable"), (ERROR_FILL, "error")]
            .iter()
            .enumerate()
    {
        let lx = f.left + 8.0 + 110.0 * i as f64;
        let _ = writeln!(
            out,
            "<rect x=\"{lx:.1}\" y=\"{:.1}\" width=\"12\" height=\"12\" fill=\"{fill}\" \
             stroke=\"#333\"/>",
            f.height - 24.0
        );
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\">{label}</text>",
            lx + 18.0,
            f.height - 14.0
        );
    }
    out.push_str("</svg>\n");
    out
}
