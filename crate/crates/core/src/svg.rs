//! Standalone SVG figure: estimated annual progress against the target
//! correlation, with the closed-form limit and the true rate overlaid.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::montecarlo::SweepRow;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FigureOptions {
    pub width: u32,
    pub height: u32,
}

impl Default for FigureOptions {
    fn default() -> Self {
        Self { width: 800, height: 500 }
    }
}

const MARGIN_LEFT: f64 = 80.0;
const MARGIN_RIGHT: f64 = 30.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 60.0;

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    width: f64,
    height: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        MARGIN_LEFT + (x - self.x0) / (self.x1 - self.x0) * (self.width - MARGIN_LEFT - MARGIN_RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        self.height - MARGIN_BOTTOM
            - (y - self.y0) / (self.y1 - self.y0) * (self.height - MARGIN_TOP - MARGIN_BOTTOM)
    }
}

/// Tick step of the form {1, 2, 5} x 10^k giving roughly `target` intervals.
fn nice_step(span: f64, target: f64) -> f64 {
    let raw = span / target;
    let mag = 10f64.powf(raw.log10().floor());
    let f = raw / mag;
    let nice = if f <= 1.0 {
        1.0
    } else if f <= 2.0 {
        2.0
    } else if f <= 5.0 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let step = nice_step(hi - lo, 6.0);
    let start = (lo / step).ceil() as i64;
    let end = (hi / step).floor() as i64;
    (start..=end).map(|k| k as f64 * step).collect()
}

fn points(it: impl Iterator<Item = (f64, f64)>) -> String {
    it.map(|(x, y)| format!("{x:.2},{y:.2}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn tick_label(v: f64, step: f64) -> String {
    let decimals = (-step.log10().floor()).max(0.0) as usize;
    let s = format!("{v:.decimals$}");
    // avoid "-0"
    if s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
        s.trim_start_matches('-').to_string()
    } else {
        s
    }
}

pub fn render_figure_svg(rows: &[SweepRow], true_ratio: f64, opts: FigureOptions) -> Result<String> {
    if rows.len() < 2 {
        return Err(Error::Config("figure needs at least two sweep rows".into()));
    }
    let pct = |v: f64| 100.0 * v;
    let medians: Vec<(f64, f64, f64)> = rows
        .iter()
        .filter_map(|r| r.median_ratio.map(|m| (r.rho, pct(m), pct(r.sd_ratio.unwrap_or(0.0)))))
        .collect();
    let plims: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| r.plim_ratio.map(|p| (r.rho, pct(p))))
        .collect();

    let mut ys: Vec<f64> = vec![pct(true_ratio)];
    ys.extend(medians.iter().flat_map(|&(_, m, s)| [m - s, m + s]));
    ys.extend(plims.iter().map(|p| p.1));
    let (mut ylo, mut yhi) = ys
        .iter()
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if !(yhi > ylo) {
        ylo -= 5.0;
        yhi += 5.0;
    }
    let pad = 0.05 * (yhi - ylo);
    let (ylo, yhi) = (ylo - pad, yhi + pad);
    let xlo = rows.first().map(|r| r.rho).unwrap_or(-1.0);
    let xhi = rows.last().map(|r| r.rho).unwrap_or(1.0);

    let f = Frame {
        x0: xlo,
        x1: xhi,
        y0: ylo,
        y1: yhi,
        width: opts.width as f64,
        height: opts.height as f64,
    };
    let (left, right) = (MARGIN_LEFT, f.width - MARGIN_RIGHT);
    let (top, bottom) = (MARGIN_TOP, f.height - MARGIN_BOTTOM);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#,
        w = opts.width,
        h = opts.height
    );
    let _ = writeln!(s, r##"<rect x="0" y="0" width="{}" height="{}" fill="#ffffff"/>"##, opts.width, opts.height);
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="22" text-anchor="middle" font-size="14">Estimated annual progress vs. selection correlation</text>"#,
        f.width / 2.0
    );

    // axes and ticks
    let _ = writeln!(s, r##"<g class="axes" stroke="#333333" fill="none">"##);
    let _ = writeln!(s, r#"<line x1="{left:.2}" y1="{bottom:.2}" x2="{right:.2}" y2="{bottom:.2}"/>"#);
    let _ = writeln!(s, r#"<line x1="{left:.2}" y1="{top:.2}" x2="{left:.2}" y2="{bottom:.2}"/>"#);
    s.push_str("</g>\n");
    let _ = writeln!(s, r##"<g class="ticks" fill="#333333">"##);
    let xstep = nice_step(xhi - xlo, 6.0);
    for t in ticks(xlo, xhi) {
        let x = f.px(t);
        let _ = writeln!(
            s,
            r##"<line x1="{x:.2}" y1="{bottom:.2}" x2="{x:.2}" y2="{:.2}" stroke="#333333"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
            bottom + 5.0,
            bottom + 18.0,
            tick_label(t, xstep)
        );
    }
    let ystep = nice_step(yhi - ylo, 6.0);
    for t in ticks(ylo, yhi) {
        let y = f.py(t);
        let _ = writeln!(
            s,
            r##"<line x1="{:.2}" y1="{y:.2}" x2="{left:.2}" y2="{y:.2}" stroke="#333333"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
            left - 5.0,
            left - 8.0,
            y + 4.0,
            tick_label(t, ystep)
        );
    }
    s.push_str("</g>\n");
    let _ = writeln!(
        s,
        r#"<text class="xlabel" x="{:.2}" y="{:.2}" text-anchor="middle">target correlation rho with residualized ln D (dimensionless)</text>"#,
        (left + right) / 2.0,
        f.height - 15.0
    );
    let _ = writeln!(
        s,
        r#"<text class="ylabel" x="20" y="{:.2}" text-anchor="middle" transform="rotate(-90 20 {:.2})">estimated annual progress beta_year/beta (% per year)</text>"#,
        (top + bottom) / 2.0,
        (top + bottom) / 2.0
    );

    if !medians.is_empty() {
        let upper = medians.iter().map(|&(x, m, sd)| (f.px(x), f.py(m + sd)));
        let lower = medians.iter().rev().map(|&(x, m, sd)| (f.px(x), f.py(m - sd)));
        let _ = writeln!(
            s,
            r##"<polygon class="sd-band" points="{}" fill="#4c78a8" fill-opacity="0.2" stroke="none"/>"##,
            points(upper.chain(lower))
        );
    }
    let _ = writeln!(
        s,
        r##"<line class="reference" x1="{left:.2}" y1="{y:.2}" x2="{right:.2}" y2="{y:.2}" stroke="#2ca02c" stroke-width="1.5"/>"##,
        y = f.py(pct(true_ratio))
    );
    if !plims.is_empty() {
        let _ = writeln!(
            s,
            r##"<polyline class="plim" points="{}" fill="none" stroke="#d62728" stroke-width="1.5" stroke-dasharray="6 4"/>"##,
            points(plims.iter().map(|&(x, y)| (f.px(x), f.py(y))))
        );
    }
    if !medians.is_empty() {
        let _ = writeln!(
            s,
            r##"<polyline class="median" points="{}" fill="none" stroke="#4c78a8" stroke-width="2"/>"##,
            points(medians.iter().map(|&(x, m, _)| (f.px(x), f.py(m))))
        );
    }

    // legend
    let lx = right - 190.0;
    let entries = [
        ("median estimate (band: +/- 1 sd)", "#4c78a8", ""),
        ("probability limit", "#d62728", r#" stroke-dasharray="6 4""#),
        ("true rate", "#2ca02c", ""),
    ];
    s.push_str("<g class=\"legend\">\n");
    for (i, (label, color, dash)) in entries.iter().enumerate() {
        let y = top + 10.0 + 16.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<path d="M{lx:.2} {y:.2} h20" stroke="{color}" stroke-width="2"{dash}/><text x="{:.2}" y="{:.2}">{label}</text>"#,
            lx + 26.0,
            y + 4.0
        );
    }
    s.push_str("</g>\n</svg>\n");
    Ok(s)
}

pub fn emit_figure_svg(rows: &[SweepRow], true_ratio: f64, path: &Path, opts: FigureOptions) -> Result<()> {
    let svg = render_figure_svg(rows, true_ratio, opts)?;
    std::fs::write(path, svg).map_err(|e| Error::io(path, e))
}
