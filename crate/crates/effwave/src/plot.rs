//! Self-contained SVG line plots: band diagrams, error-versus-epsilon on
//! log-log axes, and mass-law residuals. No external renderer; the output
//! is plain polylines with axes, ticks and labels.

use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::harness::ConvergenceReport;
use crate::report::{write_named, BandsExport, RunReport};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 55.0;

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct LinePlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub markers: bool,
    pub series: Vec<Series>,
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn nice_ticks(lo: f64, hi: f64) -> Vec<f64> {
    if !(hi > lo) {
        return vec![lo];
    }
    let span = hi - lo;
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let step = if norm < 1.5 {
        mag
    } else if norm < 3.5 {
        2.0 * mag
    } else if norm < 7.5 {
        5.0 * mag
    } else {
        10.0 * mag
    };
    let first = (lo / step).ceil() * step;
    let mut ticks = Vec::new();
    let mut t = first;
    while t <= hi + 1e-12 * span {
        ticks.push(if t.abs() < 1e-12 * span { 0.0 } else { t });
        t += step;
    }
    ticks
}

fn decade_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let mut ticks = Vec::new();
    let mut exp = lo.log10().floor() as i32;
    while 10f64.powi(exp) <= hi * (1.0 + 1e-12) {
        let t = 10f64.powi(exp);
        if t >= lo * (1.0 - 1e-12) {
            ticks.push(t);
        }
        exp += 1;
    }
    if ticks.is_empty() {
        ticks.push(lo);
    }
    ticks
}

fn format_tick(value: f64) -> String {
    if value == 0.0 {
        return "0".into();
    }
    let mag = value.abs();
    if (1e-3..1e4).contains(&mag) {
        let text = format!("{value:.4}");
        let trimmed = text.trim_end_matches('0').trim_end_matches('.');
        trimmed.to_string()
    } else {
        format!("{value:.1e}")
    }
}

impl LinePlot {
    pub fn render(&self) -> String {
        let finite = |v: f64| v.is_finite();
        let tx = |x: f64| if self.log_x { x.log10() } else { x };
        let ty = |y: f64| if self.log_y { y.log10() } else { y };

        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for s in &self.series {
            for &(x, y) in &s.points {
                if finite(x) && finite(y) && (!self.log_x || x > 0.0) && (!self.log_y || y > 0.0) {
                    xs.push(x);
                    ys.push(y);
                }
            }
        }
        let (x_lo, x_hi) = bounds(&xs);
        let (y_lo, y_hi) = bounds(&ys);
        let (tx_lo, tx_hi) = (tx(x_lo), tx(x_hi));
        let (ty_lo, ty_hi) = (ty(y_lo), ty(y_hi));
        let x_span = (tx_hi - tx_lo).max(1e-12);
        let y_span = (ty_hi - ty_lo).max(1e-12);

        let plot_w = WIDTH - MARGIN_L - MARGIN_R;
        let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
        let px = |x: f64| MARGIN_L + (tx(x) - tx_lo) / x_span * plot_w;
        let py = |y: f64| HEIGHT - MARGIN_B - (ty(y) - ty_lo) / y_span * plot_h;

        let mut svg = String::new();
        svg.push_str(&format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
        ));
        svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"22\" font-family=\"sans-serif\" font-size=\"15\" text-anchor=\"middle\">{}</text>\n",
            WIDTH / 2.0,
            escape(&self.title)
        ));

        // Axes box.
        svg.push_str(&format!(
            "<rect x=\"{MARGIN_L}\" y=\"{MARGIN_T}\" width=\"{plot_w}\" height=\"{plot_h}\" fill=\"none\" stroke=\"#333\" stroke-width=\"1\"/>\n"
        ));

        let x_ticks = if self.log_x { decade_ticks(x_lo, x_hi) } else { nice_ticks(x_lo, x_hi) };
        for t in &x_ticks {
            let x = px(*t);
            svg.push_str(&format!(
                "<line x1=\"{x:.2}\" y1=\"{}\" x2=\"{x:.2}\" y2=\"{}\" stroke=\"#ccc\" stroke-width=\"0.5\"/>\n",
                MARGIN_T,
                HEIGHT - MARGIN_B
            ));
            svg.push_str(&format!(
                "<text x=\"{x:.2}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{}</text>\n",
                HEIGHT - MARGIN_B + 18.0,
                escape(&format_tick(*t))
            ));
        }
        let y_ticks = if self.log_y { decade_ticks(y_lo, y_hi) } else { nice_ticks(y_lo, y_hi) };
        for t in &y_ticks {
            let y = py(*t);
            svg.push_str(&format!(
                "<line x1=\"{}\" y1=\"{y:.2}\" x2=\"{}\" y2=\"{y:.2}\" stroke=\"#ccc\" stroke-width=\"0.5\"/>\n",
                MARGIN_L,
                WIDTH - MARGIN_R
            ));
            svg.push_str(&format!(
                "<text x=\"{}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{}</text>\n",
                MARGIN_L - 6.0,
                y + 4.0,
                escape(&format_tick(*t))
            ));
        }
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">{}</text>\n",
            MARGIN_L + plot_w / 2.0,
            HEIGHT - 12.0,
            escape(&self.x_label)
        ));
        svg.push_str(&format!(
            "<text x=\"18\" y=\"{}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 18 {})\">{}</text>\n",
            MARGIN_T + plot_h / 2.0,
            MARGIN_T + plot_h / 2.0,
            escape(&self.y_label)
        ));

        for (i, s) in self.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let pts: Vec<String> = s
                .points
                .iter()
                .filter(|(x, y)| {
                    x.is_finite()
                        && y.is_finite()
                        && (!self.log_x || *x > 0.0)
                        && (!self.log_y || *y > 0.0)
                })
                .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
                .collect();
            if pts.is_empty() {
                continue;
            }
            svg.push_str(&format!(
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
                pts.join(" ")
            ));
            if self.markers {
                for p in &pts {
                    let mut it = p.split(',');
                    let (cx, cy) = (it.next().unwrap(), it.next().unwrap());
                    svg.push_str(&format!(
                        "<circle cx=\"{cx}\" cy=\"{cy}\" r=\"3\" fill=\"{color}\"/>\n"
                    ));
                }
            }
            svg.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" fill=\"{color}\">{}</text>\n",
                WIDTH - MARGIN_R - 150.0,
                MARGIN_T + 16.0 + 14.0 * i as f64,
                escape(&s.name)
            ));
        }
        svg.push_str("</svg>\n");
        svg
    }
}

fn bounds(values: &[f64]) -> (f64, f64) {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() || !hi.is_finite() {
        (0.0, 1.0)
    } else if lo == hi {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

pub fn band_diagram(bands: &BandsExport) -> LinePlot {
    LinePlot {
        title: "Bloch bands".into(),
        x_label: "theta".into(),
        y_label: "lambda_n(theta)".into(),
        log_x: false,
        log_y: false,
        markers: false,
        series: bands
            .bands
            .iter()
            .enumerate()
            .map(|(n, band)| Series {
                name: format!("band {}", n + 1),
                points: bands.theta.iter().copied().zip(band.iter().copied()).collect(),
            })
            .collect(),
    }
}

pub fn error_plot(conv: &ConvergenceReport) -> LinePlot {
    LinePlot {
        title: "Factorization error vs epsilon".into(),
        x_label: "epsilon".into(),
        y_label: "mean sup-t L2 error".into(),
        log_x: true,
        log_y: true,
        markers: true,
        series: vec![Series {
            name: "mean sup error".into(),
            points: conv.eps_reports.iter().map(|r| (r.eps, r.sup_mean)).collect(),
        }],
    }
}

pub fn mass_plot(conv: &ConvergenceReport) -> LinePlot {
    let mass = &conv.sample_mass;
    LinePlot {
        title: format!("Mass law ({})", mass.law),
        x_label: "t".into(),
        y_label: "mass".into(),
        log_x: false,
        log_y: false,
        markers: false,
        series: vec![
            Series {
                name: "observed".into(),
                points: mass.times.iter().copied().zip(mass.observed.iter().copied()).collect(),
            },
            Series {
                name: "predicted".into(),
                points: mass.times.iter().copied().zip(mass.predicted.iter().copied()).collect(),
            },
        ],
    }
}

/// Emit the plots a report supports; missing series are skipped with a
/// notice. Returns (paths written, notices).
pub fn emit_plot_data(report: &RunReport, out_dir: &Path) -> Result<(Vec<PathBuf>, Vec<String>)> {
    let mut written = Vec::new();
    let mut notices = Vec::new();
    match &report.bands {
        Some(bands) => {
            written.push(write_named(out_dir, "bands.svg", &band_diagram(bands).render())?)
        }
        None => notices.push("no band series; bands.svg skipped".into()),
    }
    match &report.convergence {
        Some(conv) => {
            written.push(write_named(out_dir, "errors.svg", &error_plot(conv).render())?);
            if conv.sample_mass.times.is_empty() {
                notices.push("no mass series; mass.svg skipped".into());
            } else {
                written.push(write_named(out_dir, "mass.svg", &mass_plot(conv).render())?);
            }
        }
        None => notices.push("no convergence series; errors.svg and mass.svg skipped".into()),
    }
    Ok((written, notices))
}
