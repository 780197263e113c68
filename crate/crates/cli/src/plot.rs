//! Static SVG line charts of the estimation errors.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use varpose::RunRecord;

use crate::error::{io_error, CliError};

const WIDTH: f64 = 820.0;
const PANEL_HEIGHT: f64 = 280.0;
const LEFT: f64 = 90.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 50.0;
const GAP: f64 = 60.0;
const BOTTOM: f64 = 50.0;
const MAX_POINTS: usize = 2000;
const COLORS: [&str; 3] = ["#1f77b4", "#d62728", "#2ca02c"];

pub struct Series {
    pub name: String,
    pub color: &'static str,
    pub points: Vec<(f64, f64)>,
}

pub struct Panel {
    pub y_label: String,
    pub series: Vec<Series>,
}

pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub panels: Vec<Panel>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Tick spacing of 1, 2 or 5 × 10ᵏ giving roughly `target` intervals.
fn nice_step(span: f64, target: f64) -> f64 {
    let raw = span / target;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let m = if norm < 1.5 {
        1.0
    } else if norm < 3.0 {
        2.0
    } else if norm < 7.0 {
        5.0
    } else {
        10.0
    };
    m * mag
}

fn ticks(lo: f64, hi: f64) -> (f64, f64, Vec<f64>) {
    let step = nice_step(hi - lo, 5.0);
    let start = (lo / step).floor() * step;
    let end = (hi / step).ceil() * step;
    let n = ((end - start) / step).round() as usize;
    let ticks = (0..=n).map(|k| start + k as f64 * step).collect();
    (start, end, ticks)
}

fn label(x: f64, step: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if step < 1e-3 || step >= 1e5 {
        format!("{x:.1e}")
    } else {
        let decimals = (-step.log10().floor()).max(0.0) as usize;
        format!("{x:.decimals$}")
    }
}

fn data_range<'a>(values: impl Iterator<Item = &'a f64>) -> Option<(f64, f64)> {
    values.filter(|v| v.is_finite()).fold(None, |acc, &v| match acc {
        None => Some((v, v)),
        Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
    })
}

fn padded(range: Option<(f64, f64)>) -> (f64, f64) {
    match range {
        None => (-1.0, 1.0),
        Some((lo, hi)) if hi - lo <= f64::EPSILON * hi.abs().max(lo.abs()).max(1e-300) => {
            let pad = lo.abs().max(1.0) * 0.5;
            (lo - pad, hi + pad)
        }
        Some((lo, hi)) => (lo, hi),
    }
}

pub fn render_svg(chart: &Chart) -> String {
    let height = TOP + chart.panels.len() as f64 * (PANEL_HEIGHT + GAP) - GAP + BOTTOM;
    let plot_w = WIDTH - LEFT - RIGHT;
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="16">{}</text>"#,
        LEFT + plot_w / 2.0,
        escape(&chart.title)
    );

    let (x_lo, x_hi) = padded(data_range(
        chart.panels.iter().flat_map(|p| p.series.iter()).flat_map(|s| s.points.iter().map(|p| &p.0)),
    ));
    let (x0, x1, x_ticks) = ticks(x_lo, x_hi);
    let x_step = x_ticks.get(1).map_or(1.0, |t| t - x_ticks[0]);
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * plot_w;

    for (k, panel) in chart.panels.iter().enumerate() {
        let top = TOP + k as f64 * (PANEL_HEIGHT + GAP);
        let bottom = top + PANEL_HEIGHT;
        let (y_lo, y_hi) = padded(data_range(panel.series.iter().flat_map(|s| s.points.iter().map(|p| &p.1))));
        let (y0, y1, y_ticks) = ticks(y_lo, y_hi);
        let y_step = y_ticks.get(1).map_or(1.0, |t| t - y_ticks[0]);
        let sy = |y: f64| bottom - (y - y0) / (y1 - y0) * PANEL_HEIGHT;

        // grid and tick labels
        for &t in &y_ticks {
            let y = sy(t);
            let _ = writeln!(
                s,
                r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#e0e0e0"/>"##,
                LEFT + plot_w
            );
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
                LEFT - 6.0,
                y + 4.0,
                label(t, y_step)
            );
        }
        for &t in &x_ticks {
            let x = sx(t);
            let _ = writeln!(s, r##"<line x1="{x:.2}" y1="{top}" x2="{x:.2}" y2="{bottom}" stroke="#e0e0e0"/>"##);
            let _ = writeln!(
                s,
                r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                bottom + 16.0,
                label(t, x_step)
            );
        }
        // axes
        let _ = writeln!(
            s,
            r#"<rect x="{LEFT}" y="{top}" width="{plot_w}" height="{PANEL_HEIGHT}" fill="none" stroke="black"/>"#
        );
        let _ = writeln!(
            s,
            r#"<text transform="translate({:.2},{:.2}) rotate(-90)" text-anchor="middle">{}</text>"#,
            LEFT - 66.0,
            top + PANEL_HEIGHT / 2.0,
            escape(&panel.y_label)
        );
        if k + 1 == chart.panels.len() {
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                LEFT + plot_w / 2.0,
                bottom + 38.0,
                escape(&chart.x_label)
            );
        }
        // data
        for series in &panel.series {
            let stride = series.points.len().div_ceil(MAX_POINTS).max(1);
            let mut path = String::new();
            let mut pen_down = false;
            for (i, &(x, y)) in series.points.iter().enumerate() {
                if i % stride != 0 && i + 1 != series.points.len() {
                    continue;
                }
                if !(x.is_finite() && y.is_finite()) {
                    pen_down = false;
                    continue;
                }
                let _ = write!(path, "{}{:.2},{:.2} ", if pen_down { "L" } else { "M" }, sx(x), sy(y));
                pen_down = true;
            }
            let _ = writeln!(
                s,
                r#"<path d="{}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
                path.trim_end(),
                series.color
            );
        }
        // legend
        for (i, series) in panel.series.iter().enumerate() {
            let y = top + 14.0 + i as f64 * 18.0;
            let x = LEFT + plot_w + 14.0;
            let _ = writeln!(
                s,
                r#"<line x1="{x}" y1="{y}" x2="{}" y2="{y}" stroke="{}" stroke-width="2"/>"#,
                x + 22.0,
                series.color
            );
            let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, x + 28.0, y + 4.0, escape(&series.name));
        }
    }
    s.push_str("</svg>\n");
    s
}

fn components(records: &[RunRecord], names: [&str; 3], get: impl Fn(&RunRecord) -> [f64; 3]) -> Vec<Series> {
    (0..3)
        .map(|k| Series {
            name: names[k].to_string(),
            color: COLORS[k],
            points: records.iter().map(|r| (r.time, get(r)[k])).collect(),
        })
        .collect()
}

pub fn attitude_chart(records: &[RunRecord]) -> Chart {
    Chart {
        title: "Attitude estimation error".into(),
        x_label: "time (s)".into(),
        panels: vec![Panel {
            y_label: "principal angle (rad)".into(),
            series: vec![Series {
                name: "angle of R R̂ᵀ".into(),
                color: COLORS[0],
                points: records.iter().map(|r| (r.time, r.errors.attitude)).collect(),
            }],
        }],
    }
}

pub fn position_chart(records: &[RunRecord]) -> Chart {
    Chart {
        title: "Position estimation error".into(),
        x_label: "time (s)".into(),
        panels: vec![Panel {
            y_label: "b − Q b̂ (m)".into(),
            series: components(records, ["x", "y", "z"], |r| r.errors.position.into()),
        }],
    }
}

pub fn velocity_chart(records: &[RunRecord]) -> Chart {
    Chart {
        title: "Velocity estimation error".into(),
        x_label: "time (s)".into(),
        panels: vec![
            Panel {
                y_label: "Ω − Ω̂ (rad/s)".into(),
                series: components(records, ["x", "y", "z"], |r| r.errors.omega.into()),
            },
            Panel {
                y_label: "ν − ν̂ (m/s)".into(),
                series: components(records, ["x", "y", "z"], |r| r.errors.nu.into()),
            },
        ],
    }
}

/// Writes `<stem>_attitude.svg`, `<stem>_position.svg` and
/// `<stem>_velocity.svg` into `out_dir`.
pub fn emit_plots(records: &[RunRecord], out_dir: &Path, stem: &str) -> Result<Vec<PathBuf>, CliError> {
    if records.is_empty() {
        return Err(CliError::Core(varpose::Error::InvalidConfig("no records to plot".into())));
    }
    let mut written = Vec::new();
    for (suffix, chart) in [
        ("attitude", attitude_chart(records)),
        ("position", position_chart(records)),
        ("velocity", velocity_chart(records)),
    ] {
        let path = out_dir.join(format!("{stem}_{suffix}.svg"));
        std::fs::write(&path, render_svg(&chart)).map_err(io_error(&path))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nice_steps() {
        assert_eq!(nice_step(10.0, 5.0), 2.0);
        assert_eq!(nice_step(1.0, 5.0), 0.2);
        assert_eq!(nice_step(0.7, 5.0), 0.1);
        assert_eq!(nice_step(300.0, 5.0), 50.0);
    }

    #[test]
    fn ticks_cover_the_range() {
        let (lo, hi, t) = ticks(-0.03, 0.785);
        assert!(lo <= -0.03 && hi >= 0.785);
        assert!(t.len() >= 4 && t.len() <= 12);
    }

    #[test]
    fn flat_data_gets_a_visible_range() {
        let (lo, hi) = padded(Some((0.0, 0.0)));
        assert!(lo < 0.0 && hi > 0.0);
    }

    #[test]
    fn text_is_escaped() {
        let chart = Chart {
            title: "a < b & c".into(),
            x_label: "t".into(),
            panels: vec![Panel {
                y_label: "y".into(),
                series: vec![Series {
                    name: "s".into(),
                    color: COLORS[0],
                    points: vec![(0.0, 1.0), (1.0, f64::NAN), (2.0, 0.5)],
                }],
            }],
        };
        let svg = render_svg(&chart);
        assert!(svg.contains("a &lt; b &amp; c"));
        assert!(!svg.contains("NaN"));
    }
}
