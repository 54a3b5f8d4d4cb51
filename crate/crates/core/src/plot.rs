//! Standalone SVG charts of an experiment's result directory.
//!
//! * `cumulative_energy.svg`: running energy of the three strategies.
//! * `daily_metrics.svg`: `M_d` and `D_d` per day with a trailing 7-day mean.
//! * `week_trace.svg`: indoor temperature, comfort bounds and electrical
//!   draw over the last seven simulated days.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::harness::TRACE_FILES;
use crate::{Error, Result};

pub const INPUT_FILES: [&str; 5] = [
    "daily_metrics.csv",
    "cumulative_energy.csv",
    TRACE_FILES[0],
    TRACE_FILES[1],
    TRACE_FILES[2],
];

pub const OUTPUT_FILES: [&str; 3] = ["cumulative_energy.svg", "daily_metrics.svg", "week_trace.svg"];

const LANES: [(&str, &str); 3] = [
    ("default", "#1f77b4"),
    ("learning", "#d62728"),
    ("prescient", "#2ca02c"),
];

/// Moving-average window for the daily metrics, days.
pub const SMOOTHING_DAYS: usize = 7;

/// Named numeric columns of a CSV file; `NA` and empty cells read as NaN.
struct Table {
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl Table {
    fn read(path: &Path) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
        let header = reader
            .headers()
            .map_err(|e| Error::csv(path, e))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| Error::csv(path, e))?;
            rows.push(
                record
                    .iter()
                    .map(|cell| match cell {
                        "true" => 1.0,
                        "false" => 0.0,
                        other => other.parse().unwrap_or(f64::NAN),
                    })
                    .collect(),
            );
        }
        Ok(Table { header, rows })
    }

    fn column(&self, name: &str, path: &Path) -> Result<Vec<f64>> {
        let j = self
            .header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Malformed {
                line: 1,
                column: name.into(),
                message: format!("{} has no `{name}` column", path.display()),
            })?;
        Ok(self
            .rows
            .iter()
            .map(|r| r.get(j).copied().unwrap_or(f64::NAN))
            .collect())
    }
}

struct Series {
    label: String,
    color: &'static str,
    dashed: bool,
    points: Vec<(f64, f64)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Tick values covering `[lo, hi]` at a 1/2/5 spacing.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = (hi - lo).max(1e-12);
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| span / s <= 6.0)
        .unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-9 * span {
        out.push(if t.abs() < 1e-12 * step { 0.0 } else { t });
        t += step;
    }
    out
}

fn fmt_tick(v: f64) -> String {
    if v.abs() >= 1e4 {
        format!("{:.0}k", v / 1e3)
    } else if v.fract().abs() < 1e-9 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
            .trim_end_matches('0')
            .trim_end_matches('.')
            .to_string()
    }
}

/// One framed line chart at `(x0, y0)` of size `w × h`. NaN points break the line.
#[allow(clippy::too_many_arguments)]
fn panel(
    out: &mut String,
    x0: f64,
    y0: f64,
    w: f64,
    h: f64,
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series],
) {
    let (ml, mr, mt, mb) = (64.0, 16.0, 28.0, 40.0);
    let (px, py, pw, ph) = (x0 + ml, y0 + mt, w - ml - mr, h - mt - mb);
    let finite = series
        .iter()
        .flat_map(|s| s.points.iter())
        .filter(|p| p.0.is_finite() && p.1.is_finite());
    let (mut xl, mut xh, mut yl, mut yh) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in finite {
        xl = xl.min(x);
        xh = xh.max(x);
        yl = yl.min(y);
        yh = yh.max(y);
    }
    if !xl.is_finite() {
        (xl, xh, yl, yh) = (0.0, 1.0, 0.0, 1.0);
    }
    if xh <= xl {
        xh = xl + 1.0;
    }
    if yh <= yl {
        yl -= 0.5;
        yh += 0.5;
    }
    let pad = 0.05 * (yh - yl);
    let (yl, yh) = (yl - pad, yh + pad);
    let sx = |x: f64| px + (x - xl) / (xh - xl) * pw;
    let sy = |y: f64| py + ph - (y - yl) / (yh - yl) * ph;

    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" font-size="14" font-weight="bold">{}</text>"#,
        px,
        y0 + 18.0,
        escape(title)
    );
    let _ = writeln!(
        out,
        r##"<rect x="{px:.1}" y="{py:.1}" width="{pw:.1}" height="{ph:.1}" fill="none" stroke="#444"/>"##
    );
    for t in ticks(xl, xh) {
        let x = sx(t);
        let _ = writeln!(
            out,
            r##"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="#444"/><text x="{x:.1}" y="{:.1}" font-size="10" text-anchor="middle">{}</text>"##,
            py + ph,
            py + ph + 4.0,
            py + ph + 16.0,
            fmt_tick(t)
        );
    }
    for t in ticks(yl, yh) {
        let y = sy(t);
        let _ = writeln!(
            out,
            r##"<line x1="{px:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" font-size="10" text-anchor="end">{}</text>"##,
            px + pw,
            px - 4.0,
            y + 3.0,
            fmt_tick(t)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="middle">{}</text>"#,
        px + pw / 2.0,
        py + ph + 32.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="middle" transform="rotate(-90 {:.1} {:.1})">{}</text>"#,
        x0 + 14.0,
        py + ph / 2.0,
        x0 + 14.0,
        py + ph / 2.0,
        escape(y_label)
    );

    for s in series {
        let dash = if s.dashed { r#" stroke-dasharray="5,3""# } else { "" };
        let mut segment: Vec<String> = Vec::new();
        let flush = |seg: &mut Vec<String>, out: &mut String| {
            if seg.len() > 1 {
                let _ = writeln!(
                    out,
                    r#"<polyline fill="none" stroke="{}" stroke-width="1.5"{dash} points="{}"/>"#,
                    s.color,
                    seg.join(" ")
                );
            }
            seg.clear();
        };
        for &(x, y) in &s.points {
            if x.is_finite() && y.is_finite() {
                segment.push(format!("{:.1},{:.1}", sx(x), sy(y)));
            } else {
                flush(&mut segment, out);
            }
        }
        flush(&mut segment, out);
    }
    for (i, s) in series.iter().enumerate() {
        let lx = px + 8.0;
        let ly = py + 12.0 + 14.0 * i as f64;
        let dash = if s.dashed { r#" stroke-dasharray="5,3""# } else { "" };
        let _ = writeln!(
            out,
            r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{}" stroke-width="2"{dash}/><text x="{:.1}" y="{:.1}" font-size="10">{}</text>"#,
            lx + 18.0,
            s.color,
            lx + 22.0,
            ly + 3.0,
            escape(&s.label)
        );
    }
}

fn document(width: f64, height: f64, body: &str) -> String {
    format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\" font-family=\"sans-serif\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{body}</svg>\n"
    )
}

/// Trailing mean over the last `window` defined values.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    (0..values.len())
        .map(|i| {
            let lo = (i + 1).saturating_sub(window);
            let (s, n) = values[lo..=i]
                .iter()
                .filter(|v| v.is_finite())
                .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
            if n == 0 {
                f64::NAN
            } else {
                s / n as f64
            }
        })
        .collect()
}

fn cumulative_chart(dir: &Path) -> Result<String> {
    let path = dir.join("cumulative_energy.csv");
    let t = Table::read(&path)?;
    let day = t.column("day", &path)?;
    let mut series = Vec::new();
    for (lane, color) in LANES {
        let e = t.column(&format!("{lane}_wh"), &path)?;
        series.push(Series {
            label: lane.into(),
            color,
            dashed: false,
            points: day.iter().zip(&e).map(|(&d, &v)| (d, v / 1e3)).collect(),
        });
    }
    let mut body = String::new();
    panel(
        &mut body,
        0.0,
        0.0,
        720.0,
        420.0,
        "Cumulative electrical energy",
        "day",
        "energy (kWh)",
        &series,
    );
    Ok(document(720.0, 420.0, &body))
}

fn metrics_chart(dir: &Path) -> Result<String> {
    let path = dir.join("daily_metrics.csv");
    let t = Table::read(&path)?;
    let day = t.column("day", &path)?;
    let m = t.column("m_d", &path)?;
    let d = t.column("d_d_c", &path)?;
    let pair = |v: &[f64], label: &str, color: &'static str| {
        vec![
            Series {
                label: format!("{label} daily"),
                color,
                dashed: true,
                points: day.iter().copied().zip(v.iter().copied()).collect(),
            },
            Series {
                label: format!("{label} {SMOOTHING_DAYS}-day mean"),
                color: "#000",
                dashed: false,
                points: day.iter().copied().zip(moving_average(v, SMOOTHING_DAYS)).collect(),
            },
        ]
    };
    let mut body = String::new();
    panel(
        &mut body,
        0.0,
        0.0,
        720.0,
        300.0,
        "Daily performance M_d",
        "day",
        "M_d",
        &pair(&m, "M_d", LANES[1].1),
    );
    panel(
        &mut body,
        0.0,
        300.0,
        720.0,
        300.0,
        "Deviation at 17h00 D_d",
        "day",
        "D_d (°C)",
        &pair(&d, "D_d", LANES[0].1),
    );
    Ok(document(720.0, 600.0, &body))
}

fn week_chart(dir: &Path) -> Result<String> {
    let mut temps = Vec::new();
    let mut power = Vec::new();
    let mut bounds = Vec::new();
    for (file, (lane, color)) in TRACE_FILES.iter().zip(LANES) {
        let path = dir.join(file);
        let t = Table::read(&path)?;
        let day = t.column("day", &path)?;
        let quarter = t.column("quarter", &path)?;
        let t_in = t.column("t_in", &path)?;
        let u_ph = t.column("u_ph", &path)?;
        let last = day.iter().copied().fold(0.0, f64::max);
        let first = (last - 6.0).max(1.0);
        let hours: Vec<f64> = day
            .iter()
            .zip(&quarter)
            .map(|(d, q)| (d - first) * 24.0 + (q - 1.0) / 4.0)
            .collect();
        let keep: Vec<usize> = (0..day.len()).filter(|&i| day[i] >= first).collect();
        temps.push(Series {
            label: lane.into(),
            color,
            dashed: false,
            points: keep.iter().map(|&i| (hours[i], t_in[i])).collect(),
        });
        power.push(Series {
            label: lane.into(),
            color,
            dashed: false,
            points: keep.iter().map(|&i| (hours[i], u_ph[i] / 1e3)).collect(),
        });
        if lane == "learning" {
            for (name, col) in [("lower bound", "t_low"), ("upper bound", "t_high")] {
                let v = t.column(col, &path)?;
                bounds.push(Series {
                    label: name.into(),
                    color: "#888",
                    dashed: true,
                    points: keep.iter().map(|&i| (hours[i], v[i])).collect(),
                });
            }
        }
    }
    temps.extend(bounds);
    let mut body = String::new();
    panel(
        &mut body,
        0.0,
        0.0,
        900.0,
        320.0,
        "Indoor temperature, last 7 days",
        "hour",
        "T_in (°C)",
        &temps,
    );
    panel(
        &mut body,
        0.0,
        320.0,
        900.0,
        280.0,
        "Electrical draw, last 7 days",
        "hour",
        "u_ph (kW)",
        &power,
    );
    Ok(document(900.0, 600.0, &body))
}

/// Writes the three charts into `dir` and returns their paths.
pub fn emit_plots(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let missing: Vec<String> = INPUT_FILES
        .iter()
        .filter(|f| !dir.join(f).is_file())
        .map(|f| f.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingInputs {
            dir: dir.to_path_buf(),
            missing,
        });
    }
    let charts = [cumulative_chart(dir)?, metrics_chart(dir)?, week_chart(dir)?];
    let mut written = Vec::new();
    for (name, svg) in OUTPUT_FILES.iter().zip(charts) {
        let p = dir.join(name);
        std::fs::write(&p, svg).map_err(|e| Error::io(&p, e))?;
        written.push(p);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tick_spacing() {
        assert_eq!(ticks(0.0, 10.0), vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0]);
        let t = ticks(0.3, 0.9);
        assert!(t.len() >= 3 && t.iter().all(|&v| (0.3..=0.9).contains(&v)), "{t:?}");
        assert!(ticks(5.0, 5.0).len() <= 1);
    }

    #[test]
    fn trailing_mean_skips_gaps() {
        let v = [1.0, f64::NAN, 3.0, 5.0];
        let m = moving_average(&v, 2);
        assert_eq!(m[0], 1.0);
        assert_eq!(m[1], 1.0);
        assert_eq!(m[2], 3.0);
        assert_eq!(m[3], 4.0);
        assert!(moving_average(&[f64::NAN], 3)[0].is_nan());
    }

    #[test]
    fn empty_dir_lists_missing_inputs() {
        let dir = tempfile::tempdir().unwrap();
        match emit_plots(dir.path()) {
            Err(Error::MissingInputs { missing, .. }) => assert_eq!(missing.len(), 5),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn escapes_markup() {
        assert_eq!(escape("a<b & c>"), "a&lt;b &amp; c&gt;");
    }
}
