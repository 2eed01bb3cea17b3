//! CSV and SVG result files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::harness::sweeps::ExperimentResult;
use crate::{Error, Result};

pub const CSV_HEADER: &str =
    "snr_db,ber,avg_delay_epochs,mean_buffer_size,pairs_examined_mean,idle_epoch_fraction,symbols_counted";

pub fn to_csv(result: &ExperimentResult) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in &result.rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.snr_db,
            r.ber,
            r.avg_delay_epochs,
            r.mean_buffer_size,
            r.pairs_examined_mean,
            r.idle_epoch_fraction,
            r.symbols_counted
        );
    }
    s
}

fn write(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_csv(result: &ExperimentResult, path: &Path) -> Result<()> {
    write(path, &to_csv(result))
}

/// One line of a plot.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    /// Logarithmic y axis; non-positive values are dropped.
    pub log_y: bool,
    pub series: Vec<Series>,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 160.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const COLOURS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn span(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

/// A self-contained SVG line plot.
pub fn render_svg(plot: &Plot) -> String {
    let ty = |y: f64| if plot.log_y { y.log10() } else { y };
    let series: Vec<(&str, Vec<(f64, f64)>)> = plot
        .series
        .iter()
        .map(|s| {
            let pts = s
                .points
                .iter()
                .filter(|(x, y)| x.is_finite() && y.is_finite() && (!plot.log_y || *y > 0.0))
                .map(|&(x, y)| (x, ty(y)))
                .collect();
            (s.name.as_str(), pts)
        })
        .collect();
    let all = || series.iter().flat_map(|(_, p)| p.iter());
    let (x0, x1) = span(all().map(|p| p.0));
    let (mut y0, mut y1) = span(all().map(|p| p.1));
    if plot.log_y {
        y0 = y0.floor();
        y1 = y1.ceil().max(y0 + 1.0);
    }
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + (1.0 - (y - y0) / (y1 - y0)) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        LEFT + pw / 2.0,
        escape(&plot.title)
    );
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for i in 0..=4 {
        let x = x0 + (x1 - x0) * i as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            sx(x),
            TOP + ph + 16.0,
            format_tick(x)
        );
    }
    let y_ticks: Vec<f64> = if plot.log_y {
        (y0 as i64..=y1 as i64).map(|e| e as f64).collect()
    } else {
        (0..=4).map(|i| y0 + (y1 - y0) * i as f64 / 4.0).collect()
    };
    for y in y_ticks {
        let label = if plot.log_y { format!("1e{}", y as i64) } else { format_tick(y) };
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" x2="{:.1}" y1="{:.1}" y2="{:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">{label}</text>"##,
            LEFT + pw,
            sy(y),
            sy(y),
            LEFT - 6.0,
            sy(y) + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 12.0,
        escape(&plot.x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(&plot.y_label)
    );
    for (i, (name, pts)) in series.iter().enumerate() {
        let colour = COLOURS[i % COLOURS.len()];
        let coords: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{colour}" stroke-width="2" points="{}"/>"#,
            coords.join(" ")
        );
        for &(x, y) in pts {
            let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{colour}"/>"#, sx(x), sy(y));
        }
        let ly = TOP + 14.0 + 18.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{:.1}" x2="{:.1}" y1="{ly:.1}" y2="{ly:.1}" stroke="{colour}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            LEFT + pw + 10.0,
            LEFT + pw + 30.0,
            LEFT + pw + 36.0,
            ly + 4.0,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn format_tick(v: f64) -> String {
    let r = (v * 100.0).round() / 100.0;
    if r == r.trunc() {
        format!("{}", r as i64)
    } else {
        format!("{r}")
    }
}

pub fn write_svg(plot: &Plot, path: &Path) -> Result<()> {
    write(path, &render_svg(plot))
}

/// BER against SNR for one result.
pub fn ber_plot(result: &ExperimentResult) -> Plot {
    Plot {
        title: "BER versus SNR".into(),
        x_label: "SNR (dB)".into(),
        y_label: "BER".into(),
        log_y: true,
        series: vec![Series {
            name: result.label.clone(),
            points: result.rows.iter().map(|r| (r.snr_db, r.ber)).collect(),
        }],
    }
}

/// Writes the CSV to `path` and, when `plot` is set, a BER plot next to it
/// with the `svg` extension. Returns the files written.
pub fn emit_results(result: &ExperimentResult, path: &Path, plot: bool) -> Result<Vec<PathBuf>> {
    write_csv(result, path)?;
    let mut written = vec![path.to_path_buf()];
    if plot {
        let svg = path.with_extension("svg");
        write_svg(&ber_plot(result), &svg)?;
        written.push(svg);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::sweeps::ExperimentRow;

    fn result(n: usize) -> ExperimentResult {
        ExperimentResult {
            label: "a <b> & c".into(),
            rows: (0..n)
                .map(|i| ExperimentRow {
                    snr_db: 2.0 * i as f64,
                    ber: 0.1 / (i + 1) as f64,
                    avg_delay_epochs: 3.5,
                    mean_buffer_size: 6.0,
                    pairs_examined_mean: 15.0,
                    idle_epoch_fraction: 0.0,
                    symbols_counted: 1000,
                    bit_errors: 1,
                    epochs: 10,
                })
                .collect(),
        }
    }

    #[test]
    fn csv_layout() {
        let csv = to_csv(&result(5));
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 6);
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines[1], "0,0.1,3.5,6,15,0,1000");
    }

    #[test]
    fn svg_is_xml() {
        let svg = render_svg(&ber_plot(&result(5)));
        let doc = roxmltree::Document::parse(&svg).unwrap();
        assert_eq!(doc.root_element().tag_name().name(), "svg");
        assert_eq!(doc.descendants().filter(|n| n.has_tag_name("polyline")).count(), 1);
        let mut empty = ber_plot(&result(0));
        empty.log_y = false;
        roxmltree::Document::parse(&render_svg(&empty)).unwrap();
    }

    #[test]
    fn io_errors_name_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let bad = dir.path().join("missing").join("out.csv");
        let err = emit_results(&result(1), &bad, false).unwrap_err();
        assert!(err.to_string().contains("missing"), "{err}");
        let ok = dir.path().join("out.csv");
        let files = emit_results(&result(2), &ok, true).unwrap();
        assert_eq!(files.len(), 2);
        assert!(files[1].extension().unwrap() == "svg");
    }
}
