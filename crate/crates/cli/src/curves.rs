//! Loss and metric curves: tidy CSV, least-squares trend lines, SVG plot.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub n: usize,
}

/// Ordinary least-squares line through `(x, y)` points.
pub fn least_squares(points: &[(f64, f64)]) -> Result<LineFit> {
    let n = points.len();
    if n < 2 {
        bail!("a line fit needs at least 2 points, got {n}");
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n as f64;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n as f64;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        bail!("all x values are equal; the fit is undefined");
    }
    let slope = sxy / sxx;
    Ok(LineFit {
        slope,
        intercept: my - slope * mx,
        n,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

/// Index columns never plotted as series.
const INDEX_COLUMNS: [&str; 2] = ["step", "epoch"];

/// Reads every numeric column other than the x column (and `step`/`epoch`)
/// as a series.
pub fn read_series(path: &Path, x: Option<&str>) -> Result<Vec<Series>> {
    let mut rd =
        csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let header: Vec<String> = rd
        .headers()
        .with_context(|| format!("{}: line 1", path.display()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let xi = match x {
        Some(name) => header
            .iter()
            .position(|h| h == name)
            .with_context(|| format!("{}: no column {name:?}", path.display()))?,
        None => header.iter().position(|h| h == "step").unwrap_or(0),
    };
    let cols: Vec<usize> = (0..header.len())
        .filter(|&i| i != xi && !INDEX_COLUMNS.contains(&header[i].as_str()))
        .collect();
    if cols.is_empty() {
        bail!(
            "{}: no data columns besides {:?}",
            path.display(),
            header[xi]
        );
    }
    let mut series: Vec<Series> = cols
        .iter()
        .map(|&i| Series {
            name: header[i].clone(),
            points: Vec::new(),
        })
        .collect();
    for rec in rd.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            anyhow::anyhow!("{}: line {line}: {e}", path.display())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let num = |i: usize| -> Result<f64> {
            let v = rec[i].trim();
            v.parse::<f64>()
                .ok()
                .filter(|f| f.is_finite())
                .with_context(|| {
                    format!(
                        "{}: line {line}: column {:?}: bad number {v:?}",
                        path.display(),
                        header[i]
                    )
                })
        };
        let xv = num(xi)?;
        for (s, &i) in series.iter_mut().zip(&cols) {
            s.points.push((xv, num(i)?));
        }
    }
    Ok(series)
}

/// Long format: `series,x,y`.
pub fn write_tidy_csv(series: &[Series], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["series", "x", "y"])?;
    for s in series {
        for (x, y) in &s.points {
            w.write_record([s.name.as_str(), &x.to_string(), &y.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_fits_csv(fits: &[(String, LineFit)], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["series", "slope", "intercept", "n"])?;
    for (name, f) in fits {
        w.write_record([
            name.as_str(),
            &f.slope.to_string(),
            &f.intercept.to_string(),
            &f.n.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

const WIDTH: f64 = 640.0;
const PANEL: f64 = 220.0;
const MARGIN: f64 = 48.0;

/// One panel per series, stacked vertically; the trend line is dashed.
pub fn render_svg(series: &[Series], fits: &[Option<LineFit>]) -> String {
    let height = PANEL * series.len() as f64;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="sans-serif" font-size="11">"#
    );
    for (k, (s, fit)) in series.iter().zip(fits).enumerate() {
        let top = PANEL * k as f64;
        let (x0, x1) = bounds(s.points.iter().map(|p| p.0));
        let (y0, y1) = bounds(s.points.iter().map(|p| p.1));
        let (pw, ph) = (WIDTH - 2.0 * MARGIN, PANEL - 2.0 * MARGIN);
        let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * pw;
        let py = |y: f64| top + MARGIN + (1.0 - (y - y0) / (y1 - y0)) * ph;
        let _ = writeln!(
            svg,
            r##"<rect x="{MARGIN}" y="{:.2}" width="{pw}" height="{ph}" fill="none" stroke="#888"/>"##,
            top + MARGIN
        );
        let _ = writeln!(
            svg,
            r#"<text x="{MARGIN}" y="{:.2}">{}</text>"#,
            top + MARGIN - 8.0,
            escape(&s.name)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{y1:.4}</text><text x="{:.2}" y="{:.2}" text-anchor="end">{y0:.4}</text>"#,
            MARGIN - 4.0,
            top + MARGIN + 4.0,
            MARGIN - 4.0,
            top + MARGIN + ph
        );
        let _ = writeln!(
            svg,
            r#"<text x="{MARGIN}" y="{:.2}">{x0}</text><text x="{:.2}" y="{:.2}" text-anchor="end">{x1}</text>"#,
            top + PANEL - MARGIN + 14.0,
            WIDTH - MARGIN,
            top + PANEL - MARGIN + 14.0
        );
        let pts: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        let _ = writeln!(
            svg,
            r##"<polyline fill="none" stroke="#1f77b4" stroke-width="1.2" points="{}"/>"##,
            pts.join(" ")
        );
        if let Some(f) = fit {
            let (ya, yb) = (f.intercept + f.slope * x0, f.intercept + f.slope * x1);
            let _ = writeln!(
                svg,
                r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#d62728" stroke-dasharray="5,4"/>"##,
                px(x0),
                py(ya),
                px(x1),
                py(yb)
            );
        }
    }
    svg.push_str("</svg>\n");
    svg
}

/// Range padded so a constant series still has a drawable span.
fn bounds(v: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = v.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| {
        (a.min(x), b.max(x))
    });
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Writes `series.csv`, `fits.csv` and `curves.svg` under `out_dir`.
pub fn emit_curves(
    input: &Path,
    x: Option<&str>,
    out_dir: &Path,
) -> Result<Vec<(String, LineFit)>> {
    let series = read_series(input, x)?;
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let fits: Vec<Option<LineFit>> = series
        .iter()
        .map(|s| least_squares(&s.points).ok())
        .collect();
    let named: Vec<(String, LineFit)> = series
        .iter()
        .zip(&fits)
        .filter_map(|(s, f)| f.map(|f| (s.name.clone(), f)))
        .collect();
    write_tidy_csv(&series, &out_dir.join("series.csv"))?;
    write_fits_csv(&named, &out_dir.join("fits.csv"))?;
    let svg_path = out_dir.join("curves.svg");
    std::fs::write(&svg_path, render_svg(&series, &fits))
        .with_context(|| format!("writing {}", svg_path.display()))?;
    Ok(named)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_points_fit_exactly() {
        let f = least_squares(&[(1.0, 1.0), (3.0, 3.0)]).unwrap();
        assert_eq!((f.slope, f.intercept), (1.0, 0.0));
    }

    #[test]
    fn constant_series_is_flat() {
        let f = least_squares(&[(0.0, 2.5), (1.0, 2.5), (4.0, 2.5)]).unwrap();
        assert_eq!(f.slope, 0.0);
        assert_eq!(f.intercept, 2.5);
    }

    #[test]
    fn degenerate_inputs_fail() {
        assert!(least_squares(&[(1.0, 1.0)]).is_err());
        assert!(least_squares(&[(1.0, 1.0), (1.0, 2.0)]).is_err());
    }
}
