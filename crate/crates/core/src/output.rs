//! File outputs: atomic writes, the CSV layouts of the analysis results and
//! minimal SVG line charts.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::describing::{HarmonicAnalysis, PseudoSensitivity};
use crate::error::{Error, Result};
use crate::freq::fmt;

/// Writes `bytes` to a sibling temp file, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::Io(format!("{} has no file name", path.display())))?;
    let tmp = dir.join(format!(".{}.{}.tmp", name.to_string_lossy(), std::process::id()));
    let res = std::fs::File::create(&tmp)
        .and_then(|mut f| f.write_all(bytes).and_then(|_| f.sync_all()))
        .and_then(|_| std::fs::rename(&tmp, path));
    if let Err(e) = res {
        let _ = std::fs::remove_file(&tmp);
        return Err(Error::Io(format!("{}: {e}", path.display())));
    }
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Renders with `f` into memory, then writes atomically.
pub fn write_with<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(&mut Vec<u8>) -> Result<()>,
{
    let mut buf = Vec::new();
    f(&mut buf)?;
    write_atomic(path, &buf)
}

/// `freq_hz,n,mag_db,phase_deg,kappa,quantity`, one row per harmonic.
pub fn write_harmonics_csv<W: Write>(w: W, rows: &[HarmonicAnalysis]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["freq_hz", "n", "mag_db", "phase_deg", "kappa", "quantity"])?;
    for h in rows {
        for (k, v) in h.harmonics.iter().enumerate() {
            out.write_record([
                fmt(h.frequency_hz),
                (k + 1).to_string(),
                fmt(20.0 * v.norm().log10()),
                fmt(v.arg().to_degrees()),
                fmt(h.kappa),
                h.quantity.as_str().to_string(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// `freq_hz,S1_db,Sinf_db,T1_db,Tinf_db,kappa`.
pub fn write_pseudo_csv<W: Write>(w: W, rows: &[PseudoSensitivity]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["freq_hz", "S1_db", "Sinf_db", "T1_db", "Tinf_db", "kappa"])?;
    let db = |v: f64| fmt(20.0 * v.log10());
    for p in rows {
        out.write_record([
            fmt(p.frequency_hz),
            db(p.s1),
            db(p.s_inf),
            db(p.t1),
            db(p.t_inf),
            fmt(p.kappa),
        ])?;
    }
    out.flush()?;
    Ok(())
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

impl Curve {
    pub fn new(label: impl Into<String>, xs: &[f64], ys: &[f64]) -> Self {
        Self {
            label: label.into(),
            points: xs.iter().copied().zip(ys.iter().copied()).collect(),
        }
    }
}

/// Static line chart; stacked panels share the x axis.
#[derive(Debug, Clone, PartialEq)]
pub struct LineChart {
    pub title: String,
    pub x_label: String,
    pub log_x: bool,
    pub panels: Vec<Panel>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub y_label: String,
    pub curves: Vec<Curve>,
}

const WIDTH: f64 = 760.0;
const PANEL_H: f64 = 260.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const GAP: f64 = 40.0;

impl LineChart {
    pub fn new(title: impl Into<String>, x_label: impl Into<String>, log_x: bool) -> Self {
        Self {
            title: title.into(),
            x_label: x_label.into(),
            log_x,
            panels: Vec::new(),
        }
    }

    pub fn panel(mut self, y_label: impl Into<String>, curves: Vec<Curve>) -> Self {
        self.panels.push(Panel {
            y_label: y_label.into(),
            curves,
        });
        self
    }

    pub fn to_svg(&self) -> String {
        let height = TOP + self.panels.len() as f64 * (PANEL_H + GAP) + 20.0;
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" font-family="sans-serif" font-size="11">"#
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
            WIDTH / 2.0,
            escape(&self.title)
        );
        let tx = |x: f64| if self.log_x { x.log10() } else { x };
        let all_x: Vec<f64> = self
            .panels
            .iter()
            .flat_map(|p| p.curves.iter().flat_map(|c| c.points.iter().map(|q| q.0)))
            .filter(|x| x.is_finite() && (!self.log_x || *x > 0.0))
            .map(tx)
            .collect();
        let (x0, x1) = range(&all_x);
        let plot_w = WIDTH - LEFT - RIGHT;
        for (pi, panel) in self.panels.iter().enumerate() {
            let top = TOP + pi as f64 * (PANEL_H + GAP);
            let ys: Vec<f64> = panel
                .curves
                .iter()
                .flat_map(|c| c.points.iter().map(|q| q.1))
                .filter(|y| y.is_finite())
                .collect();
            let (y0, y1) = range(&ys);
            let px = |x: f64| LEFT + (tx(x) - x0) / (x1 - x0) * plot_w;
            let py = |y: f64| top + PANEL_H - (y - y0) / (y1 - y0) * PANEL_H;
            let _ = writeln!(
                s,
                r#"<rect x="{LEFT}" y="{top}" width="{plot_w}" height="{PANEL_H}" fill="none" stroke="black"/>"#
            );
            for t in ticks(y0, y1) {
                let y = py(t);
                let _ = writeln!(
                    s,
                    r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
                    LEFT + plot_w,
                    LEFT - 4.0,
                    y + 4.0,
                    tick_label(t)
                );
            }
            let xt: Vec<f64> = if self.log_x {
                (x0.ceil() as i32..=x1.floor() as i32).map(|d| 10f64.powi(d)).collect()
            } else {
                ticks(x0, x1)
            };
            for t in xt {
                let x = px(t);
                let _ = writeln!(
                    s,
                    r##"<line x1="{x:.2}" y1="{top}" x2="{x:.2}" y2="{:.2}" stroke="#ddd"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
                    top + PANEL_H,
                    top + PANEL_H + 14.0,
                    tick_label(t)
                );
            }
            let _ = writeln!(
                s,
                r#"<text transform="translate(16,{:.2}) rotate(-90)" text-anchor="middle">{}</text>"#,
                top + PANEL_H / 2.0,
                escape(&panel.y_label)
            );
            for (ci, curve) in panel.curves.iter().enumerate() {
                let color = PALETTE[ci % PALETTE.len()];
                let mut d = String::new();
                let mut pen_up = true;
                for &(x, y) in &curve.points {
                    if !(x.is_finite() && y.is_finite()) || (self.log_x && x <= 0.0) {
                        pen_up = true;
                        continue;
                    }
                    let _ = write!(d, "{}{:.2},{:.2} ", if pen_up { "M" } else { "L" }, px(x), py(y));
                    pen_up = false;
                }
                let _ = writeln!(
                    s,
                    r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.3"/>"#,
                    d.trim_end()
                );
                let ly = top + 14.0 + 16.0 * ci as f64;
                let lx = LEFT + plot_w + 10.0;
                let _ = writeln!(
                    s,
                    r#"<line x1="{lx}" y1="{:.2}" x2="{}" y2="{:.2}" stroke="{color}" stroke-width="2"/><text x="{}" y="{:.2}">{}</text>"#,
                    ly - 4.0,
                    lx + 18.0,
                    ly - 4.0,
                    lx + 22.0,
                    ly,
                    escape(&curve.label)
                );
            }
        }
        let last_bottom = TOP + self.panels.len() as f64 * (PANEL_H + GAP) - GAP;
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            LEFT + plot_w / 2.0,
            last_bottom + 32.0,
            escape(&self.x_label)
        );
        s.push_str("</svg>\n");
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_svg().as_bytes())
    }
}

fn range(v: &[f64]) -> (f64, f64) {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(lo.is_finite() && hi.is_finite()) {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 * lo.abs().max(1.0) {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.04 * (hi - lo);
    (lo - pad, hi + pad)
}

/// About five round tick values inside `[lo, hi]`.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-9 * step {
        out.push(if t.abs() < 1e-12 * step { 0.0 } else { t });
        t += step;
    }
    out
}

fn tick_label(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e5 || v.abs() < 1e-3) {
        format!("{v:.0e}")
    } else {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::describing::{sensitivity_harmonics, CgLpController};
    use crate::freq::{LinearControllerParams, PlantModel};

    #[test]
    fn atomic_write_replaces_and_leaves_no_temp() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/a.json");
        write_json(&p, &[1, 2]).unwrap();
        write_json(&p, &[3]).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "[\n  3\n]\n");
        let names: Vec<_> = std::fs::read_dir(dir.path().join("sub")).unwrap().collect();
        assert_eq!(names.len(), 1);
    }

    #[test]
    fn harmonic_csv_layout() {
        let (s, t) = sensitivity_harmonics(
            3,
            100.0,
            1.0,
            &CgLpController::reference_design(),
            &LinearControllerParams::robust_design(),
            &PlantModel::piezo_stage(),
        )
        .unwrap();
        let mut buf = Vec::new();
        write_harmonics_csv(&mut buf, &[s, t]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "freq_hz,n,mag_db,phase_deg,kappa,quantity");
        assert_eq!(lines.len(), 7);
        assert!(lines[1].ends_with("sensitivity"));
    }

    #[test]
    fn svg_is_deterministic_and_well_formed() {
        let xs = [1.0, 10.0, 100.0, 1000.0];
        let chart = LineChart::new("a < b", "f [Hz]", true)
            .panel("dB", vec![Curve::new("L", &xs, &[20.0, 0.0, -20.0, -40.0])])
            .panel("deg", vec![Curve::new("phase", &xs, &[-90.0, -120.0, f64::NAN, -180.0])]);
        let a = chart.to_svg();
        assert_eq!(a, chart.to_svg());
        assert!(a.starts_with("<svg") && a.trim_end().ends_with("</svg>"));
        assert!(a.contains("a &lt; b"));
        assert_eq!(a.matches("<path").count(), 2);
    }

    #[test]
    fn tick_values_are_round() {
        assert_eq!(ticks(0.0, 10.0), vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0]);
        assert_eq!(tick_label(0.5), "0.5");
        assert_eq!(tick_label(1e6), "1e6");
    }
}
