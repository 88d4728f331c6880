//! CSV and minimal SVG output for one-dimensional sweeps.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use ringmod_core::bounds::continuity_bounds;
use ringmod_core::special::a2_objective;
use serde::Serialize;

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sweep {
    pub name: String,
    pub x: String,
    pub y: String,
    pub points: Vec<(f64, f64)>,
}

fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count).map(|k| (lo.ln() + (hi.ln() - lo.ln()) * k as f64 / (count - 1) as f64).exp()).collect(),
    }
}

/// `g(t) = log Ψ₂(t) − log t` on a log-spaced grid.
pub fn a2_sweep(lo: f64, hi: f64, count: usize) -> Result<Sweep> {
    if !(lo > 0.0 && hi >= lo) {
        return Err(HarnessError::Config(format!("sweep range must satisfy 0 < from <= to, got {lo}..{hi}")));
    }
    let points = log_grid(lo, hi, count)
        .into_iter()
        .map(|t| Ok((t, a2_objective(t)?)))
        .collect::<std::result::Result<Vec<_>, ringmod_core::Error>>()?;
    Ok(Sweep { name: "a2".into(), x: "t".into(), y: "g".into(), points })
}

/// Modulus-of-continuity bound against `|x₁ − x₀|` on a log-spaced grid.
#[allow(clippy::too_many_arguments)]
pub fn continuity_sweep(
    n: usize,
    gamma: f64,
    big_m: f64,
    r0: f64,
    dist: f64,
    lo: f64,
    hi: f64,
    count: usize,
) -> Result<Sweep> {
    if !(lo > 0.0 && hi >= lo) {
        return Err(HarnessError::Config(format!("sweep range must satisfy 0 < from <= to, got {lo}..{hi}")));
    }
    let points = log_grid(lo, hi, count)
        .into_iter()
        .map(|d| Ok((d, continuity_bounds(n, gamma, big_m, r0, dist, d)?.value)))
        .collect::<std::result::Result<Vec<_>, ringmod_core::Error>>()?;
    Ok(Sweep { name: "continuity".into(), x: "d".into(), y: "bound".into(), points })
}

impl Sweep {
    pub fn to_csv(&self) -> String {
        let mut s = format!("{},{}\n", self.x, self.y);
        for (x, y) in &self.points {
            let _ = writeln!(s, "{x},{y}");
        }
        s
    }

    /// One polyline with axes and labels; x is drawn on a log scale.
    pub fn to_svg(&self) -> String {
        let (w, h, pad) = (640.0, 400.0, 50.0);
        let mut s = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n"
        );
        let _ = writeln!(
            s,
            "<line x1=\"{pad}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"black\"/>\n<line x1=\"{pad}\" y1=\"{pad}\" x2=\"{pad}\" y2=\"{y0}\" stroke=\"black\"/>",
            y0 = h - pad,
            x1 = w - pad
        );
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{} (log scale)</text>",
            w / 2.0,
            h - 10.0,
            self.x
        );
        let _ = writeln!(
            s,
            "<text x=\"15\" y=\"{}\" transform=\"rotate(-90 15 {})\" text-anchor=\"middle\">{}</text>",
            h / 2.0,
            h / 2.0,
            self.y
        );
        let pts: Vec<(f64, f64)> =
            self.points.iter().filter(|(x, y)| *x > 0.0 && y.is_finite()).map(|&(x, y)| (x.ln(), y)).collect();
        if pts.len() >= 2 {
            let (xmin, xmax) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, p| (a.0.min(p.0), a.1.max(p.0)));
            let (ymin, ymax) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, p| (a.0.min(p.1), a.1.max(p.1)));
            let sx = |x: f64| pad + (x - xmin) / (xmax - xmin).max(f64::MIN_POSITIVE) * (w - 2.0 * pad);
            let sy = |y: f64| h - pad - (y - ymin) / (ymax - ymin).max(f64::MIN_POSITIVE) * (h - 2.0 * pad);
            let coords: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
            let _ = writeln!(
                s,
                "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\" points=\"{}\"/>",
                coords.join(" ")
            );
            let _ = writeln!(s, "<text x=\"{pad}\" y=\"{}\" font-size=\"11\">{ymax:.4}</text>", pad - 5.0);
            let _ = writeln!(s, "<text x=\"{pad}\" y=\"{}\" font-size=\"11\">{ymin:.4}</text>", h - pad + 15.0);
        }
        s.push_str("</svg>\n");
        s
    }
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| HarnessError::io(path, e))?;
    f.write_all(contents.as_bytes()).map_err(|e| HarnessError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_sweep_is_header_only() {
        let s = a2_sweep(1.001, 1e3, 0).unwrap();
        assert_eq!(s.to_csv(), "t,g\n");
        assert!(s.to_svg().ends_with("</svg>\n"));
    }

    #[test]
    fn a2_sweep_rows() {
        let s = a2_sweep(1.001, 1e3, 50).unwrap();
        let csv = s.to_csv();
        assert_eq!(csv.lines().count(), 51);
        assert!(s.points.iter().all(|&(_, g)| g < std::f64::consts::PI));
        assert!(s.to_svg().contains("<polyline"));
    }

    #[test]
    fn continuity_rows_decrease() {
        let s = continuity_sweep(2, 1.0, 3.0, 1.0, 1.0, 1e-12, 1e-1, 30).unwrap();
        assert_eq!(s.to_csv().lines().next(), Some("d,bound"));
        assert!(s.points.windows(2).all(|w| w[1].1 > w[0].1));
        assert!(continuity_sweep(2, 1.0, 3.0, 1.0, 1.0, 0.5, 2.0, 5).is_err());
    }
}
