//! Static SVG 1.1 dose-response plot: posterior median line over a shaded
//! 2.5%-97.5% band, assembled from path elements.

use std::fmt::Write;

use longidose_core::dose_response::DoseSummary;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 24.0;
const BOTTOM: f64 = 56.0;
const TICKS: usize = 5;

struct Scale {
    lo: f64,
    hi: f64,
    from: f64,
    to: f64,
}

impl Scale {
    /// Pads a degenerate range so a constant curve sits mid-axis.
    fn new(lo: f64, hi: f64, from: f64, to: f64) -> Self {
        let (lo, hi) = if hi > lo {
            (lo, hi)
        } else {
            let pad = if lo == 0.0 { 1.0 } else { 0.05 * lo.abs() };
            (lo - pad, hi + pad)
        };
        Scale { lo, hi, from, to }
    }

    fn map(&self, v: f64) -> f64 {
        self.from + (v - self.lo) / (self.hi - self.lo) * (self.to - self.from)
    }

    fn ticks(&self) -> Vec<f64> {
        (0..TICKS)
            .map(|i| self.lo + (self.hi - self.lo) * i as f64 / (TICKS - 1) as f64)
            .collect()
    }
}

fn label(v: f64) -> String {
    let s = format!("{v:.3}");
    if s == "-0.000" { "0.000".into() } else { s }
}

pub fn render_svg(summary: &[DoseSummary], x_label: &str, y_label: &str) -> String {
    let doses: Vec<f64> = summary.iter().map(|s| s.dose).collect();
    let (dlo, dhi) = min_max(doses.iter().copied());
    let (ylo, yhi) = min_max(summary.iter().flat_map(|s| [s.q025, s.q975, s.median]));
    let sx = Scale::new(dlo, dhi, LEFT, WIDTH - RIGHT);
    let sy = Scale::new(ylo, yhi, HEIGHT - BOTTOM, TOP);

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r##"<path d="M0 0H{WIDTH}V{HEIGHT}H0Z" fill="#ffffff"/>"##);

    // band: upper edge left to right, lower edge back
    let mut band = String::new();
    for (i, s) in summary.iter().enumerate() {
        let _ = write!(band, "{}{:.3} {:.3}", if i == 0 { "M" } else { "L" }, sx.map(s.dose), sy.map(s.q975));
    }
    for s in summary.iter().rev() {
        let _ = write!(band, "L{:.3} {:.3}", sx.map(s.dose), sy.map(s.q025));
    }
    band.push('Z');
    let _ = writeln!(
        svg,
        r##"<path class="band" d="{band}" fill="#9ecae1" fill-opacity="0.6" stroke="#6baed6" stroke-width="1"/>"##
    );

    let mut line = String::new();
    for (i, s) in summary.iter().enumerate() {
        let _ = write!(line, "{}{:.3} {:.3}", if i == 0 { "M" } else { "L" }, sx.map(s.dose), sy.map(s.median));
    }
    let _ = writeln!(
        svg,
        r##"<path class="median" d="{line}" fill="none" stroke="#08519c" stroke-width="2"/>"##
    );
    for s in summary {
        let (x, y) = (sx.map(s.dose), sy.map(s.median));
        let _ = writeln!(
            svg,
            r##"<path class="point" d="M{:.3} {:.3}h6v6h-6Z" fill="#08519c"/>"##,
            x - 3.0,
            y - 3.0
        );
    }

    let (x0, x1, y0, y1) = (LEFT, WIDTH - RIGHT, HEIGHT - BOTTOM, TOP);
    let mut axes = format!("M{x0:.3} {y1:.3}V{y0:.3}H{x1:.3}");
    for t in sx.ticks() {
        let _ = write!(axes, "M{:.3} {y0:.3}v6", sx.map(t));
    }
    for t in sy.ticks() {
        let _ = write!(axes, "M{x0:.3} {:.3}h-6", sy.map(t));
    }
    let _ = writeln!(svg, r##"<path class="axes" d="{axes}" fill="none" stroke="#000000" stroke-width="1"/>"##);
    for t in sx.ticks() {
        let _ = writeln!(
            svg,
            r#"<text x="{:.3}" y="{:.3}" font-family="sans-serif" font-size="11" text-anchor="middle">{}</text>"#,
            sx.map(t),
            y0 + 20.0,
            label(t)
        );
    }
    for t in sy.ticks() {
        let _ = writeln!(
            svg,
            r#"<text x="{:.3}" y="{:.3}" font-family="sans-serif" font-size="11" text-anchor="end">{}</text>"#,
            x0 - 10.0,
            sy.map(t) + 4.0,
            label(t)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.3}" y="{:.3}" font-family="sans-serif" font-size="13" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{:.3}" font-family="sans-serif" font-size="13" text-anchor="middle" transform="rotate(-90 18 {:.3})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(y_label)
    );
    svg.push_str("</svg>\n");
    svg
}

fn min_max(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(dose: f64, lo: f64, mid: f64, hi: f64) -> DoseSummary {
        DoseSummary { dose, mean: mid, var: 0.0, median: mid, q025: lo, q975: hi }
    }

    #[test]
    fn constant_band_is_flat() {
        let s = [row(1.0, 2.0, 2.0, 2.0), row(2.0, 2.0, 2.0, 2.0)];
        let svg = render_svg(&s, "dose", "APO");
        let band = svg.lines().find(|l| l.contains(r#"class="band""#)).unwrap();
        // both edges land on the same y coordinate
        assert!(band.contains("M80.000 184.000L616.000 184.000L616.000 184.000L80.000 184.000Z"), "{band}");
    }

    #[test]
    fn single_dose_renders() {
        let svg = render_svg(&[row(3.0, 1.0, 2.0, 3.0)], "d", "y");
        assert!(svg.contains(r#"class="median""#));
        assert!(!svg.contains("NaN"));
    }
}
