//! Minimal log-log SVG plots written by hand.

use std::fmt::Write as _;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 60.0;

pub struct Series {
    pub label: String,
    pub colour: &'static str,
    pub dashed: bool,
    pub points: Vec<(f64, f64)>,
}

/// Reference line `y = c x^{slope}` through `(x0, y0)`, sampled at `xs`.
pub fn reference(label: String, colour: &'static str, slope: f64, anchor: (f64, f64), xs: (f64, f64)) -> Series {
    let (x0, y0) = anchor;
    let at = |x: f64| y0 * (x / x0).powf(slope);
    Series {
        label,
        colour,
        dashed: true,
        points: vec![(xs.0, at(xs.0)), (xs.1, at(xs.1))],
    }
}

pub fn loglog_svg(title: &str, series: &[Series]) -> String {
    let finite = |(x, y): &(f64, f64)| *x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite();
    let data: Vec<(f64, f64)> = series
        .iter()
        .filter(|s| !s.dashed)
        .flat_map(|s| s.points.iter().copied().filter(finite))
        .collect();
    let (mut x_lo, mut x_hi, mut y_lo, mut y_hi) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for (x, y) in &data {
        let (lx, ly) = (x.log10(), y.log10());
        x_lo = x_lo.min(lx);
        x_hi = x_hi.max(lx);
        y_lo = y_lo.min(ly);
        y_hi = y_hi.max(ly);
    }
    if data.is_empty() {
        (x_lo, x_hi, y_lo, y_hi) = (0.0, 1.0, 0.0, 1.0);
    }
    let (x_lo, x_hi) = (x_lo.floor(), x_hi.ceil().max(x_lo.floor() + 1.0));
    let (y_lo, y_hi) = (y_lo.floor(), y_hi.ceil().max(y_lo.floor() + 1.0));
    let px = |lx: f64| MARGIN + (lx - x_lo) / (x_hi - x_lo) * (WIDTH - 2.0 * MARGIN);
    let py = |ly: f64| HEIGHT - MARGIN - (ly - y_lo) / (y_hi - y_lo) * (HEIGHT - 2.0 * MARGIN);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="20" text-anchor="middle">{title}</text>"#, WIDTH / 2.0);
    let _ = writeln!(
        svg,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        WIDTH - 2.0 * MARGIN,
        HEIGHT - 2.0 * MARGIN
    );
    let x_step = ((x_hi - x_lo) / 8.0).ceil().max(1.0);
    let mut e = x_lo;
    while e <= x_hi + 1e-9 {
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">1e{e}</text>"#,
            px(e),
            HEIGHT - MARGIN + 16.0
        );
        e += x_step;
    }
    let y_step = ((y_hi - y_lo) / 8.0).ceil().max(1.0);
    let mut e = y_lo;
    while e <= y_hi + 1e-9 {
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">1e{e}</text>"#,
            MARGIN - 6.0,
            py(e) + 4.0
        );
        e += y_step;
    }
    let inside = |lx: f64, ly: f64| lx >= x_lo && lx <= x_hi && ly >= y_lo && ly <= y_hi;
    for (k, s) in series.iter().enumerate() {
        let mut path = String::new();
        let mut pen_down = false;
        for (x, y) in s.points.iter().filter(|p| finite(p)) {
            let (lx, ly) = (x.log10(), y.log10());
            if !inside(lx, ly) && !s.dashed {
                pen_down = false;
                continue;
            }
            let cmd = if pen_down { 'L' } else { 'M' };
            let _ = write!(path, "{cmd}{:.2},{:.2} ", px(lx), py(ly));
            pen_down = true;
        }
        let dash = if s.dashed { r#" stroke-dasharray="6,4""# } else { "" };
        let _ = writeln!(
            svg,
            r#"<path d="{path}" fill="none" stroke="{}" stroke-width="1.5"{dash}/>"#,
            s.colour
        );
        let ly = MARGIN + 16.0 + 16.0 * k as f64;
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{ly:.1}" fill="{}">{}</text>"#,
            WIDTH - MARGIN - 8.0 - 0.0,
            s.colour,
            s.label
        );
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn produces_paths_and_labels() {
        let pts: Vec<(f64, f64)> = (0..50).map(|k| {
            let x = 10f64.powf(-2.0 + k as f64 * 0.1);
            (x, 1.0 / (1.0 + x * x))
        }).collect();
        let s = vec![
            Series { label: "u".into(), colour: "black", dashed: false, points: pts },
            reference("slope -2".into(), "red", -2.0, (10.0, 0.01), (1.0, 1000.0)),
        ];
        let svg = loglog_svg("test", &s);
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<path").count(), 2);
        assert!(svg.contains("slope -2"));
    }
}
