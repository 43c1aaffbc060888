//! Minimal self-contained SVG rendering of the Monte Carlo histogram.

use std::fmt::Write;

use nlinterf::estimator::{GaussianOverlay, Histogram};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;

pub fn histogram_svg(hist: &Histogram<f64>, overlay: &GaussianOverlay<f64>) -> String {
    let x0 = hist.edges[0];
    let x1 = hist.edges[hist.edges.len() - 1];
    let span = if x1 > x0 { x1 - x0 } else { 1.0 };
    let peak = overlay.density.iter().chain(&overlay.gaussian_density).cloned().fold(0.0, f64::max);
    let peak = if peak > 0.0 { peak } else { 1.0 };
    let px = |x: f64| MARGIN + (x - x0) / span * (WIDTH - 2.0 * MARGIN);
    let py = |y: f64| HEIGHT - MARGIN - y / peak * (HEIGHT - 2.0 * MARGIN);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (i, &d) in overlay.density.iter().enumerate() {
        let (l, r) = (px(hist.edges[i]), px(hist.edges[i + 1]));
        let top = py(d);
        let _ = writeln!(
            s,
            r##"<rect x="{l:.2}" y="{top:.2}" width="{:.2}" height="{:.2}" fill="#9ab" stroke="#456" stroke-width="0.5"/>"##,
            (r - l).max(0.5),
            (HEIGHT - MARGIN - top).max(0.0)
        );
    }
    let points: Vec<String> =
        overlay.bin_centers.iter().zip(&overlay.gaussian_density).map(|(&x, &g)| format!("{:.2},{:.2}", px(x), py(g))).collect();
    let _ = writeln!(s, r##"<polyline points="{}" fill="none" stroke="#c33" stroke-width="1.5"/>"##, points.join(" "));
    let base = HEIGHT - MARGIN;
    let _ = writeln!(s, r#"<line x1="{MARGIN}" y1="{base}" x2="{}" y2="{base}" stroke="black"/>"#, WIDTH - MARGIN);
    let _ = writeln!(s, r#"<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{base}" stroke="black"/>"#);
    let _ = writeln!(s, r#"<text x="{MARGIN}" y="{}" font-size="12">{x0:.6}</text>"#, base + 20.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="12" text-anchor="end">{x1:.6}</text>"#, WIDTH - MARGIN, base + 20.0);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="13" text-anchor="middle">D (ps/(nm km))</text>"#,
        WIDTH / 2.0,
        HEIGHT - 10.0
    );
    s.push_str("</svg>\n");
    s
}
