//! Static scatter-plus-hull pictures.
//!
//! Output depends only on the input coordinates: fixed canvas, fixed
//! number formatting, no timestamps.

use std::fmt::Write;

const SIZE: f64 = 480.0;
const MARGIN: f64 = 40.0;

/// Point in the plane.
pub type P2 = [f64; 2];

/// Scatter of `points` with the closed polygon `hull`, axes through the
/// origin when it is in view, a frame otherwise.
pub fn render_svg(points: &[P2], hull: &[P2]) -> String {
    let all: Vec<P2> = points.iter().chain(hull).copied().filter(|p| p[0].is_finite() && p[1].is_finite()).collect();
    let (lo, hi) = bounds(&all);
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]);
    let scale = (SIZE - 2.0 * MARGIN) / span;
    let to_px = |p: P2| [MARGIN + (p[0] - lo[0]) * scale, SIZE - MARGIN - (p[1] - lo[1]) * scale];

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#);
    let _ = writeln!(s, r#"<rect width="{SIZE}" height="{SIZE}" fill="white"/>"#);
    let origin = to_px([0.0, 0.0]);
    let (x0, x1) = (MARGIN, SIZE - MARGIN);
    if (x0..=x1).contains(&origin[1]) {
        let _ = writeln!(s, r#"<line class="axis" x1="{}" y1="{}" x2="{}" y2="{}" stroke="gray"/>"#, num(x0), num(origin[1]), num(x1), num(origin[1]));
    }
    if (x0..=x1).contains(&origin[0]) {
        let _ = writeln!(s, r#"<line class="axis" x1="{}" y1="{}" x2="{}" y2="{}" stroke="gray"/>"#, num(origin[0]), num(x0), num(origin[0]), num(x1));
    }
    if !(x0..=x1).contains(&origin[0]) || !(x0..=x1).contains(&origin[1]) {
        let w = x1 - x0;
        let _ = writeln!(s, r#"<rect class="frame" x="{}" y="{}" width="{}" height="{}" fill="none" stroke="gray"/>"#, num(x0), num(x0), num(w), num(w));
    }
    if !hull.is_empty() {
        let pts: Vec<String> = hull.iter().map(|&p| to_px(p)).map(|q| format!("{},{}", num(q[0]), num(q[1]))).collect();
        let _ = writeln!(s, r#"<polygon class="hull" points="{}" fill="none" stroke="black"/>"#, pts.join(" "));
    }
    for &p in points {
        let q = to_px(p);
        let _ = writeln!(s, r#"<circle cx="{}" cy="{}" r="2.5" fill="crimson"/>"#, num(q[0]), num(q[1]));
    }
    s.push_str("</svg>\n");
    s
}

fn num(x: f64) -> String {
    let r = format!("{x:.3}");
    if r == "-0.000" { "0.000".into() } else { r }
}

fn bounds(points: &[P2]) -> (P2, P2) {
    if points.is_empty() {
        return ([-1.0, -1.0], [1.0, 1.0]);
    }
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in points {
        for i in 0..2 {
            lo[i] = lo[i].min(p[i]);
            hi[i] = hi[i].max(p[i]);
        }
    }
    let pad = 0.05 * (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-9);
    ([lo[0] - pad, lo[1] - pad], [hi[0] + pad, hi[1] + pad])
}

/// Counterclockwise convex hull (monotone chain), collinear points dropped.
pub fn convex_hull(points: &[P2]) -> Vec<P2> {
    let mut p: Vec<P2> = points.to_vec();
    p.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    p.dedup();
    if p.len() < 3 {
        return p;
    }
    let cross = |o: P2, a: P2, b: P2| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    let mut h: Vec<P2> = Vec::with_capacity(2 * p.len());
    for pass in 0..2 {
        let start = h.len();
        let iter: Box<dyn Iterator<Item = &P2>> = if pass == 0 { Box::new(p.iter()) } else { Box::new(p.iter().rev()) };
        for &q in iter {
            while h.len() >= start + 2 && cross(h[h.len() - 2], h[h.len() - 1], q) <= 0.0 {
                h.pop();
            }
            h.push(q);
        }
        h.pop();
    }
    h
}

/// Vertices ordered by angle about their centroid.
pub fn angular_order(points: &[P2]) -> Vec<P2> {
    let n = points.len().max(1) as f64;
    let c = [points.iter().map(|p| p[0]).sum::<f64>() / n, points.iter().map(|p| p[1]).sum::<f64>() / n];
    let mut v = points.to_vec();
    v.sort_by(|a, b| (a[1] - c[1]).atan2(a[0] - c[0]).total_cmp(&(b[1] - c[1]).atan2(b[0] - c[0])));
    v
}

/// `ξ - mean(ξ)`: the component in the plane `ξ_1 + ξ_2 + ξ_3 = 0`.
pub fn trace_zero(xi: [f64; 3]) -> [f64; 3] {
    let m = (xi[0] + xi[1] + xi[2]) / 3.0;
    [xi[0] - m, xi[1] - m, xi[2] - m]
}

/// Coordinates of `trace_zero(ξ)` in the orthonormal basis
/// `(1, -1, 0)/√2`, `(1, 1, -2)/√6` of that plane.
pub fn project_chamber(xi: [f64; 3]) -> P2 {
    let t = trace_zero(xi);
    [(t[0] - t[1]) / 2f64.sqrt(), (t[0] + t[1] - 2.0 * t[2]) / 6f64.sqrt()]
}

/// Plot coordinates of a chamber vector: as is for `d = 2`, projected for `d = 3`.
pub fn chamber_point(xi: &[f64]) -> Option<P2> {
    match xi {
        [a, b] => Some([*a, *b]),
        [a, b, c] => Some(project_chamber([*a, *b, *c])),
        _ => None,
    }
}
