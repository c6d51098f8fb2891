//! Standalone SVG figures.

use std::fmt::Write as _;

use crate::analysis::{AdvantageGrid, BoundaryFit, DecayFit, QuantityRow, SeBand};

const W: f64 = 640.0;
const H: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 30.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct Canvas {
    body: String,
    x: (f64, f64),
    y: (f64, f64),
}

impl Canvas {
    fn new(title: &str, xlabel: &str, ylabel: &str, x: (f64, f64), y: (f64, f64)) -> Self {
        let y = if y.1 - y.0 < 1e-12 { (y.0 - 0.5, y.1 + 0.5) } else { y };
        let mut c = Canvas { body: String::new(), x, y };
        let (pw, ph) = (W - LEFT - RIGHT, H - TOP - BOTTOM);
        let _ =
            write!(c.body, r##"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>"##);
        let _ =
            write!(c.body, r#"<text x="{}" y="24" text-anchor="middle" font-size="16">{}</text>"#, W / 2.0, esc(title));
        let _ = write!(
            c.body,
            r#"<text x="{}" y="{}" text-anchor="middle" font-size="13">{}</text>"#,
            LEFT + pw / 2.0,
            H - 16.0,
            esc(xlabel)
        );
        let _ = write!(
            c.body,
            r#"<text x="18" y="{}" text-anchor="middle" font-size="13" transform="rotate(-90 18 {})">{}</text>"#,
            TOP + ph / 2.0,
            TOP + ph / 2.0,
            esc(ylabel)
        );
        for k in 0..=5 {
            let fx = x.0 + (x.1 - x.0) * k as f64 / 5.0;
            let fy = c.y.0 + (c.y.1 - c.y.0) * k as f64 / 5.0;
            let (px, py) = (c.px(fx), c.py(fy));
            let _ = write!(
                c.body,
                r#"<text x="{px:.1}" y="{}" text-anchor="middle" font-size="11">{}</text><text x="{}" y="{:.1}" text-anchor="end" font-size="11">{}</text>"#,
                H - BOTTOM + 16.0,
                tick(fx),
                LEFT - 6.0,
                py + 4.0,
                tick(fy)
            );
        }
        c
    }

    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (W - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        H - BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (H - TOP - BOTTOM)
    }

    fn polyline(&mut self, pts: &[(f64, f64)], color: &str, dash: Option<&str>, width: f64) {
        if pts.len() < 2 {
            return;
        }
        let d: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", self.px(x), self.py(y))).collect();
        let dash = dash.map(|d| format!(r#" stroke-dasharray="{d}""#)).unwrap_or_default();
        let _ = write!(
            self.body,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="{width}"{dash}/>"#,
            d.join(" ")
        );
    }

    fn point(&mut self, x: f64, y: f64, err: f64, color: &str) {
        let (px, py) = (self.px(x), self.py(y));
        if err > 0.0 {
            let _ = write!(
                self.body,
                r#"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="{color}"/>"#,
                self.py(y - err),
                self.py(y + err)
            );
        }
        let _ = write!(self.body, r#"<circle cx="{px:.2}" cy="{py:.2}" r="3.5" fill="{color}"/>"#);
    }

    fn text(&mut self, x: f64, y: f64, s: &str) {
        let _ = write!(self.body, r#"<text x="{x:.1}" y="{y:.1}" font-size="12">{}</text>"#, esc(s));
    }

    fn finish(self) -> String {
        wrap(&self.body)
    }
}

fn wrap(body: &str) -> String {
    format!(
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif"><rect width="100%" height="100%" fill="white"/>{body}</svg>
"#
    )
}

fn tick(v: f64) -> String {
    if v.abs() >= 1000.0 {
        format!("{v:.0}")
    } else if v.abs() >= 10.0 {
        format!("{v:.1}")
    } else {
        format!("{v:.2}")
    }
}

/// Placeholder for empty selections.
pub fn empty_plot(title: &str) -> String {
    wrap(&format!(
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="16">{}: no data</text>"#,
        W / 2.0,
        H / 2.0,
        esc(title)
    ))
}

fn bounds(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) =
        vals.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if lo > hi {
        (0.0, 1.0)
    } else {
        let pad = 0.05 * (hi - lo).max(1e-9);
        (lo - pad, hi + pad)
    }
}

/// One series of `(p, mean, standard error)` points.
pub struct Series<'a> {
    pub label: &'a str,
    pub points: Vec<(f64, f64, f64)>,
}

/// Score against corruption ratio with an optional fitted decay curve.
pub fn decay_plot(title: &str, series: &[Series], fit: Option<&DecayFit>) -> String {
    if series.iter().all(|s| s.points.is_empty()) {
        return empty_plot(title);
    }
    let mut ys: Vec<f64> = series.iter().flat_map(|s| s.points.iter().flat_map(|p| [p.1 - p.2, p.1 + p.2])).collect();
    if let Some(f) = fit {
        ys.extend((0..=50).map(|k| f.predict(k as f64 / 50.0)));
    }
    let mut c = Canvas::new(title, "corruption ratio p", "score", (0.0, 1.0), bounds(ys.into_iter()));
    for (k, s) in series.iter().enumerate() {
        let col = PALETTE[k % PALETTE.len()];
        for &(p, m, e) in &s.points {
            c.point(p, m, e, col);
        }
        c.text(LEFT + 10.0, TOP + 18.0 + 16.0 * k as f64, &format!("● {}", s.label));
    }
    if let Some(f) = fit {
        let curve: Vec<(f64, f64)> = (0..=100).map(|k| k as f64 / 100.0).map(|p| (p, f.predict(p))).collect();
        c.polyline(&curve, "#000", None, 1.5);
        let y = TOP + 18.0 + 16.0 * series.len() as f64;
        c.text(LEFT + 10.0, y, &format!("a = {:.4}, λ = {:.4}, R² = {:.4}", f.a, f.lambda, f.r_squared));
    }
    c.finish()
}

fn diverging(v: f64, scale: f64) -> String {
    let t = (v / scale).clamp(-1.0, 1.0);
    let (r, g, b) = if t >= 0.0 {
        (255.0 * (1.0 - t) + 178.0 * t, 255.0 * (1.0 - t) + 24.0 * t, 255.0 * (1.0 - t) + 43.0 * t)
    } else {
        let s = -t;
        (255.0 * (1.0 - s) + 33.0 * s, 255.0 * (1.0 - s) + 102.0 * s, 255.0 * (1.0 - s) + 172.0 * s)
    };
    format!("rgb({:.0},{:.0},{:.0})", r, g, b)
}

fn edges(grid: &[f64]) -> Vec<f64> {
    let n = grid.len();
    if n == 1 {
        return vec![grid[0] - 0.05, grid[0] + 0.05];
    }
    let mut e = vec![grid[0] - (grid[1] - grid[0]) / 2.0];
    e.extend(grid.windows(2).map(|w| (w[0] + w[1]) / 2.0));
    e.push(grid[n - 1] + (grid[n - 1] - grid[n - 2]) / 2.0);
    e
}

/// Advantage heatmap (red positive, blue negative) with zero contour,
/// fitted boundary and SE bands.
pub fn heatmap_plot(
    title: &str,
    grid: &AdvantageGrid,
    contour: Option<&[[f64; 2]]>,
    fit: Option<&BoundaryFit>,
    bands: &[SeBand],
) -> String {
    if grid.p_grid.is_empty() || grid.q_grid.is_empty() {
        return empty_plot(title);
    }
    let (pe, qe) = (edges(&grid.p_grid), edges(&grid.q_grid));
    let mut c = Canvas::new(
        title,
        "corruption ratio p",
        "imputation noise q",
        (pe[0], pe[pe.len() - 1]),
        (qe[0], qe[qe.len() - 1]),
    );
    let scale = grid.mean.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
    for i in 0..grid.p_grid.len() {
        for j in 0..grid.q_grid.len() {
            let (x0, x1) = (c.px(pe[i]), c.px(pe[i + 1]));
            let (y0, y1) = (c.py(qe[j + 1]), c.py(qe[j]));
            let _ = write!(
                c.body,
                r#"<rect x="{x0:.2}" y="{y0:.2}" width="{:.2}" height="{:.2}" fill="{}"/><text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="10">{:.3}</text>"#,
                x1 - x0,
                y1 - y0,
                diverging(grid.mean[i][j], scale),
                (x0 + x1) / 2.0,
                (y0 + y1) / 2.0 + 3.0,
                grid.mean[i][j]
            );
        }
    }
    let diag = [
        (pe[0].max(qe[0]), pe[0].max(qe[0])),
        (pe[pe.len() - 1].min(qe[qe.len() - 1]), pe[pe.len() - 1].min(qe[qe.len() - 1])),
    ];
    c.polyline(&diag, "#888", Some("2,3"), 1.0);
    match contour {
        Some(pts) if !pts.is_empty() => {
            let pts: Vec<(f64, f64)> = pts.iter().map(|p| (p[0], p[1])).collect();
            c.polyline(&pts, "#000", Some("6,4"), 2.0);
        }
        _ => c.text(LEFT + 10.0, TOP + 18.0, "no sign change"),
    }
    if let Some(f) = fit {
        let lo = grid.p_grid[0];
        let hi = grid.p_grid[grid.p_grid.len() - 1];
        let curve: Vec<(f64, f64)> =
            (0..=100).map(|k| lo + (hi - lo) * k as f64 / 100.0).map(|p| (p, f.eval(p))).collect();
        c.polyline(&curve, "#2ca02c", None, 2.0);
        c.text(
            LEFT + 10.0,
            H - BOTTOM - 10.0,
            &format!("{:?} boundary, {:?}, area {:+.3}", f.family, f.classification, f.signed_area),
        );
    }
    for b in bands {
        for side in [&b.lower, &b.upper] {
            let pts: Vec<(f64, f64)> = side.iter().map(|p| (p[0], p[1])).collect();
            c.polyline(&pts, "#555", Some("1,3"), 1.0);
        }
    }
    c.finish()
}

/// Score against dataset size per corruption level, with the clean-data
/// benchmark dashed.
pub fn quantity_plot(title: &str, rows: &[QuantityRow], benchmark: Option<f64>) -> String {
    if rows.iter().all(|r| r.curve.is_empty()) {
        return empty_plot(title);
    }
    let xs = bounds(rows.iter().flat_map(|r| r.curve.iter().map(|c| c.0)));
    let mut ys: Vec<f64> = rows.iter().flat_map(|r| r.curve.iter().flat_map(|c| [c.1 - c.2, c.1 + c.2])).collect();
    ys.extend(benchmark);
    let mut c = Canvas::new(title, "dataset size", "score", xs, bounds(ys.into_iter()));
    for (k, r) in rows.iter().enumerate() {
        let col = PALETTE[k % PALETTE.len()];
        let pts: Vec<(f64, f64)> = r.curve.iter().map(|c| (c.0, c.1)).collect();
        c.polyline(&pts, col, None, 1.5);
        for &(s, m, e) in &r.curve {
            c.point(s, m, e, col);
        }
        c.text(LEFT + 10.0, TOP + 18.0 + 16.0 * k as f64, &format!("● p = {}", r.p));
    }
    if let Some(b) = benchmark {
        c.polyline(&[(xs.0, b), (xs.1, b)], "#000", Some("6,4"), 1.5);
    }
    c.finish()
}

/// Per-episode returns of one or more training runs.
pub fn training_curves_plot(title: &str, curves: &[(String, Vec<f64>)]) -> String {
    if curves.iter().all(|c| c.1.is_empty()) {
        return empty_plot(title);
    }
    let n = curves.iter().map(|c| c.1.len()).max().unwrap_or(1);
    let ys = bounds(curves.iter().flat_map(|c| c.1.iter().copied()));
    let mut c = Canvas::new(title, "episode", "return", (1.0, (n as f64).max(2.0)), ys);
    for (k, (label, v)) in curves.iter().enumerate() {
        let pts: Vec<(f64, f64)> = v.iter().enumerate().map(|(i, &y)| ((i + 1) as f64, y)).collect();
        c.polyline(&pts, PALETTE[k % PALETTE.len()], None, 1.5);
        c.text(LEFT + 10.0, TOP + 18.0 + 16.0 * k as f64, &format!("— {label}"));
    }
    c.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_inputs_give_placeholder() {
        assert!(decay_plot("d", &[], None).contains("no data"));
        assert!(training_curves_plot("t", &[]).contains("no data"));
    }

    #[test]
    fn zero_grid_notes_no_sign_change() {
        let g = AdvantageGrid::from_fn(&[0.0, 0.5, 1.0], &[0.0, 1.0], |_, _| 0.0, 0.0);
        let svg = heatmap_plot("h", &g, None, None, &[]);
        assert!(svg.contains("no sign change") && svg.starts_with("<svg"));
    }
}
