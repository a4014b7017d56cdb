//! Minimal self-contained SVG panels.

use std::fmt::Write;

use glvar::vortex::VortexDisk;

const SIZE: f64 = 400.0;
const MARGIN: f64 = 40.0;

/// Row-major node samples (`i` fastest) on a rectangle.
pub struct Raster<'a> {
    pub nx: usize,
    pub ny: usize,
    pub values: &'a [f64],
    /// `[x0, y0, x1, y1]`.
    pub bounds: [f64; 4],
}

fn header(title: &str, width: f64, height: f64) -> String {
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#, w = width, h = height);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, width / 2.0, escape(title));
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Sequential blue-yellow ramp for `t` in `[0, 1]`.
fn ramp(t: f64) -> (u8, u8, u8) {
    let t = t.clamp(0.0, 1.0);
    let stops = [(0.0, (48, 18, 59)), (0.25, (65, 105, 225)), (0.5, (40, 180, 160)), (0.75, (170, 220, 50)), (1.0, (250, 235, 35))];
    for w in stops.windows(2) {
        let ((t0, c0), (t1, c1)) = (w[0], w[1]);
        if t <= t1 {
            let u = (t - t0) / (t1 - t0);
            let m = |a: u8, b: u8| (a as f64 + u * (b as f64 - a as f64)).round() as u8;
            return (m(c0.0, c1.0), m(c0.1, c1.1), m(c0.2, c1.2));
        }
    }
    stops[4].1
}

/// Cyclic hue for a phase in `(-pi, pi]`.
fn hue(phase: f64) -> (u8, u8, u8) {
    let h = (phase / std::f64::consts::TAU).rem_euclid(1.0) * 6.0;
    let x = 1.0 - (h % 2.0 - 1.0).abs();
    let (r, g, b) = match h as u32 {
        0 => (1.0, x, 0.0),
        1 => (x, 1.0, 0.0),
        2 => (0.0, 1.0, x),
        3 => (0.0, x, 1.0),
        4 => (x, 0.0, 1.0),
        _ => (1.0, 0.0, x),
    };
    let c = |v: f64| (55.0 + 200.0 * v).round() as u8;
    (c(r), c(g), c(b))
}

struct Frame {
    bounds: [f64; 4],
    px: f64,
    py: f64,
}

impl Frame {
    fn new(bounds: [f64; 4]) -> Self {
        let (w, h) = (bounds[2] - bounds[0], bounds[3] - bounds[1]);
        let s = SIZE / w.max(h);
        Self { bounds, px: w * s, py: h * s }
    }

    fn x(&self, x: f64) -> f64 {
        MARGIN + (x - self.bounds[0]) / (self.bounds[2] - self.bounds[0]) * self.px
    }

    fn y(&self, y: f64) -> f64 {
        MARGIN + (self.bounds[3] - y) / (self.bounds[3] - self.bounds[1]) * self.py
    }

    fn scale(&self) -> f64 {
        self.px / (self.bounds[2] - self.bounds[0])
    }
}

/// Block-averaged raster of at most `max_px` pixels per side, drawn as rects
/// colored by `color(value)`.
fn raster_rects(s: &mut String, r: &Raster, frame: &Frame, max_px: usize, color: impl Fn(f64) -> (u8, u8, u8), block_mean: bool) {
    let step = r.nx.max(r.ny).div_ceil(max_px).max(1);
    let (cx, cy) = (r.nx.div_ceil(step), r.ny.div_ceil(step));
    let (dx, dy) = (frame.px / cx as f64, frame.py / cy as f64);
    for by in 0..cy {
        for bx in 0..cx {
            let v = if block_mean {
                let (mut acc, mut n) = (0.0, 0usize);
                for j in by * step..((by + 1) * step).min(r.ny) {
                    for i in bx * step..((bx + 1) * step).min(r.nx) {
                        acc += r.values[j * r.nx + i];
                        n += 1;
                    }
                }
                acc / n as f64
            } else {
                r.values[(by * step).min(r.ny - 1) * r.nx + (bx * step).min(r.nx - 1)]
            };
            let (cr, cg, cb) = color(v);
            let _ = writeln!(
                s,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="rgb({cr},{cg},{cb})"/>"#,
                MARGIN + bx as f64 * dx,
                MARGIN + frame.py - (by + 1) as f64 * dy,
                dx + 0.05,
                dy + 0.05
            );
        }
    }
}

fn axes(s: &mut String, frame: &Frame) {
    let b = frame.bounds;
    let _ = writeln!(s, r#"<rect x="{MARGIN}" y="{MARGIN}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#, frame.px, frame.py);
    let _ = writeln!(s, r#"<text x="{MARGIN}" y="{:.2}">{}</text>"#, MARGIN + frame.py + 15.0, b[0]);
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, MARGIN + frame.px, MARGIN + frame.py + 15.0, b[2]);
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, MARGIN - 4.0, MARGIN + frame.py, b[1]);
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, MARGIN - 4.0, MARGIN + 10.0, b[3]);
}

fn legend(s: &mut String, frame: &Frame, lo: f64, hi: f64) {
    let x = MARGIN + frame.px + 15.0;
    for k in 0..50 {
        let (r, g, b) = ramp(1.0 - k as f64 / 49.0);
        let _ = writeln!(s, r#"<rect x="{x:.2}" y="{:.2}" width="12" height="{:.2}" fill="rgb({r},{g},{b})"/>"#, MARGIN + k as f64 * frame.py / 50.0, frame.py / 50.0 + 0.05);
    }
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}">{hi:.3}</text>"#, x + 16.0, MARGIN + 10.0);
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}">{lo:.3}</text>"#, x + 16.0, MARGIN + frame.py);
}

pub fn heatmap(title: &str, r: &Raster, lo: f64, hi: f64) -> String {
    let frame = Frame::new(r.bounds);
    let mut s = header(title, frame.px + 2.0 * MARGIN + 70.0, frame.py + 2.0 * MARGIN);
    let span = if hi > lo { hi - lo } else { 1.0 };
    raster_rects(&mut s, r, &frame, 160, |v| ramp((v - lo) / span), true);
    axes(&mut s, &frame);
    legend(&mut s, &frame, lo, hi);
    s.push_str("</svg>\n");
    s
}

/// Phase map (nearest samples, no averaging) with disks drawn on top; disks
/// of positive degree in black, negative in white.
pub fn phase_map(title: &str, phase: &Raster, disks: &[VortexDisk]) -> String {
    let frame = Frame::new(phase.bounds);
    let mut s = header(title, frame.px + 2.0 * MARGIN, frame.py + 2.0 * MARGIN);
    raster_rects(&mut s, phase, &frame, 200, hue, false);
    for d in disks {
        let stroke = if d.degree >= 0 { "black" } else { "white" };
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="{:.2}" fill="none" stroke="{stroke}" stroke-width="1"/>"#,
            frame.x(d.center[0]),
            frame.y(d.center[1]),
            (d.radius * frame.scale()).max(1.0)
        );
    }
    axes(&mut s, &frame);
    s.push_str("</svg>\n");
    s
}

/// Paired bars per labelled group.
pub fn bar_chart(title: &str, labels: &[String], series: [(&str, &[f64]); 2]) -> String {
    let (w, h) = (SIZE + 2.0 * MARGIN, SIZE * 0.75 + 2.0 * MARGIN + 40.0);
    let mut s = header(title, w, h);
    let all: Vec<f64> = series.iter().flat_map(|(_, v)| v.iter().copied()).collect();
    let max = all.iter().fold(0.0f64, |m, v| m.max(*v));
    let min = all.iter().fold(0.0f64, |m, v| m.min(*v));
    let span = if max > min { max - min } else { 1.0 };
    let plot_h = SIZE * 0.75;
    let zero = MARGIN + plot_h * max / span;
    let y = |v: f64| MARGIN + plot_h * (max - v) / span;
    let n = labels.len().max(1);
    let gw = SIZE / n as f64;
    let colors = ["#4169e1", "#e0803a"];
    for (g, label) in labels.iter().enumerate() {
        for (k, (_, vals)) in series.iter().enumerate() {
            let v = vals.get(g).copied().unwrap_or(0.0);
            let x = MARGIN + g as f64 * gw + gw * (0.15 + 0.35 * k as f64);
            let (top, bottom) = if v >= 0.0 { (y(v), zero) } else { (zero, y(v)) };
            let _ = writeln!(s, r#"<rect x="{x:.2}" y="{top:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#, gw * 0.33, (bottom - top).max(0.5), colors[k]);
        }
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="10">{}</text>"#, MARGIN + (g as f64 + 0.5) * gw, MARGIN + plot_h + 15.0, escape(label));
    }
    let _ = writeln!(s, r#"<line x1="{MARGIN}" x2="{:.2}" y1="{zero:.2}" y2="{zero:.2}" stroke="black"/>"#, MARGIN + SIZE);
    for (k, (name, _)) in series.iter().enumerate() {
        let ly = MARGIN + plot_h + 30.0;
        let lx = MARGIN + k as f64 * 150.0;
        let _ = writeln!(s, r#"<rect x="{lx:.2}" y="{:.2}" width="10" height="10" fill="{}"/><text x="{:.2}" y="{ly:.2}">{}</text>"#, ly - 9.0, colors[k], lx + 14.0, escape(name));
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heatmap_is_well_formed() {
        let v: Vec<f64> = (0..25).map(|k| k as f64).collect();
        let r = Raster { nx: 5, ny: 5, values: &v, bounds: [-1.0, -1.0, 1.0, 1.0] };
        let s = heatmap("t<1>", &r, 0.0, 24.0);
        assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
        assert_eq!(s.matches("<rect").count(), 2 + 25 + 50);
        assert!(s.contains("t&lt;1&gt;"));
    }

    #[test]
    fn ramp_endpoints() {
        assert_eq!(ramp(0.0), (48, 18, 59));
        assert_eq!(ramp(1.0), (250, 235, 35));
        assert_eq!(ramp(2.0), ramp(1.0));
    }
}
