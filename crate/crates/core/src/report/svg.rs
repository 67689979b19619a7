//! Minimal SVG output: boxplot grids, heatmaps and scatter plots. All
//! coordinates are written with fixed precision so output is byte-stable.

use std::fmt::Write;

const FONT: &str = "font-family=\"sans-serif\"";
const PALETTE: [&str; 8] = ["#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#9c755f"];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn header(w: f64, h: f64) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {w:.0} {h:.0}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    )
}

fn text(out: &mut String, x: f64, y: f64, size: f64, anchor: &str, s: &str) {
    let _ = writeln!(
        out,
        "<text x=\"{x:.2}\" y=\"{y:.2}\" font-size=\"{size:.0}\" text-anchor=\"{anchor}\" {FONT}>{}</text>",
        esc(s)
    );
}

/// Five-number summary with Tukey whiskers (1.5 IQR).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoxStats {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub lo: f64,
    pub hi: f64,
}

pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn box_stats(values: &[f64]) -> Option<BoxStats> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let (q1, median, q3) = (quantile(&v, 0.25), quantile(&v, 0.5), quantile(&v, 0.75));
    let iqr = q3 - q1;
    let lo = v.iter().copied().find(|&x| x >= q1 - 1.5 * iqr).unwrap_or(q1);
    let hi = v.iter().rev().copied().find(|&x| x <= q3 + 1.5 * iqr).unwrap_or(q3);
    Some(BoxStats { q1, median, q3, lo, hi })
}

/// One panel of a boxplot grid: named groups of values.
pub struct BoxPanel {
    pub groups: Vec<(String, Vec<f64>)>,
}

/// Grid of boxplot panels; `panels[r][c]` sits at row r, column c and each
/// panel gets its own y range.
pub fn boxplot_grid(title: &str, row_labels: &[String], col_labels: &[String], panels: &[Vec<BoxPanel>], y_label: &str) -> String {
    let (pw, ph) = (360.0, 240.0);
    let (left, top) = (70.0, 50.0);
    let w = left + pw * col_labels.len() as f64 + 20.0;
    let h = top + ph * row_labels.len() as f64 + 20.0;
    let mut out = header(w, h);
    text(&mut out, w / 2.0, 24.0, 16.0, "middle", title);
    for (c, cl) in col_labels.iter().enumerate() {
        text(&mut out, left + pw * (c as f64 + 0.5), 42.0, 13.0, "middle", cl);
    }
    for (r, rl) in row_labels.iter().enumerate() {
        let y0 = top + ph * r as f64;
        let _ = writeln!(
            out,
            "<text x=\"14\" y=\"{:.2}\" font-size=\"13\" {FONT} transform=\"rotate(-90 14 {:.2})\" text-anchor=\"middle\">{} ({})</text>",
            y0 + ph / 2.0,
            y0 + ph / 2.0,
            esc(rl),
            esc(y_label)
        );
        for (c, panel) in panels.get(r).map(|p| p.iter()).into_iter().flatten().enumerate() {
            draw_box_panel(&mut out, left + pw * c as f64, y0, pw, ph, panel);
        }
    }
    out.push_str("</svg>\n");
    out
}

fn draw_box_panel(out: &mut String, x0: f64, y0: f64, w: f64, h: f64, panel: &BoxPanel) {
    let (pl, pr, pt, pb) = (40.0, 10.0, 8.0, 40.0);
    let _ = writeln!(out, "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"none\" stroke=\"#999\"/>", x0 + pl, y0 + pt, w - pl - pr, h - pt - pb);
    let stats: Vec<Option<BoxStats>> = panel.groups.iter().map(|(_, v)| box_stats(v)).collect();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for s in stats.iter().flatten() {
        lo = lo.min(s.lo);
        hi = hi.max(s.hi);
    }
    if !lo.is_finite() {
        text(out, x0 + w / 2.0, y0 + h / 2.0, 11.0, "middle", "no data");
        return;
    }
    if hi - lo < 1e-12 {
        lo -= 0.5;
        hi += 0.5;
    }
    let pad = 0.05 * (hi - lo);
    let (lo, hi) = (lo - pad, hi + pad);
    let ys = |v: f64| y0 + pt + (h - pt - pb) * (1.0 - (v - lo) / (hi - lo));
    for k in 0..=4 {
        let v = lo + (hi - lo) * k as f64 / 4.0;
        text(out, x0 + pl - 4.0, ys(v) + 4.0, 9.0, "end", &format!("{v:.3}"));
    }
    let n = panel.groups.len().max(1) as f64;
    let slot = (w - pl - pr) / n;
    for (i, ((name, _), s)) in panel.groups.iter().zip(&stats).enumerate() {
        let cx = x0 + pl + slot * (i as f64 + 0.5);
        let colour = PALETTE[i % PALETTE.len()];
        let _ = writeln!(
            out,
            "<text x=\"{cx:.2}\" y=\"{:.2}\" font-size=\"9\" text-anchor=\"end\" {FONT} transform=\"rotate(-35 {cx:.2} {:.2})\">{}</text>",
            y0 + h - pb + 12.0,
            y0 + h - pb + 12.0,
            esc(name)
        );
        let Some(s) = s else { continue };
        let bw = slot * 0.3;
        let _ = writeln!(out, "<line x1=\"{cx:.2}\" y1=\"{:.2}\" x2=\"{cx:.2}\" y2=\"{:.2}\" stroke=\"#333\"/>", ys(s.lo), ys(s.hi));
        let _ = writeln!(
            out,
            "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{colour}\" fill-opacity=\"0.6\" stroke=\"#333\"/>",
            cx - bw,
            ys(s.q3),
            2.0 * bw,
            (ys(s.q1) - ys(s.q3)).max(0.5)
        );
        let _ = writeln!(out, "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"#000\" stroke-width=\"2\"/>", cx - bw, ys(s.median), cx + bw, ys(s.median));
    }
}

fn colour_scale(v: f64, lo: f64, hi: f64) -> String {
    // white to dark blue
    let t = ((v - lo) / (hi - lo)).clamp(0.0, 1.0);
    let r = (255.0 * (1.0 - t) + 8.0 * t).round() as u8;
    let g = (255.0 * (1.0 - t) + 48.0 * t).round() as u8;
    let b = (255.0 * (1.0 - t) + 107.0 * t).round() as u8;
    format!("#{r:02x}{g:02x}{b:02x}")
}

/// A labelled matrix for [`heatmaps`].
pub struct Heatmap<'a> {
    pub title: String,
    pub values: &'a [Vec<Option<f64>>],
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
}

/// Side-by-side heatmaps on a shared colour range. Undefined cells are grey;
/// small matrices get their values printed in the cells.
pub fn heatmaps(title: &str, maps: &[Heatmap<'_>], lo: f64, hi: f64) -> String {
    let size = 300.0;
    let (left, top, gap) = (50.0, 60.0, 40.0);
    let w = left + (size + gap) * maps.len() as f64 + 20.0;
    let h = top + size + 60.0;
    let mut out = header(w, h);
    text(&mut out, w / 2.0, 24.0, 16.0, "middle", title);
    for (k, m) in maps.iter().enumerate() {
        let x0 = left + (size + gap) * k as f64;
        text(&mut out, x0 + size / 2.0, 46.0, 13.0, "middle", &m.title);
        let rows = m.values.len().max(1);
        let cols = m.values.first().map_or(1, |r| r.len().max(1));
        let (cw, ch) = (size / cols as f64, size / rows as f64);
        for (i, row) in m.values.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let fill = v.map_or_else(|| "#cccccc".to_string(), |v| colour_scale(v, lo, hi));
                let _ = writeln!(
                    out,
                    "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{fill}\"/>",
                    x0 + cw * j as f64,
                    top + ch * i as f64,
                    cw + 0.01,
                    ch + 0.01
                );
                if rows <= 12 && cols <= 12 {
                    let label = v.map_or_else(|| "-".to_string(), |v| format!("{v:.2}"));
                    text(&mut out, x0 + cw * (j as f64 + 0.5), top + ch * (i as f64 + 0.5) + 4.0, 10.0, "middle", &label);
                }
            }
        }
        if rows <= 12 {
            for (i, l) in m.row_labels.iter().enumerate() {
                text(&mut out, x0 - 4.0, top + ch * (i as f64 + 0.5) + 4.0, 10.0, "end", l);
            }
        }
        if cols <= 12 {
            for (j, l) in m.col_labels.iter().enumerate() {
                text(&mut out, x0 + cw * (j as f64 + 0.5), top + size + 14.0, 10.0, "middle", l);
            }
        }
    }
    text(&mut out, w / 2.0, h - 12.0, 11.0, "middle", &format!("colour range [{lo:.3}, {hi:.3}], grey = undefined"));
    out.push_str("</svg>\n");
    out
}

/// Scatter of (x, y, group) points with a legend.
pub fn scatter(title: &str, x_label: &str, y_label: &str, points: &[(f64, f64, usize)], groups: &[String]) -> String {
    let (w, h) = (520.0, 460.0);
    let (l, r, t, b) = (60.0, 130.0, 40.0, 50.0);
    let mut out = header(w, h);
    text(&mut out, w / 2.0, 24.0, 16.0, "middle", title);
    let finite: Vec<_> = points.iter().filter(|p| p.0.is_finite() && p.1.is_finite()).collect();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in &finite {
        x0 = x0.min(p.0);
        x1 = x1.max(p.0);
        y0 = y0.min(p.1);
        y1 = y1.max(p.1);
    }
    if finite.is_empty() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 < 1e-12 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-12 {
        y1 = y0 + 1.0;
    }
    let sx = |v: f64| l + (w - l - r) * (v - x0) / (x1 - x0);
    let sy = |v: f64| t + (h - t - b) * (1.0 - (v - y0) / (y1 - y0));
    let _ = writeln!(out, "<rect x=\"{l:.2}\" y=\"{t:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"none\" stroke=\"#999\"/>", w - l - r, h - t - b);
    for p in &finite {
        let _ = writeln!(
            out,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.5\" fill=\"{}\" fill-opacity=\"0.7\"/>",
            sx(p.0),
            sy(p.1),
            PALETTE[p.2 % PALETTE.len()]
        );
    }
    text(&mut out, (l + w - r) / 2.0, h - 14.0, 12.0, "middle", x_label);
    let _ = writeln!(out, "<text x=\"16\" y=\"{:.2}\" font-size=\"12\" {FONT} transform=\"rotate(-90 16 {:.2})\" text-anchor=\"middle\">{}</text>", (t + h - b) / 2.0, (t + h - b) / 2.0, esc(y_label));
    text(&mut out, l, h - b + 14.0, 9.0, "start", &format!("{x0:.2}"));
    text(&mut out, w - r, h - b + 14.0, 9.0, "end", &format!("{x1:.2}"));
    text(&mut out, l - 4.0, h - b, 9.0, "end", &format!("{y0:.2}"));
    text(&mut out, l - 4.0, t + 8.0, 9.0, "end", &format!("{y1:.2}"));
    for (i, g) in groups.iter().enumerate() {
        let y = t + 16.0 * i as f64 + 8.0;
        let _ = writeln!(out, "<circle cx=\"{:.2}\" cy=\"{y:.2}\" r=\"4\" fill=\"{}\"/>", w - r + 14.0, PALETTE[i % PALETTE.len()]);
        text(&mut out, w - r + 24.0, y + 4.0, 11.0, "start", g);
    }
    out.push_str("</svg>\n");
    out
}
