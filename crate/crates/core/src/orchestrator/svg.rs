//! Standalone SVG figures drawn straight from result tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::config::ColorScale;
use super::table::{write_atomic, Table};
use crate::error::{Error, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 120.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

#[derive(Debug, Clone, PartialEq)]
pub enum PlotKind {
    /// Color map of `value` over the `(x, y)` grid.
    Heatmap { x: String, y: String, value: String, scale: ColorScale },
    /// One polyline per distinct value of the `group` columns.
    Lines { x: String, y: String, group: Vec<String>, log_y: bool },
}

pub fn emit_svg(table: &Table, kind: &PlotKind, title: &str, path: &Path) -> Result<()> {
    let svg = render(table, kind, title)?;
    write_atomic(path, svg.as_bytes())
}

pub fn render(table: &Table, kind: &PlotKind, title: &str) -> Result<String> {
    match kind {
        PlotKind::Heatmap { x, y, value, scale } => heatmap(table, x, y, value, *scale, title),
        PlotKind::Lines { x, y, group, log_y } => lines(table, x, y, group, *log_y, title),
    }
}

/// Five-stop approximation of a perceptually ordered dark-blue to yellow map.
fn color(t: f64) -> String {
    const STOPS: [(f64, f64, f64); 5] = [
        (68.0, 1.0, 84.0),
        (59.0, 82.0, 139.0),
        (33.0, 145.0, 140.0),
        (94.0, 201.0, 98.0),
        (253.0, 231.0, 37.0),
    ];
    let t = t.clamp(0.0, 1.0) * (STOPS.len() - 1) as f64;
    let i = (t.floor() as usize).min(STOPS.len() - 2);
    let f = t - i as f64;
    let (a, b) = (STOPS[i], STOPS[i + 1]);
    let mix = |u: f64, v: f64| (u + (v - u) * f).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

fn num(x: f64) -> String {
    let s = format!("{x:.2}");
    if s == "-0.00" { "0.00".into() } else { s }
}

fn tick_label(x: f64) -> String {
    if x != 0.0 && (x.abs() < 1e-2 || x.abs() >= 1e4) {
        format!("{x:.2e}")
    } else {
        let s = format!("{x:.3}");
        let s = s.trim_end_matches('0').trim_end_matches('.').to_string();
        if s == "-0" { "0".into() } else { s }
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn header(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#,
        w = WIDTH,
        h = HEIGHT
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        num(WIDTH / 2.0),
        escape(title)
    );
    s
}

fn axes(s: &mut String, xr: (f64, f64), yr: (f64, f64), xlabel: &str, ylabel: &str) {
    let (x0, x1, y0, y1) = (LEFT, WIDTH - RIGHT, HEIGHT - BOTTOM, TOP);
    let _ = writeln!(
        s,
        r#"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        num(x0),
        num(y1),
        num(x1 - x0),
        num(y0 - y1)
    );
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let px = x0 + f * (x1 - x0);
        let py = y0 - f * (y0 - y1);
        let xv = xr.0 + f * (xr.1 - xr.0);
        let yv = yr.0 + f * (yr.1 - yr.0);
        let _ = writeln!(s, r#"<line x1="{0}" y1="{1}" x2="{0}" y2="{2}" stroke="black"/>"#, num(px), num(y0), num(y0 + 5.0));
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, num(px), num(y0 + 18.0), tick_label(xv));
        let _ = writeln!(s, r#"<line x1="{0}" y1="{1}" x2="{2}" y2="{1}" stroke="black"/>"#, num(x0 - 5.0), num(py), num(x0));
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, num(x0 - 8.0), num(py + 4.0), tick_label(yv));
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        num((x0 + x1) / 2.0),
        num(HEIGHT - 18.0),
        escape(xlabel)
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{0}" text-anchor="middle" transform="rotate(-90 18 {0})">{1}</text>"#,
        num((y0 + y1) / 2.0),
        escape(ylabel)
    );
}

fn sorted_unique(v: &[f64]) -> Vec<f64> {
    let mut u: Vec<f64> = v.iter().copied().filter(|x| x.is_finite()).collect();
    u.sort_by(f64::total_cmp);
    u.dedup();
    u
}

fn span(v: &[f64]) -> (f64, f64) {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if lo == hi {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn heatmap(table: &Table, xc: &str, yc: &str, vc: &str, scale: ColorScale, title: &str) -> Result<String> {
    let xs = table.numbers(xc)?;
    let ys = table.numbers(yc)?;
    let vs = table.numbers(vc)?;
    let ux = sorted_unique(&xs);
    let uy = sorted_unique(&ys);
    if table.is_empty() || ux.len() * uy.len() != table.len() {
        return Err(Error::Config(format!(
            "heatmap needs a full ({xc}, {yc}) grid: {} x {} values for {} rows",
            ux.len(),
            uy.len(),
            table.len()
        )));
    }
    let transform = |v: f64| match scale {
        ColorScale::Linear => v,
        ColorScale::Log => {
            if v > 0.0 {
                v.log10()
            } else {
                f64::NAN
            }
        }
    };
    let tv: Vec<f64> = vs.iter().map(|&v| transform(v)).filter(|v| v.is_finite()).collect();
    let (lo, hi) = if tv.is_empty() {
        (0.0, 1.0)
    } else {
        (
            tv.iter().copied().fold(f64::INFINITY, f64::min),
            tv.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        )
    };
    let norm = |v: f64| if hi > lo { (v - lo) / (hi - lo) } else { 0.5 };

    let mut s = header(title);
    let (x0, x1, y0, y1) = (LEFT, WIDTH - RIGHT, HEIGHT - BOTTOM, TOP);
    let cw = (x1 - x0) / ux.len() as f64;
    let ch = (y0 - y1) / uy.len() as f64;
    let index = |u: &[f64], v: f64| u.binary_search_by(|p| p.total_cmp(&v)).ok();
    for ((&x, &y), &v) in xs.iter().zip(&ys).zip(&vs) {
        let (Some(ix), Some(iy)) = (index(&ux, x), index(&uy, y)) else { continue };
        let t = transform(v);
        if !t.is_finite() {
            continue;
        }
        let _ = writeln!(
            s,
            r#"<rect class="cell" x="{}" y="{}" width="{}" height="{}" fill="{}"/>"#,
            num(x0 + ix as f64 * cw),
            num(y0 - (iy + 1) as f64 * ch),
            num(cw + 0.3),
            num(ch + 0.3),
            color(norm(t))
        );
    }
    let half = |u: &[f64]| {
        if u.len() > 1 {
            (u[1] - u[0]) / 2.0
        } else {
            0.5
        }
    };
    let xr = (ux[0] - half(&ux), ux[ux.len() - 1] + half(&ux));
    let yr = (uy[0] - half(&uy), uy[uy.len() - 1] + half(&uy));
    axes(&mut s, xr, yr, xc, yc);

    // colorbar
    let bx = WIDTH - RIGHT + 20.0;
    let steps = 32;
    for k in 0..steps {
        let f = k as f64 / steps as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{}" y="{}" width="16" height="{}" fill="{}"/>"#,
            num(bx),
            num(y0 - (f + 1.0 / steps as f64) * (y0 - y1)),
            num((y0 - y1) / steps as f64 + 0.3),
            color(f + 0.5 / steps as f64)
        );
    }
    let _ = writeln!(s, r#"<rect x="{}" y="{}" width="16" height="{}" fill="none" stroke="black"/>"#, num(bx), num(y1), num(y0 - y1));
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let v = lo + f * (hi - lo);
        let v = if scale == ColorScale::Log { 10f64.powf(v) } else { v };
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, num(bx + 20.0), num(y0 - f * (y0 - y1) + 4.0), tick_label(v));
    }
    let label = if scale == ColorScale::Log { format!("{vc} (log)") } else { vc.to_string() };
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, num(bx + 8.0), num(y1 - 8.0), escape(&label));
    s.push_str("</svg>\n");
    Ok(s)
}

fn lines(table: &Table, xc: &str, yc: &str, group: &[String], log_y: bool, title: &str) -> Result<String> {
    let xs = table.numbers(xc)?;
    let ys = table.numbers(yc)?;
    let gcols = group
        .iter()
        .map(|g| table.column(g).ok_or_else(|| Error::Config(format!("table has no column '{g}'"))))
        .collect::<Result<Vec<_>>>()?;
    // groups keep first-appearance order; points are drawn sorted by x
    let mut order: Vec<String> = Vec::new();
    let mut series: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for (i, row) in table.rows.iter().enumerate() {
        let label = gcols
            .iter()
            .zip(group)
            .map(|(&c, name)| format!("{name}={}", row[c].as_f64().map(tick_label).unwrap_or_else(|| row[c].render())))
            .collect::<Vec<_>>()
            .join(", ");
        let y = if log_y { ys[i].log10() } else { ys[i] };
        if !series.contains_key(&label) {
            order.push(label.clone());
        }
        let pts = series.entry(label).or_default();
        if xs[i].is_finite() && y.is_finite() {
            pts.push((xs[i], y));
        }
    }
    let all: Vec<(f64, f64)> = series.values().flatten().copied().collect();
    let xr = span(&all.iter().map(|p| p.0).collect::<Vec<_>>());
    let yr = span(&all.iter().map(|p| p.1).collect::<Vec<_>>());
    let (x0, x1, y0, y1) = (LEFT, WIDTH - RIGHT, HEIGHT - BOTTOM, TOP);
    let px = |x: f64| x0 + (x - xr.0) / (xr.1 - xr.0) * (x1 - x0);
    let py = |y: f64| y0 - (y - yr.0) / (yr.1 - yr.0) * (y0 - y1);

    let mut s = header(title);
    for (k, label) in order.iter().enumerate() {
        let mut pts = series[label].clone();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let c = PALETTE[k % PALETTE.len()];
        if pts.len() == 1 {
            let _ = writeln!(s, r#"<circle cx="{}" cy="{}" r="3" fill="{c}"/>"#, num(px(pts[0].0)), num(py(pts[0].1)));
        } else if !pts.is_empty() {
            let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{},{}", num(px(x)), num(py(y)))).collect();
            let _ = writeln!(s, r#"<polyline fill="none" stroke="{c}" stroke-width="1.5" points="{}"/>"#, path.join(" "));
        }
        if !label.is_empty() && k < 24 {
            let ly = TOP + 14.0 * k as f64 + 6.0;
            let lx = WIDTH - RIGHT + 10.0;
            let _ = writeln!(s, r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{c}" stroke-width="2"/>"#, num(lx), num(lx + 14.0));
            let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="10">{}</text>"#, num(lx + 18.0), num(ly + 4.0), escape(label));
        }
    }
    let ylabel = if log_y { format!("log10 {yc}") } else { yc.to_string() };
    axes(&mut s, xr, yr, xc, &ylabel);
    s.push_str("</svg>\n");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orchestrator::table::{Cell, ColumnType};

    fn grid(value: impl Fn(f64, f64) -> f64) -> Table {
        let mut t = Table::new(&[("x", ColumnType::Num), ("y", ColumnType::Num), ("v", ColumnType::Num)]);
        for iy in 0..3 {
            for ix in 0..4 {
                let (x, y) = (ix as f64, iy as f64 * 0.5);
                t.push(vec![Cell::Num(x), Cell::Num(y), Cell::Num(value(x, y))]).unwrap();
            }
        }
        t
    }

    fn heat(scale: ColorScale) -> PlotKind {
        PlotKind::Heatmap { x: "x".into(), y: "y".into(), value: "v".into(), scale }
    }

    fn cells(svg: &str) -> Vec<&str> {
        svg.lines().filter(|l| l.contains("class=\"cell\"")).collect()
    }

    #[test]
    fn constant_grid_is_one_color() {
        let svg = render(&grid(|_, _| 2.0), &heat(ColorScale::Linear), "c").unwrap();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        let c = cells(&svg);
        assert_eq!(c.len(), 12);
        let fill = format!("fill=\"{}\"", color(0.5));
        assert!(c.iter().all(|l| l.contains(&fill)));
    }

    #[test]
    fn nan_cells_are_blank() {
        let full = render(&grid(|x, y| x + y + 1.0), &heat(ColorScale::Log), "t").unwrap();
        let holes = render(&grid(|x, y| if x == 1.0 { f64::NAN } else { x + y + 1.0 }), &heat(ColorScale::Log), "t").unwrap();
        assert_eq!(cells(&full).len(), 12);
        assert_eq!(cells(&holes).len(), 9);
    }

    #[test]
    fn ragged_grid_is_a_config_error() {
        let mut t = grid(|_, _| 1.0);
        t.rows.pop();
        assert!(matches!(render(&t, &heat(ColorScale::Linear), "t"), Err(Error::Config(_))));
    }

    #[test]
    fn lines_draw_one_series_per_group() {
        let t = grid(|x, y| x * y);
        let kind = PlotKind::Lines { x: "x".into(), y: "v".into(), group: vec!["y".into()], log_y: false };
        let svg = render(&t, &kind, "l").unwrap();
        assert_eq!(svg.matches("<polyline").count(), 3);
    }
}
