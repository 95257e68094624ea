//! Trajectory plots from trace files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use vocbf::report::TRACE_HEADER;
use vocbf::Vec2;

use crate::error::CliError;

/// Positions per agent, in time order.
pub type Paths = BTreeMap<usize, Vec<Vec2>>;

pub fn parse_trace(text: &str, path: &Path) -> Result<Paths, CliError> {
    let bad = |line: usize, message: String| CliError::Trace {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end() == TRACE_HEADER => {}
        Some((_, h)) => return Err(bad(1, format!("unexpected header `{h}`"))),
        None => return Err(bad(1, "file is empty".into())),
    }
    let mut paths = Paths::new();
    let mut last_t: BTreeMap<usize, f64> = BTreeMap::new();
    for (i, line) in lines {
        let n = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 12 {
            return Err(bad(n, format!("expected 12 fields, found {}", fields.len())));
        }
        let real = |k: usize| -> Result<f64, CliError> {
            fields[k]
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| bad(n, format!("field {k} is not a finite number: `{}`", fields[k])))
        };
        let t = real(0)?;
        let id: usize = fields[1]
            .trim()
            .parse()
            .map_err(|_| bad(n, format!("bad agent id `{}`", fields[1])))?;
        if last_t.insert(id, t).is_some_and(|prev| t < prev) {
            return Err(bad(n, format!("time goes backwards for agent {id}")));
        }
        paths.entry(id).or_default().push(Vec2::new(real(2)?, real(3)?));
    }
    if paths.is_empty() {
        return Err(bad(2, "trace has no rows".into()));
    }
    Ok(paths)
}

/// 1, 2 or 5 times a power of ten, at most `x`.
fn round_length(x: f64) -> f64 {
    let base = 10f64.powf(x.log10().floor());
    [5.0, 2.0, 1.0]
        .into_iter()
        .map(|m| m * base)
        .find(|&l| l <= x)
        .unwrap_or(base)
}

fn color(k: usize, n: usize) -> String {
    let hue = 360.0 * k as f64 / n.max(1) as f64;
    format!("hsl({hue:.0},70%,45%)")
}

/// SVG with one polyline per agent, start circles, end squares and a scale
/// bar in the bottom-left corner. Both axes share one scale.
pub fn render_svg(paths: &Paths) -> String {
    const WIDTH: f64 = 800.0;
    const MARGIN: f64 = 40.0;
    const BAR_SPACE: f64 = 40.0;

    let (mut lo, mut hi) = (Vec2::new(f64::INFINITY, f64::INFINITY), Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY));
    for p in paths.values().flatten() {
        lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    let span = (hi.x - lo.x).max(hi.y - lo.y).max(1.0);
    let scale = (WIDTH - 2.0 * MARGIN) / span;
    let height = (hi.y - lo.y) * scale + 2.0 * MARGIN + BAR_SPACE;
    let px = |p: Vec2| ((p.x - lo.x) * scale + MARGIN, (hi.y - p.y) * scale + MARGIN);

    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH:.0}" height="{height:.0}" viewBox="0 0 {WIDTH:.0} {height:.0}">"#
    )
    .unwrap();
    writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    let n = paths.len();
    for (k, (id, pts)) in paths.iter().enumerate() {
        let c = color(k, n);
        let coords: Vec<String> = pts
            .iter()
            .map(|&p| {
                let (x, y) = px(p);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        writeln!(
            svg,
            r#"<polyline id="agent-{id}" fill="none" stroke="{c}" stroke-width="2" points="{}"/>"#,
            coords.join(" ")
        )
        .unwrap();
        let (sx, sy) = px(pts[0]);
        let (ex, ey) = px(*pts.last().unwrap());
        writeln!(svg, r#"<circle class="start" cx="{sx:.2}" cy="{sy:.2}" r="5" fill="{c}"/>"#).unwrap();
        writeln!(
            svg,
            r#"<rect class="goal" x="{:.2}" y="{:.2}" width="10" height="10" fill="none" stroke="{c}" stroke-width="2"/>"#,
            ex - 5.0,
            ey - 5.0
        )
        .unwrap();
    }

    let bar_m = round_length(span / 5.0);
    let (x0, y0) = (MARGIN, height - BAR_SPACE / 2.0);
    let x1 = x0 + bar_m * scale;
    writeln!(
        svg,
        r#"<g class="scale-bar" stroke="black" stroke-width="2"><line x1="{x0:.2}" y1="{y0:.2}" x2="{x1:.2}" y2="{y0:.2}"/><line x1="{x0:.2}" y1="{:.2}" x2="{x0:.2}" y2="{:.2}"/><line x1="{x1:.2}" y1="{:.2}" x2="{x1:.2}" y2="{:.2}"/></g>"#,
        y0 - 5.0,
        y0 + 5.0,
        y0 - 5.0,
        y0 + 5.0
    )
    .unwrap();
    writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="14">{bar_m} m</text>"#,
        x1 + 8.0,
        y0 + 5.0
    )
    .unwrap();
    svg.push_str("</svg>\n");
    svg
}
