//! Static SVG charts from summary or sweep CSVs.

use super::run::SUMMARY_HEADER;
use super::sweep::SWEEP_HEADER;
use crate::error::{Error, Result};
use std::collections::HashMap;
use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 130.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;
const CAP: f64 = 4.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

#[derive(Clone, Debug, PartialEq)]
struct Series {
    label: String,
    /// (x, mean, sd)
    points: Vec<(f64, f64, f64)>,
}

#[derive(Clone, Debug, Default, PartialEq)]
struct Chart {
    x_label: String,
    series: Vec<Series>,
    /// Prediction curves drawn without markers.
    curves: Vec<(String, Vec<(f64, f64)>)>,
    reference: Option<f64>,
}

fn schema(msg: impl Into<String>) -> Error {
    Error::Schema(msg.into())
}

struct Table {
    columns: HashMap<String, usize>,
    rows: Vec<csv::StringRecord>,
}

impl Table {
    fn parse(text: &str) -> Result<Table> {
        let first = text.lines().next().unwrap_or("").trim();
        if first != "# schema=1" {
            return Err(schema(format!("expected `# schema=1` on the first line, found `{first}`")));
        }
        let mut rd = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
        let header = rd.headers().map_err(|e| schema(format!("bad header: {e}")))?.clone();
        let columns = header.iter().enumerate().map(|(i, h)| (h.trim().to_string(), i)).collect();
        let rows = rd
            .records()
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| schema(format!("bad row: {e}")))?;
        if rows.is_empty() {
            return Err(schema("no data rows"));
        }
        Ok(Table { columns, rows })
    }

    fn has(&self, header: &str) -> bool {
        header.split(',').all(|c| self.columns.contains_key(c))
    }

    fn text<'a>(&self, row: &'a csv::StringRecord, col: &str) -> &'a str {
        self.columns.get(col).and_then(|&i| row.get(i)).unwrap_or("").trim()
    }

    /// Empty cells read as None.
    fn num(&self, row: &csv::StringRecord, col: &str, line: usize) -> Result<Option<f64>> {
        let s = self.text(row, col);
        if s.is_empty() {
            return Ok(None);
        }
        s.parse::<f64>().map(Some).map_err(|_| schema(format!("data row {line}: `{col}` is not a number: `{s}`")))
    }

    fn req(&self, row: &csv::StringRecord, col: &str, line: usize) -> Result<f64> {
        self.num(row, col, line)?.ok_or_else(|| schema(format!("data row {line}: `{col}` is empty")))
    }
}

fn summary_chart(t: &Table) -> Result<Chart> {
    let mut chart = Chart { x_label: "iteration t".into(), ..Chart::default() };
    let mut se: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    for (i, row) in t.rows.iter().enumerate() {
        let side = t.text(row, "side").to_string();
        if side.is_empty() {
            return Err(schema(format!("data row {}: empty side", i + 1)));
        }
        let x = t.req(row, "t", i + 1)?;
        let mean = t.req(row, "mean", i + 1)?;
        let sd = t.num(row, "std", i + 1)?.unwrap_or(0.0);
        let label = format!("AMP {side}");
        match chart.series.iter_mut().find(|s| s.label == label) {
            Some(s) => s.points.push((x, mean, sd)),
            None => chart.series.push(Series { label, points: vec![(x, mean, sd)] }),
        }
        if let Some(v) = t.num(row, "se_overlap", i + 1)? {
            let label = format!("SE {side}");
            match se.iter_mut().find(|(l, _)| *l == label) {
                Some((_, pts)) => pts.push((x, v)),
                None => se.push((label, vec![(x, v)])),
            }
        }
        if chart.reference.is_none() && side == "u" {
            chart.reference = t.num(row, "pca_overlap", i + 1)?;
        }
    }
    chart.curves = se;
    Ok(chart)
}

fn sweep_chart(t: &Table) -> Result<Chart> {
    let relative = t.rows.iter().all(|r| t.text(r, "alpha_relative").parse::<f64>().map(f64::is_finite).unwrap_or(false));
    let xcol = if relative { "alpha_relative" } else { "alpha" };
    let mut amp = Series { label: "AMP".into(), points: Vec::new() };
    let mut pca = Series { label: "PCA".into(), points: Vec::new() };
    let mut formula = Vec::new();
    let mut se = Vec::new();
    for (i, row) in t.rows.iter().enumerate() {
        let x = t.req(row, xcol, i + 1)?;
        amp.points.push((x, t.req(row, "amp_mean", i + 1)?, t.num(row, "amp_std", i + 1)?.unwrap_or(0.0)));
        pca.points.push((x, t.req(row, "pca_mean", i + 1)?, t.num(row, "pca_std", i + 1)?.unwrap_or(0.0)));
        if let Some(v) = t.num(row, "pca_formula", i + 1)? {
            formula.push((x, v));
        }
        if let Some(v) = t.num(row, "se_overlap", i + 1)? {
            se.push((x, v));
        }
    }
    let x_label = if relative { "alpha / threshold" } else { "alpha" };
    Ok(Chart {
        x_label: x_label.into(),
        series: vec![amp, pca],
        curves: vec![("SE".into(), se), ("PCA limit".into(), formula)],
        reference: None,
    })
}

fn fmt(v: f64) -> String {
    format!("{v:.2}")
}

fn render(chart: &Chart) -> String {
    let xs = chart.series.iter().flat_map(|s| s.points.iter().map(|p| p.0));
    let (mut x0, mut x1) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    if !(x1 > x0) {
        x0 -= 0.5;
        x1 += 0.5;
    }
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let px = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    // overlaps live in [0, 1]; error bars are clipped to the frame
    let py = |y: f64| TOP + (1.0 - y.clamp(0.0, 1.0)) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#,
        W = WIDTH,
        H = HEIGHT
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<path class="axes" d="M{l},{t} L{l},{b} L{r},{b}" fill="none" stroke="black"/>"#,
        l = LEFT,
        t = TOP,
        b = TOP + ph,
        r = LEFT + pw
    );
    for k in 0..=5 {
        let y = k as f64 / 5.0;
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{y:.1}</text>"#, fmt(LEFT - 6.0), fmt(py(y) + 4.0));
    }
    for k in 0..=4 {
        let x = x0 + (x1 - x0) * k as f64 / 4.0;
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, fmt(px(x)), fmt(TOP + ph + 16.0), format_tick(x));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, fmt(LEFT + pw / 2.0), fmt(HEIGHT - 12.0), chart.x_label);
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">overlap</text>"#,
        fmt(TOP + ph / 2.0),
        fmt(TOP + ph / 2.0)
    );

    if let Some(r) = chart.reference {
        let _ = writeln!(
            s,
            r#"<line class="pca-ref" x1="{}" y1="{y}" x2="{}" y2="{y}" stroke="gray" stroke-dasharray="6,4"/>"#,
            fmt(LEFT),
            fmt(LEFT + pw),
            y = fmt(py(r))
        );
    }
    for (k, (label, pts)) in chart.curves.iter().enumerate() {
        if pts.is_empty() {
            continue;
        }
        let d: Vec<String> = pts
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| format!("{}{},{}", if i == 0 { "M" } else { "L" }, fmt(px(x)), fmt(py(y))))
            .collect();
        let _ = writeln!(
            s,
            r#"<path class="curve" d="{}" fill="none" stroke="black" stroke-dasharray="{}"><title>{label}</title></path>"#,
            d.join(" "),
            if k == 0 { "none" } else { "2,3" }
        );
    }
    for (k, series) in chart.series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let pts: Vec<String> = series.points.iter().map(|&(x, m, _)| format!("{},{}", fmt(px(x)), fmt(py(m)))).collect();
        let _ = writeln!(s, r#"<polyline class="series" points="{}" fill="none" stroke="{color}"/>"#, pts.join(" "));
        for &(x, m, sd) in &series.points {
            let (cx, lo, hi) = (px(x), py(m - sd), py(m + sd));
            let _ = writeln!(
                s,
                r#"<g class="errorbar" stroke="{color}"><line x1="{c}" y1="{lo}" x2="{c}" y2="{hi}"/><line x1="{a}" y1="{lo}" x2="{b}" y2="{lo}"/><line x1="{a}" y1="{hi}" x2="{b}" y2="{hi}"/></g>"#,
                c = fmt(cx),
                a = fmt(cx - CAP),
                b = fmt(cx + CAP),
                lo = fmt(lo),
                hi = fmt(hi)
            );
            let _ = writeln!(s, r#"<circle class="marker" cx="{}" cy="{}" r="3" fill="{color}"/>"#, fmt(cx), fmt(py(m)));
        }
    }
    let mut ly = TOP + 10.0;
    let lx = LEFT + pw + 14.0;
    for (k, series) in chart.series.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<circle cx="{}" cy="{}" r="3" fill="{}"/><text x="{}" y="{}">{}</text>"#,
            fmt(lx),
            fmt(ly),
            COLORS[k % COLORS.len()],
            fmt(lx + 8.0),
            fmt(ly + 4.0),
            series.label
        );
        ly += 16.0;
    }
    for (label, pts) in &chart.curves {
        if !pts.is_empty() {
            let _ = writeln!(s, r#"<text x="{}" y="{}">- - {label}</text>"#, fmt(lx), fmt(ly + 4.0));
            ly += 16.0;
        }
    }
    if chart.reference.is_some() {
        let _ = writeln!(s, r#"<text x="{}" y="{}" fill="gray">- - PCA limit</text>"#, fmt(lx), fmt(ly + 4.0));
    }
    s.push_str("</svg>\n");
    s
}

fn format_tick(x: f64) -> String {
    if (x - x.round()).abs() < 1e-9 {
        format!("{}", x.round())
    } else {
        format!("{x:.2}")
    }
}

/// SVG for a summary CSV (overlap against iteration) or a sweep CSV
/// (overlap against alpha), with one-standard-deviation error bars.
pub fn emit_plot(csv_text: &str) -> Result<String> {
    let table = Table::parse(csv_text)?;
    let chart = if table.has(SUMMARY_HEADER) {
        summary_chart(&table)?
    } else if table.has(SWEEP_HEADER) {
        sweep_chart(&table)?
    } else {
        return Err(schema("columns match neither the summary nor the sweep layout"));
    };
    Ok(render(&chart))
}
