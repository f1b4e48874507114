use std::fmt::Write as _;
use std::path::Path;

use crate::bench::{BenchRow, Mode, ScoreHistogram};

pub fn write_results(path: &Path, rows: &[BenchRow]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results(path: &Path) -> anyhow::Result<Vec<BenchRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let rows = r.deserialize().collect::<Result<Vec<BenchRow>, _>>()?;
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XAxis {
    Expressions,
    Seconds,
}

impl XAxis {
    fn of(self, r: &BenchRow) -> f64 {
        match self {
            XAxis::Expressions => r.expressions as f64,
            XAxis::Seconds => r.seconds,
        }
    }

    fn label(self) -> &'static str {
        match self {
            XAxis::Expressions => "candidate expressions considered",
            XAxis::Seconds => "elapsed seconds",
        }
    }
}

/// Corners of a cumulative step curve: zero until the first solve, then up
/// by one at each solve, held flat to `x_max`.
pub fn step_points(mut xs: Vec<f64>, x_max: f64) -> Vec<(f64, f64)> {
    xs.sort_by(f64::total_cmp);
    let mut pts = vec![(0.0, 0.0)];
    for (i, x) in xs.iter().enumerate() {
        pts.push((*x, i as f64));
        pts.push((*x, i as f64 + 1.0));
    }
    pts.push((x_max.max(xs.last().copied().unwrap_or(0.0)), xs.len() as f64));
    pts
}

const COLORS: [&str; 5] = ["#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3"];
const W: f64 = 640.0;
const H: f64 = 400.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 20.0;
const BOTTOM: f64 = 50.0;

fn tick_label(v: f64) -> String {
    if v >= 1e6 {
        format!("{}M", trim(v / 1e6))
    } else if v >= 1e3 {
        format!("{}k", trim(v / 1e3))
    } else {
        trim(v)
    }
}

fn trim(v: f64) -> String {
    let s = format!("{v:.2}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn axes(svg: &mut String, x_max: f64, y_max: f64, x_label: &str, y_label: &str) {
    let (pw, ph) = (W - LEFT - RIGHT, H - TOP - BOTTOM);
    let _ = writeln!(
        svg,
        r#"<line x1="{LEFT}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/><line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{y0}" stroke="black"/>"#,
        y0 = TOP + ph,
        x1 = LEFT + pw
    );
    for i in 0..=5 {
        let f = f64::from(i) / 5.0;
        let (x, y) = (LEFT + f * pw, TOP + ph - f * ph);
        let _ = writeln!(
            svg,
            r#"<text x="{x:.1}" y="{ty:.1}" font-size="11" text-anchor="middle">{}</text><text x="{lx:.1}" y="{y:.1}" font-size="11" text-anchor="end" dominant-baseline="middle">{}</text>"#,
            tick_label(f * x_max),
            tick_label(f * y_max),
            ty = TOP + ph + 16.0,
            lx = LEFT - 6.0,
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">{x_label}</text><text x="14" y="{:.1}" font-size="12" text-anchor="middle" transform="rotate(-90 14 {:.1})">{y_label}</text>"#,
        LEFT + pw / 2.0,
        H - 12.0,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
    );
}

fn header() -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    )
}

/// Benchmarks solved against budget, one step curve per mode in the order
/// modes first appear in `rows`.
pub fn curves_svg(rows: &[BenchRow], axis: XAxis) -> String {
    let mut modes: Vec<Mode> = Vec::new();
    for r in rows {
        if !modes.contains(&r.mode) {
            modes.push(r.mode);
        }
    }
    let x_max = rows.iter().map(|r| axis.of(r)).fold(0.0, f64::max).max(1.0);
    let cases = modes
        .iter()
        .map(|m| rows.iter().filter(|r| r.mode == *m).count())
        .max()
        .unwrap_or(0)
        .max(1) as f64;
    let (pw, ph) = (W - LEFT - RIGHT, H - TOP - BOTTOM);
    let mut svg = header();
    axes(&mut svg, x_max, cases, axis.label(), "benchmarks solved");
    for (i, mode) in modes.iter().enumerate() {
        let xs: Vec<f64> = rows.iter().filter(|r| r.mode == *mode && r.solved == 1).map(|r| axis.of(r)).collect();
        let pts = step_points(xs, x_max);
        let mut d = String::new();
        for (j, (x, y)) in pts.iter().enumerate() {
            let _ = write!(
                d,
                "{}{:.2} {:.2}",
                if j == 0 { "M" } else { " L" },
                LEFT + x / x_max * pw,
                TOP + ph - y / cases * ph
            );
        }
        let color = COLORS[i % COLORS.len()];
        let _ = writeln!(svg, r#"<path d="{d}" fill="none" stroke="{color}" stroke-width="2"/>"#);
        let ly = TOP + 14.0 + 16.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{ly:.1}" font-size="12" fill="{color}">{mode}</text>"#,
            LEFT + 12.0
        );
    }
    svg.push_str("</svg>\n");
    svg
}

pub fn histogram_csv(h: &ScoreHistogram) -> String {
    let mut out = String::from("score_bin_low,score_bin_high,count_subexpr,count_non_subexpr\n");
    let n = h.bins() as f64;
    for i in 0..h.bins() {
        let _ = writeln!(
            out,
            "{:.2},{:.2},{},{}",
            i as f64 / n,
            (i + 1) as f64 / n,
            h.subexpr[i],
            h.non_subexpr[i]
        );
    }
    out
}

pub fn read_histogram_csv(text: &str) -> anyhow::Result<ScoreHistogram> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let mut h = ScoreHistogram { subexpr: Vec::new(), non_subexpr: Vec::new() };
    for rec in r.deserialize::<(f64, f64, u64, u64)>() {
        let (_, _, s, n) = rec?;
        h.subexpr.push(s);
        h.non_subexpr.push(n);
    }
    anyhow::ensure!(h.bins() > 0, "histogram has no bins");
    Ok(h)
}

/// Side-by-side bars of each group's share per score bin.
pub fn histogram_svg(h: &ScoreHistogram) -> String {
    let (pw, ph) = (W - LEFT - RIGHT, H - TOP - BOTTOM);
    let (ts, tn) = h.total();
    let frac = |c: u64, t: u64| if t == 0 { 0.0 } else { c as f64 / t as f64 };
    let y_max = (0..h.bins())
        .map(|i| frac(h.subexpr[i], ts).max(frac(h.non_subexpr[i], tn)))
        .fold(0.0, f64::max)
        .max(0.01);
    let mut svg = header();
    axes(&mut svg, 1.0, y_max, "model score", "fraction of values");
    let bw = pw / h.bins() as f64;
    for i in 0..h.bins() {
        for (k, (c, t, color)) in [(h.subexpr[i], ts, COLORS[2]), (h.non_subexpr[i], tn, COLORS[3])].into_iter().enumerate() {
            let height = frac(c, t) / y_max * ph;
            let _ = writeln!(
                svg,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{height:.2}" fill="{color}"/>"#,
                LEFT + bw * i as f64 + bw * 0.5 * k as f64,
                TOP + ph - height,
                bw * 0.45,
            );
        }
    }
    let _ = writeln!(
        svg,
        r#"<text x="{x:.1}" y="{:.1}" font-size="12" fill="{}">sub-expression of solution ({ts})</text><text x="{x:.1}" y="{:.1}" font-size="12" fill="{}">not a sub-expression ({tn})</text>"#,
        TOP + 14.0,
        COLORS[2],
        TOP + 30.0,
        COLORS[3],
        x = LEFT + 12.0,
    );
    svg.push_str("</svg>\n");
    svg
}

/// Writes both curve plots next to `results_path`'s directory contents.
pub fn write_curves(dir: &Path, rows: &[BenchRow]) -> anyhow::Result<()> {
    std::fs::write(dir.join("solved_vs_expressions.svg"), curves_svg(rows, XAxis::Expressions))?;
    std::fs::write(dir.join("solved_vs_seconds.svg"), curves_svg(rows, XAxis::Seconds))?;
    Ok(())
}

pub fn write_histogram(dir: &Path, h: &ScoreHistogram) -> anyhow::Result<()> {
    std::fs::write(dir.join("histogram.csv"), histogram_csv(h))?;
    std::fs::write(dir.join("histogram.svg"), histogram_svg(h))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(name: &str, mode: Mode, solved: u8, expressions: u64) -> BenchRow {
        BenchRow {
            name: name.into(),
            mode,
            solved,
            expressions,
            seconds: 0.5,
            solve_weight: (solved == 1).then_some(4),
            formula: if solved == 1 { "LEN(var_0)".into() } else { String::new() },
        }
    }

    #[test]
    fn single_solve_steps_at_its_cost() {
        assert_eq!(step_points(vec![10.0], 100.0), vec![(0.0, 0.0), (10.0, 0.0), (10.0, 1.0), (100.0, 1.0)]);
        assert_eq!(step_points(vec![], 5.0), vec![(0.0, 0.0), (5.0, 0.0)]);
    }

    #[test]
    fn empty_results_still_draw_axes() {
        let svg = curves_svg(&[], XAxis::Expressions);
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert!(svg.contains("<line"));
        assert!(!svg.contains("<path"));
    }

    #[test]
    fn one_curve_per_mode() {
        let rows = vec![row("a", Mode::None, 1, 10), row("a", Mode::Model, 1, 5), row("b", Mode::None, 0, 100)];
        let svg = curves_svg(&rows, XAxis::Expressions);
        assert_eq!(svg.matches("<path").count(), 2);
        assert!(svg.contains(">none</text>") && svg.contains(">model</text>"));
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("results.csv");
        let rows = vec![row("a, quoted \"name\"", Mode::Heuristic, 1, 10), row("b", Mode::None, 0, 100)];
        write_results(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("name,mode,solved,expressions,seconds,solve_weight,formula\n"));
        assert_eq!(read_results(&path).unwrap(), rows);
    }

    #[test]
    fn histogram_csv_round_trip() {
        let mut h = ScoreHistogram::new(20);
        h.add(0.97, true);
        h.add(0.02, false);
        let text = histogram_csv(&h);
        assert_eq!(text.lines().count(), 21);
        assert!(text.contains("\n0.95,1.00,1,0\n"));
        assert_eq!(read_histogram_csv(&text).unwrap(), h);
    }
}
