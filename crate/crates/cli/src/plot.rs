//! Static SVG plots from CSV tables. Output bytes depend only on the input.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
        let headers = r.headers()?.iter().map(String::from).collect();
        let rows = r.records().map(|rec| Ok(rec?.iter().map(String::from).collect())).collect::<Result<_>>()?;
        Ok(Self { headers, rows })
    }

    fn column(&self, name: &str) -> Result<usize> {
        self.headers.iter().position(|h| h == name).ok_or_else(|| anyhow!("unknown column `{name}`"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlotKind {
    Line,
    Heatmap,
}

#[derive(Clone, Debug, Default)]
pub struct PlotArgs {
    pub x: Option<String>,
    pub y: Vec<String>,
    pub group: Option<String>,
    /// Cell value column for heatmaps.
    pub value: Option<String>,
    pub title: Option<String>,
}

const W: f64 = 720.0;
const H: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 180.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

fn parse(v: &str, col: &str) -> Result<f64> {
    v.trim().parse().map_err(|_| anyhow!("non-numeric value `{v}` in column `{col}`"))
}

fn tick_label(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && !(1e-3..1e5).contains(&a) {
        return format!("{x:.2e}");
    }
    let s = format!("{x:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

/// Round step ticks covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = hi - lo;
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| span / s <= 6.0).unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn range(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if lo == hi {
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
        (lo - pad, hi + pad)
    } else {
        (lo, hi)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (W - LEFT - RIGHT)
    }
    fn py(&self, y: f64) -> f64 {
        H - BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (H - TOP - BOTTOM)
    }
}

fn header(svg: &mut String, title: Option<&str>) {
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    if let Some(t) = title {
        let _ = writeln!(svg, r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="15">{}</text>"#, W / 2.0, escape(t));
    }
}

fn axes(svg: &mut String, f: &Frame, xlabel: &str, ylabel: &str, xticks: bool) {
    let (x0, x1, y0, y1) = (LEFT, W - RIGHT, H - BOTTOM, TOP);
    let _ = writeln!(svg, r#"<path d="M{x0:.1} {y1:.1} V{y0:.1} H{x1:.1}" fill="none" stroke="black"/>"#);
    if xticks {
        for t in ticks(f.x.0, f.x.1) {
            let px = f.px(t);
            let _ = writeln!(svg, r#"<line x1="{px:.2}" y1="{y0:.1}" x2="{px:.2}" y2="{:.1}" stroke="black"/>"#, y0 + 5.0);
            let _ = writeln!(svg, r#"<text x="{px:.2}" y="{:.1}" text-anchor="middle">{}</text>"#, y0 + 18.0, tick_label(t));
        }
    }
    for t in ticks(f.y.0, f.y.1) {
        let py = f.py(t);
        let _ = writeln!(svg, r#"<line x1="{:.1}" y1="{py:.2}" x2="{x0:.1}" y2="{py:.2}" stroke="black"/>"#, x0 - 5.0);
        let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.2}" text-anchor="end">{}</text>"#, x0 - 8.0, py + 4.0, tick_label(t));
    }
    let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, (x0 + x1) / 2.0, H - 18.0, escape(xlabel));
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{:.1}" text-anchor="middle" transform="rotate(-90 18 {:.1})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(ylabel)
    );
}

fn legend(svg: &mut String, entries: &[(String, &str)]) {
    for (k, (label, color)) in entries.iter().enumerate() {
        let y = TOP + 10.0 + 20.0 * k as f64;
        let x = W - RIGHT + 15.0;
        let _ = writeln!(svg, r#"<rect x="{x:.1}" y="{:.1}" width="12" height="12" fill="{color}"/>"#, y - 10.0);
        let _ = writeln!(svg, r#"<text class="legend" x="{:.1}" y="{y:.1}">{}</text>"#, x + 18.0, escape(label));
    }
}

/// One polyline per (source, y column, group value).
pub fn line_svg(sources: &[(String, Table)], args: &PlotArgs) -> Result<String> {
    let first = &sources.first().ok_or_else(|| anyhow!("no data sources"))?.1;
    let xname = args.x.clone().or_else(|| first.headers.first().cloned()).ok_or_else(|| anyhow!("empty header"))?;
    let ynames = if args.y.is_empty() {
        vec![first.headers.get(1).cloned().ok_or_else(|| anyhow!("line plots need at least two columns"))?]
    } else {
        args.y.clone()
    };
    let mut series: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    for (label, t) in sources {
        let xi = t.column(&xname)?;
        let yis = ynames.iter().map(|y| t.column(y)).collect::<Result<Vec<_>>>()?;
        let gi = args.group.as_deref().map(|g| t.column(g)).transpose()?;
        for (yname, &yi) in ynames.iter().zip(&yis) {
            let mut groups: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
            for row in &t.rows {
                let key = gi.map(|g| row[g].clone()).unwrap_or_default();
                let p = (parse(&row[xi], &xname)?, parse(&row[yi], yname)?);
                match groups.iter_mut().find(|g| g.0 == key) {
                    Some(g) => g.1.push(p),
                    None => groups.push((key, vec![p])),
                }
            }
            for (key, pts) in groups {
                let mut parts = Vec::new();
                if sources.len() > 1 {
                    parts.push(label.clone());
                }
                if ynames.len() > 1 {
                    parts.push(yname.clone());
                }
                if gi.is_some() {
                    parts.push(key);
                }
                let name = if parts.is_empty() { yname.clone() } else { parts.join(" / ") };
                series.push((name, pts));
            }
        }
    }
    if series.iter().all(|s| s.1.is_empty()) {
        bail!("no data rows to plot");
    }
    let frame = Frame {
        x: range(series.iter().flat_map(|s| s.1.iter().map(|p| p.0))),
        y: range(series.iter().flat_map(|s| s.1.iter().map(|p| p.1))),
    };
    let mut svg = String::new();
    header(&mut svg, args.title.as_deref());
    let ylabel = if ynames.len() == 1 { ynames[0].clone() } else { ynames.join(", ") };
    axes(&mut svg, &frame, &xname, &ylabel, true);
    let mut entries = Vec::new();
    for (k, (name, pts)) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let d: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", frame.px(x), frame.py(y))).collect();
        let _ = writeln!(svg, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, d.join(" "));
        entries.push((name.clone(), color));
    }
    legend(&mut svg, &entries);
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn sorted_unique(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Grid of cells over two numeric columns, colored by a numeric or
/// categorical value column.
pub fn heatmap_svg(t: &Table, args: &PlotArgs) -> Result<String> {
    let name = |given: Option<&String>, k: usize| -> Result<String> {
        given.cloned().or_else(|| t.headers.get(k).cloned()).ok_or_else(|| anyhow!("heatmaps need three columns"))
    };
    let xname = name(args.x.as_ref(), 0)?;
    let yname = name(args.y.first(), 1)?;
    let vname = name(args.value.as_ref(), 2)?;
    let (xi, yi, vi) = (t.column(&xname)?, t.column(&yname)?, t.column(&vname)?);
    if t.rows.is_empty() {
        bail!("no data rows to plot");
    }
    let cells = t
        .rows
        .iter()
        .map(|r| Ok((parse(&r[xi], &xname)?, parse(&r[yi], &yname)?, r[vi].clone())))
        .collect::<Result<Vec<_>>>()?;
    let xs = sorted_unique(cells.iter().map(|c| c.0).collect());
    let ys = sorted_unique(cells.iter().map(|c| c.1).collect());
    let numeric: Option<Vec<f64>> = cells.iter().map(|c| c.2.trim().parse::<f64>().ok()).collect();
    let mut categories: Vec<String> = cells.iter().map(|c| c.2.clone()).collect();
    categories.sort();
    categories.dedup();

    let frame = Frame { x: (-0.5, xs.len() as f64 - 0.5), y: (-0.5, ys.len() as f64 - 0.5) };
    let (cw, ch) = ((W - LEFT - RIGHT) / xs.len() as f64, (H - TOP - BOTTOM) / ys.len() as f64);
    let mut svg = String::new();
    header(&mut svg, args.title.as_deref());
    let (lo, hi) = numeric.as_ref().map(|v| range(v.iter().copied())).unwrap_or((0.0, 1.0));
    for (k, c) in cells.iter().enumerate() {
        let i = xs.iter().position(|&x| x == c.0).unwrap_or(0) as f64;
        let j = ys.iter().position(|&y| y == c.1).unwrap_or(0) as f64;
        let color = match &numeric {
            Some(v) => {
                let f = ((v[k] - lo) / (hi - lo)).clamp(0.0, 1.0);
                let lerp = |a: f64, b: f64| (a + f * (b - a)).round() as u8;
                format!("#{:02x}{:02x}{:02x}", lerp(68.0, 253.0), lerp(1.0, 231.0), lerp(84.0, 37.0))
            }
            None => PALETTE[categories.iter().position(|s| *s == c.2).unwrap_or(0) % PALETTE.len()].to_string(),
        };
        let _ = writeln!(
            svg,
            r#"<rect x="{:.2}" y="{:.2}" width="{cw:.2}" height="{ch:.2}" fill="{color}" stroke="white"/>"#,
            frame.px(i) - cw / 2.0,
            frame.py(j) - ch / 2.0
        );
    }
    let (x0, y0) = (LEFT, H - BOTTOM);
    let _ = writeln!(svg, r#"<path d="M{x0:.1} {TOP:.1} V{y0:.1} H{:.1}" fill="none" stroke="black"/>"#, W - RIGHT);
    for (i, x) in xs.iter().enumerate() {
        let _ = writeln!(svg, r#"<text x="{:.2}" y="{:.1}" text-anchor="middle">{}</text>"#, frame.px(i as f64), y0 + 18.0, tick_label(*x));
    }
    for (j, y) in ys.iter().enumerate() {
        let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.2}" text-anchor="end">{}</text>"#, x0 - 8.0, frame.py(j as f64) + 4.0, tick_label(*y));
    }
    let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, (LEFT + W - RIGHT) / 2.0, H - 18.0, escape(&xname));
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{:.1}" text-anchor="middle" transform="rotate(-90 18 {:.1})">{}</text>"#,
        (TOP + y0) / 2.0,
        (TOP + y0) / 2.0,
        escape(&yname)
    );
    match numeric {
        Some(_) => legend(&mut svg, &[(format!("{vname} = {}", tick_label(lo)), "#440154"), (format!("{vname} = {}", tick_label(hi)), "#fde725")]),
        None => {
            let entries: Vec<(String, &str)> =
                categories.iter().enumerate().map(|(k, c)| (c.clone(), PALETTE[k % PALETTE.len()])).collect();
            legend(&mut svg, &entries);
        }
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Render and write; nothing is written when rendering fails.
pub fn cmd_plot(data: &[PathBuf], labels: &[String], kind: PlotKind, args: &PlotArgs, out: &Path) -> Result<()> {
    if data.is_empty() {
        bail!("no data files given");
    }
    let sources = data
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let label = labels.get(k).cloned().unwrap_or_else(|| default_label(p));
            Ok((label, Table::read(p)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let svg = match kind {
        PlotKind::Line => line_svg(&sources, args)?,
        PlotKind::Heatmap => {
            if sources.len() != 1 {
                bail!("heatmaps take exactly one data file");
            }
            heatmap_svg(&sources[0].1, args)?
        }
    };
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(out, svg).with_context(|| format!("writing {}", out.display()))?;
    Ok(())
}

/// Name of the directory holding the file, else the file stem.
fn default_label(p: &Path) -> String {
    p.parent()
        .and_then(|d| d.file_name())
        .or_else(|| p.file_stem())
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(headers: &[&str], rows: &[&[&str]]) -> Table {
        Table {
            headers: headers.iter().map(|s| s.to_string()).collect(),
            rows: rows.iter().map(|r| r.iter().map(|s| s.to_string()).collect()).collect(),
        }
    }

    #[test]
    fn two_columns_give_one_polyline() {
        let t = table(&["h", "abs_mz"], &[&["0.5", "1"], &["1.0", "0.9"], &["1.5", "0.4"]]);
        let svg = line_svg(&[("a".into(), t.clone())], &PlotArgs::default()).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert!(svg.contains(">h</text>") && svg.contains(">abs_mz</text>"));
        assert_eq!(svg, line_svg(&[("a".into(), t)], &PlotArgs::default()).unwrap());
    }

    #[test]
    fn sources_and_groups_become_series() {
        let t = table(&["h", "m"], &[&["1", "1"], &["2", "0"]]);
        let svg = line_svg(&[("OBC".into(), t.clone()), ("PBC".into(), t)], &PlotArgs::default()).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains(">OBC</text>") && svg.contains(">PBC</text>"));
        let g = table(&["t", "v", "tag"], &[&["0", "1", "a"], &["1", "2", "b"], &["2", "3", "a"]]);
        let args = PlotArgs { group: Some("tag".into()), ..PlotArgs::default() };
        assert_eq!(line_svg(&[("x".into(), g)], &args).unwrap().matches("<polyline").count(), 2);
    }

    #[test]
    fn errors_for_unknown_columns_and_empty_rows() {
        let t = table(&["h", "m"], &[&["1", "1"]]);
        let args = PlotArgs { y: vec!["nope".into()], ..PlotArgs::default() };
        assert!(line_svg(&[("a".into(), t)], &args).is_err());
        let empty = table(&["h", "m"], &[]);
        assert!(line_svg(&[("a".into(), empty.clone())], &PlotArgs::default()).is_err());
        let dir = tempfile::tempdir().unwrap();
        let data = dir.path().join("d.csv");
        fs::write(&data, "h,m\n").unwrap();
        let out = dir.path().join("p.svg");
        assert!(cmd_plot(&[data], &[], PlotKind::Line, &PlotArgs::default(), &out).is_err());
        assert!(!out.exists());
    }

    #[test]
    fn categorical_heatmap() {
        let t = table(
            &["alpha", "s", "phase"],
            &[&["0.1", "0.5", "coherent"], &["0.2", "0.5", "incoherent"], &["0.1", "0.7", "coherent"]],
        );
        let svg = heatmap_svg(&t, &PlotArgs::default()).unwrap();
        assert_eq!(svg.matches("stroke=\"white\"").count(), 3);
        assert!(svg.contains(">coherent</text>") && svg.contains(">incoherent</text>"));
    }

    #[test]
    fn tick_values_are_round() {
        assert_eq!(ticks(0.0, 10.0), vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0]);
        assert_eq!(tick_label(0.30000000000000004), "0.3");
        assert_eq!(tick_label(2e-5), "2.00e-5");
    }
}
