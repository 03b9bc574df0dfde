//! Phase labels for every point of a sweep aggregate and the resulting
//! coupling brackets per spectral exponent.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use mpsbench::analysis::{classify_dynamics, phase_diagram, ClassifyOptions, Phase, PhaseBoundary};

use crate::runner::num;

pub const PHASES_FILE: &str = "phases.csv";
pub const BOUNDARY_FILE: &str = "boundary.csv";

#[derive(Clone, Debug)]
pub struct ClassifyArgs {
    pub observable: String,
    pub alpha_column: String,
    pub s_column: String,
    pub options: ClassifyOptions,
}

impl Default for ClassifyArgs {
    fn default() -> Self {
        Self {
            observable: "sz".into(),
            alpha_column: "model.spinboson.alpha".into(),
            s_column: "model.spinboson.s".into(),
            options: ClassifyOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PointLabel {
    pub alpha: f64,
    pub s: f64,
    pub phase: Phase,
    /// Why a point is unclassified, e.g. `missing`.
    pub reason: String,
    pub n_extrema: usize,
}

pub struct ClassifyReport {
    pub points: Vec<PointLabel>,
    pub boundaries: Vec<PhaseBoundary>,
    pub phases_file: PathBuf,
    pub boundary_file: PathBuf,
}

/// Time column and one observable column of a trajectory CSV.
pub fn read_series(path: &Path, column: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let headers = r.headers()?.clone();
    let ti = headers.iter().position(|h| h == "time").ok_or_else(|| anyhow!("no `time` column"))?;
    let vi = headers.iter().position(|h| h == column).ok_or_else(|| anyhow!("no `{column}` column"))?;
    let (mut t, mut v) = (Vec::new(), Vec::new());
    for rec in r.records() {
        let rec = rec?;
        t.push(rec[ti].parse()?);
        v.push(rec[vi].parse()?);
    }
    Ok((t, v))
}

fn label_point(path: Option<PathBuf>, args: &ClassifyArgs) -> (Phase, String, usize) {
    let Some(path) = path.filter(|p| p.metadata().is_ok_and(|m| m.is_file() && m.len() > 0)) else {
        return (Phase::Unclassified, "missing".into(), 0);
    };
    match read_series(&path, &args.observable) {
        Ok((t, _)) if t.is_empty() => (Phase::Unclassified, "missing".into(), 0),
        Ok((t, v)) => match classify_dynamics(&t, &v, &args.options) {
            Ok(l) => {
                let reason = if l.value == Phase::Unclassified { "too_short" } else { "" };
                (l.value, reason.into(), l.evidence.len())
            }
            Err(e) => (Phase::Unclassified, format!("invalid: {e}"), 0),
        },
        Err(e) => (Phase::Unclassified, format!("unreadable: {e}"), 0),
    }
}

/// Classify every row of `aggregate`; result paths are resolved relative to
/// the aggregate's directory.
pub fn cmd_classify(aggregate: &Path, out: &Path, args: &ClassifyArgs) -> Result<ClassifyReport> {
    let base = aggregate.parent().unwrap_or(Path::new("."));
    let mut r = csv::Reader::from_path(aggregate).with_context(|| format!("reading {}", aggregate.display()))?;
    let headers = r.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name).ok_or_else(|| anyhow!("aggregate has no `{name}` column"));
    let ai = col(&args.alpha_column)?;
    let si = col(&args.s_column)?;
    let fi = col("result_file")?;
    let n_axes = col("job")?;

    fs::create_dir_all(out)?;
    let phases_file = out.join(PHASES_FILE);
    let mut w = csv::Writer::from_path(&phases_file)?;
    let mut header: Vec<String> = headers.iter().take(n_axes).map(String::from).collect();
    header.extend(["phase", "reason", "n_extrema"].map(String::from));
    w.write_record(&header)?;

    let mut points = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let alpha: f64 = rec[ai].parse().with_context(|| format!("bad alpha `{}`", &rec[ai]))?;
        let s: f64 = rec[si].parse().with_context(|| format!("bad s `{}`", &rec[si]))?;
        let file = (!rec[fi].is_empty()).then(|| base.join(&rec[fi]));
        let (phase, reason, n_extrema) = label_point(file, args);
        let mut row: Vec<String> = rec.iter().take(n_axes).map(String::from).collect();
        row.extend([phase.to_string(), reason.clone(), n_extrema.to_string()]);
        w.write_record(&row)?;
        points.push(PointLabel { alpha, s, phase, reason, n_extrema });
    }
    w.flush()?;
    if points.is_empty() {
        bail!("aggregate {} has no rows", aggregate.display());
    }

    let grid: Vec<(f64, f64, Phase)> = points.iter().map(|p| (p.alpha, p.s, p.phase)).collect();
    let boundaries = phase_diagram(&grid);
    let boundary_file = out.join(BOUNDARY_FILE);
    let mut w = csv::Writer::from_path(&boundary_file)?;
    w.write_record(["s", "kind", "lower", "upper", "midpoint", "excluded"])?;
    let opt = |x: Option<f64>| x.map(num).unwrap_or_default();
    for b in &boundaries {
        let excluded: Vec<String> = b.excluded.iter().map(|&x| num(x)).collect();
        w.write_record([
            num(b.s),
            b.kind.to_string(),
            opt(b.bracket.0),
            opt(b.bracket.1),
            opt(b.midpoint),
            excluded.join(";"),
        ])?;
    }
    w.flush()?;
    Ok(ClassifyReport { points, boundaries, phases_file, boundary_file })
}
