//! Post-processing: coherent/incoherent classification, magnetization
//! curves, phase boundaries and convergence verdicts.

use std::cmp::Ordering;
use std::fmt;

use crate::dmrg::DmrgResult;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Phase {
    Coherent,
    Incoherent,
    Unclassified,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Coherent => "coherent",
            Phase::Incoherent => "incoherent",
            Phase::Unclassified => "unclassified",
        })
    }
}

impl std::str::FromStr for Phase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coherent" => Ok(Phase::Coherent),
            "incoherent" => Ok(Phase::Incoherent),
            "unclassified" => Ok(Phase::Unclassified),
            other => Err(Error::InvalidArgument(format!("unknown phase label `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExtremumKind {
    Peak,
    Valley,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Extremum {
    pub kind: ExtremumKind,
    pub index: usize,
    pub time: f64,
    pub value: f64,
    pub prominence: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhaseLabel {
    pub value: Phase,
    /// Extrema that passed the prominence and separation filters, in time
    /// order.
    pub evidence: Vec<Extremum>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassifyOptions {
    pub prominence: f64,
    /// Minimal time between two kept extrema of the same kind; `None` means
    /// twice the sampling step.
    pub min_separation: Option<f64>,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self { prominence: 0.01, min_separation: None }
    }
}

pub const MIN_SAMPLES: usize = 8;

/// Indices of strict local maxima; a plateau counts once, at its middle.
fn local_maxima(x: &[f64]) -> Vec<usize> {
    let mut out = Vec::new();
    let n = x.len();
    let mut i = 1;
    while i + 1 < n {
        if x[i - 1] < x[i] {
            let mut j = i;
            while j + 1 < n && x[j + 1] == x[i] {
                j += 1;
            }
            if j + 1 < n && x[j + 1] < x[i] {
                out.push((i + j) / 2);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    out
}

/// Height of a peak above the higher of the two lowest points reachable on
/// either side before meeting a higher sample.
fn prominence(x: &[f64], i: usize) -> f64 {
    let mut left_min = x[i];
    for k in (0..i).rev() {
        if x[k] > x[i] {
            break;
        }
        left_min = left_min.min(x[k]);
    }
    let mut right_min = x[i];
    for &v in &x[i + 1..] {
        if v > x[i] {
            break;
        }
        right_min = right_min.min(v);
    }
    x[i] - left_min.max(right_min)
}

fn find_extrema(
    x: &[f64],
    kind: ExtremumKind,
    times: &[f64],
    opts: &ClassifyOptions,
    min_sep: f64,
    slack: f64,
) -> Vec<Extremum> {
    let signed: Vec<f64> = match kind {
        ExtremumKind::Peak => x.to_vec(),
        ExtremumKind::Valley => x.iter().map(|v| -v).collect(),
    };
    let mut cands: Vec<Extremum> = local_maxima(&signed)
        .into_iter()
        .map(|i| Extremum { kind, index: i, time: times[i], value: x[i], prominence: prominence(&signed, i) })
        .filter(|e| e.prominence >= opts.prominence)
        .collect();
    // Keep the most prominent first, dropping neighbours that are too close.
    cands.sort_by(|a, b| b.prominence.total_cmp(&a.prominence).then(a.index.cmp(&b.index)));
    let mut kept: Vec<Extremum> = Vec::new();
    for c in cands {
        // `slack` keeps grid-multiple separations from flipping on rounding.
        if kept.iter().all(|k| (k.time - c.time).abs() >= min_sep - slack) {
            kept.push(c);
        }
    }
    kept
}

/// Label a sampled `<sz(t)>` series.
///
/// Coherent iff some prominent valley is followed by a prominent peak.
/// Constant and monotone series are Incoherent; fewer than eight samples
/// give Unclassified.
pub fn classify_dynamics(times: &[f64], values: &[f64], opts: &ClassifyOptions) -> Result<PhaseLabel> {
    if times.len() != values.len() {
        return Err(Error::Shape(format!("{} times for {} values", times.len(), values.len())));
    }
    if values.iter().chain(times).any(|v| v.is_nan()) {
        return Err(Error::NonFinite("time series"));
    }
    if values.len() < MIN_SAMPLES {
        return Ok(PhaseLabel { value: Phase::Unclassified, evidence: Vec::new() });
    }
    let dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
    if !(dt > 0.0) || times.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-6 * dt) {
        return Err(Error::InvalidArgument("time grid must be uniform and increasing".into()));
    }
    let min_sep = opts.min_separation.unwrap_or(2.0 * dt);
    let slack = 1e-9 * dt;
    let mut evidence = find_extrema(values, ExtremumKind::Peak, times, opts, min_sep, slack);
    evidence.extend(find_extrema(values, ExtremumKind::Valley, times, opts, min_sep, slack));
    evidence.sort_by_key(|e| e.index);
    let first_valley = evidence.iter().find(|e| e.kind == ExtremumKind::Valley).map(|e| e.index);
    let coherent = first_valley.is_some_and(|v| evidence.iter().any(|e| e.kind == ExtremumKind::Peak && e.index > v));
    let value = if coherent { Phase::Coherent } else { Phase::Incoherent };
    Ok(PhaseLabel { value, evidence })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MagnetizationRow {
    pub h: f64,
    pub abs_mz: f64,
    pub energy: f64,
    pub discarded_weight: f64,
}

/// `|sum_i <sz_i>| / N` per field value, sorted by field.
pub fn magnetization_curve(results: &[(f64, &DmrgResult)]) -> Result<Vec<MagnetizationRow>> {
    let Some(first) = results.first() else {
        return Ok(Vec::new());
    };
    let bases = first.1.state.bases();
    let mut rows = Vec::with_capacity(results.len());
    for (h, r) in results {
        if r.state.bases() != bases {
            return Err(Error::BasisMismatch("magnetization curve mixes lattice configurations".into()));
        }
        let mz = r.state.local_expectations("sz")?;
        rows.push(MagnetizationRow {
            h: *h,
            abs_mz: mz.iter().sum::<f64>().abs() / mz.len() as f64,
            energy: r.energy,
            discarded_weight: r.max_discarded_weight,
        });
    }
    rows.sort_by(|a, b| a.h.total_cmp(&b.h));
    Ok(rows)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryKind {
    /// Both phases present.
    Bracketed,
    /// Only coherent points: the boundary lies above the grid.
    UnboundedAbove,
    /// Only incoherent points: the boundary lies below the grid.
    UnboundedBelow,
    /// No classified points.
    Empty,
}

impl fmt::Display for BoundaryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundaryKind::Bracketed => "bracketed",
            BoundaryKind::UnboundedAbove => "unbounded_above",
            BoundaryKind::UnboundedBelow => "unbounded_below",
            BoundaryKind::Empty => "empty",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhaseBoundary {
    pub s: f64,
    pub kind: BoundaryKind,
    /// Largest coherent coupling.
    pub largest_coherent: Option<f64>,
    /// Smallest incoherent coupling.
    pub smallest_incoherent: Option<f64>,
    /// `(low, high)`; an open side is `None`.
    pub bracket: (Option<f64>, Option<f64>),
    pub midpoint: Option<f64>,
    /// Couplings left out because they were unclassified.
    pub excluded: Vec<f64>,
}

/// Estimate `alpha_c(s)` for every `s` in the grid, in increasing `s`.
pub fn phase_diagram(grid: &[(f64, f64, Phase)]) -> Vec<PhaseBoundary> {
    let mut ss: Vec<f64> = grid.iter().map(|g| g.1).collect();
    ss.sort_by(f64::total_cmp);
    ss.dedup();
    ss.into_iter()
        .map(|s| {
            let at: Vec<&(f64, f64, Phase)> = grid.iter().filter(|g| g.1 == s).collect();
            let pick = |p: Phase| at.iter().filter(move |g| g.2 == p).map(|g| g.0);
            let largest_coherent = pick(Phase::Coherent).max_by(f64::total_cmp);
            let smallest_incoherent = pick(Phase::Incoherent).min_by(f64::total_cmp);
            let mut excluded: Vec<f64> = pick(Phase::Unclassified).collect();
            excluded.sort_by(f64::total_cmp);
            let (kind, bracket, midpoint) = match (largest_coherent, smallest_incoherent) {
                (Some(c), Some(i)) => {
                    let (lo, hi) = if c <= i { (c, i) } else { (i, c) };
                    (BoundaryKind::Bracketed, (Some(lo), Some(hi)), Some(0.5 * (lo + hi)))
                }
                (Some(c), None) => (BoundaryKind::UnboundedAbove, (Some(c), None), None),
                (None, Some(i)) => (BoundaryKind::UnboundedBelow, (None, Some(i)), None),
                (None, None) => (BoundaryKind::Empty, (None, None), None),
            };
            PhaseBoundary { s, kind, largest_coherent, smallest_incoherent, bracket, midpoint, excluded }
        })
        .collect()
}

/// True when the brackets do not move down as `s` grows: every edge and
/// midpoint is at least the previous one, with open upper edges treated as
/// infinite and open lower edges as zero.
pub fn brackets_non_decreasing(boundaries: &[PhaseBoundary]) -> bool {
    let key = |b: &PhaseBoundary| {
        let lo = b.bracket.0.unwrap_or(0.0);
        let hi = b.bracket.1.unwrap_or(f64::INFINITY);
        let mid = b.midpoint.unwrap_or(match b.kind {
            BoundaryKind::UnboundedAbove => f64::INFINITY,
            _ => 0.5 * (lo + hi.min(lo)),
        });
        (lo, hi, mid)
    };
    boundaries.windows(2).all(|w| {
        let (a, b) = (key(&w[0]), key(&w[1]));
        b.0 >= a.0 && b.1 >= a.1 && b.2 >= a.2
    })
}

#[derive(Clone, Debug, PartialEq)]
pub enum RunData {
    Scalar(f64),
    Series { times: Vec<f64>, values: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceVerdict {
    pub parameter: String,
    pub values: Vec<f64>,
    /// `deviations[k]` compares `values[k]` with `values[k + 1]`.
    pub deviations: Vec<f64>,
    pub converged_at: Option<f64>,
    pub tol: f64,
}

fn deviation(a: &RunData, b: &RunData) -> Result<f64> {
    match (a, b) {
        (RunData::Scalar(x), RunData::Scalar(y)) => Ok((x - y).abs()),
        (RunData::Series { times: ta, values: va }, RunData::Series { times: tb, values: vb }) => {
            if ta.len() != tb.len() || va.len() != ta.len() || vb.len() != tb.len() {
                return Err(Error::Shape("misaligned time grids".into()));
            }
            let scale = ta.iter().fold(1.0f64, |m, t| m.max(t.abs()));
            if ta.iter().zip(tb).any(|(x, y)| (x - y).abs() > 1e-9 * scale) {
                return Err(Error::Shape("misaligned time grids".into()));
            }
            Ok(va.iter().zip(vb).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
        }
        _ => Err(Error::InvalidArgument("cannot compare a scalar with a series".into())),
    }
}

/// Successive max-abs deviations over increasing parameter values;
/// `converged_at` is the smallest value whose deviation from its successor
/// is within `tol`.
pub fn convergence_check(parameter: &str, runs: &[(f64, RunData)], tol: f64) -> Result<ConvergenceVerdict> {
    if runs.len() < 2 {
        return Err(Error::InvalidArgument("convergence check needs at least two runs".into()));
    }
    if runs.windows(2).any(|w| w[0].0.partial_cmp(&w[1].0) != Some(Ordering::Less)) {
        return Err(Error::InvalidArgument("parameter values must be strictly increasing".into()));
    }
    let deviations = runs.windows(2).map(|w| deviation(&w[0].1, &w[1].1)).collect::<Result<Vec<_>>>()?;
    let converged_at = deviations.iter().position(|&d| d <= tol).map(|k| runs[k].0);
    Ok(ConvergenceVerdict {
        parameter: parameter.to_string(),
        values: runs.iter().map(|r| r.0).collect(),
        deviations,
        converged_at,
        tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(t_max: f64, dt: f64) -> Vec<f64> {
        let n = (t_max / dt).round() as usize;
        (0..=n).map(|k| k as f64 * dt).collect()
    }

    fn classify(t: &[f64], f: impl Fn(f64) -> f64) -> PhaseLabel {
        let v: Vec<f64> = t.iter().map(|&x| f(x)).collect();
        classify_dynamics(t, &v, &ClassifyOptions::default()).unwrap()
    }

    #[test]
    fn damped_cosine_is_coherent() {
        let t = grid(10.0, 0.05);
        let l = classify(&t, |x| (-x / 5.0).exp() * (2.0 * x).cos());
        assert_eq!(l.value, Phase::Coherent);
        assert_eq!(l.evidence[0].kind, ExtremumKind::Valley);
        assert!((l.evidence[0].time - 1.5).abs() < 0.1);
    }

    #[test]
    fn monotone_and_constant_are_incoherent() {
        let t = grid(10.0, 0.05);
        assert_eq!(classify(&t, |x| (-x).exp()).value, Phase::Incoherent);
        assert_eq!(classify(&t, |_| 1.0).value, Phase::Incoherent);
        // a single valley without a later peak
        assert_eq!(classify(&t, |x| (x - 4.0).powi(2)).value, Phase::Incoherent);
    }

    #[test]
    fn small_wiggles_do_not_count() {
        let t = grid(10.0, 0.05);
        let l = classify(&t, |x| (-x / 3.0).exp() + 0.001 * (7.0 * x).sin());
        assert_eq!(l.value, Phase::Incoherent);
    }

    #[test]
    fn short_series_unclassified_and_bad_input() {
        let t = grid(0.3, 0.05);
        assert_eq!(t.len(), 7);
        assert_eq!(classify(&t, |x| x.cos()).value, Phase::Unclassified);
        let opts = ClassifyOptions::default();
        let t = grid(1.0, 0.1);
        let mut v: Vec<f64> = t.iter().map(|x| x.cos()).collect();
        v[3] = f64::NAN;
        assert!(classify_dynamics(&t, &v, &opts).is_err());
        let mut bent = t.clone();
        bent[4] += 0.03;
        let v: Vec<f64> = t.iter().map(|x| x.cos()).collect();
        assert!(classify_dynamics(&bent, &v, &opts).is_err());
    }

    #[test]
    fn time_rescaling_invariance() {
        let t = grid(10.0, 0.05);
        let f = |x: f64| (-x / 4.0).exp() * (1.3 * x).cos();
        let v: Vec<f64> = t.iter().map(|&x| f(x)).collect();
        for scale in [0.01, 1.0, 37.0] {
            let ts: Vec<f64> = t.iter().map(|x| x * scale).collect();
            let l = classify_dynamics(&ts, &v, &ClassifyOptions::default()).unwrap();
            assert_eq!(l.value, Phase::Coherent);
        }
    }

    #[test]
    fn phase_diagram_brackets() {
        let g = [(0.01, 0.5, Phase::Coherent), (0.5, 0.5, Phase::Incoherent), (0.2, 0.5, Phase::Unclassified)];
        let b = phase_diagram(&g);
        assert_eq!(b.len(), 1);
        assert_eq!(b[0].kind, BoundaryKind::Bracketed);
        assert_eq!(b[0].bracket, (Some(0.01), Some(0.5)));
        assert!((b[0].midpoint.unwrap() - 0.255).abs() < 1e-15);
        assert_eq!(b[0].excluded, vec![0.2]);
        let all = phase_diagram(&[(0.1, 0.9, Phase::Coherent), (0.3, 0.9, Phase::Coherent)]);
        assert_eq!(all[0].kind, BoundaryKind::UnboundedAbove);
        assert_eq!(all[0].bracket, (Some(0.3), None));
    }

    #[test]
    fn bracket_monotonicity_check() {
        let b = phase_diagram(&[
            (0.05, 0.3, Phase::Coherent),
            (0.1, 0.3, Phase::Incoherent),
            (0.1, 0.5, Phase::Coherent),
            (0.2, 0.5, Phase::Incoherent),
            (0.3, 0.7, Phase::Coherent),
        ]);
        assert!(brackets_non_decreasing(&b));
        let rev: Vec<_> = b.iter().rev().cloned().collect();
        assert!(!brackets_non_decreasing(&rev));
    }

    #[test]
    fn convergence_examples() {
        let series = |v: f64| RunData::Series { times: vec![0.0, 1.0, 2.0], values: vec![1.0, v, 0.0] };
        let v = convergence_check("M", &[(8.0, series(0.5)), (12.0, series(0.5))], 1e-3).unwrap();
        assert_eq!(v.converged_at, Some(8.0));
        let runs = [(8.0, RunData::Scalar(1.0)), (12.0, RunData::Scalar(1.2)), (16.0, RunData::Scalar(1.201))];
        let v = convergence_check("M", &runs, 0.01).unwrap();
        assert!((v.deviations[0] - 0.2).abs() < 1e-12 && (v.deviations[1] - 0.001).abs() < 1e-12);
        assert_eq!(v.converged_at, Some(12.0));
        let short = RunData::Series { times: vec![0.0, 1.0], values: vec![1.0, 0.0] };
        assert!(convergence_check("M", &[(8.0, series(0.5)), (12.0, short)], 0.1).is_err());
        assert!(convergence_check("M", &[(8.0, RunData::Scalar(1.0))], 0.1).is_err());
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    fn label(v: &[f64]) -> Phase {
        let t: Vec<f64> = (0..v.len()).map(|k| k as f64 * 0.1).collect();
        classify_dynamics(&t, v, &ClassifyOptions::default()).unwrap().value
    }

    proptest! {
        #[test]
        fn negated_monotone_stays_incoherent(start in -1.0f64..1.0, steps in prop::collection::vec(0.0f64..0.1, 8..60)) {
            let mut v = vec![start];
            for s in &steps {
                v.push(v.last().unwrap() - s);
            }
            prop_assert_eq!(label(&v), Phase::Incoherent);
            let neg: Vec<f64> = v.iter().map(|x| -x).collect();
            prop_assert_eq!(label(&neg), Phase::Incoherent);
        }

        #[test]
        fn rescaling_time_keeps_label(values in prop::collection::vec(-1.0f64..1.0, 8..40), scale in 0.01f64..100.0) {
            let t: Vec<f64> = (0..values.len()).map(|k| k as f64).collect();
            let ts: Vec<f64> = t.iter().map(|x| x * scale).collect();
            let o = ClassifyOptions::default();
            prop_assert_eq!(
                classify_dynamics(&t, &values, &o).unwrap().value,
                classify_dynamics(&ts, &values, &o).unwrap().value
            );
        }

        #[test]
        fn relabeling_to_coherent_never_lowers_upper_edge(
            alphas in prop::collection::btree_set(1u32..100, 2..10),
            flags in prop::collection::vec(any::<bool>(), 10),
            pick in 0usize..10,
        ) {
            let alphas: Vec<f64> = alphas.into_iter().map(|a| a as f64 / 100.0).collect();
            let grid: Vec<(f64, f64, Phase)> = alphas.iter().zip(&flags)
                .map(|(&a, &c)| (a, 0.5, if c { Phase::Coherent } else { Phase::Incoherent }))
                .collect();
            let max_coherent = grid.iter().filter(|g| g.2 == Phase::Coherent).map(|g| g.0).fold(f64::NEG_INFINITY, f64::max);
            let above: Vec<usize> = (0..grid.len()).filter(|&i| grid[i].2 == Phase::Incoherent && grid[i].0 > max_coherent).collect();
            if above.is_empty() {
                return Ok(());
            }
            let k = above[pick % above.len()];
            let mut flipped = grid.clone();
            flipped[k].2 = Phase::Coherent;
            let upper = |g: &[(f64, f64, Phase)]| phase_diagram(g)[0].bracket.1.unwrap_or(f64::INFINITY);
            prop_assert!(upper(&flipped) >= upper(&grid));
        }
    }
}
