//! False-alarm / false-reject curves, micro-averaged over classes, and their area.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};

/// Default vertical-averaging grid size.
pub const GRID_POINTS: usize = 101;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RocCurve {
    /// `(far, frr)` in sweep order (threshold descending, FAR non-decreasing).
    pub points: Vec<(f64, f64)>,
    /// Threshold of each point; empty for averaged curves.
    pub thresholds: Vec<f64>,
    pub auc: f64,
}

impl RocCurve {
    fn from_points(points: Vec<(f64, f64)>, thresholds: Vec<f64>) -> Result<Self> {
        let auc = auc(&points)?;
        Ok(Self {
            points,
            thresholds,
            auc,
        })
    }

    /// `far,frr` rows.
    pub fn write_csv<W: Write>(&self, mut sink: W) -> Result<()> {
        writeln!(sink, "far,frr")?;
        for (far, frr) in &self.points {
            writeln!(sink, "{far},{frr}")?;
        }
        Ok(())
    }
}

/// Micro-averaged curve over all classes. Every row of `scores` must be a
/// probability vector (sum 1 within 1e-6).
pub fn roc_micro(scores: &[Vec<f64>], labels: &[usize]) -> Result<RocCurve> {
    for (i, row) in scores.iter().enumerate() {
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > 1e-6 {
            return Err(Error::Eval(format!("score row {i} sums to {s}, not 1")));
        }
    }
    roc_pooled(scores, labels, &[])
}

/// Pools every `(class, sample)` pair outside `exclude` as a one-vs-rest
/// decision `score >= theta` and sweeps `theta` over the distinct scores plus
/// 0 and 1, descending. Scores need not be probabilities.
pub fn roc_pooled(scores: &[Vec<f64>], labels: &[usize], exclude: &[usize]) -> Result<RocCurve> {
    if scores.len() != labels.len() {
        return Err(Error::Eval(format!("{} score rows for {} labels", scores.len(), labels.len())));
    }
    let mut pairs = Vec::new();
    for (row, &label) in scores.iter().zip(labels) {
        if label >= row.len() {
            return Err(Error::Eval(format!("label {label} out of range for {} classes", row.len())));
        }
        for (c, &s) in row.iter().enumerate() {
            if exclude.contains(&c) {
                continue;
            }
            if !s.is_finite() {
                return Err(Error::Eval(format!("non-finite score {s}")));
            }
            pairs.push((s, c == label));
        }
    }
    roc_binary(pairs)
}

/// Curve for binary `(score, is_positive)` decisions. Equal scores are
/// crossed together, so the curve is a step curve with no fractional credit.
pub fn roc_binary(mut pairs: Vec<(f64, bool)>) -> Result<RocCurve> {
    let pos = pairs.iter().filter(|p| p.1).count();
    let neg = pairs.len() - pos;
    if pos == 0 {
        return Err(Error::Eval("no positive decisions: false-reject rate undefined".into()));
    }
    if neg == 0 {
        return Err(Error::Eval("no negative decisions: false-alarm rate undefined".into()));
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut thresholds: Vec<f64> = pairs.iter().map(|p| p.0).chain([0.0, 1.0]).collect();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();

    let (mut tp, mut fp, mut next) = (0usize, 0usize, 0usize);
    let mut points = Vec::with_capacity(thresholds.len());
    for &theta in &thresholds {
        while next < pairs.len() && pairs[next].0 >= theta {
            if pairs[next].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            next += 1;
        }
        points.push((fp as f64 / neg as f64, (pos - tp) as f64 / pos as f64));
    }
    RocCurve::from_points(points, thresholds)
}

/// Trapezoidal area under FRR as a function of FAR over `[0, 1]`. The curve
/// is extended flat from its first point to FAR 0 and from its last to FAR 1.
pub fn auc(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::Eval(format!("area needs at least 2 points, got {}", points.len())));
    }
    let mut pts = points.to_vec();
    // stable: vertical runs keep sweep order
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let first = pts[0];
    let last = pts[pts.len() - 1];
    let mut area = first.0 * first.1 + (1.0 - last.0) * last.1;
    for w in pts.windows(2) {
        area += (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0;
    }
    Ok(area)
}

/// `n` evenly spaced FAR values from 0 to 1.
pub fn uniform_grid(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
    }
}

/// FRR of `curve` at `far`: linear between vertices, the lowest FRR where a
/// vertex sits exactly at `far`, and the nearest endpoint outside the curve.
pub fn frr_at(curve: &[(f64, f64)], far: f64) -> f64 {
    let mut pts = curve.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (first, last) = (pts[0], pts[pts.len() - 1]);
    if far < first.0 {
        return first.1;
    }
    if far > last.0 {
        return last.1;
    }
    let exact = pts
        .iter()
        .filter(|p| p.0 == far)
        .map(|p| p.1)
        .fold(f64::INFINITY, f64::min);
    if exact.is_finite() {
        return exact;
    }
    let i = pts.partition_point(|p| p.0 < far);
    let (a, b) = (pts[i - 1], pts[i]);
    a.1 + (b.1 - a.1) * (far - a.0) / (b.0 - a.0)
}

/// Pointwise mean of each curve's FRR over `grid`.
pub fn vertical_average(curves: &[RocCurve], grid: &[f64]) -> Result<RocCurve> {
    if curves.is_empty() {
        return Err(Error::Eval("no curves to average".into()));
    }
    if let Some(c) = curves.iter().find(|c| c.points.is_empty()) {
        return Err(Error::Eval(format!("empty curve (auc {})", c.auc)));
    }
    let points = grid
        .iter()
        .map(|&g| {
            let sum: f64 = curves.iter().map(|c| frr_at(&c.points, g)).sum();
            (g, sum / curves.len() as f64)
        })
        .collect();
    RocCurve::from_points(points, Vec::new())
}
