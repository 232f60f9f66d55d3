use serde::{Deserialize, Serialize};

use crate::error::{HtlError, Result};

/// Outcome of the finite-x convergence test on a ratio series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeriesVerdict {
    Converging,
    Diverging,
    Oscillating,
    Inconclusive,
}

/// Tolerance and window used to classify a ratio series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRule {
    /// Relative tolerance on `ratio / target - 1`.
    pub tol: f64,
    /// Number of trailing points that must sit within `tol`.
    pub k: usize,
}

impl Default for ConvergenceRule {
    fn default() -> Self {
        Self { tol: 0.05, k: 3 }
    }
}

impl ConvergenceRule {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }
}

/// `(x, ratio)` pairs against a target, with a verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioSeries {
    points: Vec<(f64, f64)>,
    target: f64,
    verdict: SeriesVerdict,
    final_abs_error: f64,
    rule: ConvergenceRule,
    fitted: bool,
}

impl RatioSeries {
    pub fn new(points: Vec<(f64, f64)>, target: f64, rule: ConvergenceRule) -> Result<Self> {
        Self::build(points, target, rule, false)
    }

    /// Target taken as the mean of the last `k` ratios.
    pub fn with_fitted_target(points: Vec<(f64, f64)>, rule: ConvergenceRule) -> Result<Self> {
        let k = rule.k.max(1).min(points.len());
        let target = if k == 0 {
            f64::NAN
        } else {
            points[points.len() - k..].iter().map(|p| p.1).sum::<f64>() / k as f64
        };
        Self::build(points, target, rule, true)
    }

    fn build(
        points: Vec<(f64, f64)>,
        target: f64,
        rule: ConvergenceRule,
        fitted: bool,
    ) -> Result<Self> {
        if rule.tol.is_nan() || rule.tol <= 0.0 || rule.k == 0 {
            return Err(HtlError::InvalidParameter {
                name: "tol",
                value: rule.tol,
                constraint: "tolerance must be positive and k >= 1",
            });
        }
        if points.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(HtlError::Precondition(
                "ratio series needs strictly increasing x".into(),
            ));
        }
        let final_abs_error = points
            .last()
            .map(|p| (p.1 - target).abs())
            .unwrap_or(f64::NAN);
        let verdict = classify(&points, target, rule);
        Ok(Self {
            points,
            target,
            verdict,
            final_abs_error,
            rule,
            fitted,
        })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn target(&self) -> f64 {
        self.target
    }

    pub fn verdict(&self) -> SeriesVerdict {
        self.verdict
    }

    pub fn final_abs_error(&self) -> f64 {
        self.final_abs_error
    }

    pub fn rule(&self) -> ConvergenceRule {
        self.rule
    }

    pub fn is_fitted(&self) -> bool {
        self.fitted
    }

    pub fn last(&self) -> Option<(f64, f64)> {
        self.points.last().copied()
    }

    /// `x` values whose ratio misses the target by more than the tolerance.
    pub fn witnesses(&self) -> Vec<f64> {
        self.points
            .iter()
            .filter(|(_, r)| !(rel_err(*r, self.target).abs() < self.rule.tol))
            .map(|p| p.0)
            .collect()
    }

    /// First `x` from which every later ratio stays within `tol` of the target.
    pub fn entry_point(&self, tol: f64) -> Option<f64> {
        let mut entry = None;
        for &(x, r) in &self.points {
            if rel_err(r, self.target).abs() < tol {
                entry.get_or_insert(x);
            } else {
                entry = None;
            }
        }
        entry
    }

    /// Final relative error `ratio / target - 1`.
    pub fn final_rel_error(&self) -> f64 {
        self.points
            .last()
            .map(|p| rel_err(p.1, self.target))
            .unwrap_or(f64::NAN)
    }
}

fn rel_err(r: f64, target: f64) -> f64 {
    if target == 0.0 {
        r
    } else {
        r / target - 1.0
    }
}

fn classify(points: &[(f64, f64)], target: f64, rule: ConvergenceRule) -> SeriesVerdict {
    let n = points.len();
    if n < rule.k || !target.is_finite() {
        return SeriesVerdict::Inconclusive;
    }
    let errs: Vec<f64> = points.iter().map(|p| rel_err(p.1, target)).collect();
    let tail = &errs[n - rule.k..];
    let within = tail.iter().all(|e| e.abs() < rule.tol);
    let envelope_down = tail
        .windows(2)
        .all(|w| w[1].abs() <= w[0].abs() + 0.5 * rule.tol);
    if within && envelope_down {
        return SeriesVerdict::Converging;
    }

    // sign changes among the significant successive differences
    let scale = if target == 0.0 { 1.0 } else { target.abs() };
    let diffs: Vec<f64> = points
        .windows(2)
        .map(|w| (w[1].1 - w[0].1) / scale)
        .filter(|d| !d.is_nan() && d.abs() > rule.tol)
        .collect();
    let flips = diffs
        .windows(2)
        .filter(|w| w[0].signum() != w[1].signum())
        .count();
    if flips >= 2 {
        return SeriesVerdict::Oscillating;
    }

    let last = tail[tail.len() - 1];
    let growing = tail.windows(2).all(|w| w[1].abs() >= w[0].abs() - 1e-12);
    if !last.is_finite() || (last.abs() >= rule.tol && growing) {
        return SeriesVerdict::Diverging;
    }
    SeriesVerdict::Inconclusive
}
