//! Finite-x evidence for class membership and the sufficient-condition checkers.
//!
//! Every verdict is numerical evidence under explicit tolerances. The
//! long-tailed supremum over shifts uses a finite subgrid, so it is a lower
//! bound on the true supremum.

use serde::{Deserialize, Serialize};

use crate::convolve::{convolve_window_at, density_square_at};
use crate::error::{HtlError, Result};
use crate::measures::{
    AnalyticDistribution, ConvergenceRule, DeltaWindow, DensityGrid, GridSpec, RatioSeries,
    SeriesVerdict,
};
use crate::quad;
use crate::schedule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MembershipClass {
    #[serde(rename = "L_delta")]
    LongTailed,
    #[serde(rename = "S_delta")]
    DeltaSubexponential,
    #[serde(rename = "S_ac")]
    DensitySubexponential,
    #[serde(rename = "S_star")]
    SStar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

/// A class-membership verdict with the ratio series it rests on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipVerdict {
    pub class_name: MembershipClass,
    pub window: DeltaWindow,
    pub verdict: Verdict,
    pub evidence: RatioSeries,
    pub condition_used: String,
    /// `x` values where the evidence misses its target (filled on failure).
    pub witnesses: Vec<f64>,
}

impl MembershipVerdict {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn failed(&self) -> bool {
        self.verdict == Verdict::Fail
    }
}

/// Knobs shared by the checkers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticConfig {
    pub rule: ConvergenceRule,
    /// Points in the shift subgrid for long-tailedness (including both ends).
    pub t_points: usize,
    /// Grid width for non-lattice laws.
    pub cell_width: f64,
    /// Lower bound on the shifted window ratio in the ratio condition.
    pub suff_threshold: f64,
    /// Shift subgrid size for the ratio condition.
    pub suff_t_points: usize,
    /// Relative slack on second differences of `-ln F(x + T)`.
    pub concavity_tol: f64,
}

impl Default for DiagnosticConfig {
    fn default() -> Self {
        Self {
            rule: ConvergenceRule::default(),
            t_points: 8,
            cell_width: 0.05,
            suff_threshold: 1e-3,
            suff_t_points: 32,
            concavity_tol: 1e-9,
        }
    }
}

fn verdict_of(s: &RatioSeries) -> Verdict {
    match s.verdict() {
        SeriesVerdict::Converging => Verdict::Pass,
        SeriesVerdict::Diverging | SeriesVerdict::Oscillating => Verdict::Fail,
        SeriesVerdict::Inconclusive => Verdict::Inconclusive,
    }
}

fn check_xs(xs: &[f64]) -> Result<()> {
    if xs.is_empty() || xs.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(HtlError::Precondition(
            "evaluation points must be nonempty and strictly increasing".into(),
        ));
    }
    Ok(())
}

fn shifts(n: usize) -> Vec<f64> {
    let n = n.max(2);
    (0..n).map(|j| j as f64 / (n - 1) as f64).collect()
}

/// Long-tailed window evidence: the worst ratio `F(x + t + T) / F(x + T)` over `t in [0, 1]`.
///
/// A vanishing window gives a failing verdict with that `x` as witness.
pub fn check_long_tailed(
    dist: &AnalyticDistribution,
    delta: DeltaWindow,
    xs: &[f64],
    cfg: &DiagnosticConfig,
) -> Result<MembershipVerdict> {
    check_xs(xs)?;
    let ts = shifts(cfg.t_points);
    let mut points = Vec::with_capacity(xs.len());
    for &x in xs {
        let base = dist.log_local_prob(x, delta);
        if base == f64::NEG_INFINITY {
            let evidence = RatioSeries::new(points, 1.0, cfg.rule)?;
            return Ok(MembershipVerdict {
                class_name: MembershipClass::LongTailed,
                window: delta,
                verdict: Verdict::Fail,
                evidence,
                condition_used: format!("window mass vanishes at x = {x}"),
                witnesses: vec![x],
            });
        }
        let worst = ts
            .iter()
            .map(|t| (dist.log_local_prob(x + t, delta) - base).exp())
            .fold(1.0, |acc: f64, r| {
                if (r - 1.0).abs() > (acc - 1.0).abs() {
                    r
                } else {
                    acc
                }
            });
        points.push((x, worst));
    }
    let evidence = RatioSeries::new(points, 1.0, cfg.rule)?;
    let verdict = verdict_of(&evidence);
    let witnesses = if verdict == Verdict::Fail {
        evidence.witnesses()
    } else {
        Vec::new()
    };
    Ok(MembershipVerdict {
        class_name: MembershipClass::LongTailed,
        window: delta,
        verdict,
        evidence,
        condition_used: format!("sup over {}-point shift grid of window ratio", ts.len()),
        witnesses,
    })
}

/// Grid width used for `dist`: the lattice span, else the configured width.
pub fn grid_width(dist: &AnalyticDistribution, cfg: &DiagnosticConfig) -> f64 {
    dist.lattice_span().unwrap_or(cfg.cell_width)
}

/// Window ratio `F^{*2}(x + T) / (2 F(x + T))` computed on a grid, at grid-snapped `xs`.
///
/// Windows of the square are summed directly so the far tail keeps its relative precision.
pub fn square_window_ratios(
    dist: &AnalyticDistribution,
    delta: DeltaWindow,
    xs: &[f64],
    cell_width: f64,
) -> Result<Vec<(f64, f64)>> {
    check_xs(xs)?;
    delta.cells(cell_width)?;
    let xs = schedule::snap(xs, cell_width);
    let last = *xs.last().expect("nonempty");
    let reach = if delta.is_infinite() {
        last + cell_width
    } else {
        last + delta.length()
    };
    let spec = GridSpec::nonnegative(cell_width, reach)?;
    let f = dist.discretize(&spec);
    xs.iter()
        .map(|&x| {
            let w = f.window(x, delta);
            if w <= 0.0 {
                Err(HtlError::ZeroWindowMass { x })
            } else {
                Ok((x, convolve_window_at(&f, &f, x, delta)? / (2.0 * w)))
            }
        })
        .collect()
}

/// Window subexponentiality evidence for a law on `[0, inf)`.
pub fn check_delta_subexp(
    dist: &AnalyticDistribution,
    delta: DeltaWindow,
    xs: &[f64],
    cfg: &DiagnosticConfig,
) -> Result<MembershipVerdict> {
    if dist.support_start() < 0.0 {
        return Err(HtlError::Precondition(format!(
            "{} must live on [0, inf)",
            dist.label()
        )));
    }
    if !dist.has_unbounded_support() {
        return Err(HtlError::Precondition(format!(
            "{} has bounded support",
            dist.label()
        )));
    }
    let lt = check_long_tailed(dist, delta, xs, cfg)?;
    let width = grid_width(dist, cfg);
    let points = square_window_ratios(dist, delta, xs, width)?;
    let evidence = RatioSeries::new(points, 1.0, cfg.rule)?;
    let ev = verdict_of(&evidence);
    let verdict = match (ev, lt.verdict) {
        (Verdict::Pass, Verdict::Pass) => Verdict::Pass,
        (Verdict::Fail, _) | (_, Verdict::Fail) => Verdict::Fail,
        _ => Verdict::Inconclusive,
    };
    let witnesses = if ev == Verdict::Fail {
        evidence.witnesses()
    } else if lt.verdict == Verdict::Fail {
        lt.witnesses.clone()
    } else {
        Vec::new()
    };
    Ok(MembershipVerdict {
        class_name: MembershipClass::DeltaSubexponential,
        window: delta,
        verdict,
        evidence,
        condition_used: format!(
            "grid square ratio (cell {width}); long-tailed check {:?}",
            lt.verdict
        ),
        witnesses,
    })
}

/// Subexponential density evidence: `f^{*2}(x) / (2 f(x))` at grid nodes.
pub fn check_density_subexp(
    f: &DensityGrid,
    xs: &[f64],
    cfg: &DiagnosticConfig,
) -> Result<MembershipVerdict> {
    check_xs(xs)?;
    let d = f.cell_width();
    let xs = schedule::snap(xs, d);
    // long-tailedness of f on node shifts in [0, 1]
    let steps = (1.0 / d).round().max(1.0) as usize;
    let picks: Vec<usize> = shifts(cfg.t_points)
        .iter()
        .map(|t| (t * steps as f64).round() as usize)
        .collect();
    let mut lt_points = Vec::new();
    let mut points = Vec::new();
    for &x in &xs {
        let fx = f
            .value_at(x)
            .ok_or_else(|| HtlError::Grid(format!("x = {x} is outside the density grid")))?;
        if fx <= 0.0 {
            return Err(HtlError::ZeroDensity { x });
        }
        let worst = picks
            .iter()
            .filter_map(|&k| f.value_at(x + k as f64 * d))
            .map(|v| v / fx)
            .fold(1.0, |acc: f64, r| {
                if (r - 1.0).abs() > (acc - 1.0).abs() {
                    r
                } else {
                    acc
                }
            });
        lt_points.push((x, worst));
        points.push((x, density_square_at(f, x)? / (2.0 * fx)));
    }
    let lt = RatioSeries::new(lt_points, 1.0, cfg.rule)?;
    let evidence = RatioSeries::new(points, 1.0, cfg.rule)?;
    let ev = verdict_of(&evidence);
    let lv = verdict_of(&lt);
    let verdict = match (ev, lv) {
        (Verdict::Pass, Verdict::Pass) => Verdict::Pass,
        (Verdict::Fail, _) | (_, Verdict::Fail) => Verdict::Fail,
        _ => Verdict::Inconclusive,
    };
    let witnesses = if ev == Verdict::Fail {
        evidence.witnesses()
    } else if lv == Verdict::Fail {
        lt.witnesses()
    } else {
        Vec::new()
    };
    Ok(MembershipVerdict {
        class_name: MembershipClass::DensitySubexponential,
        window: DeltaWindow::infinite(),
        verdict,
        evidence,
        condition_used: format!(
            "head sum plus trapezoid square density (cell {d}); long-tailed density {lv:?}"
        ),
        witnesses,
    })
}

/// [`check_density_subexp`] on the density of a catalog law sampled from `threshold`.
pub fn check_density_subexp_of(
    dist: &AnalyticDistribution,
    threshold: f64,
    xs: &[f64],
    cfg: &DiagnosticConfig,
) -> Result<MembershipVerdict> {
    check_xs(xs)?;
    let reach = xs.last().copied().unwrap_or(threshold) + 1.0;
    let f = DensityGrid::from_distribution(dist, cfg.cell_width, threshold, reach)?;
    check_density_subexp(&f, xs, cfg)
}

/// `int_0^x tail(x - y) tail(y) dy / (2 m tail(x))` on each `x`.
pub(crate) fn sstar_points(
    tail: &dyn Fn(f64) -> f64,
    m_plus: f64,
    kinks: &[f64],
    xs: &[f64],
) -> Result<Vec<(f64, f64)>> {
    xs.iter()
        .map(|&x| {
            let tx = tail(x);
            if tx <= 0.0 {
                return Err(HtlError::ZeroWindowMass { x });
            }
            let half = 0.5 * x;
            let mut breaks: Vec<f64> = kinks.to_vec();
            breaks.extend(kinks.iter().map(|k| x - k));
            let integrand = |y: f64| tail(x - y) * tail(y);
            let i = 2.0 * quad::graded_trapezoid(&integrand, 0.0, half, &breaks, 1e-3, 1e-3);
            Ok((x, i / (2.0 * m_plus * tx)))
        })
        .collect()
}

/// Evidence for the integrated-convolution class used by supremum densities.
pub fn check_sstar(
    dist: &AnalyticDistribution,
    xs: &[f64],
    cfg: &DiagnosticConfig,
) -> Result<MembershipVerdict> {
    check_xs(xs)?;
    let m_plus = dist.positive_part_mean().ok_or(HtlError::InfiniteMean)?;
    let tail = |y: f64| dist.tail(y);
    let points = sstar_points(&tail, m_plus, &[dist.support_start()], xs)?;
    let evidence = RatioSeries::new(points, 1.0, cfg.rule)?;
    let verdict = verdict_of(&evidence);
    let witnesses = if verdict == Verdict::Fail {
        evidence.witnesses()
    } else {
        Vec::new()
    };
    Ok(MembershipVerdict {
        class_name: MembershipClass::SStar,
        window: DeltaWindow::infinite(),
        verdict,
        evidence,
        condition_used: "graded trapezoid tail convolution".into(),
        witnesses,
    })
}

/// Sufficient condition: `F(x + t + T) >= c F(x + T)` for all `t in (0, x]`.
///
/// `c_hat(x)` is the minimum over a shift subgrid ending at `t = x`. A minimum
/// below the threshold fails the condition; a pass needs long-tailed evidence
/// and a settled `c_hat`.
pub fn check_suff_ratio(
    dist: &AnalyticDistribution,
    delta: DeltaWindow,
    xs: &[f64],
    cfg: &DiagnosticConfig,
) -> Result<MembershipVerdict> {
    if delta.is_infinite() {
        return Err(HtlError::Precondition(
            "ratio condition needs a finite window".into(),
        ));
    }
    let lt = check_long_tailed(dist, delta, xs, cfg)?;
    let j = cfg.suff_t_points.max(1);
    let mut points = Vec::with_capacity(xs.len());
    for &x in xs {
        let base = dist.log_local_prob(x, delta);
        let c = (1..=j)
            .map(|k| x * k as f64 / j as f64)
            .map(|t| (dist.log_local_prob(x + t, delta) - base).exp())
            .fold(f64::INFINITY, f64::min);
        points.push((x, c));
    }
    let low: Vec<f64> = points
        .iter()
        .filter(|p| !(p.1 >= cfg.suff_threshold))
        .map(|p| p.0)
        .collect();
    let evidence = RatioSeries::with_fitted_target(points, cfg.rule)?;
    let (verdict, witnesses) = if !low.is_empty() {
        (Verdict::Fail, low)
    } else if lt.passed() && evidence.verdict() == SeriesVerdict::Converging {
        (Verdict::Pass, Vec::new())
    } else {
        (Verdict::Inconclusive, Vec::new())
    };
    Ok(MembershipVerdict {
        class_name: MembershipClass::DeltaSubexponential,
        window: delta,
        verdict,
        evidence,
        condition_used: format!(
            "shifted window ratio bounded below by {} (long-tailed check {:?})",
            cfg.suff_threshold, lt.verdict
        ),
        witnesses,
    })
}

/// Sufficient condition: `-ln F(x + T)` concave eventually and `x F(x^gamma + T) -> 0`.
pub fn check_suff_concave(
    dist: &AnalyticDistribution,
    delta: DeltaWindow,
    xs: &[f64],
    gamma: f64,
    cfg: &DiagnosticConfig,
) -> Result<MembershipVerdict> {
    if delta.is_infinite() {
        return Err(HtlError::Precondition(
            "concavity condition needs a finite window".into(),
        ));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(HtlError::InvalidParameter {
            name: "gamma",
            value: gamma,
            constraint: "gamma in (0, 1)",
        });
    }
    let lt = check_long_tailed(dist, delta, xs, cfg)?;
    let decay: Vec<(f64, f64)> = xs
        .iter()
        .map(|&x| {
            (
                x,
                (x.ln() + dist.log_local_prob(x.powf(gamma), delta)).exp(),
            )
        })
        .collect();
    let evidence = RatioSeries::new(decay, 0.0, cfg.rule)?;
    if !lt.passed() {
        return Ok(MembershipVerdict {
            class_name: MembershipClass::DeltaSubexponential,
            window: delta,
            verdict: Verdict::Inconclusive,
            evidence,
            condition_used: format!(
                "precondition failed: window not long-tailed ({:?})",
                lt.verdict
            ),
            witnesses: lt.witnesses,
        });
    }

    // second differences of g on a log-spaced mesh over the schedule
    let lo = xs[0];
    let hi = *xs.last().expect("nonempty");
    let mesh = if hi > lo {
        schedule::log_spaced(lo, hi, 400)?
    } else {
        vec![lo]
    };
    let g = |u: f64| -dist.log_local_prob(u, delta);
    let mut x0 = f64::NEG_INFINITY;
    for &u in &mesh {
        let h = (1e-3 * u).max(cfg.cell_width);
        if u - h <= 0.0 {
            continue;
        }
        let gu = g(u);
        let d2 = g(u + h) - 2.0 * gu + g(u - h);
        let tol = cfg.concavity_tol * gu.abs().max(1.0) + 64.0 * f64::EPSILON * gu.abs();
        if !(d2 <= tol) {
            x0 = u;
        }
    }
    let concave_from_mid = x0 < xs[xs.len() / 2];
    let ev = verdict_of(&evidence);
    let (verdict, witnesses) = if !concave_from_mid {
        (Verdict::Fail, vec![x0])
    } else if ev == Verdict::Pass {
        (Verdict::Pass, Vec::new())
    } else if ev == Verdict::Fail {
        (Verdict::Fail, evidence.witnesses())
    } else {
        (Verdict::Inconclusive, Vec::new())
    };
    Ok(MembershipVerdict {
        class_name: MembershipClass::DeltaSubexponential,
        window: delta,
        verdict,
        evidence,
        condition_used: format!(
            "concave -ln window beyond x0 = {x0:.4e}; decay of x F(x^{gamma} + T)"
        ),
        witnesses,
    })
}

/// `A(x + T) / B(x + T)` with the limit fitted from the last points.
pub fn check_tail_equivalence(
    a: &AnalyticDistribution,
    b: &AnalyticDistribution,
    delta: DeltaWindow,
    xs: &[f64],
    cfg: &DiagnosticConfig,
) -> Result<RatioSeries> {
    check_xs(xs)?;
    let points = xs
        .iter()
        .map(|&x| {
            let lb = b.log_local_prob(x, delta);
            if lb == f64::NEG_INFINITY {
                return Err(HtlError::ZeroWindowMass { x });
            }
            Ok((x, (a.log_local_prob(x, delta) - lb).exp()))
        })
        .collect::<Result<Vec<_>>>()?;
    RatioSeries::with_fitted_target(points, cfg.rule)
}

/// Outcome of the additivity check for two laws tail-equivalent to a reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdditivityReport {
    /// Fitted limits of `G1(x + T) / F(x + T)` and `G2(x + T) / F(x + T)`.
    pub c1: f64,
    pub c2: f64,
    /// `(G1 * G2)(x + T) / F(x + T)` against the target `c1 + c2`.
    pub evidence: RatioSeries,
    pub verdict: Verdict,
}

/// Checks that `(G1 * G2)(x + T) ~ (c1 + c2) F(x + T)` when `F` is window
/// subexponential and each `Gi(x + T) ~ ci F(x + T)`.
///
/// The constants are fitted from the closed-form window ratios; the convolution
/// windows come from the grid.
pub fn check_additivity(
    reference: &AnalyticDistribution,
    g1: &AnalyticDistribution,
    g2: &AnalyticDistribution,
    delta: DeltaWindow,
    xs: &[f64],
    cfg: &DiagnosticConfig,
) -> Result<AdditivityReport> {
    check_xs(xs)?;
    if delta.is_infinite() {
        return Err(HtlError::Precondition(
            "additivity is checked on finite windows".into(),
        ));
    }
    for d in [reference, g1, g2] {
        if d.support_start() < 0.0 {
            return Err(HtlError::Precondition(format!(
                "{} must live on [0, inf)",
                d.label()
            )));
        }
    }
    let xs = schedule::snap(xs, cfg.cell_width);
    let c1 = check_tail_equivalence(g1, reference, delta, &xs, cfg)?.target();
    let c2 = check_tail_equivalence(g2, reference, delta, &xs, cfg)?.target();
    let target = c1 + c2;
    if !(target > 0.0) {
        return Err(HtlError::Precondition(
            "both constants vanish; additivity says nothing".into(),
        ));
    }
    let last = *xs.last().expect("nonempty");
    let spec = GridSpec::nonnegative(cfg.cell_width, last + delta.length())?;
    let (a, b) = (g1.discretize(&spec), g2.discretize(&spec));
    let points = xs
        .iter()
        .map(|&x| {
            let w = reference.local_prob(x, delta);
            if w <= 0.0 {
                return Err(HtlError::ZeroWindowMass { x });
            }
            Ok((x, convolve_window_at(&a, &b, x, delta)? / w))
        })
        .collect::<Result<Vec<_>>>()?;
    let evidence = RatioSeries::new(points, target, cfg.rule)?;
    let verdict = verdict_of(&evidence);
    Ok(AdditivityReport {
        c1,
        c2,
        evidence,
        verdict,
    })
}
