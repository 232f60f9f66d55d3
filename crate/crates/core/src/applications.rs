//! Compound Poisson windows, infinitely divisible laws built as `F1 * F2`, and
//! the mean population of a subcritical branching process.

use serde::{Deserialize, Serialize};

use crate::convolve::{convolve, stopped_sum, KestenReport, StoppedSum, StoppingLaw};
use crate::diagnostics::{check_delta_subexp, DiagnosticConfig, MembershipVerdict, Verdict};
use crate::error::{check_param, HtlError, Result};
use crate::measures::{
    AnalyticDistribution, ConvergenceRule, DeltaWindow, GridMeasure, GridSpec, RatioSeries,
};

/// Relative budget for the Poisson terms dropped past `n_max`, used when a
/// growth bound is supplied.
pub const GROWTH_BUDGET: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct CompoundPoisson {
    pub sum: StoppedSum,
    pub law: StoppingLaw,
    /// `|total - (1 - truncated mass)|`.
    pub mass_audit: f64,
    /// `G(x + T) / (mu F(x + T))` on the evaluation points.
    pub ratios: RatioSeries,
}

fn window_ratios(
    num: &GridMeasure,
    den: &dyn Fn(f64) -> f64,
    delta: DeltaWindow,
    xs: &[f64],
    rule: ConvergenceRule,
) -> Result<RatioSeries> {
    let spec = num.spec();
    let mut points = Vec::with_capacity(xs.len());
    for &x in xs {
        spec.snap_index(x)?;
        if !num.window_in_grid(x, delta) {
            return Err(HtlError::Grid(format!("window at x = {x} leaves the grid")));
        }
        let d = den(x);
        if d <= 0.0 {
            return Err(HtlError::ZeroWindowMass { x });
        }
        points.push((x, num.window(x, delta) / d));
    }
    RatioSeries::new(points, 1.0, rule)
}

/// `e^-mu sum mu^n / n! F^{*n}` on `spec` and its window ratio to `mu F(x + T)`.
///
/// With a majorant report the Poisson prefix is widened so the dropped powers
/// cost at most [`GROWTH_BUDGET`] of the mean in window-relative terms.
pub fn compound_poisson(
    f: &AnalyticDistribution,
    mu: f64,
    spec: &GridSpec,
    delta: DeltaWindow,
    xs: &[f64],
    growth: Option<&KestenReport>,
    rule: ConvergenceRule,
) -> Result<CompoundPoisson> {
    check_param(mu.is_finite() && mu > 0.0, "mu", mu, "mu > 0")?;
    if f.support_start() < 0.0 {
        return Err(HtlError::Precondition(format!(
            "{} must live on [0, inf)",
            f.label()
        )));
    }
    let mut law = StoppingLaw::poisson(mu)?;
    if let Some(k) = growth {
        law = law.widened_for_growth(k.fitted_v, k.epsilon, GROWTH_BUDGET)?;
    }
    let base = f.discretize(spec);
    let sum = stopped_sum(&base, &law)?;
    let mass_audit = (sum.measure.total() - (1.0 - law.truncated_mass())).abs();
    let ratios = window_ratios(
        &sum.measure,
        &|x| mu * f.local_prob(x, delta),
        delta,
        xs,
        rule,
    )?;
    Ok(CompoundPoisson {
        sum,
        law,
        mass_audit,
        ratios,
    })
}

/// Infinitely divisible law assembled as a light factor convolved with a
/// compound Poisson factor of the normalized large-jump measure.
#[derive(Debug, Clone, PartialEq)]
pub struct InfDivSpec {
    /// Jump law on `(1, inf)`, normalized.
    pub levy_tail_law: AnalyticDistribution,
    /// Mass of the jump measure above 1.
    pub mu: f64,
    /// Light factor on the same grid as the result; drift is folded in as a shift.
    pub light_factor: GridMeasure,
    /// Claimed exponential decay rate of the light factor's tail.
    pub rate: f64,
}

impl InfDivSpec {
    pub fn new(
        levy_tail_law: AnalyticDistribution,
        mu: f64,
        light_factor: GridMeasure,
        rate: f64,
    ) -> Result<Self> {
        check_param(mu.is_finite() && mu > 0.0, "mu", mu, "mu > 0")?;
        check_param(rate.is_finite() && rate > 0.0, "rate", rate, "rate > 0")?;
        Ok(Self {
            levy_tail_law,
            mu,
            light_factor,
            rate,
        })
    }
}

/// Numerical bound `sup_x tail(x) e^{rate x}` of the light factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LightTailCertificate {
    pub rate: f64,
    /// Supremum over the whole grid.
    pub constant: f64,
    /// Supremum over the right half of the grid; must not exceed the left half.
    pub right_half: f64,
    pub holds: bool,
}

/// Check that `F1(x, inf) <= C e^{-rate x}` on the grid with `C` not growing to the right.
pub fn light_tail_certificate(f1: &GridMeasure, rate: f64) -> LightTailCertificate {
    let spec = f1.spec();
    let suf = f1.suffix_sums();
    let n = spec.n_cells();
    // tail(x_i) = mass of atoms strictly above x_i
    let scaled: Vec<f64> = (0..n)
        .map(|i| {
            let t = suf[i + 1];
            if t == 0.0 {
                0.0
            } else {
                (t.ln() + rate * spec.point(i)).exp()
            }
        })
        .collect();
    let half = n / 2;
    let left = scaled[..half.max(1)].iter().copied().fold(0.0, f64::max);
    let right_half = scaled[half..].iter().copied().fold(0.0, f64::max);
    let constant = left.max(right_half);
    LightTailCertificate {
        rate,
        constant,
        right_half,
        holds: constant.is_finite() && right_half <= left.max(f64::MIN_POSITIVE) * (1.0 + 1e-9),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InfDivResult {
    pub certificate: LightTailCertificate,
    /// Window subexponentiality of the jump law; anything but a pass stops the run.
    pub precondition: Verdict,
    pub precondition_detail: Option<MembershipVerdict>,
    /// `F(x + T) / (mu G(x + T))`, absent when the precondition did not pass.
    pub ratios: Option<RatioSeries>,
    /// `F(x + T) / F2(x + T)`.
    pub consistency: Option<RatioSeries>,
    pub compound: Option<CompoundPoisson>,
}

/// Window ratio of `F = F1 * F2` to the jump measure `mu G`.
pub fn infdiv_local(
    spec: &InfDivSpec,
    delta: DeltaWindow,
    xs: &[f64],
    cfg: &DiagnosticConfig,
) -> Result<InfDivResult> {
    let certificate = light_tail_certificate(&spec.light_factor, spec.rate);
    if !certificate.holds {
        return Err(HtlError::Precondition(format!(
            "light factor tail is not O(exp(-{} x)) on the grid",
            spec.rate
        )));
    }
    let g = &spec.levy_tail_law;
    let detail = match check_delta_subexp(g, delta, xs, cfg) {
        Ok(v) => Some(v),
        Err(HtlError::Precondition(_)) => None,
        Err(e) => return Err(e),
    };
    let precondition = detail.as_ref().map_or(Verdict::Inconclusive, |v| v.verdict);
    if precondition != Verdict::Pass {
        return Ok(InfDivResult {
            certificate,
            precondition: Verdict::Inconclusive,
            precondition_detail: detail,
            ratios: None,
            consistency: None,
            compound: None,
        });
    }
    let grid = *spec.light_factor.spec();
    let cp = compound_poisson(g, spec.mu, &grid, delta, xs, None, cfg.rule)?;
    let full = convolve(&spec.light_factor, &cp.sum.measure)?;
    let ratios = window_ratios(
        &full,
        &|x| spec.mu * g.local_prob(x, delta),
        delta,
        xs,
        cfg.rule,
    )?;
    let f2 = &cp.sum.measure;
    let consistency = window_ratios(&full, &|x| f2.window(x, delta), delta, xs, cfg.rule)?;
    Ok(InfDivResult {
        certificate,
        precondition,
        precondition_detail: detail,
        ratios: Some(ratios),
        consistency: Some(consistency),
        compound: Some(cp),
    })
}

/// Subcritical branching process with mean offspring `mean_offspring` and lifetime law.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchingParams {
    pub mean_offspring: f64,
    pub lifetime: AnalyticDistribution,
}

impl BranchingParams {
    pub fn new(mean_offspring: f64, lifetime: AnalyticDistribution) -> Result<Self> {
        check_param(
            mean_offspring > 0.0 && mean_offspring < 1.0,
            "A",
            mean_offspring,
            "0 < A < 1",
        )?;
        if lifetime.support_start() < 0.0 {
            return Err(HtlError::Precondition(
                "lifetime must live on [0, inf)".into(),
            ));
        }
        Ok(Self {
            mean_offspring,
            lifetime,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchingMean {
    /// `(t, A(t))` with `A(t)` the expected population at time `t`.
    pub curve: Vec<(f64, f64)>,
    /// `(A(t) - A(t + T)) (1 - A) / F(t + T)`.
    pub ratios: RatioSeries,
    /// Mass of the dropped geometric terms; bounds the error of every `A(t)`.
    pub truncation_bound: f64,
}

/// Mean population `A(t) = 1 - (1 - A) sum_{n >= 1} A^{n-1} F^{*n}[0, t]` on `spec`.
///
/// Before the lifetime support every `F^{*n}[0, t]` is zero and `A(t)` is exactly 1.
pub fn branching_mean(
    params: &BranchingParams,
    spec: &GridSpec,
    ts: &[f64],
    delta: DeltaWindow,
    rule: ConvergenceRule,
) -> Result<BranchingMean> {
    let a = params.mean_offspring;
    let f = params.lifetime.discretize(spec);
    // the number of generations to death is 1 + Geometric(A)
    let law = StoppingLaw::geometric(a)?;
    let geo = stopped_sum(&f, &law)?;
    let h = convolve(&f, &geo.measure)?;
    // prefix sums keep exact zeros before the support
    let mut cdf = Vec::with_capacity(h.mass().len() + 1);
    cdf.push(0.0);
    for m in h.mass() {
        cdf.push(cdf.last().copied().unwrap_or(0.0) + m);
    }
    let mean_at = |t: f64| -> Result<f64> {
        let (first, _) = spec.atom_range(t, 0.0);
        Ok(1.0 - cdf[first])
    };
    let mut curve = Vec::with_capacity(ts.len());
    let mut points = Vec::with_capacity(ts.len());
    for &t in ts {
        spec.snap_index(t)?;
        let at = mean_at(t)?;
        curve.push((t, at));
        if !h.window_in_grid(t, delta) {
            return Err(HtlError::Grid(format!("window at t = {t} leaves the grid")));
        }
        let fw = params.lifetime.local_prob(t, delta);
        if fw > 0.0 {
            let drop = if delta.is_infinite() {
                at
            } else {
                at - mean_at(t + delta.length())?
            };
            points.push((t, drop * (1.0 - a) / fw));
        }
    }
    if points.is_empty() {
        return Err(HtlError::ZeroWindowMass { x: ts[0] });
    }
    Ok(BranchingMean {
        curve,
        ratios: RatioSeries::new(points, 1.0, rule)?,
        truncation_bound: law.truncated_mass(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poisson_staircase_on_unit_atoms() {
        let spec = GridSpec::nonnegative(1.0, 30.0).unwrap();
        let f = AnalyticDistribution::point_mass(1.0).unwrap();
        let cp = compound_poisson(
            &f,
            1.0,
            &spec,
            DeltaWindow::unit(),
            &[0.0],
            None,
            Default::default(),
        );
        // a point mass has a zero window beyond 1, so evaluate at 0 only
        let cp = cp.unwrap();
        let mut fact = 1.0;
        for k in 0..=cp.sum.n_max {
            if k > 0 {
                fact *= k as f64;
            }
            let want = (-1.0f64).exp() / fact;
            assert!((cp.sum.measure.mass()[k] - want).abs() < 1e-15, "k = {k}");
        }
        assert!(cp.mass_audit < 1e-12);
    }

    #[test]
    fn branching_point_lifetime() {
        let spec = GridSpec::nonnegative(0.5, 40.0).unwrap();
        let p = BranchingParams::new(0.5, AnalyticDistribution::point_mass(1.0).unwrap()).unwrap();
        let ts = [0.5, 1.5, 2.0, 3.5, 7.0];
        let b = branching_mean(&p, &spec, &[0.0], DeltaWindow::unit(), Default::default()).unwrap();
        assert_eq!(b.curve[0].1, 1.0);
        for t in ts {
            let b = branching_mean(&p, &spec, &[t], DeltaWindow::infinite(), Default::default());
            let want = 0.5f64.powf(t.floor());
            match b {
                Ok(b) => assert!((b.curve[0].1 - want).abs() < 1e-9, "t = {t}"),
                Err(HtlError::ZeroWindowMass { .. }) => {}
                Err(e) => panic!("{e}"),
            }
        }
    }

    #[test]
    fn branching_rejects_critical() {
        let p = AnalyticDistribution::pareto(2.0).unwrap();
        assert!(BranchingParams::new(1.0, p).is_err());
    }

    #[test]
    fn certificate_of_point_at_zero() {
        let spec = GridSpec::nonnegative(0.5, 10.0).unwrap();
        let c = light_tail_certificate(&GridMeasure::point_mass(spec, 0.0, 1.0).unwrap(), 1.0);
        assert!(c.holds);
        assert_eq!(c.constant, 0.0);
    }
}
