//! Transient renewal measures and the renewal equation `Z = z + Z * G` on a grid.

use serde::{Deserialize, Serialize};

use crate::convolve::{convolve, linear_direct};
use crate::diagnostics::{check_delta_subexp, check_density_subexp, DiagnosticConfig, Verdict};
use crate::error::{HtlError, Result};
use crate::measures::{
    AnalyticDistribution, DeltaWindow, DensityGrid, GridMeasure, GridSpec, RatioSeries,
    SeriesVerdict,
};

/// Sub-probability measure on `(0, inf)` with total mass `theta`.
#[derive(Debug, Clone, PartialEq)]
pub struct DefectiveMeasure {
    g: GridMeasure,
    theta: f64,
}

impl DefectiveMeasure {
    pub fn new(g: GridMeasure) -> Result<Self> {
        if !g.is_nonnegative_support() {
            return Err(HtlError::Precondition(
                "defective measure must live on [0, inf)".into(),
            ));
        }
        let zero = g
            .spec()
            .index_of(0.0)
            .ok_or_else(|| HtlError::Grid("grid must contain the origin".into()))?;
        if g.mass()[zero] > 0.0 {
            return Err(HtlError::Precondition(
                "defective measure has an atom at 0".into(),
            ));
        }
        let theta = g.total();
        if !(0.0..=1.0 + 1e-12).contains(&theta) {
            return Err(HtlError::InvalidParameter {
                name: "theta",
                value: theta,
                constraint: "total mass in [0, 1]",
            });
        }
        Ok(Self { g, theta })
    }

    /// `theta` times the discretization of `dist` on `spec`.
    pub fn from_distribution(
        dist: &AnalyticDistribution,
        theta: f64,
        spec: &GridSpec,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&theta) {
            return Err(HtlError::InvalidParameter {
                name: "theta",
                value: theta,
                constraint: "theta in [0, 1]",
            });
        }
        Self::new(dist.discretize(spec).scaled(theta))
    }

    pub fn measure(&self) -> &GridMeasure {
        &self.g
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Same measure restricted to a prefix grid of `spec`; extending is refused
    /// because the overflow mass has no location.
    pub fn on_grid(&self, spec: &GridSpec) -> Result<Self> {
        let own = self.g.spec();
        if own == spec {
            return Ok(self.clone());
        }
        if !own.same_width(spec) || own.origin_index() != spec.origin_index() {
            return Err(HtlError::Grid(
                "renewal grid must share width and origin with G".into(),
            ));
        }
        if spec.n_cells() > own.n_cells() {
            return Err(HtlError::Grid(
                "renewal grid extends beyond the grid of G".into(),
            ));
        }
        Ok(Self {
            g: self.g.truncated_grid(spec.n_cells())?,
            theta: self.theta,
        })
    }
}

/// Remaining geometric mass below which the renewal series stops.
///
/// Far below the 1e-10 needed for the total: the dropped high powers sit at
/// moderate x where `U` is small, and per-cell agreement with the forward
/// substitution needs them.
pub const RENEWAL_TAIL_EPS: f64 = 1e-16;

/// `U = sum_{n >= 0} G^{*n}` on `spec`, including the atom at 0.
pub fn renewal_measure(d: &DefectiveMeasure, spec: &GridSpec) -> Result<GridMeasure> {
    let theta = d.theta;
    if theta >= 1.0 {
        return Err(HtlError::NotTransient(theta));
    }
    let d = d.on_grid(spec)?;
    let spec = *spec;
    let mut u = GridMeasure::point_mass(spec, 0.0, 1.0)?;
    if theta == 0.0 {
        return Ok(u);
    }
    let mut power = d.g.clone();
    let mut n = 1;
    loop {
        u.add_scaled(&power, 1.0)?;
        if theta.powi(n + 1) / (1.0 - theta) < RENEWAL_TAIL_EPS {
            break;
        }
        power = convolve(&power, &d.g)?;
        n += 1;
    }
    Ok(u)
}

/// Which case of the heavy-tailed key renewal theorem applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// `z` negligible against `g`.
    I,
    /// `z / g -> c` in `(0, inf)`.
    Ii,
    /// `z` dominates `g`.
    Iii,
    Undetermined,
}

/// Grid solution of `Z = z + Z * G` with the regime prediction once classified.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenewalSolution {
    pub spec: GridSpec,
    /// `Z` at the grid nodes.
    pub z_solution: Vec<f64>,
    /// `z` sampled at the grid nodes.
    pub z_input: Vec<f64>,
    pub theta: f64,
    /// `int z`, as the node Riemann sum used by the discrete equation.
    pub integral: f64,
    /// Largest relative gap between forward substitution and `z * U`.
    pub crosscheck_max_rel: f64,
    pub regime: Regime,
    /// Limit of `z / g` in the second regime.
    pub c: Option<f64>,
    /// `(x, g(x))` with `g(x) = G(x, x + 1]` on the evaluation points.
    pub g_window: Vec<(f64, f64)>,
    /// `(x, predicted Z(x))` on the evaluation points.
    pub predicted: Vec<(f64, f64)>,
    /// `Z / predicted` on the evaluation points.
    pub evidence: Option<RatioSeries>,
}

impl RenewalSolution {
    pub fn value_at(&self, x: f64) -> Option<f64> {
        self.spec.index_of(x).map(|i| self.z_solution[i])
    }
}

/// Solve the renewal equation by forward substitution, cross-checked against `z * U`.
pub fn solve_renewal(
    z: &dyn Fn(f64) -> f64,
    d: &DefectiveMeasure,
    spec: &GridSpec,
) -> Result<RenewalSolution> {
    let d = &d.on_grid(spec)?;
    let spec = *spec;
    let n = spec.n_cells();
    let zs: Vec<f64> = (0..n).map(|i| z(spec.point(i))).collect();
    if let Some((i, &v)) = zs
        .iter()
        .enumerate()
        .find(|(_, v)| !(**v >= 0.0 && v.is_finite()))
    {
        return Err(HtlError::NegativeInput {
            x: spec.point(i),
            value: v,
        });
    }
    let g = d.g.mass();
    // g[0] == 0 by construction, so Z_k only needs earlier values
    let mut sol = vec![0.0; n];
    for k in 0..n {
        let mut s = zs[k];
        for j in 1..=k {
            s += g[j] * sol[k - j];
        }
        sol[k] = s;
    }
    let crosscheck_max_rel = if d.theta < 1.0 {
        let u = renewal_measure(d, &spec)?;
        let alt = linear_direct(u.mass(), &zs);
        sol.iter()
            .zip(&alt)
            .map(|(a, b)| {
                let scale = a.abs().max(b.abs());
                if scale == 0.0 {
                    0.0
                } else {
                    (a - b).abs() / scale
                }
            })
            .fold(0.0, f64::max)
    } else {
        f64::NAN
    };
    let integral = spec.cell_width() * zs.iter().sum::<f64>();
    Ok(RenewalSolution {
        spec,
        z_solution: sol,
        z_input: zs,
        theta: d.theta,
        integral,
        crosscheck_max_rel,
        regime: Regime::Undetermined,
        c: None,
        g_window: Vec::new(),
        predicted: Vec::new(),
        evidence: None,
    })
}

/// Upper minus lower Riemann sums of grid samples at spans 1, 1/2, 1/4.
///
/// Returns the three gaps relative to the integral.
pub fn riemann_gaps(zs: &[f64], cell_width: f64) -> Result<[f64; 3]> {
    let per_unit = (1.0 / cell_width).round() as usize;
    if per_unit == 0 || ((1.0 / cell_width) - per_unit as f64).abs() > 1e-9 {
        return Err(HtlError::Grid("cell width must divide 1".into()));
    }
    let integral: f64 = cell_width * zs.iter().sum::<f64>();
    let mut out = [0.0; 3];
    for (slot, parts) in [1usize, 2, 4].iter().enumerate() {
        let block = (per_unit / parts).max(1);
        let span = block as f64 * cell_width;
        let gap: f64 = zs
            .chunks(block)
            .map(|c| {
                let hi = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lo = c.iter().copied().fold(f64::INFINITY, f64::min);
                span * (hi - lo)
            })
            .sum();
        out[slot] = if integral > 0.0 { gap / integral } else { 0.0 };
    }
    Ok(out)
}

/// Riemann-sum stand-in for direct Riemann integrability.
///
/// Accepts when the span-1/4 gap is under 1%, or when the gaps shrink by a
/// factor of at most 0.6 per halving, and in both cases the tail samples vanish.
pub fn dri_proxy(zs: &[f64], cell_width: f64) -> Result<bool> {
    let gaps = riemann_gaps(zs, cell_width)?;
    let shrinking = gaps[1] <= 0.6 * gaps[0] + 1e-12 && gaps[2] <= 0.6 * gaps[1] + 1e-12;
    let head_max = zs.iter().copied().fold(0.0, f64::max);
    let tail_len = (zs.len() / 10).max(1);
    let tail_max = zs[zs.len() - tail_len..]
        .iter()
        .copied()
        .fold(0.0, f64::max);
    let vanishing = tail_max <= 1e-2 * head_max;
    Ok((gaps[2] < 0.01 || shrinking) && vanishing)
}

/// Options for [`krt_regime`].
#[derive(Debug, Clone, PartialEq)]
pub struct KrtOptions {
    /// Law that `G / theta` discretizes; required for the first two regimes.
    pub reference: Option<AnalyticDistribution>,
    pub diagnostics: DiagnosticConfig,
    /// Relative tolerance for the evidence series.
    pub tol: f64,
}

impl Default for KrtOptions {
    fn default() -> Self {
        Self {
            reference: None,
            diagnostics: DiagnosticConfig::default(),
            tol: 0.10,
        }
    }
}

/// Classify the regime of `z / g` on `xs`, fill the prediction and the evidence.
pub fn krt_regime(
    z: &dyn Fn(f64) -> f64,
    d: &DefectiveMeasure,
    spec: &GridSpec,
    xs: &[f64],
    opts: &KrtOptions,
) -> Result<RenewalSolution> {
    let d = &d.on_grid(spec)?;
    let mut sol = solve_renewal(z, d, spec)?;
    let spec = sol.spec;
    let unit = DeltaWindow::unit();
    unit.cells(spec.cell_width())?;
    let theta = d.theta;
    if theta >= 1.0 {
        return Err(HtlError::NotTransient(theta));
    }
    let mut g_window = Vec::with_capacity(xs.len());
    let mut ratio = Vec::with_capacity(xs.len());
    for &x in xs {
        spec.index_of(x)
            .ok_or_else(|| HtlError::Grid(format!("x = {x} is not a grid node")))?;
        if x + 1.0 > spec.right_edge() {
            return Err(HtlError::Grid(format!("window at x = {x} leaves the grid")));
        }
        let gx = d.g.window(x, unit);
        let zx = z(x);
        if gx <= 0.0 && zx <= 0.0 {
            return Err(HtlError::ZeroWindowMass { x });
        }
        g_window.push((x, gx));
        // an underflowed light-tailed window makes the ratio infinite
        ratio.push((x, if gx > 0.0 { zx / gx } else { f64::INFINITY }));
    }
    let (regime, c) = classify_regime(&ratio, opts.diagnostics.rule.k)?;

    let i = sol.integral;
    let one = 1.0 - theta;
    match regime {
        Regime::I | Regime::Ii => {
            if !dri_proxy(&sol.z_input, spec.cell_width())? {
                return Err(HtlError::Precondition(
                    "z fails the Riemann-sum integrability proxy".into(),
                ));
            }
            let reference = opts.reference.as_ref().ok_or_else(|| {
                HtlError::Precondition("a reference law for G is needed in this regime".into())
            })?;
            let v = check_delta_subexp(reference, unit, xs, &opts.diagnostics)?;
            if v.verdict != Verdict::Pass {
                return Err(HtlError::Precondition(format!(
                    "reference law for G is not window-subexponential ({:?})",
                    v.verdict
                )));
            }
        }
        Regime::Iii => {
            // x_hat = 0 for the normalized input density
            let head =
                GridMeasure::point_mass(GridSpec::nonnegative(spec.cell_width(), 0.0)?, 0.0, 0.0)?;
            let values: Vec<f64> = sol.z_input.iter().map(|v| v / i).collect();
            let f = DensityGrid::new(spec.cell_width(), 0.0, values, head)?;
            let v = check_density_subexp(&f, xs, &opts.diagnostics)?;
            if v.verdict != Verdict::Pass {
                return Err(HtlError::Precondition(format!(
                    "z / I is not a subexponential density ({:?})",
                    v.verdict
                )));
            }
        }
        Regime::Undetermined => unreachable!(),
    }
    let predicted: Vec<(f64, f64)> = g_window
        .iter()
        .map(|&(x, gx)| {
            let p = match regime {
                Regime::I => i / (one * one) * gx,
                Regime::Ii => (i / (one * one) + c.unwrap_or(0.0) / one) * gx,
                _ => z(x) / one,
            };
            (x, p)
        })
        .collect();
    let points: Vec<(f64, f64)> = predicted
        .iter()
        .map(|&(x, p)| (x, sol.value_at(x).unwrap_or(f64::NAN) / p))
        .collect();
    let rule = crate::measures::ConvergenceRule {
        tol: opts.tol,
        k: opts.diagnostics.rule.k,
    };
    sol.evidence = Some(RatioSeries::new(points, 1.0, rule)?);
    sol.regime = regime;
    sol.c = c;
    sol.g_window = g_window;
    sol.predicted = predicted;
    Ok(sol)
}

/// Decide the regime from the trailing behaviour of `z / g`.
fn classify_regime(ratio: &[(f64, f64)], k: usize) -> Result<(Regime, Option<f64>)> {
    let n = ratio.len();
    if n < k.max(2) {
        return Err(HtlError::RegimeUndetermined(
            "too few evaluation points".into(),
        ));
    }
    let r: Vec<f64> = ratio.iter().map(|p| p.1).collect();
    let tail = &r[n - k..];
    let max = r.iter().copied().fold(0.0, f64::max);
    if tail.iter().all(|&v| v == 0.0)
        || (tail.windows(2).all(|w| w[1] <= w[0]) && tail[k - 1] <= 1e-3 * max)
    {
        return Ok((Regime::I, None));
    }
    if tail.windows(2).all(|w| w[1] >= w[0]) && r[n - 1] >= 1e3 * r[0].max(1e-300) {
        return Ok((Regime::Iii, None));
    }
    let fitted = RatioSeries::with_fitted_target(ratio.to_vec(), Default::default())?;
    if fitted.verdict() == SeriesVerdict::Converging && fitted.target() > 0.0 {
        return Ok((Regime::Ii, Some(fitted.target())));
    }
    Err(HtlError::RegimeUndetermined(format!(
        "z/g trailing values {tail:?} settle on no regime"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_grid(n: f64) -> GridSpec {
        GridSpec::nonnegative(1.0, n).unwrap()
    }

    #[test]
    fn point_mass_staircase() {
        let spec = unit_grid(20.0);
        let g = GridMeasure::point_mass(spec, 1.0, 0.5).unwrap();
        let u = renewal_measure(&DefectiveMeasure::new(g).unwrap(), &spec).unwrap();
        for k in 0..20 {
            assert!((u.mass()[k] - 0.5f64.powi(k as i32)).abs() < 1e-15);
        }
    }

    #[test]
    fn theta_one_rejected() {
        let spec = unit_grid(5.0);
        let g = GridMeasure::point_mass(spec, 1.0, 1.0).unwrap();
        assert_eq!(
            renewal_measure(&DefectiveMeasure::new(g).unwrap(), &spec),
            Err(HtlError::NotTransient(1.0))
        );
    }

    #[test]
    fn atom_at_zero_rejected() {
        let spec = unit_grid(5.0);
        let g = GridMeasure::point_mass(spec, 0.0, 0.5).unwrap();
        assert!(DefectiveMeasure::new(g).is_err());
    }

    #[test]
    fn half_step_series() {
        let spec = GridSpec::nonnegative(0.5, 12.0).unwrap();
        let g = GridMeasure::point_mass(spec, 1.0, 0.5).unwrap();
        let d = DefectiveMeasure::new(g).unwrap();
        let sol = solve_renewal(&|x| if x < 1.0 { 1.0 } else { 0.0 }, &d, &spec).unwrap();
        for i in 0..spec.n_cells() {
            let x = spec.point(i);
            assert!((sol.z_solution[i] - 0.5f64.powi(x.floor() as i32)).abs() < 1e-15);
        }
        assert!(sol.crosscheck_max_rel < 1e-12);
    }

    #[test]
    fn zero_theta_returns_input() {
        let spec = unit_grid(6.0);
        let d = DefectiveMeasure::new(GridMeasure::zero(spec)).unwrap();
        let sol = solve_renewal(&|x| (-x).exp(), &d, &spec).unwrap();
        assert_eq!(sol.z_solution, sol.z_input);
    }

    #[test]
    fn negative_input_rejected() {
        let spec = unit_grid(6.0);
        let d = DefectiveMeasure::new(GridMeasure::zero(spec)).unwrap();
        assert!(matches!(
            solve_renewal(&|x| 1.0 - x, &d, &spec),
            Err(HtlError::NegativeInput { .. })
        ));
    }

    #[test]
    fn riemann_gaps_of_indicator() {
        let zs: Vec<f64> = (0..40).map(|i| if i < 4 { 1.0 } else { 0.0 }).collect();
        let g = riemann_gaps(&zs, 0.25).unwrap();
        assert_eq!(g, [0.0, 0.0, 0.0]);
        assert!(dri_proxy(&zs, 0.25).unwrap());
    }
}
