use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::{erf::erfc, gamma};

use super::grid::{GridMeasure, GridSpec};
use super::window::DeltaWindow;
use crate::error::{check_param, HtlError, Result};
use crate::quad;
use crate::special::{inverse_square_tail, normal_sf};

/// Names accepted by [`make_distribution`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CatalogKind {
    Pareto,
    Weibull,
    WeibullSurrogate,
    Lognormal,
    Exponential,
    Example1,
    Example2,
    Example3,
    PointMass,
}

impl CatalogKind {
    pub const ALL: [CatalogKind; 9] = [
        CatalogKind::Pareto,
        CatalogKind::Weibull,
        CatalogKind::WeibullSurrogate,
        CatalogKind::Lognormal,
        CatalogKind::Exponential,
        CatalogKind::Example1,
        CatalogKind::Example2,
        CatalogKind::Example3,
        CatalogKind::PointMass,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            CatalogKind::Pareto => "pareto",
            CatalogKind::Weibull => "weibull",
            CatalogKind::WeibullSurrogate => "weibull-surrogate",
            CatalogKind::Lognormal => "lognormal",
            CatalogKind::Exponential => "exponential",
            CatalogKind::Example1 => "example1",
            CatalogKind::Example2 => "example2",
            CatalogKind::Example3 => "example3",
            CatalogKind::PointMass => "point-mass",
        }
    }

    /// Parameter names in positional order.
    pub fn param_names(&self) -> &'static [&'static str] {
        match self {
            CatalogKind::Pareto => &["alpha"],
            CatalogKind::Weibull | CatalogKind::WeibullSurrogate => &["beta"],
            CatalogKind::Lognormal => &["a", "sigma"],
            CatalogKind::Exponential => &["rate"],
            CatalogKind::PointMass => &["c"],
            _ => &[],
        }
    }
}

impl fmt::Display for CatalogKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CatalogKind {
    type Err = HtlError;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        Self::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| HtlError::Precondition(format!("unknown distribution kind `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Law {
    Pareto { alpha: f64 },
    Weibull { beta: f64 },
    WeibullSurrogate { beta: f64, x0: f64 },
    Lognormal { a: f64, sigma: f64 },
    Exponential { rate: f64 },
    Example1,
    Example2,
    Example3,
    PointMass { c: f64 },
    Empirical(GridMeasure),
}

/// A catalog distribution with exact tail, window and (where defined) density formulas.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticDistribution {
    law: Law,
}

/// Build a catalog distribution from a kind and positional parameters.
pub fn make_distribution(kind: CatalogKind, params: &[f64]) -> Result<AnalyticDistribution> {
    let want = kind.param_names().len();
    if params.len() != want {
        return Err(HtlError::Precondition(format!(
            "{kind} expects {want} parameter(s), got {}",
            params.len()
        )));
    }
    match kind {
        CatalogKind::Pareto => AnalyticDistribution::pareto(params[0]),
        CatalogKind::Weibull => AnalyticDistribution::weibull(params[0]),
        CatalogKind::WeibullSurrogate => AnalyticDistribution::weibull_surrogate(params[0]),
        CatalogKind::Lognormal => AnalyticDistribution::lognormal(params[0], params[1]),
        CatalogKind::Exponential => AnalyticDistribution::exponential(params[0]),
        CatalogKind::Example1 => Ok(AnalyticDistribution::example1()),
        CatalogKind::Example2 => Ok(AnalyticDistribution::example2()),
        CatalogKind::Example3 => Ok(AnalyticDistribution::example3()),
        CatalogKind::PointMass => AnalyticDistribution::point_mass(params[0]),
    }
}

/// Normalizer of `P(2k) = g / k^2, P(2k+1) = g / 2^k`.
pub fn example1_gamma() -> f64 {
    1.0 / (PI * PI / 6.0 + 2.0)
}

/// Lattice weight `g` of the smoothed `g / k^2` law.
pub fn example2_gamma() -> f64 {
    6.0 / (PI * PI)
}

const EX2_HALF_WIDTH: f64 = 0.125;

impl AnalyticDistribution {
    /// Tail `x^-alpha` on `[1, inf)`.
    pub fn pareto(alpha: f64) -> Result<Self> {
        check_param(
            alpha.is_finite() && alpha > 0.0,
            "alpha",
            alpha,
            "alpha > 0",
        )?;
        Ok(Self {
            law: Law::Pareto { alpha },
        })
    }

    /// Tail `exp(-x^beta)` on `[0, inf)`.
    pub fn weibull(beta: f64) -> Result<Self> {
        check_param(beta > 0.0 && beta < 1.0, "beta", beta, "beta in (0, 1)")?;
        Ok(Self {
            law: Law::Weibull { beta },
        })
    }

    /// Tail `min(1, x^(beta-1) exp(-x^beta))`, tail-equivalent to a Weibull window.
    pub fn weibull_surrogate(beta: f64) -> Result<Self> {
        check_param(beta > 0.0 && beta < 1.0, "beta", beta, "beta in (0, 1)")?;
        // x^(beta-1) e^(-x^beta) is decreasing, so the crossing of 1 is unique.
        let h = |x: f64| (beta - 1.0) * x.ln() - x.powf(beta);
        let (mut lo, mut hi) = (1e-12, 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if h(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(Self {
            law: Law::WeibullSurrogate {
                beta,
                x0: 0.5 * (lo + hi),
            },
        })
    }

    /// Density `exp(-(ln x - ln a)^2 / (2 s^2)) / (x sqrt(2 pi s^2))`.
    pub fn lognormal(a: f64, sigma: f64) -> Result<Self> {
        check_param(a.is_finite() && a > 0.0, "a", a, "a > 0")?;
        check_param(
            sigma.is_finite() && sigma > 0.0,
            "sigma",
            sigma,
            "sigma > 0",
        )?;
        Ok(Self {
            law: Law::Lognormal { a, sigma },
        })
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        check_param(rate.is_finite() && rate > 0.0, "rate", rate, "rate > 0")?;
        Ok(Self {
            law: Law::Exponential { rate },
        })
    }

    /// Lattice law with `P(2k) = g/k^2` (k >= 1) and `P(2k+1) = g/2^k` (k >= 0).
    pub fn example1() -> Self {
        Self { law: Law::Example1 }
    }

    /// `zeta + U` with `P(zeta = k) = g/k^2` and `U` uniform on `(-1/8, 1/8)`.
    pub fn example2() -> Self {
        Self { law: Law::Example2 }
    }

    /// Lattice law `P(n) = f(n)` for a piecewise-linear `f` between `1/x^2` and `2/x^2`.
    pub fn example3() -> Self {
        Self { law: Law::Example3 }
    }

    pub fn point_mass(c: f64) -> Result<Self> {
        check_param(c.is_finite(), "c", c, "c finite")?;
        Ok(Self {
            law: Law::PointMass { c },
        })
    }

    /// Wrap a grid measure of total mass 1.
    pub fn empirical(m: GridMeasure) -> Result<Self> {
        if (m.total() - 1.0).abs() > 1e-9 {
            return Err(HtlError::InvalidParameter {
                name: "total",
                value: m.total(),
                constraint: "empirical law must have total mass 1",
            });
        }
        Ok(Self {
            law: Law::Empirical(m),
        })
    }

    pub fn kind(&self) -> Option<CatalogKind> {
        Some(match self.law {
            Law::Pareto { .. } => CatalogKind::Pareto,
            Law::Weibull { .. } => CatalogKind::Weibull,
            Law::WeibullSurrogate { .. } => CatalogKind::WeibullSurrogate,
            Law::Lognormal { .. } => CatalogKind::Lognormal,
            Law::Exponential { .. } => CatalogKind::Exponential,
            Law::Example1 => CatalogKind::Example1,
            Law::Example2 => CatalogKind::Example2,
            Law::Example3 => CatalogKind::Example3,
            Law::PointMass { .. } => CatalogKind::PointMass,
            Law::Empirical(_) => return None,
        })
    }

    pub fn label(&self) -> String {
        match &self.law {
            Law::Pareto { alpha } => format!("pareto(alpha={alpha})"),
            Law::Weibull { beta } => format!("weibull(beta={beta})"),
            Law::WeibullSurrogate { beta, .. } => format!("weibull-surrogate(beta={beta})"),
            Law::Lognormal { a, sigma } => format!("lognormal(a={a}, sigma={sigma})"),
            Law::Exponential { rate } => format!("exponential(rate={rate})"),
            Law::Example1 => "example1".into(),
            Law::Example2 => "example2".into(),
            Law::Example3 => "example3".into(),
            Law::PointMass { c } => format!("point-mass(c={c})"),
            Law::Empirical(m) => format!("empirical({} cells)", m.spec().n_cells()),
        }
    }

    /// Lattice span if the law lives on the integers.
    pub fn lattice_span(&self) -> Option<f64> {
        match self.law {
            Law::Example1 | Law::Example3 => Some(1.0),
            _ => None,
        }
    }

    /// Left end of the support.
    pub fn support_start(&self) -> f64 {
        match &self.law {
            Law::Pareto { .. } => 1.0,
            Law::Weibull { .. } | Law::Exponential { .. } => 0.0,
            Law::WeibullSurrogate { x0, .. } => *x0,
            Law::Lognormal { .. } => 0.0,
            Law::Example1 => 1.0,
            Law::Example2 => 1.0 - EX2_HALF_WIDTH,
            Law::Example3 => 1.0,
            Law::PointMass { c } => *c,
            Law::Empirical(m) => m.support().map(|s| s.0).unwrap_or(m.spec().right_edge()),
        }
    }

    pub fn has_unbounded_support(&self) -> bool {
        match &self.law {
            Law::PointMass { .. } => false,
            Law::Empirical(m) => m.overflow() > 0.0,
            _ => true,
        }
    }

    /// `P(X > x)`.
    pub fn tail(&self, x: f64) -> f64 {
        match &self.law {
            Law::Pareto { alpha } => {
                if x <= 1.0 {
                    1.0
                } else {
                    x.powf(-alpha)
                }
            }
            Law::Weibull { beta } => {
                if x <= 0.0 {
                    1.0
                } else {
                    (-x.powf(*beta)).exp()
                }
            }
            Law::WeibullSurrogate { beta, x0 } => {
                if x <= *x0 {
                    1.0
                } else {
                    ((beta - 1.0) * x.ln() - x.powf(*beta)).exp().min(1.0)
                }
            }
            Law::Lognormal { a, sigma } => {
                if x <= 0.0 {
                    1.0
                } else {
                    0.5 * erfc((x.ln() - a.ln()) / (sigma * SQRT_2))
                }
            }
            Law::Exponential { rate } => {
                if x <= 0.0 {
                    1.0
                } else {
                    (-rate * x).exp()
                }
            }
            Law::Example1 => ex1_tail(x),
            Law::Example2 => ex2_tail(x),
            Law::Example3 => ex3_tail(x),
            Law::PointMass { c } => {
                if x < *c {
                    1.0
                } else {
                    0.0
                }
            }
            Law::Empirical(m) => m.tail(x),
        }
    }

    /// `P(x < X <= x + T)`; the tail when `T` is infinite.
    pub fn local_prob(&self, x: f64, delta: DeltaWindow) -> f64 {
        if delta.is_infinite() {
            return self.tail(x);
        }
        let t = delta.length();
        let y = x + t;
        match &self.law {
            Law::Pareto { alpha } => {
                if y <= 1.0 {
                    0.0
                } else if x <= 1.0 {
                    1.0 - y.powf(-alpha)
                } else {
                    // x^-a (1 - (1 + t/x)^-a), stable for t << x
                    -x.powf(-alpha) * (-alpha * (t / x).ln_1p()).exp_m1()
                }
            }
            Law::Weibull { beta } => {
                if y <= 0.0 {
                    0.0
                } else if x <= 0.0 {
                    -(-y.powf(*beta)).exp_m1()
                } else {
                    self.log_local_prob(x, delta).exp()
                }
            }
            Law::WeibullSurrogate { x0, .. } if x > *x0 => self.log_local_prob(x, delta).exp(),
            Law::WeibullSurrogate { .. } | Law::Lognormal { .. } => {
                let (a, b) = (self.tail(x), self.tail(y));
                if b > 0.5 * a && matches!(self.law, Law::Lognormal { .. }) {
                    // close tails: integrate the density instead of subtracting
                    let f = |u: f64| self.density(u).unwrap_or(0.0);
                    let lo = x.max(0.0);
                    if y <= lo {
                        return 0.0;
                    }
                    quad::adaptive_simpson(&f, lo, y, 1e-14 * (a - b).abs().max(1e-300))
                } else {
                    (a - b).max(0.0)
                }
            }
            Law::Exponential { rate } => {
                if y <= 0.0 {
                    0.0
                } else {
                    let a = x.max(0.0);
                    -(-rate * a).exp() * (-rate * (y - a)).exp_m1()
                }
            }
            Law::Example1 if t <= 1e6 => lattice_sum(x, y, ex1_atom),
            Law::Example3 if t <= 1e6 => lattice_sum(x, y, ex3_atom),
            Law::Example2 if t <= 1e5 => ex2_window(x, y),
            Law::PointMass { c } => {
                if x < *c && *c <= y {
                    1.0
                } else {
                    0.0
                }
            }
            Law::Empirical(m) => m.window(x, delta),
            _ => (self.tail(x) - self.tail(y)).max(0.0),
        }
    }

    /// `ln F((x, x + T])`, evaluated without underflow for the smooth catalog laws.
    ///
    /// Returns `-inf` for an empty window.
    pub fn log_local_prob(&self, x: f64, delta: DeltaWindow) -> f64 {
        let t = delta.length();
        let inf = delta.is_infinite();
        match &self.law {
            Law::Pareto { alpha } if x >= 1.0 => {
                let lt = -alpha * x.ln();
                if inf {
                    lt
                } else {
                    lt + (-(-alpha * (t / x).ln_1p()).exp_m1()).ln()
                }
            }
            Law::Weibull { beta } if x > 0.0 => {
                let a = x.powf(*beta);
                if inf {
                    -a
                } else {
                    // (x+T)^b - x^b without cancellation
                    let d = a * (beta * (t / x).ln_1p()).exp_m1();
                    -a + (-(-d).exp_m1()).ln()
                }
            }
            Law::WeibullSurrogate { beta, x0 } if x > *x0 => {
                let lt = (beta - 1.0) * x.ln() - x.powf(*beta);
                if inf {
                    lt
                } else {
                    let l1p = (t / x).ln_1p();
                    let d = -(beta - 1.0) * l1p + x.powf(*beta) * (beta * l1p).exp_m1();
                    lt + (-(-d).exp_m1()).ln()
                }
            }
            Law::Exponential { rate } if x >= 0.0 => {
                if inf {
                    -rate * x
                } else {
                    -rate * x + (-(-rate * t).exp_m1()).ln()
                }
            }
            _ => self.local_prob(x, delta).ln(),
        }
    }

    /// Lebesgue density where one exists.
    pub fn density(&self, x: f64) -> Result<f64> {
        Ok(match &self.law {
            Law::Pareto { alpha } => {
                if x < 1.0 {
                    0.0
                } else {
                    alpha * x.powf(-alpha - 1.0)
                }
            }
            Law::Weibull { beta } => {
                if x <= 0.0 {
                    0.0
                } else {
                    beta * x.powf(beta - 1.0) * (-x.powf(*beta)).exp()
                }
            }
            Law::WeibullSurrogate { beta, x0 } => {
                if x <= *x0 {
                    0.0
                } else {
                    self.tail(x) * (beta * x.powf(beta - 1.0) + (1.0 - beta) / x)
                }
            }
            Law::Lognormal { a, sigma } => {
                if x <= 0.0 {
                    0.0
                } else {
                    let u = (x.ln() - a.ln()) / sigma;
                    (-0.5 * u * u).exp() / (x * sigma * (2.0 * PI).sqrt())
                }
            }
            Law::Exponential { rate } => {
                if x < 0.0 {
                    0.0
                } else {
                    rate * (-rate * x).exp()
                }
            }
            Law::Example2 => {
                let k = x.round();
                if k >= 1.0 && (x - k).abs() < EX2_HALF_WIDTH {
                    example2_gamma() / (k * k) / (2.0 * EX2_HALF_WIDTH)
                } else {
                    0.0
                }
            }
            _ => {
                return Err(HtlError::Precondition(format!(
                    "{} has no density",
                    self.label()
                )))
            }
        })
    }

    pub fn has_density(&self) -> bool {
        self.density(1.0).is_ok()
    }

    /// `E max(X, 0)`, or `None` when infinite.
    pub fn positive_part_mean(&self) -> Option<f64> {
        match &self.law {
            Law::Pareto { alpha } => (*alpha > 1.0).then(|| alpha / (alpha - 1.0)),
            Law::Weibull { beta } => Some(gamma::gamma(1.0 + 1.0 / beta)),
            Law::WeibullSurrogate { x0, .. } => {
                Some(x0 + quad::integrate_to_infinity(&|y| self.tail(y), *x0, 1e-14))
            }
            Law::Lognormal { a, sigma } => Some(a * (0.5 * sigma * sigma).exp()),
            Law::Exponential { rate } => Some(1.0 / rate),
            Law::Example1 | Law::Example2 | Law::Example3 => None,
            Law::PointMass { c } => Some(c.max(0.0)),
            Law::Empirical(m) => {
                if m.overflow() > 0.0 {
                    None
                } else {
                    Some(
                        m.mass()
                            .iter()
                            .enumerate()
                            .map(|(i, w)| w * m.point(i).max(0.0))
                            .sum(),
                    )
                }
            }
        }
    }

    /// `E X` when it is finite and the law lives on `[0, inf)` or is bounded below.
    pub fn mean(&self) -> Option<f64> {
        match &self.law {
            Law::PointMass { c } => Some(*c),
            Law::Empirical(m) if m.overflow() == 0.0 => Some(
                m.mass()
                    .iter()
                    .enumerate()
                    .map(|(i, w)| w * m.point(i))
                    .sum(),
            ),
            _ => self.positive_part_mean(),
        }
    }

    /// `int_x^inf P(X > y) dy` (may exceed 1).
    pub fn integrated_tail_raw(&self, x: f64) -> Result<f64> {
        let mean = self.positive_part_mean().ok_or(HtlError::InfiniteMean)?;
        let start = self.support_start().min(0.0);
        if x < start {
            // below the support the tail is 1
            return Ok(start - x + self.integrated_tail_raw(start)?);
        }
        Ok(match &self.law {
            Law::Pareto { alpha } => {
                if x <= 1.0 {
                    (1.0 - x) + 1.0 / (alpha - 1.0)
                } else {
                    x.powf(1.0 - alpha) / (alpha - 1.0)
                }
            }
            Law::Weibull { beta } => {
                if x <= 0.0 {
                    mean - x
                } else {
                    let s = 1.0 / beta;
                    s * gamma::gamma(s) * gamma::gamma_ur(s, x.powf(*beta))
                }
            }
            Law::Exponential { rate } => {
                if x <= 0.0 {
                    mean - x
                } else {
                    (-rate * x).exp() / rate
                }
            }
            Law::Lognormal { a, sigma } => {
                if x <= 0.0 {
                    mean - x
                } else {
                    let l = (x.ln() - a.ln()) / sigma;
                    let closed = mean * normal_sf(l - sigma) - x * normal_sf(l);
                    if closed > 1e-6 * mean {
                        closed
                    } else {
                        quad::integrate_to_infinity(&|y| self.tail(y), x, 1e-13)
                    }
                }
            }
            Law::WeibullSurrogate { x0, .. } => {
                if x <= *x0 {
                    mean - x.max(0.0)
                } else {
                    quad::integrate_to_infinity(&|y| self.tail(y), x, 1e-13)
                }
            }
            Law::PointMass { c } => (c - x).max(0.0),
            Law::Empirical(m) => m
                .mass()
                .iter()
                .enumerate()
                .map(|(i, w)| w * (m.point(i) - x).max(0.0))
                .sum(),
            Law::Example1 | Law::Example2 | Law::Example3 => unreachable!(),
        })
    }

    /// Tail of the integrated-tail law: `min(1, int_x^inf P(X > y) dy)`.
    pub fn integrated_tail(&self, x: f64) -> Result<f64> {
        Ok(self.integrated_tail_raw(x)?.min(1.0))
    }

    /// Cell masses `F((k d, (k+1) d])` on `spec`; mass left of the grid goes to the first cell.
    pub fn discretize(&self, spec: &GridSpec) -> GridMeasure {
        let n = spec.n_cells();
        let d = spec.cell_width();
        let w = DeltaWindow::new(d).expect("positive width");
        let mut mass = Vec::with_capacity(n);
        match &self.law {
            Law::Empirical(m) if m.spec().same_width(spec) => {
                for i in 0..n {
                    mass.push(m.window(spec.point(i) - d, w));
                }
            }
            _ => {
                for i in 0..n {
                    mass.push(self.local_prob(spec.point(i) - d, w));
                }
            }
        }
        mass[0] += 1.0 - self.tail(spec.left_edge());
        let overflow = self.tail(spec.right_edge());
        GridMeasure::from_parts(*spec, mass, overflow)
    }

    /// Whether [`AnalyticDistribution::sample`] is available.
    pub fn can_sample(&self) -> bool {
        !matches!(self.law, Law::Example3)
    }

    /// Draw one variate by inversion (or an exact composition for the lattice laws).
    ///
    /// Panics for laws without a sampler; check [`AnalyticDistribution::can_sample`].
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        match &self.law {
            // the square root is several times cheaper than powf in long walks
            Law::Pareto { alpha } if *alpha == 2.0 => 1.0 / (1.0 - u).sqrt(),
            Law::Pareto { alpha } => (1.0 - u).powf(-1.0 / alpha),
            Law::Weibull { beta } => (-(1.0 - u).ln()).powf(1.0 / beta),
            Law::Exponential { rate } => -(1.0 - u).ln() / rate,
            Law::Lognormal { a, sigma } => {
                let z: f64 = StandardNormal.sample(rng);
                a * (sigma * z).exp()
            }
            Law::PointMass { c } => *c,
            Law::WeibullSurrogate { x0, .. } => {
                // solve tail(x) = 1 - u by bisection on a bracket
                let target = 1.0 - u;
                let mut lo = *x0;
                let mut hi = x0.max(1.0);
                while self.tail(hi) > target {
                    hi *= 2.0;
                }
                for _ in 0..100 {
                    let mid = 0.5 * (lo + hi);
                    if self.tail(mid) > target {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                hi
            }
            Law::Example1 => {
                let g = example1_gamma();
                let p_even = g * PI * PI / 6.0;
                if u < p_even {
                    2.0 * inverse_square_index(u / g) as f64
                } else {
                    // P(k) = 2^-(k+1) given odd
                    let v: f64 = rng.random();
                    let k = (-(1.0 - v).log2()).floor();
                    2.0 * k + 1.0
                }
            }
            Law::Example2 => {
                let k = inverse_square_index(u / example2_gamma()) as f64;
                let v: f64 = rng.random();
                k + EX2_HALF_WIDTH * (2.0 * v - 1.0)
            }
            Law::Empirical(m) => {
                let mut acc = 0.0;
                for (i, w) in m.mass().iter().enumerate() {
                    acc += w;
                    if u < acc {
                        return m.point(i);
                    }
                }
                m.spec().right_edge()
            }
            Law::Example3 => panic!("example3 has no sampler"),
        }
    }
}

/// Smallest `k >= 1` with `sum_{j <= k} 1/j^2 > s`.
fn inverse_square_index(s: f64) -> u64 {
    let zeta2 = PI * PI / 6.0;
    // cumulative up to k is zeta2 - tail(k + 1)
    let cum = |k: u64| zeta2 - inverse_square_tail(k + 1);
    let mut hi = 1u64;
    while cum(hi) <= s {
        hi = hi.saturating_mul(2);
        if hi > 1 << 52 {
            return hi;
        }
    }
    let mut lo = 0u64;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if cum(mid) > s {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

fn lattice_sum(x: f64, y: f64, atom: fn(i64) -> f64) -> f64 {
    let first = x.floor() as i64 + 1;
    let last = y.floor() as i64;
    (first..=last).map(atom).sum()
}

fn ex1_atom(n: i64) -> f64 {
    let g = example1_gamma();
    if n >= 2 && n % 2 == 0 {
        let k = (n / 2) as f64;
        g / (k * k)
    } else if n >= 1 && n % 2 == 1 {
        g * 0.5f64.powi(((n - 1) / 2) as i32)
    } else {
        0.0
    }
}

fn ex1_tail(x: f64) -> f64 {
    let g = example1_gamma();
    if x < 1.0 {
        return 1.0;
    }
    let fl = x.floor();
    // even atoms 2k > x  <=>  k >= floor(x/2) + 1
    let k_even = (fl / 2.0).floor() as u64 + 1;
    // odd atoms 2k+1 > x  <=>  k >= floor((x-1)/2) + 1
    let k_odd = ((fl - 1.0) / 2.0).floor() as i64 + 1;
    let even = g * inverse_square_tail(k_even);
    let odd = g * 0.5f64.powi(k_odd as i32 - 1);
    even + odd
}

fn ex2_window(x: f64, y: f64) -> f64 {
    let g = example2_gamma();
    let lo = ((x - EX2_HALF_WIDTH).floor() as i64).max(1);
    let hi = (y + EX2_HALF_WIDTH).ceil() as i64;
    let mut s = 0.0;
    for k in lo..=hi {
        let kf = k as f64;
        let a = x.max(kf - EX2_HALF_WIDTH);
        let b = y.min(kf + EX2_HALF_WIDTH);
        if b > a {
            s += g / (kf * kf) * (b - a) / (2.0 * EX2_HALF_WIDTH);
        }
    }
    s
}

fn ex2_tail(x: f64) -> f64 {
    let g = example2_gamma();
    if x <= 1.0 - EX2_HALF_WIDTH {
        return 1.0;
    }
    // blocks entirely above x
    let k_full = ((x + EX2_HALF_WIDTH).ceil() as u64).max(1);
    let mut s = g * inverse_square_tail(k_full);
    let kp = k_full as f64 - 1.0;
    if kp >= 1.0 && kp + EX2_HALF_WIDTH > x {
        s += g / (kp * kp) * (kp + EX2_HALF_WIDTH - x) / (2.0 * EX2_HALF_WIDTH);
    }
    s
}

/// Knot `2^(n/4)` of the piecewise-linear profile.
fn ex3_knot(n: i64) -> f64 {
    2f64.powf(n as f64 / 4.0)
}

fn ex3_knot_value(n: i64) -> f64 {
    let x = ex3_knot(n);
    let c = if n.rem_euclid(2) == 0 { 1.0 } else { 2.0 };
    c / (x * x)
}

/// The profile `f`, linear between consecutive knots, for `x >= 1`.
pub(crate) fn ex3_profile(x: f64) -> f64 {
    let mut n = (4.0 * x.log2()).floor() as i64;
    // guard against rounding at the knots
    while ex3_knot(n) > x {
        n -= 1;
    }
    while ex3_knot(n + 1) <= x {
        n += 1;
    }
    let (a, b) = (ex3_knot(n), ex3_knot(n + 1));
    let (fa, fb) = (ex3_knot_value(n), ex3_knot_value(n + 1));
    fa + (fb - fa) * (x - a) / (b - a)
}

/// `int_x^inf f(y) dy` for the profile, summing whole segments.
fn ex3_profile_integral(x: f64) -> f64 {
    let mut n = (4.0 * x.log2()).floor() as i64;
    while ex3_knot(n + 1) <= x {
        n += 1;
    }
    let b = ex3_knot(n + 1);
    let mut s = 0.5 * (ex3_profile(x) + ex3_knot_value(n + 1)) * (b - x);
    let mut j = n + 1;
    loop {
        let seg =
            0.5 * (ex3_knot_value(j) + ex3_knot_value(j + 1)) * (ex3_knot(j + 1) - ex3_knot(j));
        s += seg;
        if seg < 1e-18 * s {
            break;
        }
        j += 1;
    }
    s
}

/// Terms summed exactly before switching to the profile integral.
const EX3_DIRECT: i64 = 200_000;

/// `sum_{n > m} f(n)` for integer `m >= 2`.
fn ex3_sum_above(m: i64) -> f64 {
    let end = m + EX3_DIRECT;
    let head: f64 = ((m + 1)..=end).rev().map(|n| ex3_profile(n as f64)).sum();
    // midpoint rule: sum_{n > end} f(n) ~ int_{end + 1/2}^inf f
    head + ex3_profile_integral(end as f64 + 0.5)
}

fn ex3_upper_mass() -> f64 {
    static S: OnceLock<f64> = OnceLock::new();
    *S.get_or_init(|| ex3_sum_above(2))
}

fn ex3_atom(n: i64) -> f64 {
    match n {
        1 => 1.0 - ex3_upper_mass(),
        n if n >= 3 => ex3_profile(n as f64),
        _ => 0.0,
    }
}

fn ex3_tail(x: f64) -> f64 {
    if x < 1.0 {
        1.0
    } else if x < 3.0 {
        ex3_upper_mass()
    } else {
        ex3_sum_above(x.floor() as i64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pareto_tail_values() {
        let p = AnalyticDistribution::pareto(1.0).unwrap();
        assert_eq!(p.tail(2.0), 0.5);
        assert_eq!(p.tail(1.0), 1.0);
        let w = DeltaWindow::new(2.0).unwrap();
        assert!((p.local_prob(2.0, w) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn parameter_errors_name_the_constraint() {
        match AnalyticDistribution::weibull(1.5) {
            Err(HtlError::InvalidParameter {
                name, constraint, ..
            }) => {
                assert_eq!(name, "beta");
                assert!(constraint.contains("(0, 1)"));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(make_distribution(CatalogKind::Pareto, &[]).is_err());
        assert!(make_distribution(CatalogKind::Lognormal, &[1.0, 0.0]).is_err());
    }

    #[test]
    fn example1_atom_and_normalization() {
        let g = example1_gamma();
        assert!((ex1_atom(4) - g / 4.0).abs() < 1e-16);
        assert!((ex1_atom(5) - g / 4.0).abs() < 1e-16);
        let d = AnalyticDistribution::example1();
        assert_eq!(d.tail(0.5), 1.0);
        let w = DeltaWindow::unit();
        for x in [1.0, 2.0, 3.0, 10.0, 11.0, 57.0] {
            let lhs = d.tail(x) - d.tail(x + 1.0);
            assert!((lhs - d.local_prob(x, w)).abs() < 1e-15, "x={x}");
        }
    }

    #[test]
    fn example2_blocks() {
        let d = AnalyticDistribution::example2();
        let g = example2_gamma();
        let w = DeltaWindow::new(0.25).unwrap();
        assert!((d.local_prob(2.0 - 0.125, w) - g / 4.0).abs() < 1e-15);
        assert!((d.tail(2.0) - (d.tail(2.125) + g / 8.0)).abs() < 1e-14);
        assert!((d.density(3.0).unwrap() - 4.0 * g / 9.0).abs() < 1e-15);
        assert_eq!(d.density(3.5).unwrap(), 0.0);
    }

    #[test]
    fn example3_profile_band() {
        for x in [1.0, 1.7, 3.0, 10.0, 123.4, 1e5] {
            let f = ex3_profile(x);
            assert!(f >= 1.0 / (x * x) * (1.0 - 1e-12) && f <= 2.0 / (x * x) * (1.0 + 1e-12));
        }
        // knots: 2^(2n/4) carries 1/x^2, odd knots 2/x^2
        let x = 4.0;
        assert!((ex3_profile(x) - 1.0 / 16.0).abs() < 1e-15);
        let d = AnalyticDistribution::example3();
        assert!(ex3_atom(1) > 0.0);
        let w = DeltaWindow::unit();
        assert!((d.local_prob(9.0, w) - ex3_profile(10.0)).abs() < 1e-16);
    }

    #[test]
    fn log_windows_agree_with_windows() {
        let w = DeltaWindow::unit();
        for d in [
            AnalyticDistribution::pareto(2.0).unwrap(),
            AnalyticDistribution::weibull(0.5).unwrap(),
            AnalyticDistribution::weibull_surrogate(0.5).unwrap(),
            AnalyticDistribution::exponential(0.7).unwrap(),
        ] {
            for x in [1.5, 10.0, 100.0] {
                let a = d.local_prob(x, w);
                let b = (d.tail(x) - d.tail(x + 1.0)).max(1e-300);
                assert!((a / b - 1.0).abs() < 1e-9, "{} x={x}", d.label());
                assert!((d.log_local_prob(x, w) - a.ln()).abs() < 1e-12);
            }
        }
        // far tail stays finite in log space
        let d = AnalyticDistribution::weibull_surrogate(0.5).unwrap();
        let l = d.log_local_prob(1e14, w);
        assert!(l.is_finite() && l < -1e6);
    }

    #[test]
    fn weibull_surrogate_is_continuous_at_threshold() {
        let d = AnalyticDistribution::weibull_surrogate(0.5).unwrap();
        let x0 = d.support_start();
        assert!(x0 > 0.0 && x0 < 1.0);
        assert!((d.tail(x0 * (1.0 + 1e-9)) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn integrated_tail_closed_forms() {
        let p = AnalyticDistribution::pareto(2.0).unwrap();
        assert!((p.integrated_tail(4.0).unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(p.integrated_tail(0.0).unwrap(), 1.0);
        assert_eq!(
            AnalyticDistribution::pareto(1.0)
                .unwrap()
                .integrated_tail(4.0),
            Err(HtlError::InfiniteMean)
        );
    }

    #[test]
    fn point_mass_discretizes_to_one_cell() {
        let d = AnalyticDistribution::point_mass(1.5).unwrap();
        let spec = GridSpec::nonnegative(0.5, 5.0).unwrap();
        let m = d.discretize(&spec);
        assert_eq!(m.mass()[3], 1.0);
        assert_eq!(m.in_grid_total(), 1.0);
    }

    #[test]
    fn kinds_round_trip() {
        for k in CatalogKind::ALL {
            assert_eq!(k.name().parse::<CatalogKind>().unwrap(), k);
        }
        assert!("cauchy".parse::<CatalogKind>().is_err());
    }
}
