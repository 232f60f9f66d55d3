use serde::{Deserialize, Serialize};

use super::engine::convolve;
use crate::error::{HtlError, Result};
use crate::measures::{DeltaWindow, GridMeasure};

/// How the probabilities of a stopping law decay past the stored prefix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TailKind {
    /// `P(tau = n) = (1 - p) p^n`.
    Geometric { p: f64 },
    /// `P(tau = n) = e^-mu mu^n / n!`.
    Poisson { mu: f64 },
    /// Finite vector supplied by the caller.
    Custom,
}

/// Default bound on the probability left out of a truncated law.
pub const DEFAULT_TAIL_EPS: f64 = 1e-10;

/// Distribution of a stopping index `tau` on `0, 1, 2, ...`, truncated at `n_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoppingLaw {
    probs: Vec<f64>,
    tail_kind: TailKind,
    mean: f64,
    truncated_mass: f64,
}

impl StoppingLaw {
    pub fn geometric(p: f64) -> Result<Self> {
        Self::geometric_with_eps(p, DEFAULT_TAIL_EPS)
    }

    pub fn geometric_with_eps(p: f64, eps: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&p) {
            return Err(HtlError::InvalidParameter {
                name: "p",
                value: p,
                constraint: "p in [0, 1)",
            });
        }
        let mut probs = vec![1.0 - p];
        let mut rest = p; // P(tau > n)
        while rest >= eps && p > 0.0 {
            probs.push(rest * (1.0 - p));
            rest *= p;
        }
        Ok(Self {
            probs,
            tail_kind: TailKind::Geometric { p },
            mean: p / (1.0 - p),
            truncated_mass: rest,
        })
    }

    pub fn poisson(mu: f64) -> Result<Self> {
        Self::poisson_with_eps(mu, DEFAULT_TAIL_EPS)
    }

    pub fn poisson_with_eps(mu: f64, eps: f64) -> Result<Self> {
        if !(mu.is_finite() && mu > 0.0) {
            return Err(HtlError::InvalidParameter {
                name: "mu",
                value: mu,
                constraint: "mu > 0",
            });
        }
        let pmf = poisson_pmf_until(mu, eps * 1e-6);
        // suffix sums give the tails without cancellation
        let mut tails = vec![0.0; pmf.len() + 1];
        for i in (0..pmf.len()).rev() {
            tails[i] = tails[i + 1] + pmf[i];
        }
        let n_max = (0..pmf.len())
            .find(|&n| tails[n + 1] < eps)
            .unwrap_or(pmf.len() - 1);
        Ok(Self {
            probs: pmf[..=n_max].to_vec(),
            tail_kind: TailKind::Poisson { mu },
            mean: mu,
            truncated_mass: tails[n_max + 1],
        })
    }

    /// Finite law given by its probabilities; a missing remainder counts as truncated.
    pub fn custom(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() || probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(HtlError::Precondition(
                "stopping probabilities must be finite and nonnegative".into(),
            ));
        }
        let s: f64 = probs.iter().sum();
        if s > 1.0 + 1e-12 {
            return Err(HtlError::InvalidParameter {
                name: "sum(p)",
                value: s,
                constraint: "probabilities must sum to at most 1",
            });
        }
        let mean = probs.iter().enumerate().map(|(n, p)| n as f64 * p).sum();
        Ok(Self {
            probs,
            tail_kind: TailKind::Custom,
            mean,
            truncated_mass: (1.0 - s).max(0.0),
        })
    }

    /// `tau = n` with probability 1.
    pub fn point(n: usize) -> Self {
        let mut probs = vec![0.0; n + 1];
        probs[n] = 1.0;
        Self {
            probs,
            tail_kind: TailKind::Custom,
            mean: n as f64,
            truncated_mass: 0.0,
        }
    }

    /// Extend the prefix until `sum_{n > n_max} p_n V (1 + eps)^n <= rel * E tau`.
    ///
    /// This bounds the window error of the stopped sum when every convolution
    /// power obeys the geometric majorant `V (1 + eps)^n F(x + T)`.
    pub fn widened_for_growth(&self, v: f64, eps: f64, rel: f64) -> Result<Self> {
        let q = 1.0 + eps;
        let budget = rel * self.mean.max(1e-300);
        match self.tail_kind {
            TailKind::Geometric { p } => {
                if p * q >= 1.0 {
                    return Err(HtlError::Precondition(
                        "geometric stopping law too heavy for the growth bound".into(),
                    ));
                }
                // remainder after n_max: (1-p) V sum_{n > n_max} (pq)^n
                let mut eps_tail = self.truncated_mass;
                let mut law = self.clone();
                while (1.0 - p) * v * (p * q).powi(law.probs.len() as i32) / (1.0 - p * q) > budget
                {
                    eps_tail *= 0.1;
                    law = Self::geometric_with_eps(p, eps_tail)?;
                }
                Ok(law)
            }
            TailKind::Poisson { mu } => {
                // remainder is e^-mu sum_{n > N} (mu q)^n / n! V, summed explicitly
                let mut law = self.clone();
                let mut eps_tail = self.truncated_mass.max(1e-300);
                loop {
                    let weighted = poisson_weighted_tail(mu, q, law.probs.len()) * v;
                    if weighted <= budget || eps_tail < 1e-300 {
                        return Ok(law);
                    }
                    eps_tail *= 0.01;
                    law = Self::poisson_with_eps(mu, eps_tail)?;
                }
            }
            TailKind::Custom => Ok(self.clone()),
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn tail_kind(&self) -> TailKind {
        self.tail_kind
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// `sum_{n > n_max} p_n`, the mass not represented in `probs`.
    pub fn truncated_mass(&self) -> f64 {
        self.truncated_mass
    }

    pub fn n_max(&self) -> usize {
        self.probs.len() - 1
    }

    /// `P(tau >= n)` including the truncated remainder.
    pub fn survival(&self, n: usize) -> f64 {
        self.probs.get(n..).map(|s| s.iter().sum()).unwrap_or(0.0) + self.truncated_mass
    }
}

/// Poisson pmf from 0 until terms past the mode fall below `floor`.
fn poisson_pmf_until(mu: f64, floor: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut log_p = -mu;
    let mut n = 0usize;
    loop {
        let p = log_p.exp();
        out.push(p);
        n += 1;
        log_p += mu.ln() - (n as f64).ln();
        if n as f64 > mu && p < floor {
            break;
        }
        if n > 100_000 {
            break;
        }
    }
    out
}

/// `e^-mu sum_{n >= start} (mu q)^n / n!`.
fn poisson_weighted_tail(mu: f64, q: f64, start: usize) -> f64 {
    let mut log_t = -mu;
    for n in 1..=start {
        log_t += (mu * q).ln() - (n as f64).ln();
    }
    let mut s = 0.0;
    let mut n = start;
    loop {
        let t = log_t.exp();
        s += t;
        n += 1;
        log_t += (mu * q).ln() - (n as f64).ln();
        if (n as f64 > mu * q && t < 1e-30 * s.max(1e-300)) || n > start + 100_000 {
            break;
        }
    }
    s
}

/// Randomly stopped sum together with the mass it had to drop.
#[derive(Debug, Clone, PartialEq)]
pub struct StoppedSum {
    pub measure: GridMeasure,
    /// `sum_{n > n_max} p_n`: total mass missing from `measure`.
    pub truncation_bound: f64,
    pub n_max: usize,
}

/// `sum_n p_n a^{*n}` on `a`'s grid, one extra convolution per term.
pub fn stopped_sum(a: &GridMeasure, law: &StoppingLaw) -> Result<StoppedSum> {
    if !a.is_nonnegative_support() {
        return Err(HtlError::Precondition(
            "stopped sums need a measure on [0, inf)".into(),
        ));
    }
    if (a.total() - 1.0).abs() > 1e-9 {
        return Err(HtlError::Precondition(format!(
            "stopped sums need a probability measure, total = {}",
            a.total()
        )));
    }
    let spec = *a.spec();
    let zero = spec
        .index_of(0.0)
        .ok_or_else(|| HtlError::Grid("grid must contain the origin".into()))?;
    let mut mass = vec![0.0; spec.n_cells()];
    mass[zero] = law.probs()[0];
    let mut acc = GridMeasure::from_parts(spec, mass, 0.0);
    let mut power = a.clone();
    let n_max = law.n_max();
    for n in 1..=n_max {
        acc.add_scaled(&power, law.probs()[n])?;
        if n < n_max {
            power = convolve(&power, a)?;
        }
    }
    Ok(StoppedSum {
        measure: acc,
        truncation_bound: law.truncated_mass(),
        n_max,
    })
}

/// Local overshoot probability `sum_k P(tau = k) sum_{n <= k} P(S_{n-1} <= x, S_n in x + y + T)`.
///
/// Computed by restricted convolution: the `<= x` part of `S_{n-1}` is convolved
/// with `g` at each step. Windows past the grid contribute 0.
pub fn overshoot_local(
    g: &GridMeasure,
    x: f64,
    y: f64,
    delta: DeltaWindow,
    law: &StoppingLaw,
) -> Result<f64> {
    let spec = *g.spec();
    if !g.is_nonnegative_support() {
        return Err(HtlError::Precondition(
            "overshoot needs G on [0, inf)".into(),
        ));
    }
    spec.snap_index(x)?;
    spec.snap_index(y)?;
    let zero = spec
        .index_of(0.0)
        .ok_or_else(|| HtlError::Grid("grid must contain the origin".into()))?;
    let mut mass = vec![0.0; spec.n_cells()];
    mass[zero] = 1.0;
    let mut s_prev = GridMeasure::from_parts(spec, mass, 0.0); // law of S_{n-1}
    let n_max = law.n_max();
    let mut total = 0.0;
    for n in 1..=n_max {
        let survive = law.survival(n);
        if survive <= 1e-300 {
            break;
        }
        let step = convolve(&s_prev.truncated_at(x), g)?;
        total += survive * step.window(x + y, delta);
        if n < n_max {
            s_prev = convolve(&s_prev, g)?;
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::GridSpec;

    #[test]
    fn geometric_law_sums_to_one() {
        let l = StoppingLaw::geometric(0.6).unwrap();
        let s: f64 = l.probs().iter().sum();
        assert!((s + l.truncated_mass() - 1.0).abs() < 1e-12);
        assert!(l.truncated_mass() < DEFAULT_TAIL_EPS);
        assert!((l.mean() - 1.5).abs() < 1e-15);
    }

    #[test]
    fn poisson_law_sums_to_one() {
        let l = StoppingLaw::poisson(2.0).unwrap();
        let s: f64 = l.probs().iter().sum();
        assert!((s + l.truncated_mass() - 1.0).abs() < 1e-12);
        assert!((l.probs()[1] - 2.0 * (-2.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn geometric_zero_is_origin() {
        let spec = GridSpec::nonnegative(1.0, 5.0).unwrap();
        let a = GridMeasure::point_mass(spec, 2.0, 1.0).unwrap();
        let r = stopped_sum(&a, &StoppingLaw::geometric(0.0).unwrap()).unwrap();
        assert_eq!(r.measure.mass()[0], 1.0);
        assert_eq!(r.measure.total(), 1.0);
    }

    #[test]
    fn single_step_law_returns_input() {
        let spec = GridSpec::nonnegative(1.0, 5.0).unwrap();
        let a = GridMeasure::new(spec, vec![0.0, 0.5, 0.25, 0.0, 0.0, 0.0], 0.25).unwrap();
        let r = stopped_sum(&a, &StoppingLaw::custom(vec![0.0, 1.0]).unwrap()).unwrap();
        assert_eq!(r.measure, a);
    }

    #[test]
    fn overshoot_single_step_is_window() {
        let spec = GridSpec::nonnegative(1.0, 20.0).unwrap();
        let a = GridMeasure::new(
            spec,
            (0..21)
                .map(|i| if i > 0 { 1.0 / 20.0 } else { 0.0 })
                .collect(),
            0.0,
        )
        .unwrap();
        let law = StoppingLaw::custom(vec![0.0, 1.0]).unwrap();
        let w = DeltaWindow::new(2.0).unwrap();
        let v = overshoot_local(&a, 3.0, 4.0, w, &law).unwrap();
        assert!((v - a.window(7.0, w)).abs() < 1e-15);
    }

    #[test]
    fn widening_lengthens_poisson() {
        let l = StoppingLaw::poisson(2.0).unwrap();
        let w = l.widened_for_growth(10.0, 0.5, 1e-6).unwrap();
        assert!(w.n_max() >= l.n_max());
        assert!(poisson_weighted_tail(2.0, 1.5, w.probs().len()) * 10.0 <= 2e-6);
    }
}
