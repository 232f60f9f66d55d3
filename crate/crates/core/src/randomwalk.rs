//! Supremum of a random walk with negative drift.
//!
//! Monte Carlo paths give the law of the supremum and of the first ascending
//! ladder height; the geometric compound of the ladder law gives a second,
//! independent route to the supremum. Every path draws from its own ChaCha8
//! stream (`seed`, path index), so results do not depend on how the path loop
//! is split across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::convolve::{linear, stopped_sum, Method, StoppingLaw};
use crate::diagnostics::sstar_points;
use crate::error::{check_param, HtlError, Result};
use crate::measures::{
    AnalyticDistribution, ConvergenceRule, DeltaWindow, GridMeasure, GridSpec, RatioSeries,
    SeriesVerdict,
};
use crate::quad;
use crate::special::Z95;

/// Default barrier in units of the drift.
///
/// A path abandoned at `-B` would still have climbed back above its running
/// maximum with probability about `P(M > B)`, so `B` must make that negligible
/// next to the Monte Carlo error.
pub const DEFAULT_BARRIER_DRIFTS: f64 = 1000.0;

/// Paths per work unit; fixed so merged results do not depend on the thread count.
const CHUNK: usize = 4096;

/// Increment `xi = eta - shift` with `eta` from the catalog.
#[derive(Debug, Clone, PartialEq)]
pub struct IncrementModel {
    eta: AnalyticDistribution,
    shift: f64,
    drift: f64,
}

impl IncrementModel {
    pub fn new(eta: AnalyticDistribution, shift: f64) -> Result<Self> {
        check_param(shift.is_finite(), "shift", shift, "finite shift")?;
        if !eta.can_sample() {
            return Err(HtlError::Unsupported(format!(
                "{} has no sampler",
                eta.label()
            )));
        }
        let mean = eta.mean().ok_or(HtlError::InfiniteMean)?;
        let drift = shift - mean;
        if !(drift > 0.0) {
            return Err(HtlError::NonNegativeDrift { mean: -drift });
        }
        Ok(Self { eta, shift, drift })
    }

    pub fn eta(&self) -> &AnalyticDistribution {
        &self.eta
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// `m = -E xi`.
    pub fn drift(&self) -> f64 {
        self.drift
    }

    /// `P(xi > x)`.
    pub fn tail(&self, x: f64) -> f64 {
        self.eta.tail(x + self.shift)
    }

    pub fn local_prob(&self, x: f64, delta: DeltaWindow) -> f64 {
        self.eta.local_prob(x + self.shift, delta)
    }

    /// `min(1, int_x^inf P(xi > y) dy)`.
    pub fn integrated_tail(&self, x: f64) -> Result<f64> {
        self.eta.integrated_tail(x + self.shift)
    }

    pub fn density(&self, x: f64) -> Result<f64> {
        self.eta.density(x + self.shift)
    }

    /// `E max(xi, 0)`.
    pub fn positive_mean(&self) -> Result<f64> {
        self.eta.integrated_tail_raw(self.shift)
    }

    pub fn lattice_span(&self) -> Option<f64> {
        self.eta.lattice_span()
    }

    /// True when `xi <= 0` almost surely.
    pub fn is_nonpositive(&self) -> bool {
        self.tail(0.0) <= 0.0
    }

    /// Barrier of [`DEFAULT_BARRIER_DRIFTS`] drifts.
    pub fn default_barrier(&self) -> f64 {
        DEFAULT_BARRIER_DRIFTS * self.drift
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        self.eta.sample(rng) - self.shift
    }
}

fn path_rng(seed: u64, path: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path as u64);
    rng
}

/// Run `f` on every path index, chunked and in parallel, keeping index order.
fn map_paths<T: Send, F: Fn(&mut ChaCha8Rng) -> T + Sync>(
    n_paths: usize,
    seed: u64,
    f: F,
) -> Vec<T> {
    let n_chunks = n_paths.div_ceil(CHUNK);
    let chunks: Vec<Vec<T>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let end = ((c + 1) * CHUNK).min(n_paths);
            (c * CHUNK..end)
                .map(|i| {
                    let mut rng = path_rng(seed, i);
                    f(&mut rng)
                })
                .collect()
        })
        .collect();
    chunks.into_iter().flatten().collect()
}

fn check_run(n_paths: usize, barrier: f64) -> Result<()> {
    check_param(n_paths > 0, "n_paths", n_paths as f64, "n_paths >= 1")?;
    check_param(
        barrier.is_finite() && barrier > 0.0,
        "barrier",
        barrier,
        "B > 0",
    )
}

fn check_nonnegative_grid(spec: &GridSpec) -> Result<()> {
    if spec.origin_index() != -1 {
        return Err(HtlError::Grid(
            "supremum grids start at 0 (origin index -1)".into(),
        ));
    }
    Ok(())
}

/// Bin nonnegative values onto a grid starting at 0: `v` lands at the right end
/// of its cell, `0` on the origin atom.
struct Binner {
    width: f64,
    counts: Vec<u64>,
    overflow: u64,
}

impl Binner {
    fn new(spec: &GridSpec) -> Self {
        Self {
            width: spec.cell_width(),
            counts: vec![0; spec.n_cells()],
            overflow: 0,
        }
    }

    fn add(&mut self, v: f64) {
        let k = if v <= 0.0 {
            0
        } else {
            (v / self.width - 1e-9).ceil().max(1.0) as usize
        };
        match self.counts.get_mut(k) {
            Some(c) => *c += 1,
            None => self.overflow += 1,
        }
    }

    fn measure(&self, spec: GridSpec, n: u64) -> GridMeasure {
        if n == 0 {
            return GridMeasure::zero(spec);
        }
        let nf = n as f64;
        let mass = self.counts.iter().map(|&c| c as f64 / nf).collect();
        GridMeasure::from_parts(spec, mass, self.overflow as f64 / nf)
    }
}

/// Normal-approximation 95% half-width of a proportion `k / n`.
pub fn proportion_halfwidth(k: u64, n: u64) -> f64 {
    if n == 0 {
        return f64::INFINITY;
    }
    let p = k as f64 / n as f64;
    Z95 * (p * (1.0 - p) / n as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupremumSource {
    MonteCarlo,
    GeometricCompound,
}

/// Asymptotic predictions for the supremum at one `x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub x: f64,
    /// `(T / m) P(xi > x)`.
    pub local: f64,
    /// `(1 / m) min(1, int_x^inf P(xi > y) dy)`.
    pub tail: f64,
    /// `P(xi > x) / m`.
    pub density: f64,
}

/// Prediction table at `xs` for the window `delta`.
pub fn supremum_predictions(
    inc: &IncrementModel,
    xs: &[f64],
    delta: DeltaWindow,
) -> Result<Vec<Prediction>> {
    let m = inc.drift();
    xs.iter()
        .map(|&x| {
            let tail = inc.tail(x);
            let local = if delta.is_infinite() {
                inc.integrated_tail(x)? / m
            } else {
                delta.length() * tail / m
            };
            Ok(Prediction {
                x,
                local,
                tail: inc.integrated_tail(x)? / m,
                density: tail / m,
            })
        })
        .collect()
}

/// Default prediction points: `1, 2, 4, ...` inside the grid.
fn default_points(spec: &GridSpec) -> Vec<f64> {
    let mut xs = Vec::new();
    let mut x = 1.0;
    while x + 1.0 <= spec.right_edge() {
        if spec.is_aligned(x) {
            xs.push(x);
        }
        x *= 2.0;
    }
    xs
}

/// Law of `M = sup_n S_n` with the asymptotic predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct SupremumResult {
    pub pi_hat: GridMeasure,
    pub source: SupremumSource,
    /// Predictions at `1, 2, 4, ...` for the unit window (or the lattice span).
    pub predictions: Vec<Prediction>,
    /// Path count for Monte Carlo results.
    pub n_paths: Option<u64>,
    /// Per-cell hit counts for Monte Carlo results.
    pub counts: Option<Vec<u64>>,
    /// Mass that truncation left out (geometric compound) or 0.
    pub truncation: f64,
}

impl SupremumResult {
    /// `P(M > x)` with its 95% half-width (zero for the compound).
    pub fn tail_estimate(&self, x: f64) -> (f64, f64) {
        let est = self.pi_hat.tail(x);
        (est, self.halfwidth(est))
    }

    /// `P(M in x + T)` with its 95% half-width.
    pub fn window_estimate(&self, x: f64, delta: DeltaWindow) -> (f64, f64) {
        let est = self.pi_hat.window(x, delta);
        (est, self.halfwidth(est))
    }

    /// Hits behind a probability estimate.
    pub fn hits(&self, p: f64) -> Option<u64> {
        self.n_paths.map(|n| (p * n as f64).round() as u64)
    }

    fn halfwidth(&self, p: f64) -> f64 {
        match self.n_paths {
            Some(n) => Z95 * (p * (1.0 - p) / n as f64).max(0.0).sqrt(),
            None => 0.0,
        }
    }
}

fn prediction_window(inc: &IncrementModel) -> DeltaWindow {
    inc.lattice_span().map_or(DeltaWindow::unit(), |s| {
        DeltaWindow::new(s).unwrap_or(DeltaWindow::unit())
    })
}

/// Monte Carlo law of the supremum: each path runs until it drops below `-barrier`.
pub fn simulate_supremum(
    inc: &IncrementModel,
    n_paths: usize,
    barrier: f64,
    seed: u64,
    spec: &GridSpec,
) -> Result<SupremumResult> {
    check_run(n_paths, barrier)?;
    check_nonnegative_grid(spec)?;
    let maxima = map_paths(n_paths, seed, |rng| {
        if inc.is_nonpositive() {
            return 0.0;
        }
        let mut s = 0.0f64;
        let mut max = 0.0f64;
        while s >= -barrier {
            s += inc.sample(rng);
            if s > max {
                max = s;
            }
        }
        max
    });
    let mut bins = Binner::new(spec);
    maxima.iter().for_each(|&v| bins.add(v));
    let pi_hat = bins.measure(*spec, n_paths as u64);
    let predictions = supremum_predictions(inc, &default_points(spec), prediction_window(inc))?;
    Ok(SupremumResult {
        pi_hat,
        source: SupremumSource::MonteCarlo,
        predictions,
        n_paths: Some(n_paths as u64),
        counts: Some(bins.counts),
        truncation: 0.0,
    })
}

/// Fewest hits behind an estimate before it counts as reliable.
pub const MIN_HITS: u64 = 50;

/// Residual barrier bias at one point from the estimates at `B` and `2B`.
///
/// Mass lost past the barrier scales like the integrated tail at `B`, which for
/// tails decaying like `1/B` makes the gap to an infinite barrier about twice the
/// doubling shift (faster decay makes this conservative).
pub fn barrier_bias(at_barrier: f64, at_doubled: f64) -> f64 {
    2.0 * (at_doubled - at_barrier).abs()
}

/// Evidence behind one Monte Carlo estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointReliability {
    pub x: f64,
    pub estimate: f64,
    pub halfwidth: f64,
    pub hits: u64,
    /// Estimated gap to an infinite barrier, see [`barrier_bias`].
    pub bias: f64,
    /// At least [`MIN_HITS`] hits and `bias` within `halfwidth`.
    pub reliable: bool,
}

impl PointReliability {
    fn new(x: f64, hits: u64, hits_doubled: u64, n: u64) -> Self {
        let nf = n as f64;
        let estimate = hits as f64 / nf;
        let halfwidth = proportion_halfwidth(hits, n);
        let bias = barrier_bias(estimate, hits_doubled as f64 / nf);
        Self {
            x,
            estimate,
            halfwidth,
            hits,
            bias,
            reliable: hits >= MIN_HITS && bias <= halfwidth,
        }
    }
}

fn tail_count(counts: &[u64], overflow: u64, spec: &GridSpec, x: f64) -> u64 {
    // atoms strictly above x; index i sits at the point i d
    let first = (x / spec.cell_width() + 1e-9).floor() as usize + 1;
    counts.iter().skip(first).sum::<u64>() + overflow
}

/// Supremum estimates from the same paths stopped at `-B` and at `-2B`.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckedSupremum {
    pub base: SupremumResult,
    pub doubled: SupremumResult,
    pub barrier: f64,
    overflow: (u64, u64),
}

impl CheckedSupremum {
    /// Reliability of the tail estimate `P(M > x)` at grid-aligned `x`.
    pub fn tail_reliability(&self, x: f64) -> PointReliability {
        let spec = self.base.pi_hat.spec();
        let n = self.base.n_paths.unwrap_or(0);
        let hits = tail_count(
            self.base.counts.as_deref().unwrap_or(&[]),
            self.overflow.0,
            spec,
            x,
        );
        let late = tail_count(
            self.doubled.counts.as_deref().unwrap_or(&[]),
            self.overflow.1,
            spec,
            x,
        );
        PointReliability::new(x, hits, late, n)
    }

    /// Largest `x` in `xs` whose tail estimate is reliable.
    pub fn final_reliable_x(&self, xs: &[f64]) -> Option<f64> {
        xs.iter()
            .copied()
            .filter(|&x| self.tail_reliability(x).reliable)
            .fold(None, |_, x| Some(x))
    }
}

/// [`simulate_supremum`] that also follows every path on to `-2 barrier`.
pub fn simulate_supremum_checked(
    inc: &IncrementModel,
    n_paths: usize,
    barrier: f64,
    seed: u64,
    spec: &GridSpec,
) -> Result<CheckedSupremum> {
    check_run(n_paths, barrier)?;
    check_nonnegative_grid(spec)?;
    let maxima = map_paths(n_paths, seed, |rng| {
        if inc.is_nonpositive() {
            return (0.0, 0.0);
        }
        let mut s = 0.0f64;
        let mut max = 0.0f64;
        let mut at_barrier = None;
        while s >= -2.0 * barrier {
            s += inc.sample(rng);
            if s > max {
                max = s;
            }
            if at_barrier.is_none() && s < -barrier {
                at_barrier = Some(max);
            }
        }
        (at_barrier.unwrap_or(max), max)
    });
    let mut base = Binner::new(spec);
    let mut doubled = Binner::new(spec);
    for &(a, b) in &maxima {
        base.add(a);
        doubled.add(b);
    }
    let n = n_paths as u64;
    let predictions = supremum_predictions(inc, &default_points(spec), prediction_window(inc))?;
    let result = |bins: Binner| SupremumResult {
        pi_hat: bins.measure(*spec, n),
        source: SupremumSource::MonteCarlo,
        predictions: predictions.clone(),
        n_paths: Some(n),
        counts: Some(bins.counts),
        truncation: 0.0,
    };
    let overflow = (base.overflow, doubled.overflow);
    Ok(CheckedSupremum {
        base: result(base),
        doubled: result(doubled),
        barrier,
        overflow,
    })
}

/// Outcome of rerunning the ladder estimate with the barrier doubled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarrierCheck {
    pub p_doubled: f64,
    /// `p_doubled - p_hat`.
    pub shift: f64,
    /// Raised when the shift reaches the 95% half-width of `p_hat`.
    pub flagged: bool,
}

/// Monte Carlo estimate of the ascending ladder height.
#[derive(Debug, Clone, PartialEq)]
pub struct LadderEstimate {
    /// `P(eta < inf)`.
    pub p_hat: f64,
    /// Law of the ladder height given it exists; the zero measure when no path ascended.
    pub g_hat: GridMeasure,
    pub n_paths: u64,
    pub n_success: u64,
    pub barrier: f64,
    /// 95% half-width of `p_hat`.
    pub ci_halfwidth: f64,
    pub counts: Vec<u64>,
    pub barrier_check: Option<BarrierCheck>,
    /// Heights of ascents that happened only between `-B` and `-2B` (empty without the check).
    pub late_counts: Vec<u64>,
    overflow: (u64, u64),
}

impl LadderEstimate {
    pub fn barrier_flag(&self) -> bool {
        self.barrier_check.is_some_and(|b| b.flagged)
    }

    /// `P(ladder height > x)` with a 95% half-width.
    pub fn tail_estimate(&self, x: f64) -> (f64, f64) {
        let est = self.g_hat.tail(x);
        (
            est,
            proportion_halfwidth((est * self.n_success as f64).round() as u64, self.n_success),
        )
    }

    /// Reliability of `P(eta < inf, ladder height > x)`, the defective ladder tail.
    ///
    /// Needs the barrier check; without it the bias is reported as infinite.
    pub fn defective_tail_reliability(&self, x: f64) -> PointReliability {
        let spec = self.g_hat.spec();
        let hits = tail_count(&self.counts, self.overflow.0, spec, x);
        if self.barrier_check.is_none() {
            let mut r = PointReliability::new(x, hits, hits, self.n_paths);
            r.bias = f64::INFINITY;
            r.reliable = false;
            return r;
        }
        let late = tail_count(&self.late_counts, self.overflow.1, spec, x);
        PointReliability::new(x, hits, hits + late, self.n_paths)
    }

    /// Largest `x` in `xs` whose defective ladder tail is reliable.
    pub fn final_reliable_x(&self, xs: &[f64]) -> Option<f64> {
        xs.iter()
            .copied()
            .filter(|&x| self.defective_tail_reliability(x).reliable)
            .fold(None, |_, x| Some(x))
    }

    /// `P(ladder height in x + T)` with a 95% half-width.
    pub fn window_estimate(&self, x: f64, delta: DeltaWindow) -> (f64, f64) {
        let est = self.g_hat.window(x, delta);
        (
            est,
            proportion_halfwidth((est * self.n_success as f64).round() as u64, self.n_success),
        )
    }
}

/// Ladder height per path: `Some(S_eta)` on ascent before `-barrier`.
///
/// With `doubled`, the path continues to `-2 barrier` and reports whether the
/// ascent happened only after passing `-barrier`.
fn ladder_path(
    inc: &IncrementModel,
    rng: &mut ChaCha8Rng,
    barrier: f64,
    doubled: bool,
) -> (Option<f64>, bool) {
    if inc.is_nonpositive() {
        return (None, false);
    }
    let stop = if doubled { 2.0 * barrier } else { barrier };
    let mut s = 0.0f64;
    let mut passed = false;
    loop {
        s += inc.sample(rng);
        if s > 0.0 {
            return (Some(s), passed);
        }
        if s < -barrier {
            passed = true;
        }
        if s < -stop {
            return (None, passed);
        }
    }
}

/// Ladder height estimate; `check_barrier` also measures the doubled-barrier shift of `p_hat`.
pub fn estimate_ladder(
    inc: &IncrementModel,
    n_paths: usize,
    barrier: f64,
    seed: u64,
    spec: &GridSpec,
    check_barrier: bool,
) -> Result<LadderEstimate> {
    check_run(n_paths, barrier)?;
    check_nonnegative_grid(spec)?;
    let outcomes = map_paths(n_paths, seed, |rng| {
        ladder_path(inc, rng, barrier, check_barrier)
    });
    let mut bins = Binner::new(spec);
    let mut late = Binner::new(spec);
    let mut n_success = 0u64;
    let mut n_late = 0u64;
    for &(h, passed) in &outcomes {
        match h {
            Some(v) if !passed => {
                n_success += 1;
                bins.add(v);
            }
            Some(v) => {
                n_late += 1;
                late.add(v);
            }
            None => {}
        }
    }
    let n = n_paths as u64;
    let p_hat = n_success as f64 / n as f64;
    let ci_halfwidth = proportion_halfwidth(n_success, n);
    let barrier_check = check_barrier.then(|| {
        let p_doubled = (n_success + n_late) as f64 / n as f64;
        let shift = p_doubled - p_hat;
        BarrierCheck {
            p_doubled,
            shift,
            flagged: shift >= ci_halfwidth,
        }
    });
    Ok(LadderEstimate {
        p_hat,
        g_hat: bins.measure(*spec, n_success),
        n_paths: n,
        n_success,
        barrier,
        ci_halfwidth,
        overflow: (bins.overflow, late.overflow),
        counts: bins.counts,
        barrier_check,
        late_counts: if check_barrier {
            late.counts
        } else {
            Vec::new()
        },
    })
}

/// `P(M in .) = (1 - p) sum_k p^k G^{*k}` from a ladder estimate.
pub fn supremum_via_geometric(l: &LadderEstimate, inc: &IncrementModel) -> Result<SupremumResult> {
    let p = l.p_hat;
    if p >= 1.0 {
        return Err(HtlError::InvalidParameter {
            name: "p_hat",
            value: p,
            constraint: "p_hat < 1",
        });
    }
    let spec = *l.g_hat.spec();
    let predictions = supremum_predictions(inc, &default_points(&spec), prediction_window(inc))?;
    let (pi_hat, truncation) = if p == 0.0 || l.n_success == 0 {
        (GridMeasure::point_mass(spec, 0.0, 1.0)?, 0.0)
    } else {
        let law = StoppingLaw::geometric(p)?;
        let s = stopped_sum(&l.g_hat, &law)?;
        (s.measure, s.truncation_bound)
    };
    Ok(SupremumResult {
        pi_hat,
        source: SupremumSource::GeometricCompound,
        predictions,
        n_paths: None,
        counts: None,
        truncation,
    })
}

/// `(1 - p) T / (p m) P(xi > x)`, or `(1 - p) / (p m) F^I(x)` for an infinite window.
pub fn ladder_local_prediction(
    inc: &IncrementModel,
    p: f64,
    x: f64,
    delta: DeltaWindow,
) -> Result<f64> {
    check_param(p > 0.0 && p < 1.0, "p", p, "0 < p < 1")?;
    let scale = (1.0 - p) / (p * inc.drift());
    if delta.is_infinite() {
        Ok(scale * inc.integrated_tail(x)?)
    } else {
        Ok(scale * delta.length() * inc.tail(x))
    }
}

/// Monte Carlo value of `sum_n E(v(x - S_n); S_1, ..., S_n <= 0)` and its prediction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TabooSum {
    pub x: f64,
    pub mc_mean: f64,
    /// 95% half-width of `mc_mean`.
    pub ci_halfwidth: f64,
    /// Fraction of paths that went above 0 before `-barrier`.
    pub p_hat: f64,
    /// `int_x^inf v`.
    pub v_integral: f64,
    /// `(1 - p_hat) / m * int_x^inf v`.
    pub prediction: f64,
}

/// Sum of `v(x - S_n)` over the steps before the walk first goes above 0.
pub fn taboo_sum(
    inc: &IncrementModel,
    v: &(dyn Fn(f64) -> f64 + Sync),
    x: f64,
    n_paths: usize,
    barrier: f64,
    seed: u64,
) -> Result<TabooSum> {
    check_run(n_paths, barrier)?;
    let total = quad::try_integrate_to_infinity(&|y| v(y), 0.0, 1e-10)
        .ok_or_else(|| HtlError::DivergentIntegral("int_0^inf v does not converge".into()))?;
    if total < 0.0 {
        return Err(HtlError::NegativeInput {
            x: 0.0,
            value: total,
        });
    }
    let v_integral = if x <= 0.0 {
        total + quad::adaptive_simpson(&|y| v(y), x, 0.0, 1e-13)
    } else {
        quad::integrate_to_infinity(&|y| v(y), x, 1e-10)
    };
    let per_path = map_paths(n_paths, seed, |rng| {
        let mut s = 0.0f64;
        let mut acc = v(x);
        loop {
            s += inc.sample(rng);
            if s > 0.0 {
                return (acc, true);
            }
            if s < -barrier {
                return (acc, false);
            }
            acc += v(x - s);
        }
    });
    let n = n_paths as f64;
    let mean = per_path.iter().map(|p| p.0).sum::<f64>() / n;
    let var = if n_paths > 1 {
        per_path.iter().map(|p| (p.0 - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let p_hat = per_path.iter().filter(|p| p.1).count() as f64 / n;
    Ok(TabooSum {
        x,
        mc_mean: mean,
        ci_halfwidth: Z95 * (var / n).sqrt(),
        p_hat,
        v_integral,
        prediction: (1.0 - p_hat) / inc.drift() * v_integral,
    })
}

/// Settings for [`supremum_density_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityCheckConfig {
    pub n_paths: usize,
    pub barrier: f64,
    pub seed: u64,
    pub cell_width: f64,
    /// Largest `x` for which densities are built.
    pub x_max: f64,
    /// Window for the measure-level cross-check.
    pub window: f64,
    pub rule: ConvergenceRule,
}

/// Supremum density built from the ladder density, with its checks.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityCheck {
    /// Compound density divided by `P(xi > x) / m`.
    pub ratios: RatioSeries,
    /// Evidence for the integrated-convolution class of the increment.
    pub sstar: RatioSeries,
    /// Defective ladder density averaged over cells `(k d - d, k d]`, stored at `k d`.
    pub ladder_density: Vec<f64>,
    /// Supremum density at the same nodes (node 0 excluded from the atom at 0).
    pub compound_density: Vec<f64>,
    /// Mass of the defective ladder law, including the part past the grid.
    pub p: f64,
    /// Fraction of simulated paths that ascended.
    pub p_mc: f64,
    /// Supremum law from the discretized ladder density.
    pub pi_measure: GridMeasure,
    /// Largest relative gap between the window integral of the compound
    /// density and the measure window over the evaluation points.
    pub window_gap: f64,
}

/// Occupation of the walk on `[-barrier, 0]` before its first ascent, linearly
/// binned to nodes `-j d`, summed over paths in chunk order.
fn taboo_occupation(inc: &IncrementModel, cfg: &DensityCheckConfig) -> (Vec<f64>, u64) {
    let d = cfg.cell_width;
    let n_nodes = (cfg.barrier / d).ceil() as usize + 2;
    let n_chunks = cfg.n_paths.div_ceil(CHUNK);
    // bounded memory: merge a batch of chunks at a time, in order
    let batch = 16;
    let mut occ = vec![0.0f64; n_nodes];
    let mut ascents = 0u64;
    for b in (0..n_chunks).step_by(batch) {
        let parts: Vec<(Vec<f64>, u64)> = (b..(b + batch).min(n_chunks))
            .into_par_iter()
            .map(|c| {
                let mut local = vec![0.0f64; n_nodes];
                let mut up = 0u64;
                let end = ((c + 1) * CHUNK).min(cfg.n_paths);
                for i in c * CHUNK..end {
                    let mut rng = path_rng(cfg.seed, i);
                    let mut s = 0.0f64;
                    loop {
                        let u = -s / d;
                        let j = u.floor() as usize;
                        let w = u - j as f64;
                        local[j] += 1.0 - w;
                        local[j + 1] += w;
                        s += inc.sample(&mut rng);
                        if s > 0.0 {
                            up += 1;
                            break;
                        }
                        if s < -cfg.barrier {
                            break;
                        }
                    }
                }
                (local, up)
            })
            .collect();
        for (local, up) in parts {
            occ.iter_mut().zip(&local).for_each(|(a, b)| *a += b);
            ascents += up;
        }
    }
    let n = cfg.n_paths as f64;
    occ.iter_mut().for_each(|v| *v /= n);
    (occ, ascents)
}

/// Supremum density from the ladder density `g(y) = sum_n E(f(y - S_n); taboo)`
/// compared with `P(xi > x) / m`.
///
/// The compound density uses the left-endpoint convolution `d sum g_j h_{k-j}`,
/// which is exactly the cell convolution of the discretized measures, so its
/// window integral reproduces the measure-level supremum law.
pub fn supremum_density_check(
    inc: &IncrementModel,
    xs: &[f64],
    cfg: &DensityCheckConfig,
) -> Result<DensityCheck> {
    check_run(cfg.n_paths, cfg.barrier)?;
    if inc.lattice_span().is_some() || !inc.eta().has_density() {
        return Err(HtlError::Precondition(format!(
            "{} has no density",
            inc.eta().label()
        )));
    }
    let m_plus = inc.positive_mean()?;
    let kinks = [inc.eta().support_start() - inc.shift()];
    let sstar = RatioSeries::new(
        sstar_points(&|y| inc.tail(y), m_plus, &kinks, xs)?,
        1.0,
        cfg.rule,
    )?;
    if sstar.verdict() != SeriesVerdict::Converging {
        return Err(HtlError::Precondition(format!(
            "increment fails the integrated-convolution check ({:?})",
            sstar.verdict()
        )));
    }
    let d = cfg.cell_width;
    let spec = GridSpec::nonnegative(d, cfg.x_max)?;
    let window = DeltaWindow::new(cfg.window)?;
    window.cells(d)?;
    for &x in xs {
        spec.snap_index(x)?;
        if x + cfg.window > spec.right_edge() {
            return Err(HtlError::Grid(format!("window at x = {x} leaves the grid")));
        }
    }
    let n = spec.n_cells();
    let (occ, ascents) = taboo_occupation(inc, cfg);
    let jn = occ.len();

    // g_k = sum_j occ_j P(xi in (k d - d, k d] + j d) / d: correlation of the
    // occupation with cell averages of f, so the ladder mass is exact given the
    // occupation (node values of f lose O(d) of it where f is steep)
    let phi: Vec<f64> = (0..n + jn)
        .map(|i| {
            if i == 0 {
                0.0
            } else {
                let y = i as f64 * d;
                (inc.tail(y - d) - inc.tail(y)).max(0.0) / d
            }
        })
        .collect();
    let rev: Vec<f64> = occ.iter().rev().copied().collect();
    let corr = linear(&rev, &phi, Method::Auto);
    let mut g: Vec<f64> = (0..n).map(|k| corr[k + jn - 1].max(0.0)).collect();
    g[0] = 0.0;
    // ladder mass beyond the grid, from the same occupation
    let edge = spec.right_edge();
    let beyond: f64 = occ
        .iter()
        .enumerate()
        .map(|(j, w)| w * inc.tail(edge + j as f64 * d))
        .sum();
    let in_grid: f64 = d * g.iter().sum::<f64>();
    let p = in_grid + beyond;
    if !(p > 0.0 && p < 1.0) {
        return Err(HtlError::Precondition(format!(
            "ladder mass {p} outside (0, 1)"
        )));
    }

    // measure level: cells (k d - d, k d] carry d g_k
    let ladder = GridMeasure::new(spec, g.iter().map(|v| v * d / p).collect(), beyond / p)?;
    let law = StoppingLaw::geometric(p)?;
    let pi_measure = stopped_sum(&ladder, &law)?.measure;

    // density level
    let mut compound = vec![0.0; n];
    let mut power = g.clone();
    for k in 1..=law.n_max() {
        compound
            .iter_mut()
            .zip(&power)
            .for_each(|(c, v)| *c += (1.0 - p) * v);
        if k < law.n_max() {
            let next = linear(&power, &g, Method::Auto);
            power = next[..n].iter().map(|v| d * v.max(0.0)).collect();
        }
    }

    let mut points = Vec::with_capacity(xs.len());
    let mut window_gap = 0.0f64;
    let cells = (cfg.window / d).round() as usize;
    for &x in xs {
        let i = spec.index_of(x).expect("aligned above");
        points.push((x, compound[i] * inc.drift() / inc.tail(x)));
        let integral: f64 = d * compound[i + 1..=i + cells].iter().sum::<f64>();
        let level = pi_measure.window(x, window);
        window_gap = window_gap.max((integral - level).abs() / level);
    }
    Ok(DensityCheck {
        ratios: RatioSeries::new(points, 1.0, cfg.rule)?,
        sstar,
        ladder_density: g,
        compound_density: compound,
        p,
        p_mc: ascents as f64 / cfg.n_paths as f64,
        pi_measure,
        window_gap,
    })
}
