use serde::{Deserialize, Serialize};

use super::engine::convolve;
use crate::error::{HtlError, Result};
use crate::measures::{AnalyticDistribution, DeltaWindow, GridMeasure};

/// Powers up to this index calibrate the constant of the geometric majorant.
pub const CALIBRATION_POWERS: usize = 5;

/// Result of checking `G^{*n}(x + T) <= V (1 + eps)^n F(x + T)` on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KestenReport {
    pub epsilon: f64,
    pub x0: f64,
    /// Largest normalized ratio over every checked `(n, x)`.
    pub fitted_v: f64,
    /// Largest normalized ratio over `n <= 5` (or `n_max` if smaller).
    pub calibration_v: f64,
    pub n_checked: usize,
    /// `sup_x G^{*n}(x + T) / ((1 + eps)^n F(x + T))` for `n = 1..=n_checked`.
    pub sup_ratios: Vec<f64>,
    /// `(n, x)` pairs past the calibration prefix whose ratio exceeds `calibration_v`.
    pub violations: Vec<(usize, f64)>,
}

impl KestenReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Check the geometric majorant of convolution powers of `g` against `f_ref`.
///
/// Every grid point `x > x0` whose window lies inside the grid is checked.
pub fn kesten_check(
    f_ref: &AnalyticDistribution,
    g: &GridMeasure,
    delta: DeltaWindow,
    epsilon: f64,
    n_max: usize,
    x0: f64,
) -> Result<KestenReport> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(HtlError::InvalidParameter {
            name: "epsilon",
            value: epsilon,
            constraint: "epsilon > 0",
        });
    }
    if n_max == 0 {
        return Err(HtlError::InvalidParameter {
            name: "n_max",
            value: 0.0,
            constraint: "n_max >= 1",
        });
    }
    let spec = *g.spec();
    let cells = delta.cells(spec.cell_width())?;
    let n = spec.n_cells();
    // index i is checked when x_i > x0 and x_i + T is in the grid
    let last = match cells {
        Some(c) if c >= n => return Err(HtlError::Grid("window longer than the grid".into())),
        Some(c) => n - 1 - c,
        None => n - 1,
    };
    let idx: Vec<usize> = (0..=last).filter(|&i| spec.point(i) > x0).collect();
    if idx.is_empty() {
        return Err(HtlError::Grid(format!("no grid points above x0 = {x0}")));
    }
    let reference: Vec<f64> = idx
        .iter()
        .map(|&i| f_ref.local_prob(spec.point(i), delta))
        .collect();
    if let Some(k) = reference.iter().position(|&v| v <= 0.0) {
        return Err(HtlError::ZeroWindowMass {
            x: spec.point(idx[k]),
        });
    }

    let calib = CALIBRATION_POWERS.min(n_max);
    let mut sup_ratios = Vec::with_capacity(n_max);
    let mut per_power: Vec<Vec<f64>> = Vec::with_capacity(n_max);
    let mut power = g.clone();
    for k in 1..=n_max {
        let s = power.suffix_sums();
        let scale = (1.0 + epsilon).powi(k as i32);
        let ratios: Vec<f64> = idx
            .iter()
            .zip(&reference)
            .map(|(&i, r)| {
                let w = match cells {
                    Some(c) => s[i + 1] - s[i + 1 + c],
                    None => s[i + 1],
                };
                w.max(0.0) / (scale * r)
            })
            .collect();
        sup_ratios.push(ratios.iter().copied().fold(0.0, f64::max));
        per_power.push(ratios);
        if k < n_max {
            power = convolve(&power, g)?;
        }
    }
    let calibration_v = sup_ratios[..calib].iter().copied().fold(0.0, f64::max);
    let fitted_v = sup_ratios.iter().copied().fold(0.0, f64::max);
    let mut violations = Vec::new();
    for (k, ratios) in per_power.iter().enumerate().skip(calib) {
        for (j, &r) in ratios.iter().enumerate() {
            if r > calibration_v * (1.0 + 1e-9) {
                violations.push((k + 1, spec.point(idx[j])));
            }
        }
    }
    Ok(KestenReport {
        epsilon,
        x0,
        fitted_v,
        calibration_v,
        n_checked: n_max,
        sup_ratios,
        violations,
    })
}

/// Smallest candidate `x0` past which `P(xi + zeta in x + T, zeta <= x - x0) <= (1 + eps / 2) F(x + T)`
/// at every grid point, with `xi ~ f_ref` and `zeta ~ g`.
///
/// This is the threshold the majorant is built from; `None` when no candidate works.
pub fn majorant_threshold(
    f_ref: &AnalyticDistribution,
    g: &GridMeasure,
    delta: DeltaWindow,
    epsilon: f64,
    candidates: &[f64],
) -> Result<Option<f64>> {
    if !g.is_nonnegative_support() || g.spec().origin_index() != -1 {
        return Err(HtlError::Precondition(
            "majorant threshold needs a grid starting at 0".into(),
        ));
    }
    let spec = *g.spec();
    let cells = delta.cells(spec.cell_width())?;
    let n = spec.n_cells();
    let last = match cells {
        Some(c) if c >= n => return Err(HtlError::Grid("window longer than the grid".into())),
        Some(c) => n - 1 - c,
        None => n - 1,
    };
    // point(k) = k * cell_width on this grid
    let fw: Vec<f64> = (0..=last)
        .map(|k| f_ref.local_prob(spec.point(k), delta))
        .collect();
    let mass = g.mass();
    let bound = 1.0 + epsilon / 2.0;
    let mut sorted = candidates.to_vec();
    sorted.sort_by(f64::total_cmp);
    'cand: for &x0 in &sorted {
        let k0 = spec.snap_index(x0)? - spec.origin_index() - 1;
        if k0 < 0 || k0 as usize >= last {
            continue;
        }
        let k0 = k0 as usize;
        for i in k0 + 1..=last {
            if fw[i] <= 0.0 {
                return Err(HtlError::ZeroWindowMass { x: spec.point(i) });
            }
            // atoms y_j = j * cell_width <= x_i - x0
            let r: f64 = (0..=i - k0).map(|j| mass[j] * fw[i - j]).sum();
            if r > bound * fw[i] {
                continue 'cand;
            }
        }
        return Ok(Some(x0));
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::GridSpec;

    #[test]
    fn single_power_has_no_violations() {
        let f = AnalyticDistribution::pareto(2.0).unwrap();
        let spec = GridSpec::nonnegative(0.5, 50.0).unwrap();
        let g = f.discretize(&spec);
        let r = kesten_check(&f, &g, DeltaWindow::unit(), 0.5, 1, 1.0).unwrap();
        assert!(r.holds());
        assert_eq!(r.fitted_v, r.sup_ratios[0]);
        assert_eq!(r.calibration_v, r.fitted_v);
    }

    #[test]
    fn threshold_for_pareto_exists() {
        let f = AnalyticDistribution::pareto(2.0).unwrap();
        let spec = GridSpec::nonnegative(0.25, 200.0).unwrap();
        let g = f.discretize(&spec);
        let x0 = majorant_threshold(
            &f,
            &g,
            DeltaWindow::unit(),
            0.5,
            &[1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0],
        )
        .unwrap()
        .unwrap();
        assert!(x0 > 1.0);
        // a looser epsilon never needs a later threshold
        let loose = majorant_threshold(
            &f,
            &g,
            DeltaWindow::unit(),
            2.0,
            &[1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0],
        )
        .unwrap()
        .unwrap();
        assert!(loose <= x0);
    }

    #[test]
    fn zero_reference_window_is_an_error() {
        let f = AnalyticDistribution::point_mass(1.0).unwrap();
        let spec = GridSpec::nonnegative(0.5, 20.0).unwrap();
        let g = AnalyticDistribution::pareto(2.0).unwrap().discretize(&spec);
        assert!(matches!(
            kesten_check(&f, &g, DeltaWindow::unit(), 0.5, 3, 2.0),
            Err(HtlError::ZeroWindowMass { .. })
        ));
    }
}
