use super::engine::{convolve, linear, Method};
use crate::error::{HtlError, Result};
use crate::measures::{DensityGrid, GridMeasure, GridSpec};

/// Density of `F * F` on `[2 x_hat, last node]`.
///
/// Uses `2 sum_j h_j f(x - y_j)` for the head atoms plus the trapezoid rule for
/// `int_{x_hat}^{x - x_hat} f(x - y) f(y) dy` on the grid nodes. The head of
/// the result is the discretized `F * F` below `2 x_hat`.
pub fn density_convolve_square(f: &DensityGrid) -> Result<DensityGrid> {
    let d = f.cell_width();
    let m = (f.threshold() / d).round() as usize;
    let v = f.values();
    if v.len() <= m {
        return Err(HtlError::Grid(
            "density grid too short to reach twice the threshold".into(),
        ));
    }
    let len = v.len() - m;
    let method = pick_method(v);
    let vv = linear(v, v, method);
    let h = f.head().mass();
    let hv = linear(h, v, method);
    let values: Vec<f64> = (0..len)
        .map(|k| {
            let body = d * (vv[k] - v[0] * v[k]);
            let head = hv.get(m + k).copied().unwrap_or(0.0);
            (2.0 * head + body).max(0.0)
        })
        .collect();

    let thr2 = 2.0 * f.threshold();
    let head_spec = GridSpec::nonnegative(d, thr2)?;
    let whole = f.to_measure()?;
    let sq = convolve(&whole, &whole)?;
    let mut head_mass: Vec<f64> = (0..head_spec.n_cells())
        .map(|i| sq.mass().get(i).copied().unwrap_or(0.0))
        .collect();
    // keep the head strictly below the new threshold
    let last = head_mass.len() - 1;
    if last > 0 {
        head_mass[last - 1] += head_mass[last];
    }
    head_mass[last] = 0.0;
    let head = GridMeasure::new(head_spec, head_mass, 0.0)?;
    DensityGrid::new(d, thr2, values, head)
}

/// `f^{*2}(x)` at a single node `x >= 2 x_hat`, by direct summation.
pub fn density_square_at(f: &DensityGrid, x: f64) -> Result<f64> {
    let d = f.cell_width();
    let thr = f.threshold();
    let k = ((x - 2.0 * thr) / d).round();
    if k < 0.0 || ((x - 2.0 * thr) / d - k).abs() > 1e-9 * k.max(1.0) {
        return Err(HtlError::Grid(format!(
            "x = {x} is not a node at or above 2 x_hat"
        )));
    }
    let k = k as usize;
    let m = (thr / d).round() as usize;
    let v = f.values();
    if m + k >= v.len() {
        return Err(HtlError::Grid(format!(
            "density grid does not reach x = {x}"
        )));
    }
    let mut body = 0.0;
    for j in 0..=k {
        body += v[j] * v[k - j];
    }
    body = d * (body - v[0] * v[k]);
    let head: f64 = f
        .head()
        .mass()
        .iter()
        .enumerate()
        .filter(|(j, _)| *j <= m + k)
        .map(|(j, h)| h * v[m + k - j])
        .sum();
    Ok(2.0 * head + body)
}

/// FFT noise is relative to the largest value, so wide dynamic ranges stay direct.
fn pick_method(v: &[f64]) -> Method {
    let max = v.iter().copied().fold(0.0, f64::max);
    let min_pos = v
        .iter()
        .copied()
        .filter(|&x| x > 0.0)
        .fold(f64::INFINITY, f64::min);
    if v.len() > 16_384 && min_pos >= 1e-8 * max {
        Method::Fft
    } else {
        Method::Direct
    }
}
