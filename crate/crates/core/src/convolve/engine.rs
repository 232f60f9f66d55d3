use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{HtlError, Result};
use crate::measures::{DeltaWindow, GridMeasure, GridSpec};

/// Inputs at least this long (in cells) go through the FFT path.
pub const FFT_THRESHOLD: usize = 4096;

/// Which kernel computes a linear convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    #[default]
    Auto,
    Direct,
    Fft,
}

/// Full linear convolution by direct summation, length `a.len() + b.len() - 1`.
pub fn linear_direct(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (o, &y) in out[i..].iter_mut().zip(b) {
            *o += x * y;
        }
    }
    out
}

/// Full linear convolution through a zero-padded complex FFT.
///
/// Negative round-off is clamped to zero since inputs are nonnegative.
pub fn linear_fft(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let len = a.len() + b.len() - 1;
    let size = len.next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    // pack a into the real part and b into the imaginary part: one forward FFT
    let mut buf: Vec<Complex<f64>> = (0..size)
        .map(|i| Complex::new(*a.get(i).unwrap_or(&0.0), *b.get(i).unwrap_or(&0.0)))
        .collect();
    fwd.process(&mut buf);
    let mut prod = vec![Complex::new(0.0, 0.0); size];
    for k in 0..size {
        let z = buf[k];
        let zc = buf[(size - k) % size].conj();
        let fa = (z + zc) * 0.5;
        let fb = (z - zc) * Complex::new(0.0, -0.5);
        prod[k] = fa * fb;
    }
    inv.process(&mut prod);
    let scale = 1.0 / size as f64;
    prod[..len]
        .iter()
        .map(|c| (c.re * scale).max(0.0))
        .collect()
}

pub fn linear(a: &[f64], b: &[f64], method: Method) -> Vec<f64> {
    let use_fft = match method {
        Method::Direct => false,
        Method::Fft => true,
        Method::Auto => a.len().min(b.len()) > 64 && a.len().max(b.len()) >= FFT_THRESHOLD,
    };
    if use_fft {
        linear_fft(a, b)
    } else {
        linear_direct(a, b)
    }
}

/// Convolution of two grid measures with the automatic kernel choice.
pub fn convolve(a: &GridMeasure, b: &GridMeasure) -> Result<GridMeasure> {
    convolve_with(a, b, Method::Auto)
}

/// Convolution with an explicit kernel; the direct kernel is the reference.
///
/// The output grid starts at the sum of the input left edges and ends at the
/// larger input right edge. Mass landing beyond it, and every product that
/// involves an overflow bucket, goes to the output overflow.
pub fn convolve_with(a: &GridMeasure, b: &GridMeasure, method: Method) -> Result<GridMeasure> {
    let (sa, sb) = (a.spec(), b.spec());
    if !sa.same_width(sb) {
        return Err(HtlError::CellWidthMismatch {
            left: sa.cell_width(),
            right: sb.cell_width(),
        });
    }
    let origin = sa.origin_index() + sb.origin_index() + 1;
    let right =
        (sa.origin_index() + sa.n_cells() as i64).max(sb.origin_index() + sb.n_cells() as i64);
    if right <= origin {
        return Err(HtlError::Grid(
            "inputs' supports leave no room on the output grid".into(),
        ));
    }
    let n = (right - origin) as usize;
    let spec = GridSpec::new(sa.cell_width(), origin, n)?;
    let full = linear(a.mass(), b.mass(), method);
    let mut mass = vec![0.0; n];
    let k = n.min(full.len());
    mass[..k].copy_from_slice(&full[..k]);
    let beyond: f64 = full.get(n..).map(|s| s.iter().sum()).unwrap_or(0.0);
    let (ia, ib) = (a.in_grid_total(), b.in_grid_total());
    let (oa, ob) = (a.overflow(), b.overflow());
    let overflow = oa * ib + ia * ob + oa * ob + beyond;
    Ok(GridMeasure::from_parts(spec, mass, overflow))
}

/// `(a * b)(x, x + T]` by direct summation over the atoms of `a`.
///
/// Equals the corresponding window of [`convolve`] up to round-off, but keeps
/// full relative precision in the far tail where FFT noise would dominate.
/// Both inputs must live on the same nonnegative grid; mass of `b` beyond its
/// grid is counted for infinite windows only.
pub fn convolve_window_at(
    a: &GridMeasure,
    b: &GridMeasure,
    x: f64,
    delta: DeltaWindow,
) -> Result<f64> {
    let (sa, sb) = (a.spec(), b.spec());
    if !sa.same_width(sb) {
        return Err(HtlError::CellWidthMismatch {
            left: sa.cell_width(),
            right: sb.cell_width(),
        });
    }
    if !(a.is_nonnegative_support() && b.is_nonnegative_support()) {
        return Err(HtlError::Precondition(
            "window sums need measures on [0, inf)".into(),
        ));
    }
    let suf = b.suffix_sums();
    let d = sa.cell_width();
    let cells = delta.cells(d)?;
    let nb = sb.n_cells() as i64;
    // index of the first atom of b strictly above u
    let first_above = |u: f64| -> usize {
        let j = (u / d + 1e-9).floor() as i64 + 1 - (sb.origin_index() + 1);
        j.clamp(0, nb) as usize
    };
    let mut s = 0.0;
    for (i, &m) in a.mass().iter().enumerate() {
        if m == 0.0 {
            continue;
        }
        let u = x - a.point(i);
        let lo = first_above(u);
        let w = match cells {
            Some(_) => {
                // atoms in (u, u + T]
                let hi = first_above(u + delta.length()).max(lo);
                suf[lo] - suf[hi]
            }
            None => suf[lo],
        };
        s += m * w.max(0.0);
    }
    if delta.is_infinite() {
        s += a.overflow() * b.total();
    }
    Ok(s)
}

/// `a^{*n}` by binary powering; `n = 0` is rejected.
pub fn convolve_power(a: &GridMeasure, n: u32) -> Result<GridMeasure> {
    if n == 0 {
        return Err(HtlError::InvalidParameter {
            name: "n",
            value: 0.0,
            constraint: "n >= 1 (use a point mass at 0 for the empty sum)",
        });
    }
    if !a.is_nonnegative_support() {
        return Err(HtlError::Precondition(
            "convolution powers need a measure on [0, inf)".into(),
        ));
    }
    let mut result: Option<GridMeasure> = None;
    let mut base = a.clone();
    let mut k = n;
    loop {
        if k & 1 == 1 {
            result = Some(match result {
                None => base.clone(),
                Some(r) => convolve(&r, &base)?,
            });
        }
        k >>= 1;
        if k == 0 {
            break;
        }
        base = convolve(&base, &base)?;
    }
    Ok(result.expect("n >= 1"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::GridSpec;

    #[test]
    fn fft_matches_direct_small() {
        let a = [0.1, 0.2, 0.0, 0.7];
        let b = [0.5, 0.5];
        let d = linear_direct(&a, &b);
        let f = linear_fft(&a, &b);
        for (x, y) in d.iter().zip(&f) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn atoms_add() {
        let spec = GridSpec::nonnegative(0.5, 10.0).unwrap();
        let a = GridMeasure::point_mass(spec, 1.5, 1.0).unwrap();
        let b = GridMeasure::point_mass(spec, 2.0, 1.0).unwrap();
        let c = convolve(&a, &b).unwrap();
        assert_eq!(c.spec(), &spec);
        assert_eq!(c.mass()[spec.index_of(3.5).unwrap()], 1.0);
    }

    #[test]
    fn mass_past_edge_overflows() {
        let spec = GridSpec::nonnegative(1.0, 4.0).unwrap();
        let a = GridMeasure::point_mass(spec, 3.0, 1.0).unwrap();
        let c = convolve(&a, &a).unwrap();
        assert_eq!(c.in_grid_total(), 0.0);
        assert_eq!(c.overflow(), 1.0);
    }

    #[test]
    fn power_rejects_zero() {
        let spec = GridSpec::nonnegative(1.0, 4.0).unwrap();
        let a = GridMeasure::point_mass(spec, 1.0, 1.0).unwrap();
        assert!(convolve_power(&a, 0).is_err());
        let p3 = convolve_power(&a, 3).unwrap();
        assert_eq!(p3.mass()[3], 1.0);
    }

    #[test]
    fn window_at_matches_full_convolution() {
        let spec = GridSpec::nonnegative(0.5, 30.0).unwrap();
        let f = crate::AnalyticDistribution::pareto(1.5)
            .unwrap()
            .discretize(&spec);
        let g = crate::AnalyticDistribution::exponential(0.3)
            .unwrap()
            .discretize(&spec);
        let c = convolve(&f, &g).unwrap();
        for x in [0.0, 2.5, 10.0, 27.5] {
            for t in [0.5, 1.5] {
                let w = DeltaWindow::new(t).unwrap();
                let direct = convolve_window_at(&f, &g, x, w).unwrap();
                assert!((direct - c.window(x, w)).abs() < 1e-15, "x={x} t={t}");
            }
            let inf = DeltaWindow::infinite();
            let direct = convolve_window_at(&f, &g, x, inf).unwrap();
            assert!((direct - c.tail(x)).abs() < 1e-14);
        }
    }

    #[test]
    fn width_mismatch() {
        let a = GridMeasure::zero(GridSpec::nonnegative(1.0, 4.0).unwrap());
        let b = GridMeasure::zero(GridSpec::nonnegative(0.5, 4.0).unwrap());
        assert!(matches!(
            convolve(&a, &b),
            Err(HtlError::CellWidthMismatch { .. })
        ));
    }
}
