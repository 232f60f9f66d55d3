//! Small quadrature toolkit.

/// Adaptive Simpson on `[a, b]` with absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let diff = left + right - whole;
    // the second test stops refinement once the difference is pure rounding
    if depth == 0 || diff.abs() <= 15.0 * tol || diff.abs() <= 1e-15 * (left + right).abs() {
        return left + right + diff / 15.0;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// `int_a^inf f` for a nonnegative, eventually decreasing `f`.
///
/// Integrates over doubling blocks until a block adds less than `rel` of the total.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: &F, a: f64, rel: f64) -> f64 {
    integrate_blocks(f, a, rel, 4000).0
}

/// Like [`integrate_to_infinity`] but `None` when the blocks never become negligible.
pub fn try_integrate_to_infinity<F: Fn(f64) -> f64>(f: &F, a: f64, rel: f64) -> Option<f64> {
    // 400 blocks reach past 1e70, far beyond any tail that still matters
    let (acc, converged) = integrate_blocks(f, a, rel, 400);
    (converged && acc.is_finite()).then_some(acc)
}

fn integrate_blocks<F: Fn(f64) -> f64>(f: &F, a: f64, rel: f64, max_blocks: usize) -> (f64, bool) {
    let mut acc = 0.0f64;
    let mut lo = a;
    let mut width = f64::max(1.0, a.abs() * 0.25);
    for _ in 0..max_blocks {
        let hi = lo + width;
        if !hi.is_finite() {
            return (acc, false);
        }
        let block = adaptive_simpson(f, lo, hi, 1e-15 + rel * acc.abs() * 1e-2);
        acc += block;
        if !acc.is_finite() {
            return (acc, false);
        }
        if block.abs() <= rel * acc.abs() && hi > a + 1.0 {
            return (acc, true);
        }
        lo = hi;
        width *= 1.5;
    }
    (acc, false)
}

/// Trapezoid rule on a graded mesh of `[a, b]`.
///
/// Node spacing grows like `rel_step * |t|` away from `a` and never drops below
/// `h_min`; `breaks` are always mesh nodes (useful at kinks).
pub fn graded_trapezoid<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    breaks: &[f64],
    h_min: f64,
    rel_step: f64,
) -> f64 {
    if b <= a {
        return 0.0;
    }
    let mut pts: Vec<f64> = breaks.iter().copied().filter(|&t| t > a && t < b).collect();
    pts.push(a);
    pts.push(b);
    pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    pts.dedup();
    let mut total = 0.0;
    for w in pts.windows(2) {
        let (u, v) = (w[0], w[1]);
        let floor = h_min.min((v - u) / 8.0);
        let mut t = u;
        let mut ft = f(t);
        while t < v {
            let step = floor.max(rel_step * (t - u).abs().max(t.abs()).min(v - u));
            let next = (t + step).min(v);
            let fn_ = f(next);
            total += 0.5 * (next - t) * (ft + fn_);
            t = next;
            ft = fn_;
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_tail_diverges() {
        assert!(try_integrate_to_infinity(&|y: f64| 1.0 / y, 1.0, 1e-10).is_none());
        let v = try_integrate_to_infinity(&|y: f64| y.powi(-2), 1.0, 1e-12).unwrap();
        assert!((v - 1.0).abs() < 1e-9);
    }

    #[test]
    fn simpson_polynomial_exact() {
        let v = adaptive_simpson(&|x: f64| x * x * x - x, 0.0, 2.0, 1e-12);
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn infinite_exponential() {
        let v = integrate_to_infinity(&|x: f64| (-x).exp(), 1.0, 1e-13);
        assert!((v - (-1.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn graded_trapezoid_power() {
        let v = graded_trapezoid(&|y: f64| 1.0 / (y * y), 1.0, 1000.0, &[], 1e-3, 1e-3);
        assert!((v - 0.999).abs() < 1e-5);
    }
}
