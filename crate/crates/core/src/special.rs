//! Special functions not covered by `statrs`.

/// Trigamma function for `x > 0`, i.e. `sum_{k >= 0} 1 / (x + k)^2`.
///
/// Recurrence up to `x >= 20`, then the asymptotic series.
pub fn trigamma(mut x: f64) -> f64 {
    debug_assert!(x > 0.0);
    let mut acc = 0.0;
    while x < 20.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let z = 1.0 / (x * x);
    // 1/x + 1/(2x^2) + sum B_2k / x^(2k+1)
    let series = 1.0 / x
        + 0.5 * z
        + (1.0 / 6.0 - (1.0 / 30.0 - (1.0 / 42.0 - (1.0 / 30.0 - 5.0 / 66.0 * z) * z) * z) * z) * z
            / x;
    acc + series
}

/// `sum_{k >= n} 1 / k^2` for integer `n >= 1`.
pub fn inverse_square_tail(n: u64) -> f64 {
    trigamma(n.max(1) as f64)
}

/// Standard normal upper tail.
pub fn normal_sf(z: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(z / std::f64::consts::SQRT_2)
}

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959963984540054;
