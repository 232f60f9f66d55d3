//! Evaluation points for asymptotic checks.

use crate::error::{HtlError, Result};

/// `x0 * r^k` for `k = 0..n`.
pub fn geometric(x0: f64, ratio: f64, n: usize) -> Result<Vec<f64>> {
    if !(x0 > 0.0 && ratio > 1.0 && x0.is_finite()) {
        return Err(HtlError::Precondition(format!(
            "geometric schedule needs x0 > 0 and ratio > 1 (got {x0}, {ratio})"
        )));
    }
    Ok((0..n).map(|k| x0 * ratio.powi(k as i32)).collect())
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo) || n < 2 {
        return Err(HtlError::Precondition(format!(
            "log-spaced schedule needs 0 < lo < hi and n >= 2 (got {lo}, {hi}, {n})"
        )));
    }
    let r = (hi / lo).powf(1.0 / (n - 1) as f64);
    let mut v: Vec<f64> = (0..n).map(|k| lo * r.powi(k as i32)).collect();
    v[n - 1] = hi;
    Ok(v)
}

/// Round each point to a multiple of `step` and drop duplicates.
pub fn snap(xs: &[f64], step: f64) -> Vec<f64> {
    let mut out: Vec<f64> = xs.iter().map(|x| (x / step).round() * step).collect();
    out.dedup_by(|a, b| (*a - *b).abs() < 0.5 * step);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_spaced_endpoints() {
        let v = log_spaced(10.0, 1000.0, 3).unwrap();
        assert!((v[1] - 100.0).abs() < 1e-9);
        assert_eq!(v[2], 1000.0);
    }

    #[test]
    fn snapping_dedups() {
        assert_eq!(snap(&[1.01, 1.02, 2.6], 1.0), vec![1.0, 3.0]);
    }

    #[test]
    fn geometric_rejects_bad_ratio() {
        assert!(geometric(1.0, 1.0, 3).is_err());
        assert_eq!(geometric(2.0, 2.0, 3).unwrap(), vec![2.0, 4.0, 8.0]);
    }
}
