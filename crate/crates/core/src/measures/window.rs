use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{HtlError, Result};

/// Relative slack used when deciding whether a length is a whole number of cells.
pub(crate) const ALIGN_EPS: f64 = 1e-9;

/// The half-open window `(0, T]`, with `T` possibly infinite.
///
/// Shifting by `x` gives `(x, x + T]`; with `T = inf` that is the tail `(x, inf)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaWindow {
    length: f64,
}

impl DeltaWindow {
    pub fn new(length: f64) -> Result<Self> {
        if length.is_nan() || length <= 0.0 {
            return Err(HtlError::InvalidParameter {
                name: "T",
                value: length,
                constraint: "window length must be positive (or infinite)",
            });
        }
        Ok(Self { length })
    }

    pub fn finite(length: f64) -> Result<Self> {
        if !length.is_finite() {
            return Err(HtlError::InvalidParameter {
                name: "T",
                value: length,
                constraint: "window length must be finite here",
            });
        }
        Self::new(length)
    }

    pub fn infinite() -> Self {
        Self {
            length: f64::INFINITY,
        }
    }

    pub fn unit() -> Self {
        Self { length: 1.0 }
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn is_infinite(&self) -> bool {
        self.length.is_infinite()
    }

    /// Window of `n` times the length.
    pub fn scaled(&self, n: u32) -> Self {
        Self {
            length: self.length * n as f64,
        }
    }

    /// Number of cells of width `cell_width` in the window, or an error if misaligned.
    pub fn cells(&self, cell_width: f64) -> Result<Option<usize>> {
        if self.is_infinite() {
            return Ok(None);
        }
        let k = self.length / cell_width;
        let r = k.round();
        if (k - r).abs() > ALIGN_EPS * r.max(1.0) || r < 1.0 {
            return Err(HtlError::Grid(format!(
                "window length {} is not a multiple of cell width {}",
                self.length, cell_width
            )));
        }
        Ok(Some(r as usize))
    }
}

impl fmt::Display for DeltaWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinite() {
            write!(f, "(0,inf)")
        } else {
            write!(f, "(0,{}]", self.length)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_nonpositive() {
        assert!(DeltaWindow::new(0.0).is_err());
        assert!(DeltaWindow::new(-1.0).is_err());
        assert!(DeltaWindow::new(f64::NAN).is_err());
        assert!(DeltaWindow::new(f64::INFINITY).is_ok());
    }

    #[test]
    fn cell_count() {
        let w = DeltaWindow::new(1.0).unwrap();
        assert_eq!(w.cells(0.05).unwrap(), Some(20));
        assert!(w.cells(0.3).is_err());
        assert_eq!(DeltaWindow::infinite().cells(0.1).unwrap(), None);
    }
}
