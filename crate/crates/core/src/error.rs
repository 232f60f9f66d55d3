use thiserror::Error;

/// Errors raised by the numerical routines in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum HtlError {
    #[error("invalid parameter `{name}` = {value}: {constraint}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },

    #[error("cell width mismatch: {left} vs {right}")]
    CellWidthMismatch { left: f64, right: f64 },

    #[error("grid error: {0}")]
    Grid(String),

    #[error("positive-part mean is infinite, so the integrated tail diverges")]
    InfiniteMean,

    #[error("window mass is zero at x = {x}")]
    ZeroWindowMass { x: f64 },

    #[error("density is zero at x = {x}")]
    ZeroDensity { x: f64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("increment drift must be negative, got E xi = {mean}")]
    NonNegativeDrift { mean: f64 },

    #[error("defective mass theta = {0} must lie in (0, 1)")]
    NotTransient(f64),

    #[error("input function is negative at x = {x}: {value}")]
    NegativeInput { x: f64, value: f64 },

    #[error("renewal regime undetermined: {0}")]
    RegimeUndetermined(String),

    #[error("divergent integral: {0}")]
    DivergentIntegral(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, HtlError>;

pub(crate) fn check_param(
    ok: bool,
    name: &'static str,
    value: f64,
    constraint: &'static str,
) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(HtlError::InvalidParameter {
            name,
            value,
            constraint,
        })
    }
}
