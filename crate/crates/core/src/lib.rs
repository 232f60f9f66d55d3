//! Local asymptotics of heavy-tailed distributions on uniform grids.
//!
//! The crate discretizes catalog laws onto [`GridMeasure`]s, convolves them
//! exactly, and compares windows `F(x, x + T]` against asymptotic predictions
//! through [`RatioSeries`].

// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod applications;
pub mod convolve;
pub mod diagnostics;
pub mod error;
pub mod measures;
pub mod quad;
pub mod randomwalk;
pub mod renewal;
pub mod schedule;
pub mod special;

pub use error::{HtlError, Result};
pub use measures::{
    AnalyticDistribution, CatalogKind, ConvergenceRule, DeltaWindow, DensityGrid, GridMeasure,
    GridSpec, RatioSeries, SeriesVerdict,
};
