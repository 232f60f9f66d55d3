//! Distribution catalog, grid measures and densities.

mod catalog;
mod density;
mod grid;
mod ratio;
mod window;

pub use catalog::{
    example1_gamma, example2_gamma, make_distribution, AnalyticDistribution, CatalogKind,
};
pub use density::DensityGrid;
pub use grid::{GridMeasure, GridSpec};
pub use ratio::{ConvergenceRule, RatioSeries, SeriesVerdict};
pub use window::DeltaWindow;

/// `F((x, x + T])` for a catalog law.
pub fn local_prob(dist: &AnalyticDistribution, x: f64, delta: DeltaWindow) -> f64 {
    dist.local_prob(x, delta)
}

/// `min(1, int_x^inf F(y, inf) dy)`.
pub fn integrated_tail(dist: &AnalyticDistribution, x: f64) -> crate::Result<f64> {
    dist.integrated_tail(x)
}

/// Cell masses of `dist` on `spec`, with the mass beyond the grid in the overflow.
pub fn discretize(dist: &AnalyticDistribution, spec: &GridSpec) -> GridMeasure {
    dist.discretize(spec)
}
