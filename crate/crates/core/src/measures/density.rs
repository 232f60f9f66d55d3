use super::catalog::AnalyticDistribution;
use super::grid::{GridMeasure, GridSpec};
use crate::error::{HtlError, Result};

/// Density sampled on a uniform grid from a threshold `x_hat` on, plus the
/// measure below the threshold.
///
/// Value `i` is the density at the node `x_hat + i d`. The head is a grid
/// measure on `[0, x_hat)` with the same cell width.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    cell_width: f64,
    threshold: f64,
    values: Vec<f64>,
    head: GridMeasure,
}

impl DensityGrid {
    pub fn new(
        cell_width: f64,
        threshold: f64,
        values: Vec<f64>,
        head: GridMeasure,
    ) -> Result<Self> {
        let probe = GridSpec::new(cell_width, 0, 1)?;
        probe.snap_index(threshold)?;
        if threshold < 0.0 {
            return Err(HtlError::Grid("density threshold must be >= 0".into()));
        }
        if values.is_empty() {
            return Err(HtlError::Grid(
                "density grid needs at least one node".into(),
            ));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(HtlError::Grid(format!("invalid density value {v}")));
        }
        if !head.spec().same_width(&probe) {
            return Err(HtlError::CellWidthMismatch {
                left: cell_width,
                right: head.spec().cell_width(),
            });
        }
        if head.spec().origin_index() != -1 {
            return Err(HtlError::Grid("head must start at the origin".into()));
        }
        // atoms at or above the threshold are not allowed
        let (first_bad, _) = head.spec().atom_range(threshold - cell_width, 0.0);
        if head.mass()[first_bad..].iter().any(|&m| m > 0.0) || head.overflow() > 0.0 {
            return Err(HtlError::Grid(
                "head carries mass at or above the threshold".into(),
            ));
        }
        Ok(Self {
            cell_width,
            threshold,
            values,
            head,
        })
    }

    /// Sample `dist`'s density on nodes `x_hat, x_hat + d, ..., >= x_max`.
    ///
    /// Mass below `x_hat` is discretized into the head, excluding the cell that
    /// ends at `x_hat`'s own node. For `x_hat = 0` the head is the atom at 0.
    pub fn from_distribution(
        dist: &AnalyticDistribution,
        cell_width: f64,
        threshold: f64,
        x_max: f64,
    ) -> Result<Self> {
        if !dist.has_density() {
            return Err(HtlError::Precondition(format!(
                "{} is not absolutely continuous",
                dist.label()
            )));
        }
        if dist.support_start() < 0.0 {
            return Err(HtlError::Precondition(
                "density must live on [0, inf)".into(),
            ));
        }
        let n = ((x_max - threshold) / cell_width).ceil().max(0.0) as usize + 1;
        let values = (0..n)
            .map(|i| dist.density(threshold + i as f64 * cell_width))
            .collect::<Result<Vec<_>>>()?;
        let head_spec = GridSpec::nonnegative(cell_width, threshold)?;
        let mut head = dist.discretize(&head_spec);
        // the last head cell is (x_hat - d, x_hat], which is "at or above" the threshold
        // only through its endpoint; push the mass on [x_hat, inf) out entirely
        let mut mass = head.mass().to_vec();
        let last = mass.len() - 1;
        if threshold > 0.0 {
            // cell (x_hat - d, x_hat] moves to the previous node so no atom sits at x_hat
            mass[last - 1] += mass[last];
        }
        mass[last] = 0.0;
        head = GridMeasure::new(head_spec, mass, 0.0)?;
        Self::new(cell_width, threshold, values, head)
    }

    pub fn cell_width(&self) -> f64 {
        self.cell_width
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn head(&self) -> &GridMeasure {
        &self.head
    }

    pub fn node(&self, i: usize) -> f64 {
        self.threshold + i as f64 * self.cell_width
    }

    pub fn last_node(&self) -> f64 {
        self.node(self.values.len() - 1)
    }

    /// Density at a node, `None` off-grid or out of range.
    pub fn value_at(&self, x: f64) -> Option<f64> {
        let k = (x - self.threshold) / self.cell_width;
        let r = k.round();
        if r < 0.0 || (k - r).abs() > 1e-9 * r.max(1.0) {
            return None;
        }
        self.values.get(r as usize).copied()
    }

    /// Cell masses `d * f` at the nodes, as a measure on the common nonnegative grid.
    ///
    /// Adds the head, so the result approximates the whole law up to the last node.
    pub fn to_measure(&self) -> Result<GridMeasure> {
        let spec = GridSpec::nonnegative(self.cell_width, self.last_node())?;
        let mut mass = vec![0.0; spec.n_cells()];
        mass[..self.head.mass().len()].copy_from_slice(self.head.mass());
        let off = spec.index_of(self.threshold).expect("aligned threshold");
        for (i, v) in self.values.iter().enumerate() {
            mass[off + i] += v * self.cell_width;
        }
        GridMeasure::new(spec, mass, 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pareto_density_grid() {
        let d = AnalyticDistribution::pareto(2.0).unwrap();
        let f = DensityGrid::from_distribution(&d, 0.5, 1.0, 10.0).unwrap();
        assert_eq!(f.values().len(), 19);
        assert_eq!(f.value_at(1.0), Some(2.0));
        assert_eq!(f.value_at(1.25), None);
        assert_eq!(f.head().total(), 0.0);
    }

    #[test]
    fn point_mass_has_no_density() {
        let d = AnalyticDistribution::point_mass(1.0).unwrap();
        assert!(matches!(
            DensityGrid::from_distribution(&d, 0.5, 0.0, 10.0),
            Err(HtlError::Precondition(_))
        ));
    }

    #[test]
    fn head_below_threshold() {
        let d = AnalyticDistribution::exponential(1.0).unwrap();
        let f = DensityGrid::from_distribution(&d, 0.25, 2.0, 4.0).unwrap();
        let want = 1.0 - (-2.0f64).exp();
        assert!((f.head().total() - want).abs() < 1e-14);
        assert!(f.head().window(1.75, crate::DeltaWindow::infinite()) == 0.0);
    }
}
