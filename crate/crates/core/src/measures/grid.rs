use serde::{Deserialize, Serialize};

use super::window::{DeltaWindow, ALIGN_EPS};
use crate::error::{HtlError, Result};

/// Uniform grid of right-closed cells `(k d, (k+1) d]` for `k = origin .. origin + n`.
///
/// Mass in a cell is treated as an atom at the cell's right endpoint, so array
/// index `i` stands for the point `(origin + 1 + i) d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    cell_width: f64,
    origin_index: i64,
    n_cells: usize,
}

impl GridSpec {
    pub fn new(cell_width: f64, origin_index: i64, n_cells: usize) -> Result<Self> {
        if !(cell_width.is_finite() && cell_width > 0.0) {
            return Err(HtlError::InvalidParameter {
                name: "cell_width",
                value: cell_width,
                constraint: "must be positive and finite",
            });
        }
        if n_cells == 0 {
            return Err(HtlError::InvalidParameter {
                name: "n_cells",
                value: 0.0,
                constraint: "must be at least 1",
            });
        }
        Ok(Self {
            cell_width,
            origin_index,
            n_cells,
        })
    }

    /// Grid whose index `i` is the point `i d`, covering `0 ..= x_max`.
    pub fn nonnegative(cell_width: f64, x_max: f64) -> Result<Self> {
        Self::covering(cell_width, 0.0, x_max)
    }

    /// Grid whose atoms run from `lo` to `hi` inclusive (both snapped to the grid).
    pub fn covering(cell_width: f64, lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || hi < lo {
            return Err(HtlError::Grid(format!("bad range [{lo}, {hi}]")));
        }
        let probe = Self::new(cell_width, 0, 1)?;
        let a = probe.snap_index(lo)?;
        let b = probe.snap_index(hi)?;
        Self::new(cell_width, a - 1, (b - a + 1) as usize)
    }

    pub fn cell_width(&self) -> f64 {
        self.cell_width
    }

    pub fn origin_index(&self) -> i64 {
        self.origin_index
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    /// Atom location of array index `i`.
    pub fn point(&self, i: usize) -> f64 {
        (self.origin_index + 1 + i as i64) as f64 * self.cell_width
    }

    pub fn left_edge(&self) -> f64 {
        self.origin_index as f64 * self.cell_width
    }

    pub fn right_edge(&self) -> f64 {
        (self.origin_index + self.n_cells as i64) as f64 * self.cell_width
    }

    /// Integer multiple of the cell width equal to `x`, or an error if `x` is off-grid.
    pub fn snap_index(&self, x: f64) -> Result<i64> {
        let k = x / self.cell_width;
        let r = k.round();
        if (k - r).abs() > ALIGN_EPS * r.abs().max(1.0) {
            return Err(HtlError::Grid(format!(
                "x = {x} is not aligned to cell width {}",
                self.cell_width
            )));
        }
        Ok(r as i64)
    }

    pub fn is_aligned(&self, x: f64) -> bool {
        self.snap_index(x).is_ok()
    }

    /// Array index of the atom at `x` if `x` is an in-grid point.
    pub fn index_of(&self, x: f64) -> Option<usize> {
        let j = self.snap_index(x).ok()?;
        let i = j - self.origin_index - 1;
        (0..self.n_cells as i64).contains(&i).then_some(i as usize)
    }

    /// Index range (clamped to the grid) of atoms lying in `(x, x + len]`.
    pub(crate) fn atom_range(&self, x: f64, len: f64) -> (usize, usize) {
        let lo_j = (x / self.cell_width + ALIGN_EPS).floor() as i64 + 1;
        let first = (lo_j - self.origin_index - 1).max(0);
        let last = if len.is_infinite() {
            self.n_cells as i64
        } else {
            let hi_j = ((x + len) / self.cell_width + ALIGN_EPS).floor() as i64;
            (hi_j - self.origin_index).min(self.n_cells as i64)
        };
        let first = first.min(self.n_cells as i64) as usize;
        (first, (last.max(first as i64)) as usize)
    }

    pub fn same_width(&self, other: &GridSpec) -> bool {
        (self.cell_width - other.cell_width).abs() <= 1e-12 * self.cell_width
    }
}

/// Nonnegative measure on a [`GridSpec`] plus a bucket for mass beyond the right edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMeasure {
    spec: GridSpec,
    mass: Vec<f64>,
    overflow: f64,
    total: f64,
}

impl GridMeasure {
    pub fn new(spec: GridSpec, mass: Vec<f64>, overflow: f64) -> Result<Self> {
        if mass.len() != spec.n_cells {
            return Err(HtlError::Grid(format!(
                "mass has {} cells, grid has {}",
                mass.len(),
                spec.n_cells
            )));
        }
        if let Some((i, &m)) = mass
            .iter()
            .enumerate()
            .find(|(_, m)| !(m.is_finite() && **m >= 0.0))
        {
            return Err(HtlError::Grid(format!("cell {i} has invalid mass {m}")));
        }
        if !(overflow.is_finite() && overflow >= 0.0) {
            return Err(HtlError::Grid(format!("invalid overflow {overflow}")));
        }
        let total = mass.iter().sum::<f64>() + overflow;
        Ok(Self {
            spec,
            mass,
            overflow,
            total,
        })
    }

    /// Trusted constructor for internal arithmetic that can only produce valid values.
    pub(crate) fn from_parts(spec: GridSpec, mass: Vec<f64>, overflow: f64) -> Self {
        debug_assert_eq!(mass.len(), spec.n_cells);
        let total = mass.iter().sum::<f64>() + overflow;
        Self {
            spec,
            mass,
            overflow,
            total,
        }
    }

    pub fn zero(spec: GridSpec) -> Self {
        Self::from_parts(spec, vec![0.0; spec.n_cells], 0.0)
    }

    /// Atom of size `weight` at the grid point `x`.
    pub fn point_mass(spec: GridSpec, x: f64, weight: f64) -> Result<Self> {
        let i = spec
            .index_of(x)
            .ok_or_else(|| HtlError::Grid(format!("point {x} is not an in-grid atom")))?;
        let mut mass = vec![0.0; spec.n_cells];
        mass[i] = weight;
        Self::new(spec, mass, 0.0)
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn overflow(&self) -> f64 {
        self.overflow
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn in_grid_total(&self) -> f64 {
        self.total - self.overflow
    }

    pub fn point(&self, i: usize) -> f64 {
        self.spec.point(i)
    }

    /// Mass of atoms in `(x, x + T]`; for `T = inf` the overflow is included.
    ///
    /// A finite window reaching past the right edge only sees the in-grid part.
    pub fn window(&self, x: f64, delta: DeltaWindow) -> f64 {
        let (a, b) = self.spec.atom_range(x, delta.length());
        let s: f64 = self.mass[a..b].iter().sum();
        if delta.is_infinite() {
            s + self.overflow
        } else {
            s
        }
    }

    /// Whether `(x, x + T]` lies inside the grid.
    pub fn window_in_grid(&self, x: f64, delta: DeltaWindow) -> bool {
        delta.is_infinite() || x + delta.length() <= self.spec.right_edge() * (1.0 + 1e-12)
    }

    /// Mass in `(x, inf)`.
    pub fn tail(&self, x: f64) -> f64 {
        self.window(x, DeltaWindow::infinite())
    }

    /// Mass in `(-inf, x]`.
    pub fn cdf(&self, x: f64) -> f64 {
        let (a, _) = self.spec.atom_range(x, 0.0);
        self.mass[..a].iter().sum()
    }

    /// `s[i] = sum of mass[i..] + overflow`, accurate in the far tail.
    pub fn suffix_sums(&self) -> Vec<f64> {
        let n = self.mass.len();
        let mut s = vec![0.0; n + 1];
        s[n] = self.overflow;
        for i in (0..n).rev() {
            s[i] = s[i + 1] + self.mass[i];
        }
        s
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self::from_parts(
            self.spec,
            self.mass.iter().map(|m| m * c).collect(),
            self.overflow * c,
        )
    }

    /// `self += w * other` on identical grids.
    pub fn add_scaled(&mut self, other: &GridMeasure, w: f64) -> Result<()> {
        if self.spec != other.spec {
            return Err(HtlError::Grid("add_scaled needs identical grids".into()));
        }
        for (a, b) in self.mass.iter_mut().zip(&other.mass) {
            *a += w * b;
        }
        self.overflow += w * other.overflow;
        self.total = self.mass.iter().sum::<f64>() + self.overflow;
        Ok(())
    }

    /// Restriction to atoms `<= x` (overflow dropped).
    pub fn truncated_at(&self, x: f64) -> Self {
        let (a, _) = self.spec.atom_range(x, 0.0);
        let mut mass = self.mass.clone();
        mass[a..].iter_mut().for_each(|m| *m = 0.0);
        Self::from_parts(self.spec, mass, 0.0)
    }

    /// Restriction to atoms `> x`, overflow kept.
    pub fn restricted_above(&self, x: f64) -> Self {
        let (a, _) = self.spec.atom_range(x, 0.0);
        let mut mass = self.mass.clone();
        mass[..a].iter_mut().for_each(|m| *m = 0.0);
        Self::from_parts(self.spec, mass, self.overflow)
    }

    /// Same measure on a grid extended to the right (overflow unchanged).
    pub fn extended_to(&self, x_max: f64) -> Result<Self> {
        let end = self.spec.snap_index(x_max)?;
        let n = (end - self.spec.origin_index).max(self.spec.n_cells as i64) as usize;
        let spec = GridSpec::new(self.spec.cell_width, self.spec.origin_index, n)?;
        let mut mass = self.mass.clone();
        mass.resize(n, 0.0);
        Ok(Self::from_parts(spec, mass, self.overflow))
    }

    /// Same measure on a prefix of its grid; mass cut off moves into the overflow.
    pub fn truncated_grid(&self, n_cells: usize) -> Result<Self> {
        if n_cells > self.spec.n_cells {
            return Err(HtlError::Grid("cannot truncate to a longer grid".into()));
        }
        let spec = GridSpec::new(self.spec.cell_width, self.spec.origin_index, n_cells)?;
        let cut: f64 = self.mass[n_cells..].iter().sum();
        Ok(Self::from_parts(
            spec,
            self.mass[..n_cells].to_vec(),
            self.overflow + cut,
        ))
    }

    /// Smallest and largest atom locations carrying positive mass.
    pub fn support(&self) -> Option<(f64, f64)> {
        let a = self.mass.iter().position(|&m| m > 0.0)?;
        let b = self.mass.iter().rposition(|&m| m > 0.0)?;
        Some((self.point(a), self.point(b)))
    }

    pub fn is_nonnegative_support(&self) -> bool {
        self.spec.origin_index >= -1
    }

    /// Largest per-cell absolute difference (same grid required).
    pub fn max_abs_diff(&self, other: &GridMeasure) -> Result<f64> {
        if self.spec != other.spec {
            return Err(HtlError::Grid("max_abs_diff needs identical grids".into()));
        }
        Ok(self
            .mass
            .iter()
            .zip(&other.mass)
            .map(|(a, b)| (a - b).abs())
            .fold((self.overflow - other.overflow).abs(), f64::max))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(n: usize) -> GridSpec {
        GridSpec::nonnegative(1.0, (n - 1) as f64).unwrap()
    }

    #[test]
    fn nonnegative_grid_points() {
        let g = GridSpec::nonnegative(0.5, 3.0).unwrap();
        assert_eq!(g.n_cells(), 7);
        assert_eq!(g.point(0), 0.0);
        assert_eq!(g.point(6), 3.0);
        assert_eq!(g.right_edge(), 3.0);
        assert_eq!(g.index_of(1.5), Some(3));
        assert_eq!(g.index_of(1.25), None);
        assert_eq!(g.index_of(3.5), None);
    }

    #[test]
    fn windows_are_right_closed() {
        let m = GridMeasure::new(unit(5), vec![0.1, 0.2, 0.3, 0.4, 0.0], 0.5).unwrap();
        let w1 = DeltaWindow::unit();
        assert!((m.window(0.0, w1) - 0.2).abs() < 1e-15);
        assert!((m.window(1.0, w1.scaled(2)) - 0.7).abs() < 1e-15);
        assert!((m.window(-1.0, w1) - 0.1).abs() < 1e-15);
        assert!((m.tail(2.0) - 0.9).abs() < 1e-15);
        assert!((m.cdf(1.0) - 0.3).abs() < 1e-15);
        assert!((m.total() - 1.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_negative_mass() {
        assert!(GridMeasure::new(unit(2), vec![0.1, -0.1], 0.0).is_err());
        assert!(GridMeasure::new(unit(2), vec![0.1], 0.0).is_err());
    }

    #[test]
    fn covering_negative_range() {
        let g = GridSpec::covering(1.0, -3.0, 2.0).unwrap();
        assert_eq!(g.n_cells(), 6);
        assert_eq!(g.point(0), -3.0);
        assert_eq!(g.index_of(0.0), Some(3));
    }

    #[test]
    fn suffix_sums_match_tail() {
        let m = GridMeasure::new(unit(4), vec![0.1, 0.2, 0.3, 0.4], 0.25).unwrap();
        let s = m.suffix_sums();
        for (i, v) in s.iter().enumerate().take(4) {
            assert!((v - m.tail(i as f64 - 1.0)).abs() < 1e-15);
        }
    }
}
