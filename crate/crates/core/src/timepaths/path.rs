use super::{PathError, TimeGrid, TIME_TOL};

/// Right-continuous piecewise-constant path on a grid, possibly vector valued.
///
/// `values` is row-major: row `k` holds the value on `[s_k, s_{k+1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepPath {
    grid: TimeGrid,
    dim: usize,
    values: Vec<f64>,
}

impl StepPath {
    pub fn new(grid: TimeGrid, dim: usize, values: Vec<f64>) -> Result<Self, PathError> {
        if dim == 0 {
            return Err(PathError::DimensionMismatch {
                expected: 1,
                got: 0,
            });
        }
        if values.len() != grid.len() * dim {
            return Err(PathError::DimensionMismatch {
                expected: grid.len() * dim,
                got: values.len(),
            });
        }
        Ok(Self { grid, dim, values })
    }

    pub fn scalar(grid: TimeGrid, values: Vec<f64>) -> Result<Self, PathError> {
        Self::new(grid, 1, values)
    }

    pub fn constant(grid: TimeGrid, value: &[f64]) -> Result<Self, PathError> {
        let values = value
            .iter()
            .copied()
            .cycle()
            .take(grid.len() * value.len())
            .collect();
        Self::new(grid, value.len(), values)
    }

    /// Scalar path starting at `initial` that jumps to `value` at each `(time, value)`.
    pub fn from_jumps(grid: TimeGrid, initial: f64, jumps: &[(f64, f64)]) -> Result<Self, PathError> {
        let mut sorted = jumps.to_vec();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut values = vec![initial; grid.len()];
        for &(t, v) in &sorted {
            let k = grid.position(t).ok_or_else(|| {
                PathError::InvalidGrid(format!("jump time {t} is not a grid point"))
            })?;
            values[k..].iter_mut().for_each(|x| *x = v);
        }
        Self::scalar(grid, values)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    /// Coordinate `c` at every grid point.
    pub fn coordinate(&self, c: usize) -> Vec<f64> {
        self.values.iter().skip(c).step_by(self.dim).copied().collect()
    }

    pub fn value_at(&self, t: f64) -> Result<&[f64], PathError> {
        Ok(self.row(self.grid.index_at(t)?))
    }

    /// First coordinate at `t`.
    pub fn scalar_at(&self, t: f64) -> Result<f64, PathError> {
        Ok(self.value_at(t)?[0])
    }

    /// `X(t-)`; equals `X(0)` at `t = 0`.
    pub fn left_limit(&self, t: f64) -> Result<&[f64], PathError> {
        let k = self.grid.index_before(t)?.unwrap_or(0);
        Ok(self.row(k))
    }

    /// The path frozen after `t`: `X(s ∧ t)`.
    /// `X(s ∧ t)`; `t` must lie in `[0, H]`.
    pub fn stop(&self, t: f64) -> Result<StepPath, PathError> {
        let horizon = self.grid.horizon();
        if t > horizon + TIME_TOL {
            return Err(PathError::OutOfDomain { t, lo: 0.0, hi: horizon });
        }
        let k = self.grid.index_at(t)?;
        let mut values = self.values.clone();
        let frozen = self.row(k).to_vec();
        for row in values[(k + 1) * self.dim..].chunks_mut(self.dim) {
            row.copy_from_slice(&frozen);
        }
        Ok(StepPath {
            grid: self.grid.clone(),
            dim: self.dim,
            values,
        })
    }

    /// Same path expressed on a finer grid.
    pub fn resample(&self, fine: &TimeGrid) -> Result<StepPath, PathError> {
        if !fine.refines(&self.grid) {
            return Err(PathError::GridMismatch(
                "target grid does not refine the path grid".into(),
            ));
        }
        let mut values = Vec::with_capacity(fine.len() * self.dim);
        for &t in fine.points() {
            values.extend_from_slice(self.row(self.grid.index_at_unchecked(t)));
        }
        StepPath::new(fine.clone(), self.dim, values)
    }

    /// Maximal runs `[first, last]` of grid indices with identical rows.
    pub fn constant_runs(&self) -> Vec<(usize, usize)> {
        let mut runs = Vec::new();
        let mut start = 0;
        for k in 1..self.grid.len() {
            if self.row(k) != self.row(k - 1) {
                runs.push((start, k - 1));
                start = k;
            }
        }
        runs.push((start, self.grid.len() - 1));
        runs
    }
}
