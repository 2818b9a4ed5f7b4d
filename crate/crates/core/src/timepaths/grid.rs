use std::sync::Arc;

use super::PathError;

/// Absolute tolerance for time comparisons that are not exact dyadics.
pub const TIME_TOL: f64 = 1e-12;

/// Strictly increasing time points starting at 0. Cloning is cheap.
#[derive(Debug, Clone)]
pub struct TimeGrid {
    points: Arc<[f64]>,
}

impl PartialEq for TimeGrid {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.points, &other.points) || self.points[..] == other.points[..]
    }
}

impl TimeGrid {
    pub fn new(points: Vec<f64>) -> Result<Self, PathError> {
        if points.is_empty() {
            return Err(PathError::InvalidGrid("grid has no points".into()));
        }
        if points[0] != 0.0 {
            return Err(PathError::InvalidGrid(format!(
                "grid must start at 0, got {}",
                points[0]
            )));
        }
        if let Some(w) = points
            .windows(2)
            .find(|w| !(w[1] > w[0]) || !w[1].is_finite())
        {
            return Err(PathError::InvalidGrid(format!(
                "grid points must be finite and strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        Ok(Self {
            points: points.into(),
        })
    }

    /// `n_steps` equal cells on `[0, horizon]`.
    pub fn uniform(horizon: f64, n_steps: usize) -> Result<Self, PathError> {
        if !(horizon > 0.0) || !horizon.is_finite() || n_steps == 0 {
            return Err(PathError::InvalidGrid(format!(
                "uniform grid needs horizon > 0 and at least one step (horizon {horizon}, steps {n_steps})"
            )));
        }
        let h = horizon / n_steps as f64;
        let mut pts: Vec<f64> = (0..=n_steps).map(|k| k as f64 * h).collect();
        pts[n_steps] = horizon;
        Self::new(pts)
    }

    /// Dyadic partition of `[0, horizon]` with `2^level` cells.
    pub fn dyadic(horizon: f64, level: u32) -> Result<Self, PathError> {
        if level > 40 {
            return Err(PathError::InvalidGrid(format!("dyadic level {level} too large")));
        }
        Self::uniform(horizon, 1usize << level)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    /// Largest cell width.
    pub fn mesh(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    pub fn point(&self, k: usize) -> f64 {
        self.points[k]
    }

    fn check_domain(&self, t: f64) -> Result<(), PathError> {
        if t.is_nan() || t < -TIME_TOL {
            return Err(PathError::OutOfDomain {
                t,
                lo: 0.0,
                hi: self.horizon(),
            });
        }
        Ok(())
    }

    /// Index of the last grid point `<= t` (times past the horizon map to the last point).
    pub fn index_at(&self, t: f64) -> Result<usize, PathError> {
        self.check_domain(t)?;
        Ok(self.index_at_unchecked(t))
    }

    pub(crate) fn index_at_unchecked(&self, t: f64) -> usize {
        let n = self.points.partition_point(|&s| s <= t + TIME_TOL);
        n.saturating_sub(1)
    }

    /// Index of the last grid point strictly before `t`, or `None` at `t = 0`.
    pub fn index_before(&self, t: f64) -> Result<Option<usize>, PathError> {
        self.check_domain(t)?;
        let n = self.points.partition_point(|&s| s < t - TIME_TOL);
        Ok(n.checked_sub(1))
    }

    /// Index of the first grid point `>= t`, if any.
    pub fn index_ceil(&self, t: f64) -> Option<usize> {
        let n = self.points.partition_point(|&s| s < t - TIME_TOL);
        (n < self.points.len()).then_some(n)
    }

    /// Index of a grid point equal to `t` within tolerance.
    pub fn position(&self, t: f64) -> Option<usize> {
        let k = self.index_at_unchecked(t);
        ((self.points[k] - t).abs() <= TIME_TOL).then_some(k)
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= -TIME_TOL && self.position(t).is_some()
    }

    /// Union of this grid with extra points inside `[0, horizon]`.
    pub fn refine_with(&self, extra: &[f64]) -> TimeGrid {
        let h = self.horizon();
        let mut added: Vec<f64> = extra
            .iter()
            .copied()
            .filter(|&t| t.is_finite() && t > 0.0 && t <= h + TIME_TOL && !self.contains(t))
            .map(|t| t.min(h))
            .collect();
        if added.is_empty() {
            return self.clone();
        }
        added.sort_by(f64::total_cmp);
        let mut merged = Vec::with_capacity(self.len() + added.len());
        let (mut i, mut j) = (0, 0);
        while i < self.points.len() || j < added.len() {
            let next = match (self.points.get(i), added.get(j)) {
                (Some(&a), Some(&b)) if a <= b => {
                    i += 1;
                    a
                }
                (Some(_), Some(&b)) | (None, Some(&b)) => {
                    j += 1;
                    b
                }
                (Some(&a), None) => {
                    i += 1;
                    a
                }
                (None, None) => unreachable!(),
            };
            if merged.last().is_none_or(|&last: &f64| next - last > TIME_TOL) {
                merged.push(next);
            }
        }
        TimeGrid {
            points: merged.into(),
        }
    }

    /// True when every point of `coarse` is a point of `self`.
    pub fn refines(&self, coarse: &TimeGrid) -> bool {
        coarse.points.iter().all(|&t| self.contains(t))
    }
}
