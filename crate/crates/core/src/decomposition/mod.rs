//! Sequential-updating decompositions, their infinitesimal limit, and the axiom checks.

mod axioms;
mod isu;
mod su;

use std::fmt;

use serde::Serialize;

use crate::revaluation::SurfaceError;
use crate::timepaths::{PathError, StepPath, TimeGrid};

pub use axioms::{
    check_additivity, check_normalization, check_order_invariance, check_stability,
    check_uniqueness, interval_decomposition, median_of_sorted, stability_distances, AdditivityReport,
    NormalizationReport, NormalizationViolation, OrderGapReport, StabilityReport,
    UniquenessReport,
};
pub use isu::{isu_approximate, ConvergenceReport, PartitionSequence};
pub use su::{su_decompose, su_terminal};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DecompositionError {
    #[error(transparent)]
    Surface(#[from] SurfaceError),
    #[error(transparent)]
    Path(#[from] PathError),
    #[error("invalid update order: {0}")]
    InvalidOrder(String),
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("evaluation time {t} is not a partition point")]
    EvalTime { t: f64 },
}

/// A permutation of `0..m` giving the sequence in which components are updated.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct UpdateOrder(Vec<usize>);

impl UpdateOrder {
    pub fn new(order: Vec<usize>) -> Result<Self, DecompositionError> {
        let mut seen = vec![false; order.len()];
        for &i in &order {
            if i >= order.len() || std::mem::replace(&mut seen[i], true) {
                return Err(DecompositionError::InvalidOrder(format!(
                    "{order:?} is not a permutation of 0..{}",
                    order.len()
                )));
            }
        }
        Ok(Self(order))
    }

    /// From 1-based component numbers, e.g. `[2, 1]`.
    pub fn from_one_based(order: &[usize]) -> Result<Self, DecompositionError> {
        if order.contains(&0) {
            return Err(DecompositionError::InvalidOrder(format!(
                "{order:?}: components are numbered from 1"
            )));
        }
        Self::new(order.iter().map(|i| i - 1).collect())
    }

    pub fn natural(m: usize) -> Self {
        Self((0..m).collect())
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Every permutation of `0..m`, natural order first.
    pub fn all(m: usize) -> Vec<UpdateOrder> {
        fn permute(prefix: &mut Vec<usize>, rest: &mut Vec<usize>, out: &mut Vec<UpdateOrder>) {
            if rest.is_empty() {
                out.push(UpdateOrder(prefix.clone()));
                return;
            }
            for k in 0..rest.len() {
                let item = rest.remove(k);
                prefix.push(item);
                permute(prefix, rest, out);
                prefix.pop();
                rest.insert(k, item);
            }
        }
        let mut out = Vec::new();
        permute(&mut Vec::new(), &mut (0..m).collect(), &mut out);
        out
    }
}

impl fmt::Display for UpdateOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|i| (i + 1).to_string()).collect();
        f.write_str(&parts.join("-"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub surface: String,
    pub partition: String,
    pub order: String,
    pub delay: String,
}

/// Components `D_1..D_m` and the revaluation process `R` at the partition points,
/// step-interpolated in between.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    components: Vec<StepPath>,
    revaluation: StepPath,
    labels: Vec<String>,
    pub provenance: Provenance,
}

impl Decomposition {
    pub(crate) fn new(
        grid: &TimeGrid,
        values: Vec<Vec<f64>>,
        revaluation: Vec<f64>,
        labels: Vec<String>,
        provenance: Provenance,
    ) -> Result<Self, PathError> {
        let components = values
            .into_iter()
            .map(|v| StepPath::scalar(grid.clone(), v))
            .collect::<Result<_, _>>()?;
        Ok(Self {
            components,
            revaluation: StepPath::scalar(grid.clone(), revaluation)?,
            labels,
            provenance,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        self.revaluation.grid()
    }

    pub fn times(&self) -> &[f64] {
        self.grid().points()
    }

    pub fn m(&self) -> usize {
        self.components.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn component(&self, i: usize) -> &StepPath {
        &self.components[i]
    }

    /// `D_i(t)`.
    pub fn value(&self, i: usize, t: f64) -> Result<f64, PathError> {
        self.components[i].scalar_at(t)
    }

    /// `D_i(t-)`, taken at the preceding partition point.
    pub fn left_limit(&self, i: usize, t: f64) -> Result<f64, PathError> {
        Ok(self.components[i].left_limit(t)?[0])
    }

    /// `R(t) = U(t, ..., t)`.
    pub fn revaluation(&self, t: f64) -> Result<f64, PathError> {
        self.revaluation.scalar_at(t)
    }

    /// `(D_1(t), ..., D_m(t))`.
    pub fn at(&self, t: f64) -> Result<Vec<f64>, PathError> {
        (0..self.m()).map(|i| self.value(i, t)).collect()
    }

    pub fn terminal(&self) -> Vec<f64> {
        let t = self.grid().horizon();
        self.at(t).expect("horizon lies on the grid")
    }

    /// Values at `times`, which must be partition points.
    pub fn at_partition_points(&self, times: &[f64]) -> Result<Vec<Vec<f64>>, DecompositionError> {
        times
            .iter()
            .map(|&t| {
                let k = self
                    .grid()
                    .position(t)
                    .ok_or(DecompositionError::EvalTime { t })?;
                Ok((0..self.m()).map(|i| self.components[i].values()[k]).collect())
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::revaluation::BlackBoxSurface;
    use crate::timepaths::{apply_delay, make_refining_delays, Delay, DelayKind, RiskBasis};

    fn two_paths(grid: &TimeGrid, j1: (f64, f64, f64), j2: (f64, f64, f64)) -> RiskBasis {
        let x1 = StepPath::from_jumps(grid.clone(), j1.0, &[(j1.1, j1.2)]).unwrap();
        let x2 = StepPath::from_jumps(grid.clone(), j2.0, &[(j2.1, j2.2)]).unwrap();
        RiskBasis::unlabelled(vec![x1, x2]).unwrap()
    }

    fn basis_grid() -> TimeGrid {
        TimeGrid::new(vec![0.0, 0.3, 0.5, 0.7, 1.0]).unwrap()
    }

    #[test]
    fn additive_surface_charges_marginal_jumps() {
        let grid = basis_grid();
        let basis = two_paths(&grid, (0.0, 0.3, 2.0), (0.0, 0.7, -1.0));
        let surface = BlackBoxSurface::additive(2, 1.0);
        for partition in [grid.clone(), TimeGrid::new(vec![0.0, 1.0]).unwrap(), TimeGrid::uniform(1.0, 10).unwrap()] {
            for order in UpdateOrder::all(2) {
                let d = su_decompose(&surface, &basis, &partition, &order).unwrap();
                for &t in partition.points() {
                    assert_eq!(d.value(0, t).unwrap(), if t >= 0.3 { 2.0 } else { 0.0 });
                    assert_eq!(d.value(1, t).unwrap(), if t >= 0.7 { -1.0 } else { 0.0 });
                }
            }
        }
    }

    #[test]
    fn product_surface_same_time_jumps() {
        let grid = basis_grid();
        let basis = two_paths(&grid, (1.0, 0.3, 2.0), (1.0, 0.3, 3.0));
        let surface = BlackBoxSurface::product(2, 1.0);
        let pi = TimeGrid::new(vec![0.0, 1.0]).unwrap();
        let d12 = su_terminal(&surface, &basis, &pi, &UpdateOrder::from_one_based(&[1, 2]).unwrap()).unwrap();
        let d21 = su_terminal(&surface, &basis, &pi, &UpdateOrder::from_one_based(&[2, 1]).unwrap()).unwrap();
        assert_eq!(d12, vec![1.0, 4.0]);
        assert_eq!(d21, vec![3.0, 2.0]);
    }

    #[test]
    fn product_surface_distinct_jumps() {
        let grid = basis_grid();
        let basis = two_paths(&grid, (1.0, 0.3, 2.0), (1.0, 0.7, 3.0));
        let surface = BlackBoxSurface::product(2, 1.0);
        let pi = TimeGrid::new(vec![0.0, 0.5, 1.0]).unwrap();
        let d = su_decompose(&surface, &basis, &pi, &UpdateOrder::natural(2)).unwrap();
        assert_eq!(d.terminal(), vec![1.0, 4.0]);
        assert_eq!(d.revaluation(1.0).unwrap() - d.revaluation(0.0).unwrap(), 5.0);
    }

    #[test]
    fn isu_on_additive_surface_is_exact_from_the_first_level() {
        let grid = TimeGrid::dyadic(1.0, 4).unwrap();
        let basis = two_paths(&grid, (1.0, 0.25, 3.0), (2.0, 0.75, 1.0));
        let seq = PartitionSequence::dyadic(1.0, 1, 4).unwrap();
        let (d, report) = isu_approximate(
            &BlackBoxSurface::additive(2, 1.0),
            &basis,
            &seq,
            &[0.5, 1.0],
            1e-12,
            &UpdateOrder::natural(2),
        )
        .unwrap();
        assert!(report.distances.iter().all(|&x| x == 0.0));
        assert!(report.order_gaps.iter().all(|&x| x == 0.0));
        assert!(report.converged);
        assert_eq!(d.terminal(), vec![2.0, -1.0]);
    }

    #[test]
    fn isu_on_product_with_distinct_jumps() {
        let grid = TimeGrid::dyadic(1.0, 8).unwrap();
        let basis = two_paths(&grid, (1.0, 0.3125, 2.0), (1.0, 0.6875, 3.0));
        let seq = PartitionSequence::dyadic(1.0, 1, 8).unwrap();
        let (d, report) = isu_approximate(
            &BlackBoxSurface::product(2, 1.0),
            &basis,
            &seq,
            &[1.0],
            1e-12,
            &UpdateOrder::natural(2),
        )
        .unwrap();
        assert_eq!(d.terminal(), vec![1.0, 4.0]);
        assert!(report.converged);
        let gaps = check_order_invariance(&BlackBoxSurface::product(2, 1.0), &basis, &seq, &[1.0], 1e-2).unwrap();
        assert_eq!(*gaps.gaps.last().unwrap(), 0.0);
        assert!(gaps.passes);
    }

    #[test]
    fn same_time_product_gap_persists() {
        let grid = TimeGrid::dyadic(1.0, 8).unwrap();
        let basis = two_paths(&grid, (1.0, 0.3125, 2.0), (1.0, 0.3125, 3.0));
        let seq = PartitionSequence::dyadic(1.0, 1, 8).unwrap();
        let report = check_order_invariance(&BlackBoxSurface::product(2, 1.0), &basis, &seq, &[1.0], 1e-2).unwrap();
        assert!(report.gaps.iter().all(|&g| (g - 2.0).abs() <= 1e-12), "{:?}", report.gaps);
        assert!(report.persistent);
        assert!(!report.passes);
    }

    #[test]
    fn additivity_and_corruption() {
        let grid = basis_grid();
        let basis = two_paths(&grid, (1.0, 0.3, 2.0), (1.0, 0.7, 3.0));
        let surface = BlackBoxSurface::product(2, 1.0);
        let d = su_decompose(&surface, &basis, &grid, &UpdateOrder::natural(2)).unwrap();
        let ok = check_additivity(&d, &surface, &basis).unwrap();
        assert_eq!(ok.max_residual, 0.0);
        assert!(ok.passes);

        let shifted: Vec<f64> = d.component(0).values().iter().map(|v| v + 1.0).collect();
        let bad = Decomposition::new(
            d.grid(),
            vec![shifted, d.component(1).values().to_vec()],
            (0..grid.len()).map(|k| d.revaluation(grid.point(k)).unwrap()).collect(),
            d.labels().to_vec(),
            d.provenance.clone(),
        )
        .unwrap();
        let report = check_additivity(&bad, &surface, &basis).unwrap();
        assert_eq!(report.max_residual, 1.0);
        assert!(!report.passes);
    }

    #[test]
    fn normalization_and_drift_detection() {
        let grid = TimeGrid::dyadic(1.0, 4).unwrap();
        let basis = two_paths(&grid, (1.0, 0.25, 2.0), (1.0, 0.5, 3.0));
        let surface = BlackBoxSurface::product(2, 1.0);
        let d = su_decompose(&surface, &basis, &grid, &UpdateOrder::natural(2)).unwrap();
        let report = check_normalization(&d, &basis).unwrap();
        assert!(report.passes && report.intervals_checked > 0);

        let drifting: Vec<f64> = grid.points().iter().map(|t| t * 0.1).collect();
        let bad = Decomposition::new(
            d.grid(),
            vec![drifting, d.component(1).values().to_vec()],
            vec![0.0; grid.len()],
            d.labels().to_vec(),
            d.provenance.clone(),
        )
        .unwrap();
        let report = check_normalization(&bad, &basis).unwrap();
        assert!(!report.passes);
        assert!(report.violations.iter().any(|v| v.component == 0));
    }

    #[test]
    fn identity_delays_have_zero_distance() {
        let grid = TimeGrid::dyadic(1.0, 6).unwrap();
        let basis = two_paths(&grid, (1.0, 0.25, 2.0), (1.0, 0.5, 3.0));
        let delays = vec![Delay::identity(2); 3];
        let d = stability_distances(&BlackBoxSurface::product(2, 1.0), &basis, &delays, &grid, &[0.5, 1.0]).unwrap();
        assert_eq!(d, vec![0.0; 3]);
    }

    #[test]
    fn phased_delays_split_same_time_jumps() {
        let grid = TimeGrid::dyadic(1.0, 6).unwrap();
        let basis = two_paths(&grid, (1.0, 0.3125, 2.0), (1.0, 0.3125, 3.0));
        let surface = BlackBoxSurface::product(2, 1.0);
        let delays = make_refining_delays(DelayKind::PhasedDyadic, 4, 2, 1.0).unwrap();
        let fine = TimeGrid::dyadic(1.0, 12).unwrap();
        let dist = stability_distances(&surface, &basis, &delays, &fine, &[1.0]).unwrap();
        // Every delay level observes X_1 before X_2, so the delayed decomposition is (1, 4)
        // whatever the order. Undelayed SU agrees with it for order 1-2 only.
        let other = UpdateOrder::from_one_based(&[2, 1]).unwrap();
        let direct = su_terminal(&surface, &basis, &fine, &other).unwrap();
        let delayed = apply_delay(&basis, delays.last().unwrap()).unwrap();
        let via_delay = su_terminal(&surface, &delayed, &fine, &other).unwrap();
        assert!(dist.iter().all(|&x| x < 1e-12), "{dist:?}");
        assert_eq!((direct[1] - via_delay[1]).abs(), 2.0);
    }

    #[test]
    fn uniqueness_on_phased_delays() {
        let grid = TimeGrid::dyadic(1.0, 6).unwrap();
        let basis = two_paths(&grid, (1.0, 0.3125, 2.0), (1.0, 0.6875, 3.0));
        let surface = BlackBoxSurface::product(2, 1.0);
        let fine = TimeGrid::dyadic(1.0, 14).unwrap();
        for delay in make_refining_delays(DelayKind::PhasedDyadic, 5, 2, 1.0).unwrap() {
            let delayed = apply_delay(&basis, &delay).unwrap();
            let fine = fine.refine_with(delay.witness().unwrap().points());
            for order in UpdateOrder::all(2) {
                let r = check_uniqueness(&surface, &delayed, &delay, &fine, &order).unwrap();
                assert!(r.passes, "{} {order}: {}", delay.label(), r.max_residual);
            }
        }
    }

    #[test]
    fn update_orders() {
        assert_eq!(UpdateOrder::all(3).len(), 6);
        assert_eq!(UpdateOrder::from_one_based(&[2, 1]).unwrap().to_string(), "2-1");
        assert!(UpdateOrder::from_one_based(&[1, 1]).is_err());
        assert!(UpdateOrder::new(vec![0, 2]).is_err());
    }
}
