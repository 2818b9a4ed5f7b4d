use serde::Serialize;

use super::{su_decompose, Decomposition, DecompositionError, UpdateOrder};
use crate::revaluation::RevaluationSurface;
use crate::timepaths::{RiskBasis, TimeGrid, TIME_TOL};

/// Nested partitions with shrinking mesh, coarsest first.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionSequence {
    levels: Vec<u32>,
    partitions: Vec<TimeGrid>,
}

impl PartitionSequence {
    pub fn new(levels: Vec<u32>, partitions: Vec<TimeGrid>) -> Result<Self, DecompositionError> {
        if partitions.is_empty() || levels.len() != partitions.len() {
            return Err(DecompositionError::InvalidPartition(
                "need one label per partition and at least one partition".into(),
            ));
        }
        for w in partitions.windows(2) {
            if !w[1].refines(&w[0]) || (w[1].horizon() - w[0].horizon()).abs() > TIME_TOL {
                return Err(DecompositionError::InvalidPartition(
                    "partitions must be nested and share a horizon".into(),
                ));
            }
            if w[1].mesh() > w[0].mesh() + TIME_TOL {
                return Err(DecompositionError::InvalidPartition(
                    "partition meshes must not grow".into(),
                ));
            }
        }
        Ok(Self { levels, partitions })
    }

    /// Dyadic partitions of `[0, horizon]` for each level in `from..=to`.
    pub fn dyadic(horizon: f64, from: u32, to: u32) -> Result<Self, DecompositionError> {
        let levels: Vec<u32> = (from..=to).collect();
        let partitions = levels
            .iter()
            .map(|&n| TimeGrid::dyadic(horizon, n))
            .collect::<Result<_, _>>()?;
        Self::new(levels, partitions)
    }

    pub fn levels(&self) -> &[u32] {
        &self.levels
    }

    pub fn partitions(&self) -> &[TimeGrid] {
        &self.partitions
    }

    pub fn finest(&self) -> &TimeGrid {
        &self.partitions[self.partitions.len() - 1]
    }

    pub fn coarsest(&self) -> &TimeGrid {
        &self.partitions[0]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub levels: Vec<u32>,
    pub meshes: Vec<f64>,
    /// `sup |D^n - D^{n+1}|` over evaluation times and components, one per refinement.
    pub distances: Vec<f64>,
    /// Sup over evaluation times and components of the spread across all update orders, per level.
    pub order_gaps: Vec<f64>,
    pub tol: f64,
    pub converged: bool,
    /// Least-squares slope of `log distance` against `log mesh`.
    pub estimated_order: Option<f64>,
}

pub(super) fn sup_distance(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()))
        .fold(0.0, f64::max)
}

pub(super) fn order_spread(per_order: &[Vec<Vec<f64>>]) -> f64 {
    let mut gap: f64 = 0.0;
    for a in per_order {
        for b in per_order {
            gap = gap.max(sup_distance(a, b));
        }
    }
    gap
}

pub(super) fn slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let pairs: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pairs.len() < 2 {
        return None;
    }
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pairs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pairs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// SU decompositions along a partition sequence, returning the finest one and a report.
pub fn isu_approximate(
    surface: &dyn RevaluationSurface,
    basis: &RiskBasis,
    sequence: &PartitionSequence,
    eval_times: &[f64],
    tol: f64,
    order: &UpdateOrder,
) -> Result<(Decomposition, ConvergenceReport), DecompositionError> {
    let orders = UpdateOrder::all(surface.components());
    let mut finest = None;
    let mut at_eval: Vec<Vec<Vec<f64>>> = Vec::new();
    let mut order_gaps = Vec::new();
    for partition in sequence.partitions() {
        let mut per_order = Vec::with_capacity(orders.len());
        for o in &orders {
            if o == order {
                continue;
            }
            per_order.push(su_decompose(surface, basis, partition, o)?.at_partition_points(eval_times)?);
        }
        let main = su_decompose(surface, basis, partition, order)?;
        let main_values = main.at_partition_points(eval_times)?;
        per_order.push(main_values.clone());
        order_gaps.push(order_spread(&per_order));
        at_eval.push(main_values);
        finest = Some(main);
    }
    let distances: Vec<f64> = at_eval.windows(2).map(|w| sup_distance(&w[0], &w[1])).collect();
    let meshes: Vec<f64> = sequence.partitions().iter().map(TimeGrid::mesh).collect();
    let tail = distances.len().min(2);
    let converged = tail > 0 && distances[distances.len() - tail..].iter().all(|&d| d < tol);
    let estimated_order = slope(&meshes[..distances.len()], &distances);
    Ok((
        finest.expect("sequence has at least one partition"),
        ConvergenceReport {
            levels: sequence.levels().to_vec(),
            meshes,
            distances,
            order_gaps,
            tol,
            converged,
            estimated_order,
        },
    ))
}
