use rayon::prelude::*;
use serde::Serialize;

use super::isu::{order_spread, sup_distance};
use super::{su_decompose, Decomposition, DecompositionError, PartitionSequence, Provenance, UpdateOrder};
use crate::revaluation::RevaluationSurface;
use crate::timepaths::{apply_delay, Delay, RiskBasis, TimeGrid, TIME_TOL};

const EXACT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdditivityReport {
    /// `max_t |Σ_i D_i(t) - (R(t) - R(0))|`.
    pub max_residual: f64,
    /// Residual divided by the largest magnitude among `R` and the `D_i` (at least 1e-300).
    pub relative_residual: f64,
    pub worst_time: f64,
    pub passes: bool,
}

/// Recomputes `R(t) - R(0)` from the surface diagonal and compares it with `Σ_i D_i(t)`.
pub fn check_additivity(
    decomposition: &Decomposition,
    surface: &dyn RevaluationSurface,
    basis: &RiskBasis,
) -> Result<AdditivityReport, DecompositionError> {
    let r0 = surface.diagonal(basis, 0.0)?;
    let mut worst = (0.0, 0.0);
    let mut scale = r0.abs();
    for (k, &t) in decomposition.times().iter().enumerate() {
        let rt = surface.diagonal(basis, t)?;
        let sum: f64 = (0..decomposition.m())
            .map(|i| decomposition.component(i).values()[k])
            .sum();
        scale = (0..decomposition.m())
            .map(|i| decomposition.component(i).values()[k].abs())
            .fold(scale.max(rt.abs()), f64::max);
        let residual = (sum - (rt - r0)).abs();
        if residual > worst.0 {
            worst = (residual, t);
        }
    }
    let relative = worst.0 / scale.max(1e-300);
    Ok(AdditivityReport {
        max_residual: worst.0,
        relative_residual: relative,
        worst_time: worst.1,
        passes: relative <= 1e-10,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalizationViolation {
    pub component: usize,
    pub from: f64,
    pub to: f64,
    pub change: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalizationReport {
    pub intervals_checked: usize,
    pub violations: Vec<NormalizationViolation>,
    pub passes: bool,
}

/// On every run of grid points where `X_i` is constant, the evaluation times inside the
/// run must carry the same `D_i`.
pub fn check_normalization(
    decomposition: &Decomposition,
    basis: &RiskBasis,
) -> Result<NormalizationReport, DecompositionError> {
    let times = decomposition.times();
    let scale = (0..decomposition.m())
        .flat_map(|i| decomposition.component(i).values().iter().map(|v| v.abs()))
        .fold(1.0, f64::max);
    let mut checked = 0;
    let mut violations = Vec::new();
    for i in 0..basis.m().min(decomposition.m()) {
        let path = basis.component(i);
        let pts = path.grid().points();
        let d = decomposition.component(i).values();
        for (first, last) in path.constant_runs() {
            let (a, b) = (pts[first], pts[last]);
            let lo = times.partition_point(|&t| t < a - TIME_TOL);
            let hi = times.partition_point(|&t| t <= b + TIME_TOL);
            if hi <= lo + 1 {
                continue;
            }
            checked += 1;
            let base = d[lo];
            if let Some(k) = (lo + 1..hi).find(|&k| (d[k] - base).abs() > EXACT_TOL * scale) {
                violations.push(NormalizationViolation {
                    component: i,
                    from: a,
                    to: b,
                    change: d[k] - base,
                });
            }
        }
    }
    Ok(NormalizationReport {
        intervals_checked: checked,
        passes: violations.is_empty(),
        violations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderGapReport {
    pub levels: Vec<u32>,
    /// Sup over evaluation times and components of the spread across all update orders.
    pub gaps: Vec<f64>,
    pub scale: f64,
    pub relative_final_gap: f64,
    /// Each gap is at most 1.2 times the previous one.
    pub monotone: bool,
    /// The gap does not shrink: the final gap exceeds the tolerance and half the first gap.
    pub persistent: bool,
    pub passes: bool,
}

pub const ORDER_GAP_SLACK: f64 = 1.2;

/// Compares all `m!` update orders at every level.
pub fn check_order_invariance(
    surface: &dyn RevaluationSurface,
    basis: &RiskBasis,
    sequence: &PartitionSequence,
    eval_times: &[f64],
    tol: f64,
) -> Result<OrderGapReport, DecompositionError> {
    let orders = UpdateOrder::all(surface.components());
    let mut gaps = Vec::new();
    let mut scale: f64 = 0.0;
    for partition in sequence.partitions() {
        let per_order = orders
            .iter()
            .map(|o| su_decompose(surface, basis, partition, o)?.at_partition_points(eval_times))
            .collect::<Result<Vec<_>, _>>()?;
        scale = per_order
            .iter()
            .flatten()
            .flatten()
            .map(|v| v.abs())
            .fold(0.0, f64::max);
        gaps.push(order_spread(&per_order));
    }
    let last = gaps[gaps.len() - 1];
    let relative = if scale > 0.0 { last / scale } else { last };
    let monotone = gaps
        .windows(2)
        .all(|w| w[1] <= ORDER_GAP_SLACK * w[0] + 1e-14);
    let persistent = relative >= tol && last >= 0.5 * gaps[0];
    Ok(OrderGapReport {
        levels: sequence.levels().to_vec(),
        gaps,
        scale,
        relative_final_gap: relative,
        monotone,
        persistent,
        passes: monotone && relative < tol,
    })
}

/// `max_{t, i} |D_i^{τ}(t-) - D_i(t-)|` for each delay, with both decompositions
/// computed by SU along `partition`.
pub fn stability_distances(
    surface: &dyn RevaluationSurface,
    basis: &RiskBasis,
    delays: &[Delay],
    partition: &TimeGrid,
    eval_times: &[f64],
) -> Result<Vec<f64>, DecompositionError> {
    let order = UpdateOrder::natural(surface.components());
    let reference = su_decompose(surface, basis, partition, &order)?;
    delays
        .iter()
        .map(|delay| {
            let delayed = apply_delay(basis, delay)?;
            let d = su_decompose(surface, &delayed, partition, &order)?;
            let mut worst: f64 = 0.0;
            for &t in eval_times {
                for i in 0..d.m() {
                    worst = worst.max((d.left_limit(i, t)? - reference.left_limit(i, t)?).abs());
                }
            }
            Ok(worst)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub epsilon: f64,
    pub max_final_fraction: f64,
    /// Fraction of realisations with distance above `epsilon`, per delay level.
    pub exceedance: Vec<f64>,
    pub median_distance: Vec<f64>,
    pub non_increasing: bool,
    pub passes: bool,
}

impl StabilityReport {
    /// `distances[seed][level]`.
    pub fn from_distances(distances: &[Vec<f64>], epsilon: f64, max_final_fraction: f64) -> Self {
        let levels = distances.first().map_or(0, Vec::len);
        let n = distances.len().max(1) as f64;
        let exceedance: Vec<f64> = (0..levels)
            .map(|l| distances.iter().filter(|d| d[l] > epsilon).count() as f64 / n)
            .collect();
        let median_distance = (0..levels)
            .map(|l| {
                let mut col: Vec<f64> = distances.iter().map(|d| d[l]).collect();
                col.sort_by(f64::total_cmp);
                median_of_sorted(&col)
            })
            .collect();
        let non_increasing = exceedance.windows(2).all(|w| w[1] <= w[0]);
        let final_ok = exceedance.last().is_some_and(|&f| f <= max_final_fraction);
        Self {
            epsilon,
            max_final_fraction,
            exceedance,
            median_distance,
            non_increasing,
            passes: non_increasing && final_ok,
        }
    }
}

pub fn median_of_sorted(sorted: &[f64]) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        n if n % 2 == 1 => sorted[n / 2],
        n => 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]),
    }
}

/// Stability over a batch of realisations.
pub fn check_stability(
    surface: &dyn RevaluationSurface,
    bases: &[RiskBasis],
    delays: &[Delay],
    partition: &TimeGrid,
    eval_times: &[f64],
    epsilon: f64,
    max_final_fraction: f64,
) -> Result<StabilityReport, DecompositionError> {
    let distances = bases
        .par_iter()
        .map(|b| stability_distances(surface, b, delays, partition, eval_times))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(StabilityReport::from_distances(&distances, epsilon, max_final_fraction))
}

/// For a phased delay, charges each witnessing increment `R(b) - R(a)` to the one
/// component whose delay moves on `(a, b]`.
pub fn interval_decomposition(
    surface: &dyn RevaluationSurface,
    delayed: &RiskBasis,
    delay: &Delay,
) -> Result<Decomposition, DecompositionError> {
    let witness = delay.witness().ok_or_else(|| {
        DecompositionError::InvalidPartition(format!("delay {} has no witnessing partition", delay.label()))
    })?;
    let m = surface.components();
    let pts = witness.points();
    let mut acc = vec![0.0; m];
    let mut values: Vec<Vec<f64>> = vec![vec![0.0]; m];
    let mut prev = surface.diagonal(delayed, 0.0)?;
    let mut revaluation = vec![prev];
    for w in pts.windows(2) {
        let r = surface.diagonal(delayed, w[1])?;
        if let Some(i) = delay.moving_component(w[0], w[1])? {
            acc[i] += r - prev;
        }
        prev = r;
        for (v, a) in values.iter_mut().zip(&acc) {
            v.push(*a);
        }
        revaluation.push(r);
    }
    Ok(Decomposition::new(
        witness,
        values,
        revaluation,
        delayed.labels().to_vec(),
        Provenance {
            surface: surface.label().to_string(),
            partition: format!("witness of {}", delay.label()),
            order: "interval".into(),
            delay: delay.label().to_string(),
        },
    )?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniquenessReport {
    pub max_residual: f64,
    pub passes: bool,
}

/// Compares the interval-wise decomposition with SU along `partition`, which must refine the witness.
pub fn check_uniqueness(
    surface: &dyn RevaluationSurface,
    delayed: &RiskBasis,
    delay: &Delay,
    partition: &TimeGrid,
    order: &UpdateOrder,
) -> Result<UniquenessReport, DecompositionError> {
    let intervals = interval_decomposition(surface, delayed, delay)?;
    if !partition.refines(intervals.grid()) {
        return Err(DecompositionError::InvalidPartition(
            "partition must refine the witnessing partition".into(),
        ));
    }
    let su = su_decompose(surface, delayed, partition, order)?;
    let times = intervals.times().to_vec();
    let a = intervals.at_partition_points(&times)?;
    let b = su.at_partition_points(&times)?;
    let residual = sup_distance(&a, &b);
    Ok(UniquenessReport {
        max_residual: residual,
        passes: residual <= EXACT_TOL,
    })
}
