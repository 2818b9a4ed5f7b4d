use super::{Decomposition, DecompositionError, Provenance, UpdateOrder};
use crate::revaluation::RevaluationSurface;
use crate::timepaths::{RiskBasis, TimeGrid};

fn describe(partition: &TimeGrid) -> String {
    format!("{} points, mesh {:.3e}", partition.len(), partition.mesh())
}

/// Sequential-updating decomposition along `partition`, evaluated at the partition points.
///
/// On each cell `(s_l, s_{l+1}]` the components are moved from `s_l` to `s_{l+1}` one
/// at a time in `order`; each move is charged to the component that moved.
pub fn su_decompose(
    surface: &dyn RevaluationSurface,
    basis: &RiskBasis,
    partition: &TimeGrid,
    order: &UpdateOrder,
) -> Result<Decomposition, DecompositionError> {
    let m = surface.components();
    if basis.m() != m {
        return Err(DecompositionError::InvalidPartition(format!(
            "surface expects {m} components, basis has {}",
            basis.m()
        )));
    }
    if order.len() != m {
        return Err(DecompositionError::InvalidOrder(format!(
            "order {order} has {} entries for {m} components",
            order.len()
        )));
    }
    let pts = partition.points();
    let mut times = vec![0.0; m];
    let mut prev = surface.evaluate(basis, &times)?;
    let mut acc = vec![0.0; m];
    let mut values: Vec<Vec<f64>> = vec![Vec::with_capacity(pts.len()); m];
    let mut revaluation = Vec::with_capacity(pts.len());
    for v in values.iter_mut() {
        v.push(0.0);
    }
    revaluation.push(prev);
    for &next in &pts[1..] {
        for &i in order.as_slice() {
            times[i] = next;
            let u = surface.evaluate(basis, &times)?;
            acc[i] += u - prev;
            prev = u;
        }
        for (v, a) in values.iter_mut().zip(&acc) {
            v.push(*a);
        }
        revaluation.push(prev);
    }
    Ok(Decomposition::new(
        partition,
        values,
        revaluation,
        basis.labels().to_vec(),
        Provenance {
            surface: surface.label().to_string(),
            partition: describe(partition),
            order: order.to_string(),
            delay: "none".into(),
        },
    )?)
}

/// `D_i` at the end of the partition.
pub fn su_terminal(
    surface: &dyn RevaluationSurface,
    basis: &RiskBasis,
    partition: &TimeGrid,
    order: &UpdateOrder,
) -> Result<Vec<f64>, DecompositionError> {
    Ok(su_decompose(surface, basis, partition, order)?.terminal())
}
