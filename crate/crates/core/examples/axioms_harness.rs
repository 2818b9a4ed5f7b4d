// Additivity, normalization and order invariance on black-box surfaces, including the
// simultaneous-jump case where the limit depends on the update order.
//
// Run with `cargo run --example axioms_harness`.

use pnl_attrib::decomposition::{
    check_additivity, check_normalization, check_order_invariance, su_decompose, OrderGapReport,
    PartitionSequence, UpdateOrder,
};
use pnl_attrib::revaluation::BlackBoxSurface;
use pnl_attrib::timepaths::{RiskBasis, StepPath, TimeGrid};

pub fn run_example() -> Result<(OrderGapReport, OrderGapReport), Box<dyn std::error::Error>> {
    let grid = TimeGrid::dyadic(1.0, 8)?;
    let seq = PartitionSequence::dyadic(1.0, 1, 8)?;
    let product = BlackBoxSurface::product(2, 1.0);

    let distinct = RiskBasis::unlabelled(vec![
        StepPath::from_jumps(grid.clone(), 1.0, &[(0.3125, 2.0)])?,
        StepPath::from_jumps(grid.clone(), 1.0, &[(0.6875, 3.0)])?,
    ])?;
    let same = RiskBasis::unlabelled(vec![
        StepPath::from_jumps(grid.clone(), 1.0, &[(0.3125, 2.0)])?,
        StepPath::from_jumps(grid.clone(), 1.0, &[(0.3125, 3.0)])?,
    ])?;

    let d = su_decompose(&product, &distinct, seq.finest(), &UpdateOrder::natural(2))?;
    let add = check_additivity(&d, &product, &distinct)?;
    let norm = check_normalization(&d, &distinct)?;
    println!("additivity residual {:e}, normalization intervals {} ok {}", add.max_residual, norm.intervals_checked, norm.passes);

    let separated = check_order_invariance(&product, &distinct, &seq, &[1.0], 1e-2)?;
    let stuck = check_order_invariance(&product, &same, &seq, &[1.0], 1e-2)?;
    println!("distinct jumps: gaps {:?} pass {}", separated.gaps, separated.passes);
    println!("same-time jumps: gaps {:?} persistent {}", stuck.gaps, stuck.persistent);
    Ok((separated, stuck))
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example().map(|_| ())
}
