// Sequential updating on hand-built step paths, and the waterfall between two dates.
//
// Run with `cargo run --example su_waterfall`.

use pnl_attrib::decomposition::{su_decompose, UpdateOrder};
use pnl_attrib::revaluation::{surface_black_box, BlackBoxSurface, RevaluationSurface};
use pnl_attrib::scenario::waterfall_from_decomposition;
use pnl_attrib::timepaths::{RiskBasis, StepPath, TimeGrid};
use std::sync::Arc;

/// `(surface/order, component deltas)` for every run.
pub type Runs = Vec<(String, Vec<f64>)>;

pub fn run_example() -> Result<Runs, Box<dyn std::error::Error>> {
    let grid = TimeGrid::dyadic(1.0, 4)?;
    let equity = StepPath::from_jumps(grid.clone(), 100.0, &[(0.25, 110.0), (0.625, 95.0)])?;
    let fx = StepPath::from_jumps(grid.clone(), 1.0, &[(0.25, 1.1), (0.875, 1.05)])?;
    let basis = RiskBasis::new(vec![equity, fx], vec!["equity".into(), "fx".into()])?;

    // Value in home currency of a foreign equity position.
    let surfaces: Vec<Box<dyn RevaluationSurface>> = vec![
        Box::new(BlackBoxSurface::product(2, 1.0)),
        Box::new(surface_black_box(
            2,
            1.0,
            Arc::new(|b: &RiskBasis| {
                let last = b.grid().len() - 1;
                let s = b.component(0).row(last)[0];
                let x = b.component(1).row(last)[0];
                (s - 100.0).max(0.0) * x
            }),
        )),
    ];
    let partition = TimeGrid::dyadic(1.0, 3)?;
    let mut out = Vec::new();
    for surface in &surfaces {
        for order in UpdateOrder::all(2) {
            let d = su_decompose(surface.as_ref(), &basis, &partition, &order)?;
            let wf = waterfall_from_decomposition(&d, 0.0, 1.0)?;
            println!("{} order {order}:", surface.label());
            for bar in &wf.bars {
                println!("  {:<8} {:>10.4}", bar.label, bar.value);
            }
            println!("  residual {:e}", wf.reconciliation_residual);
            out.push((format!("{}/{order}", surface.label()), wf.deltas()));
        }
    }
    Ok(out)
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example().map(|_| ())
}
