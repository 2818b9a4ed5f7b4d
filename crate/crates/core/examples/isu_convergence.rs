// Infinitesimal sequential updating for the risk-neutral value of a small term
// insurance portfolio, compared with the closed-form decomposition.
//
// Run with `cargo run --release --example isu_convergence`.

use pnl_attrib::closedform::oracle_risk_neutral;
use pnl_attrib::decomposition::{isu_approximate, ConvergenceReport, PartitionSequence, UpdateOrder};
use pnl_attrib::revaluation::surface_risk_neutral;
use pnl_attrib::stochastics::{simulate_basis, Measure, ModelParams, Policy, StepRate};
use pnl_attrib::timepaths::TimeGrid;

pub fn run_example() -> Result<(ConvergenceReport, [f64; 2]), Box<dyn std::error::Error>> {
    let policy = |b: f64, l: f64| Policy {
        premium: 0.4,
        benefit: b,
        hazard: StepRate::Constant(l),
        hazard_q: StepRate::Constant(l),
        hazard_star: StepRate::Constant(l),
    };
    let params = ModelParams {
        mu: 0.03,
        r: 0.03,
        sigma: 0.15,
        maturity: 1.0,
        alpha: 0.0,
        phi: StepRate::Constant(0.0),
        phi_star: StepRate::Constant(0.0),
        policies: vec![policy(0.3, 0.05), policy(0.5, 0.1)],
    };
    let sim = simulate_basis(&params, &TimeGrid::dyadic(1.0, 14)?, 7, Measure::Q);
    let surface = surface_risk_neutral(&params);
    let seq = PartitionSequence::dyadic(1.0, 4, 12)?;
    let (d, report) = isu_approximate(&surface, &sim.basis, &seq, &[0.5, 1.0], 1e-3, &UpdateOrder::natural(2))?;
    let oracle = oracle_risk_neutral(&params, &sim)?;

    println!("level  mesh        distance    order gap");
    for (k, level) in report.levels.iter().enumerate() {
        let distance = if k > 0 { format!("{:.3e}", report.distances[k - 1]) } else { "-".into() };
        println!("{level:>5}  {:<10.3e}  {distance:<10}  {:.3e}", report.meshes[k], report.order_gaps[k]);
    }
    println!("estimated order {:?}, converged {}", report.estimated_order, report.converged);
    let errors = [0, 1].map(|i| d.terminal()[i] - oracle.terminal()[i]);
    for i in 0..2 {
        println!(
            "{:<11} ISU {:+.6}  closed form {:+.6}",
            d.labels()[i],
            d.terminal()[i],
            oracle.terminal()[i]
        );
    }
    Ok((report, errors))
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example().map(|_| ())
}
