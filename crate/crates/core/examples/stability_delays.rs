// Refining information delays: phased observation schedules, their effect on the
// decomposition, and the interval-wise construction on a phased delay.
//
// Run with `cargo run --release --example stability_delays`.

use pnl_attrib::decomposition::{check_stability, check_uniqueness, StabilityReport, UpdateOrder};
use pnl_attrib::revaluation::surface_risk_neutral;
use pnl_attrib::stochastics::{path_seed, simulate_basis, Measure, ModelParams, Policy, StepRate};
use pnl_attrib::timepaths::{apply_delay, make_refining_delays, verify_refining, DelayKind, TimeGrid};

pub fn run_example() -> Result<(StabilityReport, f64), Box<dyn std::error::Error>> {
    let params = ModelParams {
        mu: 0.03,
        r: 0.03,
        sigma: 0.15,
        maturity: 1.0,
        alpha: 0.0,
        phi: StepRate::Constant(0.0),
        phi_star: StepRate::Constant(0.0),
        policies: vec![Policy {
            premium: 0.5,
            benefit: 0.5,
            hazard: StepRate::Constant(0.02),
            hazard_q: StepRate::Constant(0.02),
            hazard_star: StepRate::Constant(0.0),
        }],
    };
    let grid = TimeGrid::dyadic(1.0, 10)?;
    let delays = make_refining_delays(DelayKind::PhasedDyadic, 5, 2, 1.0)?;
    let refining = verify_refining(&delays, 1.0);
    println!("sup lags per level: {:?}", refining.sup_lags);
    println!("nested images {}, shrinking {}", refining.images_nested, refining.lags_shrink);

    let bases: Vec<_> = (0..64)
        .map(|k| simulate_basis(&params, &grid, path_seed(99, k), Measure::Q).basis)
        .collect();
    let surface = surface_risk_neutral(&params);
    let report = check_stability(&surface, &bases, &delays, &grid, &[0.5, 1.0], 0.05, 0.05)?;
    println!("exceedance by level: {:?}", report.exceedance);
    println!("median distance by level: {:?}", report.median_distance);

    let delay = &delays[2];
    let delayed = apply_delay(&bases[0], delay)?;
    let fine = grid.refine_with(delay.witness().expect("phased").points());
    let unique = check_uniqueness(&surface, &delayed, delay, &fine, &UpdateOrder::natural(2))?;
    println!("{}: interval-wise vs SU residual {:e}", delay.label(), unique.max_residual);
    Ok((report, unique.max_residual))
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example().map(|_| ())
}
