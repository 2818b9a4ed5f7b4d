// Closed-form decompositions for the three valuation principles, next to the SU engine
// on the same realisation.
//
// Run with `cargo run --release --example closed_form_oracles`.

use pnl_attrib::closedform::{oracle_first_order, oracle_risk_neutral, oracle_std_dev};
use pnl_attrib::decomposition::{su_terminal, UpdateOrder};
use pnl_attrib::revaluation::{surface_first_order, surface_risk_neutral, surface_std_dev, RevaluationSurface};
use pnl_attrib::stochastics::{simulate_basis, Measure, ModelParams, Policy, StepRate};
use pnl_attrib::timepaths::TimeGrid;

/// `(principle, SU terminal values, oracle terminal values)`.
pub type Row = (&'static str, Vec<f64>, Vec<f64>);

pub fn run_example() -> Result<Vec<Row>, Box<dyn std::error::Error>> {
    let policy = |b: f64, l: f64| Policy {
        premium: 0.5,
        benefit: b,
        hazard: StepRate::Constant(l),
        hazard_q: StepRate::Constant(1.2 * l),
        hazard_star: StepRate::Constant(1.5 * l),
    };
    let params = ModelParams {
        mu: 0.02,
        r: 0.04,
        sigma: 0.2,
        maturity: 1.0,
        alpha: 0.5,
        phi: StepRate::Constant(0.035),
        phi_star: StepRate::Constant(0.01),
        policies: vec![policy(0.4, 0.3), policy(0.6, 0.5), policy(0.5, 0.8)],
    };
    let grid = TimeGrid::dyadic(1.0, 14)?;
    let partition = TimeGrid::dyadic(1.0, 11)?;
    let order = UpdateOrder::natural(2);

    let q = simulate_basis(&params, &grid, 11, Measure::Q);
    let p = simulate_basis(&params, &grid, 11, Measure::P);
    let f = simulate_basis(&params, &grid, 11, Measure::FirstOrder);
    let cases: Vec<(&'static str, Box<dyn RevaluationSurface>, _, _)> = vec![
        ("risk-neutral", Box::new(surface_risk_neutral(&params)), &q, oracle_risk_neutral(&params, &q)?),
        ("std-dev", Box::new(surface_std_dev(&params)), &p, oracle_std_dev(&params, &p)?),
        ("first-order", Box::new(surface_first_order(&params)), &f, oracle_first_order(&params, &f)?),
    ];
    let mut rows = Vec::new();
    for (name, surface, sim, oracle) in cases {
        let su = su_terminal(surface.as_ref(), &sim.basis, &partition, &order)?;
        let exact = oracle.terminal();
        println!(
            "{name:<13} investment SU {:+.5} oracle {:+.5} | mortality SU {:+.5} oracle {:+.5}",
            su[0], exact[0], su[1], exact[1]
        );
        rows.push((name, su, exact));
    }
    Ok(rows)
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example().map(|_| ())
}
