// Simulates the market risk basis (investment and mortality) and checks a few
// path identities with the left-point integral sums.
//
// Run with `cargo run --example simulate_basis`.

use pnl_attrib::stochastics::{
    integrals, ito_sum, lebesgue_sum, simulate_basis, Measure, ModelParams, Policy, StepRate,
};
use pnl_attrib::timepaths::{StepPath, TimeGrid};

pub struct Summary {
    pub kappa_terminal: f64,
    pub deaths: usize,
    pub ito_residual: f64,
}

pub fn run_example() -> Result<Summary, Box<dyn std::error::Error>> {
    let params = ModelParams {
        mu: 0.03,
        r: 0.04,
        sigma: 0.2,
        maturity: 1.0,
        alpha: 0.0,
        phi: StepRate::Constant(0.0),
        phi_star: StepRate::Constant(0.0),
        policies: (0..5)
            .map(|_| Policy {
                premium: 0.2,
                benefit: 1.0,
                hazard: StepRate::Constant(0.5),
                hazard_q: StepRate::Constant(0.6),
                hazard_star: StepRate::Constant(0.0),
            })
            .collect(),
    };
    let grid = TimeGrid::dyadic(1.0, 12)?;
    let sim = simulate_basis(&params, &grid, 2024, Measure::P);

    println!("labels: {:?}", sim.basis.labels());
    let kappa_terminal = sim.kappa.scalar_at(1.0)?;
    println!("kappa(1) = {kappa_terminal:.6}");
    for (j, d) in sim.deaths.death_index.iter().enumerate() {
        match d {
            Some(k) => println!("policy {j} dies at t = {}", grid.point(*k)),
            None => println!("policy {j} survives"),
        }
    }

    // ∫ W dW = (W(1)² - 1) / 2 up to discretisation.
    let w1 = sim.w.scalar_at(1.0)?;
    let ito = ito_sum(&sim.w, &sim.w, 0.0, 1.0)?;
    let ito_residual = ito - 0.5 * (w1 * w1 - 1.0);
    println!("∫ W dW = {ito:.5}, Itô formula gives {:.5}", 0.5 * (w1 * w1 - 1.0));

    let s = StepPath::scalar(grid.clone(), grid.points().to_vec())?;
    println!("∫ s ds = {:.6}", lebesgue_sum(&s, 0.0, 1.0)?);

    let quadratic = integrals::cumulative_sum(
        &integrals::increments(sim.w.values()),
        &integrals::increments(sim.w.values()),
    );
    println!("[W](1) = {:.5}", quadratic[quadratic.len() - 1]);

    Ok(Summary {
        kappa_terminal,
        deaths: sim.deaths.death_index.iter().flatten().count(),
        ito_residual,
    })
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example().map(|_| ())
}
