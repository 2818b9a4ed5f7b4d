//! Model parameters, seeded simulation of the risk basis, and stochastic integral sums.

pub mod integrals;
mod params;
mod simulate;

pub use integrals::{ito_sum, ito_sum_milstein, jump_sum, lebesgue_sum};
pub use params::{Measure, ModelParams, Policy, StepRate};
pub use simulate::{
    compensator, kappa_from_phi, path_seed, simulate_basis, simulate_brownian, simulate_deaths,
    simulate_phi, substream, Deaths, SimulatedBasis, INVESTMENT_LABEL, MORTALITY_LABEL,
};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timepaths::{StepPath, TimeGrid};

    fn params(sigma: f64, drift: f64, hazard: f64) -> ModelParams {
        ModelParams {
            mu: drift,
            r: drift,
            sigma,
            maturity: 1.0,
            alpha: 0.0,
            phi: StepRate::Constant(0.0),
            phi_star: StepRate::Constant(0.0),
            policies: vec![Policy {
                premium: 0.1,
                benefit: 1.0,
                hazard: StepRate::Constant(hazard),
                hazard_q: StepRate::Constant(hazard),
                hazard_star: StepRate::Constant(hazard),
            }],
        }
    }

    fn mean_and_se(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, (var / n).sqrt())
    }

    #[test]
    fn zero_volatility_phi_is_linear() {
        let grid = TimeGrid::dyadic(1.0, 6).unwrap();
        let (phi, w) = simulate_phi(&params(0.0, 0.05, 0.0), &grid, 7, Measure::P);
        assert!(w.values().iter().all(|&x| x == 0.0));
        for (&t, &p) in grid.points().iter().zip(phi.values()) {
            assert_eq!(p, 0.05 * t);
        }
        let kappa = kappa_from_phi(&phi, 0.0);
        assert!((kappa.scalar_at(1.0).unwrap() - 1.0512710963760241).abs() < 1e-15);
        let flat = kappa_from_phi(&StepPath::constant(grid, &[0.0]).unwrap(), 0.0);
        assert!(flat.values().iter().all(|&k| k == 1.0));
    }

    #[test]
    fn simulation_is_deterministic() {
        let grid = TimeGrid::dyadic(1.0, 8).unwrap();
        let p = params(0.2, 0.03, 0.5);
        let a = simulate_basis(&p, &grid, 42, Measure::Q);
        let b = simulate_basis(&p, &grid, 42, Measure::Q);
        assert_eq!(a.basis, b.basis);
        assert_eq!(a.deaths.death_index, b.deaths.death_index);
        assert_ne!(a.w, simulate_basis(&p, &grid, 43, Measure::Q).w);
    }

    #[test]
    fn terminal_variance_of_unit_brownian() {
        let grid = TimeGrid::uniform(1.0, 1).unwrap();
        let p = params(1.0, 0.0, 0.0);
        let xs: Vec<f64> = (0..100_000u64)
            .map(|s| simulate_phi(&p, &grid, s, Measure::P).0.scalar_at(1.0).unwrap().powi(2))
            .collect();
        let (mean, se) = mean_and_se(&xs);
        assert!((mean - 1.0).abs() < 3.0 * se, "{mean} ± {se}");
    }

    #[test]
    fn euler_kappa_matches_exponential() {
        let grid = TimeGrid::dyadic(1.0, 14).unwrap();
        let p = params(0.2, 0.03, 0.0);
        let (phi, _) = simulate_phi(&p, &grid, 11, Measure::P);
        let mut euler = 1.0;
        for w in phi.values().windows(2) {
            euler *= 1.0 + (w[1] - w[0]);
        }
        let exact = kappa_from_phi(&phi, 0.2).scalar_at(1.0).unwrap();
        assert!((euler / exact - 1.0).abs() < 1e-3, "{euler} vs {exact}");
    }

    #[test]
    fn no_hazard_no_deaths() {
        let grid = TimeGrid::dyadic(1.0, 5).unwrap();
        let d = simulate_deaths(&params(0.1, 0.0, 0.0), &grid, 3, Measure::P);
        assert!(d.counting.values().iter().all(|&x| x == 0.0));
        assert!(d.compensator.values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn death_probability_matches_exponential_survival() {
        let grid = TimeGrid::dyadic(1.0, 4).unwrap();
        let p = params(0.0, 0.0, 0.1);
        let xs: Vec<f64> = (0..100_000u64)
            .map(|s| simulate_deaths(&p, &grid, s, Measure::P).death_index[0].map_or(0.0, |_| 1.0))
            .collect();
        let (mean, se) = mean_and_se(&xs);
        let exact = 1.0 - (-0.1f64).exp();
        assert!((mean - exact).abs() < 3.0 * se, "{mean} vs {exact} (se {se})");
    }

    #[test]
    fn survivor_compensator_is_cumulative_hazard() {
        let grid = TimeGrid::dyadic(1.0, 4).unwrap();
        let rate = StepRate::Constant(0.3);
        let c = compensator(&grid, &[None], &[&rate]);
        for &t in grid.points() {
            assert!((c.scalar_at(t).unwrap() - 0.3 * t).abs() < 1e-15);
        }
    }

    #[test]
    fn no_simultaneous_deaths() {
        let grid = TimeGrid::dyadic(1.0, 2).unwrap();
        let mut p = params(0.0, 0.0, 5.0);
        p.policies = vec![p.policies[0].clone(); 3];
        for seed in 0..500 {
            let d = simulate_deaths(&p, &grid, seed, Measure::P);
            let hit: Vec<usize> = d.death_index.iter().flatten().copied().collect();
            let mut uniq = hit.clone();
            uniq.sort();
            uniq.dedup();
            assert_eq!(uniq.len(), hit.len(), "seed {seed}: {:?}", d.death_index);
        }
    }

    #[test]
    fn integral_sums() {
        let grid = TimeGrid::dyadic(1.0, 12).unwrap();
        let w = simulate_brownian(&grid, 5);
        let zero = StepPath::constant(grid.clone(), &[0.0]).unwrap();
        let one = StepPath::constant(grid.clone(), &[1.0]).unwrap();
        assert_eq!(ito_sum(&zero, &w, 0.0, 1.0).unwrap(), 0.0);
        let tele = ito_sum(&one, &w, 0.25, 0.75).unwrap();
        let dw = w.scalar_at(0.75).unwrap() - w.scalar_at(0.25).unwrap();
        assert!((tele - dw).abs() < 1e-12);

        let s = StepPath::scalar(grid.clone(), grid.points().to_vec()).unwrap();
        assert!((lebesgue_sum(&s, 0.0, 1.0).unwrap() - 0.5).abs() < 2e-4);
        let c = StepPath::constant(grid.clone(), &[2.5]).unwrap();
        assert!((lebesgue_sum(&c, 0.25, 0.75).unwrap() - 1.25).abs() < 1e-12);

        let n = StepPath::from_jumps(grid.clone(), 0.0, &[(0.5, 1.0)]).unwrap();
        assert_eq!(jump_sum(&c, &n, 0.0, 1.0).unwrap(), 2.5);
        assert_eq!(jump_sum(&c, &zero, 0.0, 1.0).unwrap(), 0.0);
        assert!(ito_sum(&one, &w, 0.0, 1.5).is_err());
    }

    #[test]
    fn ito_integral_of_brownian_motion() {
        let grid = TimeGrid::dyadic(1.0, 14).unwrap();
        let w = simulate_brownian(&grid, 9);
        let sum = ito_sum(&w, &w, 0.0, 1.0).unwrap();
        let w1 = w.scalar_at(1.0).unwrap();
        assert!((sum - (w1 * w1 - 1.0) / 2.0).abs() < 5e-2);
    }
}
