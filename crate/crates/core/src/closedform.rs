//! Pathwise closed-form infinitesimal decompositions, used as oracles for the SU engine.
//!
//! Each oracle is a left-point Stieltjes sum on the simulation grid. Brownian integrals
//! use the second-order (Milstein) correction because every Brownian integrand here
//! satisfies `df = -σ f dW + (..) dt`; without it the sum carries an `O(√Δ)` pathwise bias.

use crate::decomposition::{Decomposition, DecompositionError, Provenance};
use crate::stochastics::integrals::{cumulative_sum, increments};
use crate::stochastics::{compensator, Measure, ModelParams, SimulatedBasis, StepRate};
use crate::timepaths::TimeGrid;

/// Per-grid-point kernels of the expectation and variance formulas for one realisation.
#[derive(Debug, Clone)]
pub struct KernelSet {
    maturity: f64,
    benefits: Vec<f64>,
    /// `g = e^{-(T-s)(drift-σ²)} / κ(s) = 1 / (K κ)`.
    g: Vec<f64>,
    /// `e^{(T-s)σ²}`.
    growth: Vec<f64>,
    /// `q[j][k] = e^{-∫_{s_k}^T λ_j}`.
    q: Vec<Vec<f64>>,
    alive: Vec<Vec<bool>>,
    /// Last grid index not after maturity.
    last: usize,
}

impl KernelSet {
    pub fn new(params: &ModelParams, sim: &SimulatedBasis, drift: f64, hazards: &[&StepRate]) -> Self {
        let grid = sim.grid();
        let t_mat = params.maturity;
        let sigma = params.sigma;
        let s2 = sigma * sigma;
        let clamp = |s: f64| s.min(t_mat);
        let g = grid
            .points()
            .iter()
            .zip(sim.kappa.values())
            .map(|(&s, &kappa)| (-(t_mat - clamp(s)) * (drift - s2)).exp() / kappa)
            .collect();
        let growth = grid.points().iter().map(|&s| ((t_mat - clamp(s)) * s2).exp()).collect();
        let q = hazards
            .iter()
            .map(|rate| {
                grid.points()
                    .iter()
                    .map(|&s| (-rate.integral(clamp(s), t_mat)).exp())
                    .collect()
            })
            .collect();
        let alive = (0..hazards.len())
            .map(|j| (0..grid.len()).map(|k| sim.deaths.alive(j, k)).collect())
            .collect();
        Self {
            maturity: t_mat,
            benefits: params.policies.iter().map(|p| p.benefit).collect(),
            g,
            growth,
            q,
            alive,
            last: grid.index_at(t_mat.min(grid.horizon())).expect("maturity is non-negative"),
        }
    }

    pub fn maturity(&self) -> f64 {
        self.maturity
    }

    pub fn n_policies(&self) -> usize {
        self.q.len()
    }

    pub fn g(&self, k: usize) -> f64 {
        self.g[k]
    }

    /// `K(s) κ(s) = 1 / g(s)`.
    pub fn k_kappa(&self, k: usize) -> f64 {
        1.0 / self.g[k]
    }

    pub fn q(&self, j: usize, k: usize) -> f64 {
        self.q[j][k]
    }

    pub fn alive(&self, j: usize, k: usize) -> bool {
        self.alive[j][k]
    }

    /// `Υ_ij(s) = e^{(T-s)σ²} / q_j(s)^{1(i=j)}`.
    pub fn upsilon(&self, i: usize, j: usize, k: usize) -> f64 {
        if i == j {
            self.growth[k] / self.q[j][k]
        } else {
            self.growth[k]
        }
    }

    /// Variance with the Brownian factor at `kb`, deterministic factors at `kt` and survival at `ks`.
    fn variance_mixed(&self, kb: usize, kt: usize, ks: usize) -> f64 {
        let n = self.n_policies();
        let mut v = 0.0;
        for i in (0..n).filter(|&i| self.alive[i][ks]) {
            for j in (0..n).filter(|&j| self.alive[j][ks]) {
                v += self.benefits[i] * self.benefits[j] * self.q[i][kt] * self.q[j][kt] * (self.upsilon(i, j, kt) - 1.0);
            }
        }
        (v * self.g[kb] * self.g[kb]).max(0.0)
    }

    /// `v(s) = Σ_ij b_i b_j I_i I_j q_i q_j (Υ_ij - 1) / (K κ)²`.
    pub fn variance(&self, k: usize) -> f64 {
        self.variance_mixed(k, k, k)
    }

    pub fn std_dev(&self, k: usize) -> f64 {
        self.variance(k).sqrt()
    }

    /// `Ψ_ij(s) = I_i I_j q_i q_j / ((K κ)² V(s))`, zero where `V = 0`.
    pub fn psi(&self, i: usize, j: usize, k: usize) -> f64 {
        self.psi_given(i, j, k, self.std_dev(k))
    }

    fn psi_given(&self, i: usize, j: usize, k: usize, v: f64) -> f64 {
        if v == 0.0 || !(self.alive[i][k] && self.alive[j][k]) {
            return 0.0;
        }
        self.q[i][k] * self.q[j][k] * self.g[k] * self.g[k] / v
    }

    /// `Σp - Σ_j b_j I_j q_j g` at grid index `k`.
    pub fn expectation(&self, total_premium: f64, k: usize) -> f64 {
        let liability: f64 = (0..self.n_policies())
            .filter(|&j| self.alive[j][k])
            .map(|j| self.benefits[j] * self.g[k] * self.q[j][k])
            .sum();
        total_premium - liability
    }
}

fn window_end(grid: &TimeGrid, maturity: f64) -> usize {
    grid.index_at(maturity.min(grid.horizon())).expect("maturity is non-negative")
}

/// Weights `ΔW - σ (ΔW² - Δs) / 2` up to maturity, zero afterwards.
fn milstein_weights(sim: &SimulatedBasis, sigma: f64, last: usize) -> Vec<f64> {
    let dw = increments(sim.w.values());
    let ds = increments(sim.grid().points());
    dw.iter()
        .zip(&ds)
        .enumerate()
        .map(|(k, (w, s))| if k < last { w - 0.5 * sigma * (w * w - s) } else { 0.0 })
        .collect()
}

fn truncated(mut v: Vec<f64>, last: usize) -> Vec<f64> {
    v.iter_mut().skip(last).for_each(|x| *x = 0.0);
    v
}

fn oracle_decomposition(
    sim: &SimulatedBasis,
    label: &str,
    d1: Vec<f64>,
    d2: Vec<f64>,
    revaluation: Vec<f64>,
) -> Result<Decomposition, DecompositionError> {
    Ok(Decomposition::new(
        sim.grid(),
        vec![d1, d2],
        revaluation,
        sim.basis.labels().to_vec(),
        Provenance {
            surface: label.to_string(),
            partition: "simulation grid".into(),
            order: "closed-form".into(),
            delay: "none".into(),
        },
    )?)
}

/// Expectation-part oracle: investment and mortality increments of `Σp - Σ b_j I_j q_j g`.
fn expectation_oracle(
    params: &ModelParams,
    sim: &SimulatedBasis,
    kernels: &KernelSet,
    hazards: &[&StepRate],
) -> (Vec<f64>, Vec<f64>) {
    let grid = sim.grid();
    let n = grid.len() - 1;
    let last = kernels.last;
    let sigma = params.sigma;
    let omega = milstein_weights(sim, sigma, last);
    let f_inv: Vec<f64> = (0..n)
        .map(|k| {
            sigma
                * (0..kernels.n_policies())
                    .filter(|&j| kernels.alive(j, k))
                    .map(|j| params.policies[j].benefit * kernels.q(j, k) * kernels.g(k))
                    .sum::<f64>()
        })
        .collect();
    let d1 = cumulative_sum(&f_inv, &omega);

    let comp = compensator(grid, &sim.deaths.death_index, hazards);
    let mut d2 = vec![0.0; n + 1];
    for j in 0..kernels.n_policies() {
        let dn = truncated(increments(&sim.deaths.counting.coordinate(j)), last);
        let dc = truncated(increments(&comp.coordinate(j)), last);
        let h: Vec<f64> = (0..n)
            .map(|k| params.policies[j].benefit * kernels.q(j, k) * kernels.g(k))
            .collect();
        let jumps = cumulative_sum(&h, &dn);
        let drift = cumulative_sum(&h, &dc);
        for k in 0..=n {
            d2[k] += jumps[k] - drift[k];
        }
    }
    (d1, d2)
}

/// Oracle for the risk-neutral surface; uses `mu` and `hazard_q`.
pub fn oracle_risk_neutral(params: &ModelParams, sim: &SimulatedBasis) -> Result<Decomposition, DecompositionError> {
    let hazards = params.hazards(Measure::Q);
    let kernels = KernelSet::new(params, sim, params.mu, &hazards);
    let (d1, d2) = expectation_oracle(params, sim, &kernels, &hazards);
    let r = revaluation_with(params, &kernels, sim.grid());
    oracle_decomposition(sim, "risk-neutral oracle", d1, d2, r)
}

fn revaluation_with(params: &ModelParams, kernels: &KernelSet, grid: &TimeGrid) -> Vec<f64> {
    let last = window_end(grid, params.maturity);
    (0..grid.len())
        .map(|k| kernels.expectation(params.total_premium(), k.min(last)))
        .collect()
}

/// Oracle for the standard-deviation surface; uses `r` and `hazard`.
///
/// Integrands with a `1/V` kernel use the product rule `2 V_k / (V_k + V_{k+1}^-)` on
/// each cell, which is exact when `V²` is linear across the cell; `V_{k+1}^-` keeps the
/// survival state of the left point.
pub fn oracle_std_dev(params: &ModelParams, sim: &SimulatedBasis) -> Result<Decomposition, DecompositionError> {
    let hazards = params.hazards(Measure::P);
    let kernels = KernelSet::new(params, sim, params.r, &hazards);
    let (mut d1, mut d2) = expectation_oracle(params, sim, &kernels, &hazards);
    let grid = sim.grid();
    let mut r = revaluation_with(params, &kernels, grid);
    let alpha = params.alpha;
    if alpha == 0.0 {
        return oracle_decomposition(sim, "std-dev oracle", d1, d2, r);
    }

    let n = grid.len() - 1;
    let last = kernels.last;
    let sigma = params.sigma;
    let s2 = sigma * sigma;
    let b: Vec<f64> = params.policies.iter().map(|p| p.benefit).collect();
    let omega = milstein_weights(sim, sigma, last);
    let ds = truncated(increments(grid.points()), last);
    let comp = compensator(grid, &sim.deaths.death_index, &hazards);
    let dc: Vec<Vec<f64>> = (0..b.len())
        .map(|j| truncated(increments(&comp.coordinate(j)), last))
        .collect();

    let mut f_dw = vec![0.0; n];
    let mut f_ds = vec![0.0; n];
    let mut mort = vec![0.0; n];
    for k in 0..last.min(n) {
        let v = kernels.std_dev(k);
        if v == 0.0 {
            continue;
        }
        let v_next = kernels.variance_mixed(k + 1, k + 1, k).sqrt();
        let weight = 2.0 * v / (v + v_next);
        let mut psi_sum = 0.0;
        let mut psi_c = 0.0;
        for i in 0..b.len() {
            for j in 0..b.len() {
                let psi = kernels.psi_given(i, j, k, v);
                if psi == 0.0 {
                    continue;
                }
                let ups = kernels.upsilon(i, j, k);
                psi_sum += b[i] * b[j] * psi;
                let doubled = if i == j { 1.0 } else { 2.0 };
                psi_c += b[i] * b[j] * psi * (ups * doubled - 2.0) / 2.0 * dc[j][k];
            }
        }
        f_dw[k] = -sigma * v;
        f_ds[k] = -0.5 * s2 * (psi_sum * weight + v);
        let jump = kernels.variance_mixed(k, k, k + 1).sqrt() - v;
        mort[k] = jump + psi_c * weight;
    }
    let ones = vec![1.0; n];
    let e1 = cumulative_sum(&f_dw, &omega);
    let e2 = cumulative_sum(&f_ds, &ds);
    let e3 = cumulative_sum(&mort, &ones);
    for k in 0..=n {
        d1[k] += alpha * (e1[k] + e2[k]);
        d2[k] += alpha * e3[k];
    }
    for (k, rk) in r.iter_mut().enumerate() {
        *rk += alpha * kernels.std_dev(k.min(last));
    }
    oracle_decomposition(sim, "std-dev oracle", d1, d2, r)
}

/// Oracle for the first-order surface on a first-order realisation.
pub fn oracle_first_order(params: &ModelParams, sim: &SimulatedBasis) -> Result<Decomposition, DecompositionError> {
    let grid = sim.grid();
    let n = grid.len() - 1;
    let t_mat = params.maturity;
    let last = window_end(grid, t_mat);
    let pts = grid.points();
    let stars = params.hazards(Measure::FirstOrder);
    // 1 / (κ(s) e^{∫_s^T φ*})
    let discount: Vec<f64> = pts
        .iter()
        .zip(sim.kappa.values())
        .map(|(&s, &kappa)| 1.0 / (kappa * params.phi_star.integral(s.min(t_mat), t_mat).exp()))
        .collect();
    let survival_star = |j: usize, s: f64| (-stars[j].integral(s.min(t_mat), t_mat)).exp();
    let ds = truncated(increments(pts), last);
    let comp = compensator(grid, &sim.deaths.death_index, &stars);

    let mut f1 = vec![0.0; n];
    for (k, f) in f1.iter_mut().enumerate() {
        let spread = params.phi.value(pts[k]) - params.phi_star.value(pts[k]);
        *f = (0..stars.len())
            .filter(|&j| sim.deaths.alive(j, k))
            .map(|j| params.policies[j].benefit * survival_star(j, pts[k]) * discount[k] * spread)
            .sum();
    }
    let d1 = cumulative_sum(&f1, &ds);

    let mut d2 = vec![0.0; n + 1];
    for j in 0..stars.len() {
        let dn = truncated(increments(&sim.deaths.counting.coordinate(j)), last);
        let dc = truncated(increments(&comp.coordinate(j)), last);
        let h: Vec<f64> = (0..n)
            .map(|k| params.policies[j].benefit * survival_star(j, pts[k]) * discount[k])
            .collect();
        let jumps = cumulative_sum(&h, &dn);
        let drift = cumulative_sum(&h, &dc);
        for k in 0..=n {
            d2[k] += jumps[k] - drift[k];
        }
    }
    let r = (0..=n)
        .map(|k| {
            let k = k.min(last);
            let liability: f64 = (0..stars.len())
                .filter(|&j| sim.deaths.alive(j, k))
                .map(|j| params.policies[j].benefit * survival_star(j, pts[k]) * discount[k])
                .sum();
            params.total_premium() - liability
        })
        .collect();
    oracle_decomposition(sim, "first-order oracle", d1, d2, r)
}

/// Direct `ρ(X^t)` at every grid point from the auxiliary paths, for the diagonal identity.
pub fn revaluation_risk_neutral(params: &ModelParams, sim: &SimulatedBasis) -> Vec<f64> {
    let hazards = params.hazards(Measure::Q);
    let kernels = KernelSet::new(params, sim, params.mu, &hazards);
    revaluation_with(params, &kernels, sim.grid())
}

pub fn revaluation_std_dev(params: &ModelParams, sim: &SimulatedBasis) -> Vec<f64> {
    let hazards = params.hazards(Measure::P);
    let kernels = KernelSet::new(params, sim, params.r, &hazards);
    let last = window_end(sim.grid(), params.maturity);
    (0..sim.grid().len())
        .map(|k| {
            let k = k.min(last);
            kernels.expectation(params.total_premium(), k) + params.alpha * kernels.std_dev(k)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::revaluation::{RevaluationSurface, RiskNeutralSurface, StdDevSurface};
    use crate::stochastics::{simulate_basis, Policy};

    fn portfolio(sigma: f64, hazards: [f64; 3], alpha: f64) -> ModelParams {
        let policy = |p: f64, b: f64, l: f64| Policy {
            premium: p,
            benefit: b,
            hazard: StepRate::Constant(l),
            hazard_q: StepRate::Constant(l),
            hazard_star: StepRate::Constant(l),
        };
        ModelParams {
            mu: 0.03,
            r: 0.03,
            sigma,
            maturity: 1.0,
            alpha,
            phi: StepRate::Constant(0.0),
            phi_star: StepRate::Constant(0.0),
            policies: vec![
                policy(0.35, 0.3, hazards[0]),
                policy(0.45, 0.4, hazards[1]),
                policy(0.35, 0.3, hazards[2]),
            ],
        }
    }

    fn grid(level: u32) -> TimeGrid {
        TimeGrid::dyadic(1.0, level).unwrap()
    }

    #[test]
    fn no_volatility_no_investment_component() {
        let p = portfolio(0.0, [0.3, 0.5, 0.8], 0.0);
        let sim = simulate_basis(&p, &grid(8), 4, Measure::Q);
        let d = oracle_risk_neutral(&p, &sim).unwrap();
        assert!(d.component(0).values().iter().all(|&x| x.abs() < 1e-15));
    }

    #[test]
    fn no_mortality_no_mortality_component() {
        let p = portfolio(0.2, [0.0; 3], 0.0);
        let sim = simulate_basis(&p, &grid(8), 4, Measure::Q);
        let d = oracle_risk_neutral(&p, &sim).unwrap();
        assert!(d.component(1).values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn zero_alpha_std_dev_is_the_expectation_oracle() {
        let p = portfolio(0.2, [0.3, 0.5, 0.8], 0.0);
        let sim = simulate_basis(&p, &grid(8), 9, Measure::P);
        let a = oracle_std_dev(&p, &sim).unwrap();
        let b = oracle_risk_neutral(&p, &sim).unwrap();
        for i in 0..2 {
            assert_eq!(a.component(i).values(), b.component(i).values());
        }
    }

    #[test]
    fn matching_interest_rates_leave_no_investment_component() {
        let mut p = portfolio(0.0, [0.2, 0.4, 0.6], 0.0);
        p.phi = StepRate::Constant(0.02);
        p.phi_star = StepRate::Constant(0.02);
        let sim = simulate_basis(&p, &grid(8), 1, Measure::FirstOrder);
        let d = oracle_first_order(&p, &sim).unwrap();
        assert!(d.component(0).values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn kernel_bounds() {
        let p = portfolio(0.25, [0.4, 0.6, 0.9], 0.5);
        let sim = simulate_basis(&p, &grid(8), 12, Measure::P);
        let hazards = p.hazards(Measure::P);
        let k = KernelSet::new(&p, &sim, p.r, &hazards);
        for s in 0..sim.grid().len() {
            for i in 0..3 {
                for j in 0..3 {
                    assert!(k.upsilon(i, j, s) >= 1.0);
                    let psi = k.psi(i, j, s);
                    assert!(psi >= 0.0 && psi.is_finite());
                }
            }
        }
    }

    #[test]
    fn diagonal_identity() {
        let p = portfolio(0.2, [0.3, 0.5, 0.8], 0.5);
        let g = grid(8);
        let q = simulate_basis(&p, &g, 21, Measure::Q);
        let direct = revaluation_risk_neutral(&p, &q);
        let surface = RiskNeutralSurface::new(&p);
        for (k, &t) in g.points().iter().enumerate() {
            let u = surface.diagonal(&q.basis, t).unwrap();
            assert!((u - direct[k]).abs() <= 1e-12 * u.abs().max(1e-300));
        }
        let sp = simulate_basis(&p, &g, 21, Measure::P);
        let direct = revaluation_std_dev(&p, &sp);
        let surface = StdDevSurface::new(&p);
        for (k, &t) in g.points().iter().enumerate() {
            let u = surface.diagonal(&sp.basis, t).unwrap();
            assert!((u - direct[k]).abs() <= 1e-12 * u.abs().max(1e-300));
        }
    }

    /// `max_t |D_1 + D_2 - (R(t) - R(0))|` of an oracle decomposition.
    fn additivity_gap(d: &Decomposition) -> f64 {
        let r0 = d.revaluation(0.0).unwrap();
        d.times()
            .iter()
            .map(|&t| (d.value(0, t).unwrap() + d.value(1, t).unwrap() - (d.revaluation(t).unwrap() - r0)).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn oracle_additivity_within_mesh_tolerance() {
        let p = portfolio(0.2, [0.3, 0.5, 0.8], 0.5);
        for seed in 0..8 {
            let level = 12;
            let c = 1.0;
            let tol = c * (0.5f64).powi(level as i32).sqrt();
            let q = simulate_basis(&p, &grid(level), seed, Measure::Q);
            assert!(additivity_gap(&oracle_risk_neutral(&p, &q).unwrap()) < tol);
            let sp = simulate_basis(&p, &grid(level), seed, Measure::P);
            assert!(additivity_gap(&oracle_std_dev(&p, &sp).unwrap()) < tol);
        }
        let mut fo = portfolio(0.0, [0.3, 0.5, 0.8], 0.0);
        fo.phi = StepRate::Constant(0.04);
        fo.phi_star = StepRate::Constant(0.01);
        let sim = simulate_basis(&fo, &grid(12), 3, Measure::FirstOrder);
        assert!(additivity_gap(&oracle_first_order(&fo, &sim).unwrap()) < (0.5f64).powi(12));
    }
}
