//! Revaluation surfaces `U(t_1, ..., t_m) = ρ(X_1^{t_1}, ..., X_m^{t_m})`.
//!
//! Closed-form surfaces read the simulated layout: every component carries its
//! observation clock in coordinate 0, so the value depends only on the stopped paths
//! and stays meaningful for delayed bases.

use std::sync::Arc;

use crate::stochastics::{ModelParams, StepRate};
use crate::timepaths::{PathError, RiskBasis, StepPath, TIME_TOL};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SurfaceError {
    #[error("surface value is not finite at times {times:?}")]
    NonFinite { times: Vec<f64> },
    #[error(transparent)]
    Path(#[from] PathError),
    #[error("basis layout: {0}")]
    Layout(String),
}

pub trait RevaluationSurface: Send + Sync {
    fn label(&self) -> &str;

    /// Number of basis components `m`.
    fn components(&self) -> usize;

    /// Contract maturity `T`; the surface is constant in each `t_i >= T`.
    fn maturity(&self) -> f64;

    fn evaluate(&self, basis: &RiskBasis, times: &[f64]) -> Result<f64, SurfaceError>;

    /// `R(t) = U(t, ..., t)`.
    fn diagonal(&self, basis: &RiskBasis, t: f64) -> Result<f64, SurfaceError> {
        self.evaluate(basis, &vec![t; self.components()])
    }
}

fn finite(value: f64, times: &[f64]) -> Result<f64, SurfaceError> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(SurfaceError::NonFinite {
            times: times.to_vec(),
        })
    }
}

/// Clock and values of a clocked component at `t`, restricted to information up to `maturity`.
fn observed(path: &StepPath, t: f64, maturity: f64) -> Result<(f64, &[f64]), PathError> {
    let mut k = path.grid().index_at(t)?;
    if path.row(k)[0] > maturity + TIME_TOL {
        let (mut lo, mut hi) = (0, k);
        while lo < hi {
            let mid = (lo + hi).div_ceil(2);
            if path.row(mid)[0] <= maturity + TIME_TOL {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        k = lo;
    }
    let row = path.row(k);
    Ok((row[0].min(maturity), &row[1..]))
}

fn check_layout(basis: &RiskBasis, times: &[f64], policies: usize) -> Result<(), SurfaceError> {
    if basis.m() != 2 || times.len() != 2 {
        return Err(SurfaceError::Layout(format!(
            "expected 2 components and 2 times, got {} and {}",
            basis.m(),
            times.len()
        )));
    }
    if basis.component(0).dim() != 2 || basis.component(1).dim() != policies + 1 {
        return Err(SurfaceError::Layout(format!(
            "expected component dimensions 2 and {}, got {} and {}",
            policies + 1,
            basis.component(0).dim(),
            basis.component(1).dim()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone)]
struct Portfolio {
    total_premium: f64,
    benefits: Vec<f64>,
}

impl Portfolio {
    fn new(params: &ModelParams) -> Self {
        Self {
            total_premium: params.total_premium(),
            benefits: params.policies.iter().map(|p| p.benefit).collect(),
        }
    }
}

/// `Σp - Σ_j b_j g(c1) q_j(c2) I_j(c2)` with `g = e^{-(T-c1)(drift-σ²)} / κ(c1)`.
#[derive(Debug, Clone)]
struct ExpectationPart {
    portfolio: Portfolio,
    hazards: Vec<StepRate>,
    drift: f64,
    sigma: f64,
    maturity: f64,
}

struct Inputs {
    c1: f64,
    c2: f64,
    kappa: f64,
    alive: Vec<bool>,
}

impl ExpectationPart {
    fn inputs(&self, basis: &RiskBasis, times: &[f64]) -> Result<Inputs, SurfaceError> {
        check_layout(basis, times, self.hazards.len())?;
        let (c1, x1) = observed(basis.component(0), times[0], self.maturity)?;
        let (c2, n) = observed(basis.component(1), times[1], self.maturity)?;
        Ok(Inputs {
            c1,
            c2,
            kappa: (x1[0] - 0.5 * self.sigma * self.sigma * c1).exp(),
            alive: n.iter().map(|&x| x < 0.5).collect(),
        })
    }

    fn q(&self, j: usize, c2: f64) -> f64 {
        (-self.hazards[j].integral(c2, self.maturity)).exp()
    }

    fn g(&self, inp: &Inputs) -> f64 {
        let s2 = self.sigma * self.sigma;
        (-(self.maturity - inp.c1) * (self.drift - s2)).exp() / inp.kappa
    }

    fn value(&self, inp: &Inputs) -> f64 {
        let g = self.g(inp);
        let liability: f64 = (0..self.hazards.len())
            .filter(|&j| inp.alive[j])
            .map(|j| self.portfolio.benefits[j] * g * self.q(j, inp.c2))
            .sum();
        self.portfolio.total_premium - liability
    }

    /// `Σ_ij b_i b_j q_i I_i I_j (e^{(T-c1)σ²} q_j^{1(i≠j)} - q_j) / (K(c1)² κ(c1)²)`, floored at 0.
    fn variance(&self, inp: &Inputs) -> f64 {
        let s2 = self.sigma * self.sigma;
        let growth = ((self.maturity - inp.c1) * s2).exp();
        let g = self.g(inp);
        let alive: Vec<usize> = (0..self.hazards.len()).filter(|&j| inp.alive[j]).collect();
        let q: Vec<f64> = (0..self.hazards.len()).map(|j| self.q(j, inp.c2)).collect();
        let b = &self.portfolio.benefits;
        let mut v = 0.0;
        for &i in &alive {
            for &j in &alive {
                let cross = if i == j { growth - q[j] } else { growth * q[j] - q[j] };
                v += b[i] * b[j] * q[i] * cross;
            }
        }
        (v * g * g).max(0.0)
    }
}

/// Market-consistent value under the valuation measure (drift `mu`, intensities `hazard_q`).
#[derive(Debug, Clone)]
pub struct RiskNeutralSurface {
    part: ExpectationPart,
}

impl RiskNeutralSurface {
    pub fn new(params: &ModelParams) -> Self {
        Self {
            part: ExpectationPart {
                portfolio: Portfolio::new(params),
                hazards: params.policies.iter().map(|p| p.hazard_q.clone()).collect(),
                drift: params.mu,
                sigma: params.sigma,
                maturity: params.maturity,
            },
        }
    }
}

impl RevaluationSurface for RiskNeutralSurface {
    fn label(&self) -> &str {
        "risk-neutral"
    }

    fn components(&self) -> usize {
        2
    }

    fn maturity(&self) -> f64 {
        self.part.maturity
    }

    fn evaluate(&self, basis: &RiskBasis, times: &[f64]) -> Result<f64, SurfaceError> {
        let inp = self.part.inputs(basis, times)?;
        finite(self.part.value(&inp), times)
    }
}

/// Real-world expectation (drift `r`, intensities `hazard`) plus `α` times the conditional standard deviation.
#[derive(Debug, Clone)]
pub struct StdDevSurface {
    part: ExpectationPart,
    alpha: f64,
}

impl StdDevSurface {
    pub fn new(params: &ModelParams) -> Self {
        Self {
            part: ExpectationPart {
                portfolio: Portfolio::new(params),
                hazards: params.policies.iter().map(|p| p.hazard.clone()).collect(),
                drift: params.r,
                sigma: params.sigma,
                maturity: params.maturity,
            },
            alpha: params.alpha,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Conditional variance `v(t_1, t_2)` of the discounted liability.
    pub fn variance(&self, basis: &RiskBasis, times: &[f64]) -> Result<f64, SurfaceError> {
        let inp = self.part.inputs(basis, times)?;
        finite(self.part.variance(&inp), times)
    }
}

impl RevaluationSurface for StdDevSurface {
    fn label(&self) -> &str {
        "std-dev"
    }

    fn components(&self) -> usize {
        2
    }

    fn maturity(&self) -> f64 {
        self.part.maturity
    }

    fn evaluate(&self, basis: &RiskBasis, times: &[f64]) -> Result<f64, SurfaceError> {
        let inp = self.part.inputs(basis, times)?;
        let e = self.part.value(&inp);
        if self.alpha == 0.0 {
            return finite(e, times);
        }
        finite(e + self.alpha * self.part.variance(&inp).sqrt(), times)
    }
}

/// Reserve on the technical basis `(φ*, λ*)`, driven by `X_1 = Φ - Φ*` and `X_2 = N - Λ*`.
#[derive(Debug, Clone)]
pub struct FirstOrderSurface {
    portfolio: Portfolio,
    hazards_star: Vec<StepRate>,
    phi_star_total: f64,
    maturity: f64,
}

impl FirstOrderSurface {
    pub fn new(params: &ModelParams) -> Self {
        Self {
            portfolio: Portfolio::new(params),
            hazards_star: params.policies.iter().map(|p| p.hazard_star.clone()).collect(),
            phi_star_total: params.phi_star.cumulative(params.maturity),
            maturity: params.maturity,
        }
    }
}

impl RevaluationSurface for FirstOrderSurface {
    fn label(&self) -> &str {
        "first-order"
    }

    fn components(&self) -> usize {
        2
    }

    fn maturity(&self) -> f64 {
        self.maturity
    }

    fn evaluate(&self, basis: &RiskBasis, times: &[f64]) -> Result<f64, SurfaceError> {
        check_layout(basis, times, self.hazards_star.len())?;
        let (_, x1) = observed(basis.component(0), times[0], self.maturity)?;
        let (c2, x2) = observed(basis.component(1), times[1], self.maturity)?;
        let discount = (-self.phi_star_total - x1[0]).exp();
        let liability: f64 = self
            .hazards_star
            .iter()
            .enumerate()
            .filter(|(j, rate)| x2[*j] + rate.cumulative(c2) < 0.5)
            .map(|(j, rate)| self.portfolio.benefits[j] * (-rate.integral(c2, self.maturity)).exp() * discount)
            .sum();
        finite(self.portfolio.total_premium - liability, times)
    }
}

pub type Functional = Arc<dyn Fn(&RiskBasis) -> f64 + Send + Sync>;

/// `U(t) = F(X^{t})` for an arbitrary functional of the stopped basis.
#[derive(Clone)]
pub struct BlackBoxSurface {
    label: String,
    m: usize,
    horizon: f64,
    functional: Functional,
}

impl std::fmt::Debug for BlackBoxSurface {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BlackBoxSurface")
            .field("label", &self.label)
            .field("m", &self.m)
            .field("horizon", &self.horizon)
            .finish_non_exhaustive()
    }
}

impl BlackBoxSurface {
    pub fn new(label: impl Into<String>, m: usize, horizon: f64, functional: Functional) -> Self {
        Self {
            label: label.into(),
            m,
            horizon,
            functional,
        }
    }

    /// Sum of the terminal first coordinates.
    pub fn additive(m: usize, horizon: f64) -> Self {
        Self::new(
            "additive",
            m,
            horizon,
            Arc::new(|b: &RiskBasis| b.components().iter().map(terminal).sum()),
        )
    }

    /// Product of the terminal first coordinates.
    pub fn product(m: usize, horizon: f64) -> Self {
        Self::new(
            "product",
            m,
            horizon,
            Arc::new(|b: &RiskBasis| b.components().iter().map(terminal).product()),
        )
    }
}

fn terminal(path: &StepPath) -> f64 {
    path.row(path.grid().len() - 1)[0]
}

impl RevaluationSurface for BlackBoxSurface {
    fn label(&self) -> &str {
        &self.label
    }

    fn components(&self) -> usize {
        self.m
    }

    fn maturity(&self) -> f64 {
        self.horizon
    }

    fn evaluate(&self, basis: &RiskBasis, times: &[f64]) -> Result<f64, SurfaceError> {
        if basis.m() != self.m {
            return Err(SurfaceError::Layout(format!(
                "expected {} components, got {}",
                self.m,
                basis.m()
            )));
        }
        let clamped: Vec<f64> = times.iter().map(|&t| t.min(self.horizon)).collect();
        let stopped = basis.stop_multi(&clamped)?;
        finite((self.functional)(&stopped), times)
    }
}

pub fn surface_risk_neutral(params: &ModelParams) -> RiskNeutralSurface {
    RiskNeutralSurface::new(params)
}

pub fn surface_std_dev(params: &ModelParams) -> StdDevSurface {
    StdDevSurface::new(params)
}

pub fn surface_first_order(params: &ModelParams) -> FirstOrderSurface {
    FirstOrderSurface::new(params)
}

pub fn surface_black_box(m: usize, horizon: f64, functional: Functional) -> BlackBoxSurface {
    BlackBoxSurface::new("black-box", m, horizon, functional)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stochastics::{simulate_basis, Measure, Policy};
    use crate::timepaths::TimeGrid;

    fn single(sigma: f64, hazard: f64, alpha: f64) -> ModelParams {
        ModelParams {
            mu: 0.0,
            r: 0.0,
            sigma,
            maturity: 1.0,
            alpha,
            phi: StepRate::Constant(0.0),
            phi_star: StepRate::Constant(0.0),
            policies: vec![Policy {
                premium: 1.0,
                benefit: 1.0,
                hazard: StepRate::Constant(hazard),
                hazard_q: StepRate::Constant(hazard),
                hazard_star: StepRate::Constant(hazard),
            }],
        }
    }

    /// Market layout with one policy that dies at `death` (if any).
    fn manual_basis(grid: &TimeGrid, phi: impl Fn(f64) -> f64, deaths: &[Option<f64>]) -> RiskBasis {
        let mut c0 = Vec::new();
        let mut c1 = Vec::new();
        for &t in grid.points() {
            c0.extend([t, phi(t)]);
            c1.push(t);
            c1.extend(deaths.iter().map(|d| d.map_or(0.0, |d| if t >= d { 1.0 } else { 0.0 })));
        }
        RiskBasis::unlabelled(vec![
            StepPath::new(grid.clone(), 2, c0).unwrap(),
            StepPath::new(grid.clone(), deaths.len() + 1, c1).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn risk_neutral_initial_value() {
        let grid = TimeGrid::dyadic(1.0, 4).unwrap();
        let basis = manual_basis(&grid, |_| 0.0, &[None]);
        let u = RiskNeutralSurface::new(&single(0.0, 0.1, 0.0)).evaluate(&basis, &[0.0, 0.0]).unwrap();
        assert!((u - (1.0 - (-0.1f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn std_dev_without_volatility_is_bernoulli() {
        let grid = TimeGrid::dyadic(1.0, 4).unwrap();
        let basis = manual_basis(&grid, |_| 0.0, &[None]);
        let s = StdDevSurface::new(&single(0.0, 0.1, 0.5));
        let q = (-0.1f64 * 0.5).exp();
        let v = s.variance(&basis, &[0.5, 0.5]).unwrap();
        assert!((v - q * (1.0 - q)).abs() < 1e-15);
        let u = s.evaluate(&basis, &[0.5, 0.5]).unwrap();
        assert!((u - (1.0 - q + 0.5 * (q * (1.0 - q)).sqrt())).abs() < 1e-15);
    }

    #[test]
    fn std_dev_with_everyone_dead() {
        let grid = TimeGrid::dyadic(1.0, 4).unwrap();
        let mut p = single(0.2, 0.1, 0.5);
        p.policies.push(p.policies[0].clone());
        let basis = manual_basis(&grid, |t| 0.1 * t, &[Some(0.25), Some(0.5)]);
        let s = StdDevSurface::new(&p);
        assert_eq!(s.variance(&basis, &[0.75, 0.75]).unwrap(), 0.0);
        assert_eq!(s.evaluate(&basis, &[0.75, 0.75]).unwrap(), 2.0);
    }

    #[test]
    fn zero_alpha_matches_risk_neutral_with_real_world_inputs() {
        let grid = TimeGrid::dyadic(1.0, 6).unwrap();
        let mut p = single(0.2, 0.4, 0.0);
        p.r = 0.03;
        p.mu = 0.03;
        let sim = simulate_basis(&p, &grid, 5, Measure::P);
        let a = StdDevSurface::new(&p);
        let b = RiskNeutralSurface::new(&p);
        for &t1 in grid.points() {
            for &t2 in grid.points().iter().step_by(7) {
                let x = a.evaluate(&sim.basis, &[t1, t2]).unwrap();
                let y = b.evaluate(&sim.basis, &[t1, t2]).unwrap();
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn killing_a_policy_releases_its_liability() {
        let grid = TimeGrid::dyadic(1.0, 4).unwrap();
        let mut p = single(0.2, 0.3, 0.0);
        p.mu = 0.05;
        p.policies.push(Policy { benefit: 2.0, ..p.policies[0].clone() });
        let alive = manual_basis(&grid, |t| 0.05 * t, &[None, None]);
        let dead = manual_basis(&grid, |t| 0.05 * t, &[None, Some(0.5)]);
        let s = RiskNeutralSurface::new(&p);
        let (t1, t2) = (0.25, 0.5);
        let jump = s.evaluate(&dead, &[t1, t2]).unwrap() - s.evaluate(&alive, &[t1, t2]).unwrap();
        let kappa = (0.05 * t1 - 0.5 * 0.04 * t1).exp();
        let expected = 2.0 * (-(1.0 - t1) * (0.05 - 0.04)).exp() / kappa * (-0.3 * (1.0 - t2)).exp();
        assert!((jump - expected).abs() < 1e-14, "{jump} vs {expected}");
    }

    #[test]
    fn first_order_survivor() {
        let grid = TimeGrid::dyadic(1.0, 4).unwrap();
        let mut p = single(0.0, 0.0, 0.0);
        p.policies[0].hazard_star = StepRate::Constant(0.1);
        let sim = simulate_basis(&p, &grid, 1, Measure::FirstOrder);
        let s = FirstOrderSurface::new(&p);
        for &t in grid.points() {
            let u = s.diagonal(&sim.basis, t).unwrap();
            assert!((u - (1.0 - (-0.1 * (1.0 - t)).exp())).abs() < 1e-15);
        }
    }

    #[test]
    fn first_order_initial_value_and_death() {
        let grid = TimeGrid::dyadic(1.0, 4).unwrap();
        let mut p = single(0.0, 50.0, 0.0);
        p.phi_star = StepRate::Constant(0.02);
        p.phi = StepRate::Constant(0.04);
        p.policies[0].hazard_star = StepRate::Constant(0.1);
        let sim = simulate_basis(&p, &grid, 2, Measure::FirstOrder);
        assert!(sim.deaths.death_index[0].is_some());
        let s = FirstOrderSurface::new(&p);
        let r0 = s.evaluate(&sim.basis, &[0.0, 0.0]).unwrap();
        assert!((r0 - (1.0 - (-0.02f64).exp() * (-0.1f64).exp())).abs() < 1e-15);
        assert_eq!(s.evaluate(&sim.basis, &[0.0, 1.0]).unwrap(), 1.0);
    }

    #[test]
    fn horizon_constancy() {
        let grid = TimeGrid::dyadic(2.0, 6).unwrap();
        let mut p = single(0.2, 0.5, 0.3);
        p.policies.push(p.policies[0].clone());
        let sim = simulate_basis(&p, &grid, 8, Measure::P);
        let s = StdDevSurface::new(&p);
        let at_t = s.evaluate(&sim.basis, &[1.0, 1.0]).unwrap();
        for times in [[1.5, 1.0], [1.0, 2.0], [2.0, 1.25]] {
            assert_eq!(s.evaluate(&sim.basis, &times).unwrap(), at_t);
        }
    }

    #[test]
    fn black_box_sum_product_and_errors() {
        let grid = TimeGrid::dyadic(1.0, 3).unwrap();
        let x1 = StepPath::from_jumps(grid.clone(), 1.0, &[(0.25, 2.0)]).unwrap();
        let x2 = StepPath::from_jumps(grid.clone(), 1.0, &[(0.75, 3.0)]).unwrap();
        let basis = RiskBasis::unlabelled(vec![x1, x2]).unwrap();
        let add = BlackBoxSurface::additive(2, 1.0);
        let mul = BlackBoxSurface::product(2, 1.0);
        assert_eq!(add.evaluate(&basis, &[0.5, 0.5]).unwrap(), 3.0);
        assert_eq!(add.evaluate(&basis, &[1.0, 1.0]).unwrap(), 5.0);
        assert_eq!(mul.evaluate(&basis, &[1.0, 0.5]).unwrap(), 2.0);
        assert_eq!(mul.evaluate(&basis, &[1.0, 1.0]).unwrap(), 6.0);

        let nan = surface_black_box(2, 1.0, Arc::new(|_| f64::NAN));
        assert!(matches!(nan.evaluate(&basis, &[0.0, 0.0]), Err(SurfaceError::NonFinite { .. })));
        assert!(BlackBoxSurface::additive(3, 1.0).evaluate(&basis, &[0.0; 3]).is_err());
    }
}
