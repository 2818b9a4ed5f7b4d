use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};

use super::{Measure, ModelParams, StepRate};
use crate::timepaths::{PathError, RiskBasis, StepPath, TimeGrid};

const BROWNIAN_STREAM: u64 = 0;
const DEATH_STREAM_BASE: u64 = 1;
const MAX_COLLISION_RETRIES: u64 = 10_000;

/// Independent ChaCha stream `stream` of generator `seed`.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Seed of the `index`-th Monte Carlo path.
pub fn path_seed(base: u64, index: u64) -> u64 {
    base ^ index
}

/// Brownian motion on the grid.
pub fn simulate_brownian(grid: &TimeGrid, seed: u64) -> StepPath {
    let mut rng = substream(seed, BROWNIAN_STREAM);
    let pts = grid.points();
    let mut w = Vec::with_capacity(pts.len());
    w.push(0.0);
    for k in 1..pts.len() {
        let z: f64 = rng.sample(StandardNormal);
        w.push(w[k - 1] + (pts[k] - pts[k - 1]).sqrt() * z);
    }
    StepPath::scalar(grid.clone(), w).expect("one value per grid point")
}

/// `(Φ, W)`: `Φ = drift·t + σW` with drift `r` under P and `mu` under Q;
/// under the first-order measure `Φ = ∫ φ` and `W` is still returned.
pub fn simulate_phi(params: &ModelParams, grid: &TimeGrid, seed: u64, measure: Measure) -> (StepPath, StepPath) {
    let w = if params.sigma == 0.0 {
        StepPath::constant(grid.clone(), &[0.0]).expect("non-empty grid")
    } else {
        simulate_brownian(grid, seed)
    };
    let phi: Vec<f64> = match measure {
        Measure::FirstOrder => grid.points().iter().map(|&t| params.phi.cumulative(t)).collect(),
        Measure::P | Measure::Q => {
            let drift = if measure == Measure::Q { params.mu } else { params.r };
            grid.points()
                .iter()
                .zip(w.values())
                .map(|(&t, &wt)| drift * t + params.sigma * wt)
                .collect()
        }
    };
    (StepPath::scalar(grid.clone(), phi).expect("one value per grid point"), w)
}

/// `κ(t) = exp(Φ(t) - σ² t / 2)`.
pub fn kappa_from_phi(phi: &StepPath, sigma: f64) -> StepPath {
    let values = phi
        .grid()
        .points()
        .iter()
        .zip(phi.values())
        .map(|(&t, &p)| (p - 0.5 * sigma * sigma * t).exp())
        .collect();
    StepPath::scalar(phi.grid().clone(), values).expect("one value per grid point")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Deaths {
    /// Grid index of each death, `None` for survivors.
    pub death_index: Vec<Option<usize>>,
    /// `N_j` as a `J`-dimensional path.
    pub counting: StepPath,
    /// `C_j(t) = ∫_0^t I_j(s-) λ_j(s) ds` under the simulation measure, left-point.
    pub compensator: StepPath,
}

impl Deaths {
    pub fn n_policies(&self) -> usize {
        self.death_index.len()
    }

    /// `I_j` at grid index `k`.
    pub fn alive(&self, j: usize, k: usize) -> bool {
        self.death_index[j].is_none_or(|d| k < d)
    }

    pub fn survival(&self, j: usize) -> Vec<f64> {
        (0..self.counting.grid().len())
            .map(|k| if self.alive(j, k) { 1.0 } else { 0.0 })
            .collect()
    }

    pub fn counting_of(&self, j: usize) -> StepPath {
        StepPath::scalar(self.counting.grid().clone(), self.counting.coordinate(j))
            .expect("one value per grid point")
    }
}

/// Left-point compensator `Σ I_j(s_k) ∫_{s_k}^{s_{k+1}} λ_j` for given death indices.
pub fn compensator(grid: &TimeGrid, death_index: &[Option<usize>], hazards: &[&StepRate]) -> StepPath {
    let j_count = death_index.len();
    let pts = grid.points();
    let mut values = vec![0.0; pts.len() * j_count];
    for (j, (&death, rate)) in death_index.iter().zip(hazards).enumerate() {
        let mut acc = 0.0;
        for k in 1..pts.len() {
            if death.is_none_or(|d| k - 1 < d) {
                acc += rate.integral(pts[k - 1], pts[k]);
            }
            values[k * j_count + j] = acc;
        }
    }
    StepPath::new(grid.clone(), j_count, values).expect("one row per grid point")
}

/// Death times by inverse-hazard sampling, snapped to the next grid point.
/// Two deaths on the same grid point are resolved by redrawing the later policy.
pub fn simulate_deaths(params: &ModelParams, grid: &TimeGrid, seed: u64, measure: Measure) -> Deaths {
    let hazards = params.hazards(measure);
    let horizon = grid.horizon();
    let mut death_index: Vec<Option<usize>> = Vec::with_capacity(hazards.len());
    for (j, rate) in hazards.iter().enumerate() {
        let mut attempt = 0u64;
        let index = loop {
            let mut rng = substream(seed, DEATH_STREAM_BASE + j as u64 + (attempt << 32));
            let e: f64 = rng.sample(Exp1);
            let candidate = rate
                .inverse_cumulative(e)
                .filter(|&t| t <= horizon)
                .and_then(|t| grid.index_ceil(t))
                .map(|k| k.max(1));
            let collides = candidate.is_some() && death_index.contains(&candidate);
            if !collides || attempt >= MAX_COLLISION_RETRIES {
                break candidate;
            }
            attempt += 1;
        };
        death_index.push(index);
    }
    let j_count = hazards.len();
    let mut counting = vec![0.0; grid.len() * j_count];
    for (j, d) in death_index.iter().enumerate() {
        if let Some(d) = d {
            for k in *d..grid.len() {
                counting[k * j_count + j] = 1.0;
            }
        }
    }
    Deaths {
        compensator: compensator(grid, &death_index, &hazards),
        counting: StepPath::new(grid.clone(), j_count, counting).expect("one row per grid point"),
        death_index,
    }
}

/// One simulated realisation with its basis and the auxiliary paths used by oracles.
///
/// Market layout (P or Q): component 0 is `[clock, Φ]`, component 1 is `[clock, N_1..N_J]`.
/// First-order layout: component 0 is `[clock, Φ - Φ*]`, component 1 is `[clock, N_j - Λ*_j]`,
/// with `Φ = ∫ φ` and deaths drawn from the real-world intensities.
#[derive(Debug, Clone)]
pub struct SimulatedBasis {
    pub seed: u64,
    pub measure: Measure,
    pub basis: RiskBasis,
    pub w: StepPath,
    pub phi: StepPath,
    pub kappa: StepPath,
    pub deaths: Deaths,
}

impl SimulatedBasis {
    pub fn grid(&self) -> &TimeGrid {
        self.basis.grid()
    }
}

pub const INVESTMENT_LABEL: &str = "investment";
pub const MORTALITY_LABEL: &str = "mortality";

fn clocked(grid: &TimeGrid, dim: usize, value: impl Fn(usize, f64) -> Vec<f64>) -> Result<StepPath, PathError> {
    let mut values = Vec::with_capacity(grid.len() * (dim + 1));
    for (k, &t) in grid.points().iter().enumerate() {
        values.push(t);
        values.extend(value(k, t));
    }
    StepPath::new(grid.clone(), dim + 1, values)
}

pub fn simulate_basis(params: &ModelParams, grid: &TimeGrid, seed: u64, measure: Measure) -> SimulatedBasis {
    let (phi, w) = simulate_phi(params, grid, seed, measure);
    let sigma = if measure == Measure::FirstOrder { 0.0 } else { params.sigma };
    let kappa = kappa_from_phi(&phi, sigma);
    let death_measure = if measure == Measure::FirstOrder { Measure::P } else { measure };
    let deaths = simulate_deaths(params, grid, seed, death_measure);
    let j_count = deaths.n_policies();
    let (investment, mortality) = if measure == Measure::FirstOrder {
        let stars = params.hazards(Measure::FirstOrder);
        (
            clocked(grid, 1, |k, t| vec![phi.values()[k] - params.phi_star.cumulative(t)]),
            clocked(grid, j_count, |k, t| {
                (0..j_count)
                    .map(|j| deaths.counting.row(k)[j] - stars[j].cumulative(t))
                    .collect()
            }),
        )
    } else {
        (
            clocked(grid, 1, |k, _| vec![phi.values()[k]]),
            clocked(grid, j_count, |k, _| deaths.counting.row(k).to_vec()),
        )
    };
    let basis = RiskBasis::new(
        vec![investment.expect("layout"), mortality.expect("layout")],
        vec![INVESTMENT_LABEL.into(), MORTALITY_LABEL.into()],
    )
    .expect("components share the grid");
    SimulatedBasis {
        seed,
        measure,
        basis,
        w,
        phi,
        kappa,
        deaths,
    }
}
