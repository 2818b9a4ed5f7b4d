//! Left-point Stieltjes sums `Σ f(s_k) (Z(s_{k+1}) - Z(s_k))` over a window `(a, b]`.

use crate::timepaths::{PathError, StepPath, TimeGrid, TIME_TOL};

fn window(grid: &TimeGrid, a: f64, b: f64) -> Result<(usize, usize), PathError> {
    let h = grid.horizon();
    for t in [a, b] {
        if !(t >= -TIME_TOL && t <= h + TIME_TOL) {
            return Err(PathError::OutOfDomain { t, lo: 0.0, hi: h });
        }
    }
    if b < a - TIME_TOL {
        return Err(PathError::OutOfDomain { t: b, lo: a, hi: h });
    }
    Ok((grid.index_at(a)?, grid.index_at(b)?))
}

fn scalar(path: &StepPath, grid: &TimeGrid) -> Result<(), PathError> {
    if path.dim() != 1 {
        return Err(PathError::DimensionMismatch {
            expected: 1,
            got: path.dim(),
        });
    }
    if path.grid() != grid {
        return Err(PathError::GridMismatch("integrand and integrator grids differ".into()));
    }
    Ok(())
}

/// Running sums `S_0 = 0`, `S_{k+1} = S_k + f_k w_k`.
pub fn cumulative_sum(f: &[f64], weights: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(f.len() + 1);
    let mut acc = 0.0;
    out.push(acc);
    for (fk, wk) in f.iter().zip(weights) {
        acc += fk * wk;
        out.push(acc);
    }
    out
}

pub fn increments(values: &[f64]) -> Vec<f64> {
    values.windows(2).map(|w| w[1] - w[0]).collect()
}

fn windowed(f: &StepPath, weights: &[f64], a: f64, b: f64) -> Result<f64, PathError> {
    let (ka, kb) = window(f.grid(), a, b)?;
    Ok((ka..kb).map(|k| f.values()[k] * weights[k]).sum())
}

/// `∫_(a,b] f dW` with left-point evaluation.
pub fn ito_sum(integrand: &StepPath, driver: &StepPath, a: f64, b: f64) -> Result<f64, PathError> {
    scalar(integrand, driver.grid())?;
    scalar(driver, integrand.grid())?;
    windowed(integrand, &increments(driver.values()), a, b)
}

/// Left-point sum with the second-order correction `½ f'(s_k) ((ΔW)² - Δs)`,
/// where `f'` is the diffusion derivative of the integrand.
pub fn ito_sum_milstein(
    integrand: &StepPath,
    derivative: &StepPath,
    driver: &StepPath,
    a: f64,
    b: f64,
) -> Result<f64, PathError> {
    scalar(integrand, driver.grid())?;
    scalar(derivative, driver.grid())?;
    scalar(driver, integrand.grid())?;
    let (ka, kb) = window(integrand.grid(), a, b)?;
    let pts = integrand.grid().points();
    let w = driver.values();
    Ok((ka..kb)
        .map(|k| {
            let dw = w[k + 1] - w[k];
            let dt = pts[k + 1] - pts[k];
            integrand.values()[k] * dw + 0.5 * derivative.values()[k] * (dw * dw - dt)
        })
        .sum())
}

/// `∫_(a,b] f ds` with left-point evaluation.
pub fn lebesgue_sum(integrand: &StepPath, a: f64, b: f64) -> Result<f64, PathError> {
    scalar(integrand, integrand.grid())?;
    windowed(integrand, &increments(integrand.grid().points()), a, b)
}

/// `∫_(a,b] f dN` for a counting path `N`.
pub fn jump_sum(integrand: &StepPath, counting: &StepPath, a: f64, b: f64) -> Result<f64, PathError> {
    scalar(integrand, counting.grid())?;
    scalar(counting, integrand.grid())?;
    windowed(integrand, &increments(counting.values()), a, b)
}
