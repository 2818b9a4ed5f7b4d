use serde::{Deserialize, Serialize};

/// A piecewise-constant rate: either a constant or `values[k]` on `[breaks[k-1], breaks[k])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StepRate {
    Constant(f64),
    Curve { breaks: Vec<f64>, values: Vec<f64> },
}

impl Default for StepRate {
    fn default() -> Self {
        StepRate::Constant(0.0)
    }
}

impl StepRate {
    pub fn validate(&self, name: &str, non_negative: bool) -> Result<(), String> {
        let values: &[f64] = match self {
            StepRate::Constant(v) => std::slice::from_ref(v),
            StepRate::Curve { breaks, values } => {
                if values.len() != breaks.len() + 1 {
                    return Err(format!(
                        "{name}: a curve needs one more value than breaks ({} breaks, {} values)",
                        breaks.len(),
                        values.len()
                    ));
                }
                if breaks.windows(2).any(|w| !(w[1] > w[0])) || breaks.iter().any(|b| !(*b > 0.0)) {
                    return Err(format!("{name}: breaks must be positive and increasing"));
                }
                values
            }
        };
        if values.iter().any(|v| !v.is_finite()) {
            return Err(format!("{name}: rates must be finite"));
        }
        if non_negative && values.iter().any(|v| *v < 0.0) {
            return Err(format!("{name}: rates must be non-negative"));
        }
        Ok(())
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            StepRate::Constant(v) => *v,
            StepRate::Curve { breaks, values } => values[breaks.partition_point(|&b| b <= t)],
        }
    }

    /// `∫_0^t rate`.
    pub fn cumulative(&self, t: f64) -> f64 {
        match self {
            StepRate::Constant(v) => v * t,
            StepRate::Curve { breaks, values } => {
                let mut acc = 0.0;
                let mut left = 0.0;
                for (k, &b) in breaks.iter().enumerate() {
                    if b >= t {
                        return acc + values[k] * (t - left);
                    }
                    acc += values[k] * (b - left);
                    left = b;
                }
                acc + values[breaks.len()] * (t - left)
            }
        }
    }

    /// `∫_a^b rate`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        match self {
            StepRate::Constant(v) => v * (b - a),
            StepRate::Curve { .. } => self.cumulative(b) - self.cumulative(a),
        }
    }

    /// Smallest `t` with `∫_0^t rate = e`, for a non-negative rate.
    pub fn inverse_cumulative(&self, e: f64) -> Option<f64> {
        match self {
            StepRate::Constant(v) => (*v > 0.0).then(|| e / v),
            StepRate::Curve { breaks, values } => {
                let mut acc = 0.0;
                let mut left = 0.0;
                for (k, &b) in breaks.iter().enumerate() {
                    let piece = values[k] * (b - left);
                    if values[k] > 0.0 && acc + piece >= e {
                        return Some(left + (e - acc) / values[k]);
                    }
                    acc += piece;
                    left = b;
                }
                let last = values[breaks.len()];
                (last > 0.0).then(|| left + (e - acc) / last)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Policy {
    pub premium: f64,
    pub benefit: f64,
    /// Real-world mortality intensity.
    pub hazard: StepRate,
    /// Valuation intensity for the risk-neutral surface.
    pub hazard_q: StepRate,
    /// Technical-basis intensity for the first-order surface.
    #[serde(default)]
    pub hazard_star: StepRate,
}

/// Market and portfolio parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Drift of the log bank account under the valuation measure.
    pub mu: f64,
    /// Drift of the log bank account under the real-world measure.
    pub r: f64,
    pub sigma: f64,
    pub maturity: f64,
    #[serde(default)]
    pub alpha: f64,
    /// Realised first-order interest rate.
    #[serde(default)]
    pub phi: StepRate,
    /// Technical-basis interest rate.
    #[serde(default)]
    pub phi_star: StepRate,
    pub policies: Vec<Policy>,
}

impl ModelParams {
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [("mu", self.mu), ("r", self.r), ("sigma", self.sigma), ("alpha", self.alpha)] {
            if !v.is_finite() {
                return Err(format!("model.{name} must be finite"));
            }
        }
        if self.sigma < 0.0 {
            return Err("model.sigma must be non-negative".into());
        }
        if self.alpha < 0.0 {
            return Err("model.alpha must be non-negative".into());
        }
        if !(self.maturity > 0.0) || !self.maturity.is_finite() {
            return Err("model.maturity must be positive".into());
        }
        if self.policies.is_empty() {
            return Err("model.policies must list at least one policy".into());
        }
        self.phi.validate("model.phi", false)?;
        self.phi_star.validate("model.phi_star", false)?;
        for (j, p) in self.policies.iter().enumerate() {
            if !p.premium.is_finite() || !p.benefit.is_finite() {
                return Err(format!("model.policies[{j}]: premium and benefit must be finite"));
            }
            p.hazard.validate(&format!("model.policies[{j}].hazard"), true)?;
            p.hazard_q.validate(&format!("model.policies[{j}].hazard_q"), true)?;
            p.hazard_star.validate(&format!("model.policies[{j}].hazard_star"), true)?;
        }
        Ok(())
    }

    pub fn total_premium(&self) -> f64 {
        self.policies.iter().map(|p| p.premium).sum()
    }

    pub fn hazards(&self, measure: Measure) -> Vec<&StepRate> {
        self.policies
            .iter()
            .map(|p| match measure {
                Measure::P => &p.hazard,
                Measure::Q => &p.hazard_q,
                Measure::FirstOrder => &p.hazard_star,
            })
            .collect()
    }
}

/// Which measure drives a simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Measure {
    P,
    Q,
    FirstOrder,
}
