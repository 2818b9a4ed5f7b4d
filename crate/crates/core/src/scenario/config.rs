use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::decomposition::UpdateOrder;
use crate::stochastics::{ModelParams, Policy, StepRate};
use crate::timepaths::{make_refining_delays, DelayKind, TimeGrid};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Invalid(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SurfaceKind {
    RiskNeutral,
    StdDev,
    FirstOrder,
    /// Sum of terminal values of deterministic step paths.
    Additive,
    /// Product of terminal values of deterministic step paths.
    Product,
}

impl SurfaceKind {
    pub fn is_closed_form(self) -> bool {
        matches!(self, SurfaceKind::RiskNeutral | SurfaceKind::StdDev | SurfaceKind::FirstOrder)
    }
}

/// A deterministic scalar step path for black-box scenarios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSpec {
    pub label: String,
    pub initial: f64,
    /// `[time, new value]` pairs.
    #[serde(default)]
    pub jumps: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub surface: SurfaceKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub maturity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<StepRate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi_star: Option<StepRate>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub policies: Vec<Policy>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub paths: Vec<PathSpec>,
}

impl ModelSection {
    /// Model parameters for closed-form surfaces. `mu`, `r`, `sigma` and `maturity` are required.
    pub fn params(&self) -> Result<ModelParams, ConfigError> {
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| ConfigError::Invalid(format!("model.{name} is required for surface {:?}", self.surface)))
        };
        let params = ModelParams {
            mu: need(self.mu, "mu")?,
            r: need(self.r, "r")?,
            sigma: need(self.sigma, "sigma")?,
            maturity: need(self.maturity, "maturity")?,
            alpha: self.alpha.unwrap_or(0.0),
            phi: self.phi.clone().unwrap_or_default(),
            phi_star: self.phi_star.clone().unwrap_or_default(),
            policies: self.policies.clone(),
        };
        params.validate().map_err(ConfigError::Invalid)?;
        Ok(params)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub horizon: f64,
    /// The simulation grid has mesh `horizon · 2^{-base_mesh_exponent}`.
    pub base_mesh_exponent: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineSection {
    /// Dyadic partition levels, strictly increasing.
    pub partition_levels: Vec<u32>,
    /// Update orders as 1-based component numbers; the first is the primary order.
    pub orders: Vec<Vec<usize>>,
    pub tol: f64,
    pub eval_times: Vec<f64>,
}

fn default_epsilon() -> f64 {
    5e-2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilitySection {
    pub delay_kind: DelayKind,
    pub delay_levels: u32,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Largest allowed fraction of realisations above `epsilon` at the final level.
    #[serde(default = "default_epsilon")]
    pub max_exceedance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSection {
    pub n_paths: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputsSection {
    pub directory: String,
    pub formats: Vec<OutputFormat>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub model: ModelSection,
    pub grid: GridSection,
    pub engine: EngineSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stability: Option<StabilitySection>,
    pub mc: McSection,
    pub outputs: OutputsSection,
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let config: ScenarioConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serialises to TOML")
    }

    /// SHA-256 of the canonical serialisation.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml_string().as_bytes()))
    }

    pub fn master_grid(&self) -> Result<TimeGrid, ConfigError> {
        TimeGrid::dyadic(self.grid.horizon, self.grid.base_mesh_exponent).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn components(&self) -> usize {
        if self.model.surface.is_closed_form() {
            2
        } else {
            self.model.paths.len()
        }
    }

    pub fn orders(&self) -> Result<Vec<UpdateOrder>, ConfigError> {
        self.engine
            .orders
            .iter()
            .map(|o| UpdateOrder::from_one_based(o).map_err(|e| ConfigError::Invalid(format!("engine.orders: {e}"))))
            .collect()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let g = &self.grid;
        if !(g.horizon > 0.0) || !g.horizon.is_finite() {
            return invalid("grid.horizon must be positive and finite");
        }
        if g.base_mesh_exponent == 0 || g.base_mesh_exponent > 24 {
            return invalid("grid.base_mesh_exponent must be in 1..=24");
        }
        if self.mc.n_paths == 0 {
            return invalid("mc.n_paths must be at least 1");
        }
        let e = &self.engine;
        if e.partition_levels.is_empty() {
            return invalid("engine.partition_levels must not be empty");
        }
        if e.partition_levels.windows(2).any(|w| w[1] <= w[0]) {
            return invalid("engine.partition_levels must be strictly increasing");
        }
        if e.partition_levels.iter().any(|&n| n > g.base_mesh_exponent) {
            return invalid("engine.partition_levels may not exceed grid.base_mesh_exponent");
        }
        if !(e.tol > 0.0) {
            return invalid("engine.tol must be positive");
        }
        if e.orders.is_empty() {
            return invalid("engine.orders must list at least one order");
        }
        let m = self.components();
        if m == 0 {
            return invalid("model.paths must list at least one path for black-box surfaces");
        }
        for o in self.orders()? {
            if o.len() != m {
                return invalid(format!("engine.orders: order {o} does not cover {m} components"));
            }
        }
        if e.eval_times.is_empty() {
            return invalid("engine.eval_times must not be empty");
        }
        let coarsest = TimeGrid::dyadic(g.horizon, e.partition_levels[0]).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        for &t in &e.eval_times {
            if !coarsest.contains(t) {
                return invalid(format!(
                    "engine.eval_times: {t} is not a point of the coarsest partition (mesh {})",
                    coarsest.mesh()
                ));
            }
        }
        if self.model.surface.is_closed_form() {
            let params = self.model.params()?;
            if params.maturity > g.horizon + 1e-12 {
                return invalid("model.maturity may not exceed grid.horizon");
            }
            if !self.model.paths.is_empty() {
                return invalid("model.paths is only used by additive and product surfaces");
            }
        } else {
            let master = self.master_grid()?;
            for p in &self.model.paths {
                for [t, _] in &p.jumps {
                    if !(*t > 0.0) || !master.contains(*t) {
                        return invalid(format!(
                            "model.paths[{}]: jump time {t} must be a positive point of the simulation grid",
                            p.label
                        ));
                    }
                }
            }
        }
        if let Some(s) = &self.stability {
            if s.delay_levels == 0 {
                return invalid("stability.delay_levels must be at least 1");
            }
            if !(s.epsilon > 0.0) || !(0.0..=1.0).contains(&s.max_exceedance) {
                return invalid("stability.epsilon must be positive and stability.max_exceedance in [0, 1]");
            }
            let delays = make_refining_delays(s.delay_kind, s.delay_levels, m, g.horizon)
                .map_err(|e| ConfigError::Invalid(format!("stability: {e}")))?;
            let finest = TimeGrid::dyadic(g.horizon, *e.partition_levels.last().expect("non-empty"))
                .map_err(|e| ConfigError::Invalid(e.to_string()))?;
            for d in &delays {
                if let Some(w) = d.witness() {
                    if !finest.refines(w) {
                        return invalid(format!(
                            "stability: delay {} needs a finer partition than level {}",
                            d.label(),
                            e.partition_levels.last().expect("non-empty")
                        ));
                    }
                }
            }
        }
        if self.outputs.formats.is_empty() {
            return invalid("outputs.formats must list at least one format");
        }
        Ok(())
    }
}
