use super::{PathError, StepPath, TimeGrid};

/// The `m` risk-basis components on a shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskBasis {
    components: Vec<StepPath>,
    labels: Vec<String>,
}

impl RiskBasis {
    pub fn new(components: Vec<StepPath>, labels: Vec<String>) -> Result<Self, PathError> {
        if components.is_empty() {
            return Err(PathError::GridMismatch("basis needs at least one component".into()));
        }
        if labels.len() != components.len() {
            return Err(PathError::DimensionMismatch {
                expected: components.len(),
                got: labels.len(),
            });
        }
        let grid = components[0].grid();
        if components.iter().any(|c| c.grid() != grid) {
            return Err(PathError::GridMismatch(
                "basis components must share one grid".into(),
            ));
        }
        Ok(Self { components, labels })
    }

    /// Components labelled `X1..Xm`.
    pub fn unlabelled(components: Vec<StepPath>) -> Result<Self, PathError> {
        let labels = (1..=components.len()).map(|i| format!("X{i}")).collect();
        Self::new(components, labels)
    }

    pub fn grid(&self) -> &TimeGrid {
        self.components[0].grid()
    }

    pub fn horizon(&self) -> f64 {
        self.grid().horizon()
    }

    pub fn m(&self) -> usize {
        self.components.len()
    }

    pub fn component(&self, i: usize) -> &StepPath {
        &self.components[i]
    }

    pub fn components(&self) -> &[StepPath] {
        &self.components
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Each component stopped at its own time.
    pub fn stop_multi(&self, times: &[f64]) -> Result<RiskBasis, PathError> {
        if times.len() != self.m() {
            return Err(PathError::DimensionMismatch {
                expected: self.m(),
                got: times.len(),
            });
        }
        let components = self
            .components
            .iter()
            .zip(times)
            .map(|(c, &t)| c.stop(t))
            .collect::<Result<_, _>>()?;
        Ok(RiskBasis {
            components,
            labels: self.labels.clone(),
        })
    }

    pub(crate) fn with_components(&self, components: Vec<StepPath>) -> Result<RiskBasis, PathError> {
        RiskBasis::new(components, self.labels.clone())
    }
}
