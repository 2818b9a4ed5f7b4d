//! Scenario configuration, batch runners and output files.

mod config;
mod output;
mod runner;
mod waterfall;

pub use config::{
    ConfigError, EngineSection, GridSection, McSection, ModelSection, OutputFormat, OutputsSection, PathSpec,
    ScenarioConfig, StabilitySection, SurfaceKind,
};
pub use output::{table_to_csv, write_atomic, write_outcome, RunManifest};
pub use runner::{
    fmt_time, fmt_value, run_axioms, run_converge, run_decompose, run_stability, CheckResult, CommandOutcome,
    Realisation, RunError, Scenario, Table,
};
pub use waterfall::{
    waterfall_from_csv, waterfall_from_decomposition, Bar, BarKind, Waterfall, WaterfallSelection,
};

#[cfg(test)]
mod tests {
    use super::*;

    const ADDITIVE: &str = include_str!("../../scenarios/additive.toml");
    const RISK_NEUTRAL: &str = include_str!("../../scenarios/risk_neutral.toml");

    #[test]
    fn config_round_trip() {
        for text in [ADDITIVE, RISK_NEUTRAL] {
            let a = ScenarioConfig::from_toml_str(text).unwrap();
            let b = ScenarioConfig::from_toml_str(&a.to_toml_string()).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.hash(), b.hash());
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = ADDITIVE.replace("[mc]", "[mc]\nn_pahts = 3");
        assert!(matches!(ScenarioConfig::from_toml_str(&text), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn zero_paths_is_invalid() {
        let text = ADDITIVE.replace("n_paths = 1", "n_paths = 0");
        let err = ScenarioConfig::from_toml_str(&text).unwrap_err();
        assert!(matches!(err, ConfigError::Invalid(_)));
        assert!(err.to_string().contains("n_paths"), "{err}");
    }

    #[test]
    fn additive_waterfall() {
        let scenario = Scenario::new(ScenarioConfig::from_toml_str(ADDITIVE).unwrap(), None).unwrap();
        let outcome = run_decompose(&scenario).unwrap();
        assert!(outcome.passed());
        let real = scenario.realisation(scenario.seeds[0]).unwrap();
        let dec = crate::decomposition::su_decompose(
            scenario.surface.as_ref(),
            &real.basis,
            scenario.sequence.finest(),
            &scenario.orders[0],
        )
        .unwrap();
        let wf = waterfall_from_decomposition(&dec, 0.0, 1.0).unwrap();
        assert_eq!(wf.deltas(), vec![2.0, -1.0]);
        assert_eq!(wf.reconciliation_residual, 0.0);
        assert_eq!(wf.bars.last().unwrap().value - wf.bars[0].value, 1.0);

        let flat = waterfall_from_decomposition(&dec, 0.5, 0.5).unwrap();
        assert!(flat.deltas().iter().all(|&d| d == 0.0));
        assert!(matches!(waterfall_from_decomposition(&dec, 0.0, 0.3), Err(RunError::Input(_))));
    }

    #[test]
    fn time_formatting() {
        assert_eq!(fmt_time(0.5), "0.5");
        assert_eq!(fmt_time(1.0), "1");
        assert_eq!(fmt_time(0.1 + 0.2), "0.3");
    }
}
