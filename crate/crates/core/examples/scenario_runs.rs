// Runs the batch commands on a bundled scenario file without the command line and
// writes the tables to a directory (default: a temporary one).
//
// Run with `cargo run --release --example scenario_runs -- [OUT_DIR]`.

use std::path::{Path, PathBuf};

use pnl_attrib::scenario::{
    run_axioms, run_converge, run_decompose, write_outcome, CommandOutcome, Scenario, ScenarioConfig,
};

pub fn run_in(out: &Path) -> Result<Vec<CommandOutcome>, Box<dyn std::error::Error>> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/risk_neutral.toml");
    let mut config = ScenarioConfig::load(&path)?;
    config.mc.n_paths = 8;
    let scenario = Scenario::new(config, None)?;
    let mut outcomes = Vec::new();
    for outcome in [run_decompose(&scenario)?, run_converge(&scenario)?, run_axioms(&scenario)?] {
        let files = write_outcome(&outcome, &scenario.config, &scenario.seeds, out)?;
        for check in &outcome.checks {
            println!("{:<10} {} {}: {}", outcome.command, if check.passed { "PASS" } else { "FAIL" }, check.name, check.detail);
        }
        println!("{:<10} wrote {} files", outcome.command, files.len());
        outcomes.push(outcome);
    }
    Ok(outcomes)
}

pub fn run_example() -> Result<Vec<CommandOutcome>, Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join(format!("pnl-attrib-example-{}", std::process::id()));
    let result = run_in(&dir);
    std::fs::remove_dir_all(&dir).ok();
    result
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    match std::env::args().nth(1).map(PathBuf::from) {
        Some(out) => run_in(&out).map(|_| ()),
        None => run_example().map(|_| ()),
    }
}
