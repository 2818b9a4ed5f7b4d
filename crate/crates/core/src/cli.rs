//! Command-line front end. Exit codes: 0 pass, 1 internal error, 2 config error, 3 check failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::{error, info};

use crate::scenario::{
    run_axioms, run_converge, run_decompose, run_stability, waterfall_from_csv, write_atomic, write_outcome,
    CommandOutcome, RunError, Scenario, ScenarioConfig, WaterfallSelection,
};

pub const EXIT_PASS: u8 = 0;
pub const EXIT_INTERNAL: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_CHECK: u8 = 3;

pub const LOG_ENV: &str = "PNL_ATTRIB_LOG";

#[derive(Debug, Parser)]
#[command(name = "pnl-attrib", version, about = "Sequential-updating P&L attribution experiments")]
pub struct Cli {
    /// Scenario file (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Output directory, overriding `outputs.directory`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Replaces `mc.seed`.
    #[arg(long, global = true)]
    pub seed_override: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Per-seed SU decomposition tables with aggregate means and standard errors.
    Decompose,
    /// Level-to-level convergence, order gaps and oracle distances.
    Converge,
    /// Decompositions under refining information delays.
    Stability,
    /// Additivity and normalization checks.
    Axioms,
    /// Waterfall bars over (from, to] from a decomposition table.
    Waterfall {
        /// `decomposition.csv` written by `decompose`.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        level: Option<u32>,
        /// Update order as written in the table, e.g. `1-2`.
        #[arg(long)]
        order: Option<String>,
    },
}

fn exit_code(err: &RunError) -> u8 {
    match err {
        RunError::Config(_) | RunError::Input(_) => EXIT_CONFIG,
        _ => EXIT_INTERNAL,
    }
}

fn load_scenario(cli: &Cli) -> Result<Scenario, RunError> {
    let path = cli.config.as_deref().ok_or_else(|| RunError::Input("--config PATH is required".into()))?;
    let config = ScenarioConfig::load(path)?;
    Scenario::new(config, cli.seed_override)
}

fn out_dir(cli: &Cli, scenario: &Scenario) -> PathBuf {
    cli.out
        .clone()
        .unwrap_or_else(|| PathBuf::from(&scenario.config.outputs.directory))
}

fn report(outcome: &CommandOutcome, files: &[PathBuf]) -> u8 {
    for check in &outcome.checks {
        let status = if check.passed { "PASS" } else { "FAIL" };
        println!("{status} {}: {}", check.name, check.detail);
    }
    for f in files {
        info!("wrote {}", f.display());
    }
    if outcome.passed() {
        EXIT_PASS
    } else {
        EXIT_CHECK
    }
}

fn run_inner(cli: &Cli) -> Result<u8, RunError> {
    if let Command::Waterfall {
        input,
        from,
        to,
        seed,
        level,
        order,
    } = &cli.command
    {
        let selection = WaterfallSelection {
            seed: *seed,
            level: *level,
            order: order.clone(),
        };
        let wf = waterfall_from_csv(input, *from, *to, &selection)?;
        let body = serde_json::to_string_pretty(&wf).expect("json");
        match &cli.out {
            Some(dir) => write_atomic(&dir.join("waterfall.json"), body.as_bytes())?,
            None => println!("{body}"),
        }
        return Ok(if wf.reconciles(1e-10) { EXIT_PASS } else { EXIT_CHECK });
    }
    let scenario = load_scenario(cli)?;
    let outcome = match cli.command {
        Command::Decompose => run_decompose(&scenario)?,
        Command::Converge => run_converge(&scenario)?,
        Command::Stability => run_stability(&scenario)?,
        Command::Axioms => run_axioms(&scenario)?,
        Command::Waterfall { .. } => unreachable!("handled above"),
    };
    let dir = out_dir(cli, &scenario);
    let files = write_outcome(&outcome, &scenario.config, &scenario.seeds, Path::new(&dir))?;
    Ok(report(&outcome, &files))
}

pub fn init_logging() {
    let env = env_logger::Env::new().filter_or(LOG_ENV, "warn");
    let _ = env_logger::Builder::from_env(env).try_init();
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> u8 {
    let pool = match cli.jobs {
        Some(0) => {
            eprintln!("error: --jobs must be at least 1");
            return EXIT_CONFIG;
        }
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build(),
        None => rayon::ThreadPoolBuilder::new().build(),
    };
    let pool = match pool {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INTERNAL;
        }
    };
    match pool.install(|| run_inner(&cli)) {
        Ok(code) => code,
        Err(e) => {
            error!("{e}");
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn main_entry() -> ExitCode {
    init_logging();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { EXIT_PASS });
        }
    };
    ExitCode::from(run(cli))
}
