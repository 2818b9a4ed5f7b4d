use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;

use super::config::{ConfigError, ScenarioConfig, SurfaceKind};
use crate::closedform::{oracle_first_order, oracle_risk_neutral, oracle_std_dev};
use crate::decomposition::{
    check_additivity, check_normalization, check_order_invariance, check_uniqueness, isu_approximate,
    stability_distances, su_decompose, Decomposition, DecompositionError, PartitionSequence, StabilityReport,
    UpdateOrder,
};
use crate::revaluation::{
    BlackBoxSurface, FirstOrderSurface, RevaluationSurface, RiskNeutralSurface, StdDevSurface,
};
use crate::stochastics::{path_seed, simulate_basis, Measure, ModelParams, SimulatedBasis};
use crate::timepaths::{
    apply_delay, make_refining_delays, verify_refining, PathError, RiskBasis, StepPath, TimeGrid,
};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Decomposition(#[from] DecompositionError),
    #[error(transparent)]
    Path(#[from] PathError),
    #[error("{0}")]
    Input(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e.to_string())
    }
}

impl From<csv::Error> for RunError {
    fn from(e: csv::Error) -> Self {
        RunError::Io(e.to_string())
    }
}

/// One simulated (or deterministic) realisation of the basis.
pub struct Realisation {
    pub seed: u64,
    pub basis: RiskBasis,
    pub simulated: Option<SimulatedBasis>,
}

/// A validated configuration turned into engine objects.
pub struct Scenario {
    pub config: ScenarioConfig,
    pub grid: TimeGrid,
    pub surface: Box<dyn RevaluationSurface>,
    pub params: Option<ModelParams>,
    pub sequence: PartitionSequence,
    pub orders: Vec<UpdateOrder>,
    pub seeds: Vec<u64>,
}

impl Scenario {
    pub fn new(mut config: ScenarioConfig, seed_override: Option<u64>) -> Result<Self, RunError> {
        config.validate()?;
        if let Some(seed) = seed_override {
            config.mc.seed = seed;
        }
        let grid = config.master_grid()?;
        let horizon = config.grid.horizon;
        let m = config.components();
        let params = config.model.surface.is_closed_form().then(|| config.model.params()).transpose()?;
        let surface: Box<dyn RevaluationSurface> = match (config.model.surface, &params) {
            (SurfaceKind::RiskNeutral, Some(p)) => Box::new(RiskNeutralSurface::new(p)),
            (SurfaceKind::StdDev, Some(p)) => Box::new(StdDevSurface::new(p)),
            (SurfaceKind::FirstOrder, Some(p)) => Box::new(FirstOrderSurface::new(p)),
            (SurfaceKind::Additive, _) => Box::new(BlackBoxSurface::additive(m, horizon)),
            (SurfaceKind::Product, _) => Box::new(BlackBoxSurface::product(m, horizon)),
            _ => unreachable!("closed-form surfaces always have parameters"),
        };
        let levels = config.engine.partition_levels.clone();
        let partitions = levels
            .iter()
            .map(|&n| TimeGrid::dyadic(horizon, n))
            .collect::<Result<Vec<_>, _>>()?;
        let sequence = PartitionSequence::new(levels, partitions)?;
        let orders = config.orders()?;
        let seeds = (0..config.mc.n_paths).map(|k| path_seed(config.mc.seed, k)).collect();
        Ok(Self {
            config,
            grid,
            surface,
            params,
            sequence,
            orders,
            seeds,
        })
    }

    pub fn kind(&self) -> SurfaceKind {
        self.config.model.surface
    }

    pub fn measure(&self) -> Option<Measure> {
        match self.kind() {
            SurfaceKind::RiskNeutral => Some(Measure::Q),
            SurfaceKind::StdDev => Some(Measure::P),
            SurfaceKind::FirstOrder => Some(Measure::FirstOrder),
            _ => None,
        }
    }

    pub fn realisation(&self, seed: u64) -> Result<Realisation, RunError> {
        match (&self.params, self.measure()) {
            (Some(p), Some(measure)) => {
                let sim = simulate_basis(p, &self.grid, seed, measure);
                Ok(Realisation {
                    seed,
                    basis: sim.basis.clone(),
                    simulated: Some(sim),
                })
            }
            _ => {
                let paths = &self.config.model.paths;
                let components = paths
                    .iter()
                    .map(|p| {
                        let jumps: Vec<(f64, f64)> = p.jumps.iter().map(|[t, v]| (*t, *v)).collect();
                        StepPath::from_jumps(self.grid.clone(), p.initial, &jumps)
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                let labels = paths.iter().map(|p| p.label.clone()).collect();
                Ok(Realisation {
                    seed,
                    basis: RiskBasis::new(components, labels)?,
                    simulated: None,
                })
            }
        }
    }

    /// Closed-form decomposition of a simulated realisation, if the surface has one.
    pub fn oracle(&self, realisation: &Realisation) -> Result<Option<Decomposition>, RunError> {
        let (Some(p), Some(sim)) = (&self.params, &realisation.simulated) else {
            return Ok(None);
        };
        let d = match self.kind() {
            SurfaceKind::RiskNeutral => oracle_risk_neutral(p, sim)?,
            SurfaceKind::StdDev => oracle_std_dev(p, sim)?,
            SurfaceKind::FirstOrder => oracle_first_order(p, sim)?,
            _ => return Ok(None),
        };
        Ok(Some(d))
    }

    pub fn eval_times(&self) -> &[f64] {
        &self.config.engine.eval_times
    }

    /// `0` followed by the configured evaluation times, without duplicates.
    pub fn report_times(&self) -> Vec<f64> {
        let mut times = vec![0.0];
        times.extend(self.eval_times().iter().copied().filter(|&t| t > 0.0));
        times.sort_by(f64::total_cmp);
        times.dedup();
        times
    }

    fn par_seeds<T: Send>(&self, f: impl Fn(u64) -> Result<T, RunError> + Sync + Send) -> Result<Vec<T>, RunError> {
        self.seeds.par_iter().map(|&s| f(s)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(name: &str, header: &[&str]) -> Self {
        Self {
            name: name.into(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }
}

/// Everything a command produced, before it is written to disk.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommandOutcome {
    pub command: String,
    pub checks: Vec<CheckResult>,
    pub tables: Vec<Table>,
    pub summary: serde_json::Value,
    pub wall_seconds: f64,
}

impl CommandOutcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Formats a time with 12 significant digits.
pub fn fmt_time(t: f64) -> String {
    let rounded: f64 = format!("{t:.11e}").parse().expect("formatted float parses");
    format!("{rounded}")
}

pub fn fmt_value(v: f64) -> String {
    format!("{v}")
}

fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    crate::decomposition::median_of_sorted(&xs)
}

fn fraction(flags: impl Iterator<Item = bool>) -> f64 {
    let (mut yes, mut n) = (0usize, 0usize);
    for f in flags {
        n += 1;
        yes += usize::from(f);
    }
    if n == 0 {
        0.0
    } else {
        yes as f64 / n as f64
    }
}

const SEED_PASS_FRACTION: f64 = 0.9;

/// SU decompositions for every seed, order and level, with additivity checked on each.
pub fn run_decompose(scenario: &Scenario) -> Result<CommandOutcome, RunError> {
    let start = Instant::now();
    let times = scenario.report_times();
    struct Cell {
        order: String,
        level: u32,
        d: Vec<Vec<f64>>,
        r: Vec<f64>,
        additive: bool,
        residual: f64,
    }
    let attempt = |seed: u64| -> Result<_, RunError> {
        let real = scenario.realisation(seed)?;
        let mut cells = Vec::new();
        for order in &scenario.orders {
            for (level, partition) in scenario.sequence.levels().iter().zip(scenario.sequence.partitions()) {
                let dec = su_decompose(scenario.surface.as_ref(), &real.basis, partition, order)?;
                let add = check_additivity(&dec, scenario.surface.as_ref(), &real.basis)?;
                cells.push(Cell {
                    order: order.to_string(),
                    level: *level,
                    d: dec.at_partition_points(&times)?,
                    r: times.iter().map(|&t| dec.revaluation(t)).collect::<Result<_, _>>()?,
                    additive: add.passes,
                    residual: add.relative_residual,
                });
            }
        }
        Ok((seed, real.basis.labels().to_vec(), cells))
    };
    let attempts: Vec<_> = scenario
        .seeds
        .par_iter()
        .map(|&seed| match attempt(seed) {
            Err(RunError::Decomposition(DecompositionError::Surface(e))) => Ok(Err((seed, e.to_string()))),
            other => other.map(Ok),
        })
        .collect::<Result<_, RunError>>()?;
    let mut per_seed = Vec::new();
    let mut failures = Vec::new();
    for a in attempts {
        match a {
            Ok(p) => per_seed.push(p),
            Err((seed, message)) => {
                warn!("seed {seed}: surface failure: {message}");
                failures.push(serde_json::json!({ "seed": seed, "error": message }));
            }
        }
    }
    let labels: Vec<String> = per_seed.first().map(|p| p.1.clone()).unwrap_or_default();

    let mut table = Table::new(
        "decomposition",
        &["seed", "t", "component_label", "D_value", "R_value", "partition_level", "order"],
    );
    for (seed, _, cells) in &per_seed {
        for cell in cells {
            for (k, &t) in times.iter().enumerate() {
                for (i, label) in labels.iter().enumerate() {
                    table.rows.push(vec![
                        seed.to_string(),
                        fmt_time(t),
                        label.clone(),
                        fmt_value(cell.d[k][i]),
                        fmt_value(cell.r[k]),
                        cell.level.to_string(),
                        cell.order.clone(),
                    ]);
                }
            }
        }
    }

    let mut summary = Table::new(
        "decomposition_summary",
        &["t", "component_label", "partition_level", "order", "mean_D", "stderr_D", "mean_R", "stderr_R"],
    );
    let n_cells = per_seed.first().map_or(0, |p| p.2.len());
    for c in 0..n_cells {
        let head = &per_seed[0].2[c];
        for (k, &t) in times.iter().enumerate() {
            let rs: Vec<f64> = per_seed.iter().map(|p| p.2[c].r[k]).collect();
            let (mr, sr) = mean_and_stderr(&rs);
            for (i, label) in labels.iter().enumerate() {
                let ds: Vec<f64> = per_seed.iter().map(|p| p.2[c].d[k][i]).collect();
                let (md, sd) = mean_and_stderr(&ds);
                summary.rows.push(vec![
                    fmt_time(t),
                    label.clone(),
                    head.level.to_string(),
                    head.order.clone(),
                    fmt_value(md),
                    fmt_value(sd),
                    fmt_value(mr),
                    fmt_value(sr),
                ]);
            }
        }
    }

    let worst = per_seed
        .iter()
        .flat_map(|p| p.2.iter().map(|c| c.residual))
        .fold(0.0, f64::max);
    let all_additive = per_seed.iter().all(|p| p.2.iter().all(|c| c.additive));
    info!("decompose: {} seeds, worst additivity residual {worst:e}", per_seed.len());
    Ok(CommandOutcome {
        command: "decompose".into(),
        checks: vec![
            CheckResult::new("additivity", all_additive, format!("worst relative residual {worst:e}")),
            CheckResult::new(
                "surface-evaluation",
                failures.is_empty(),
                format!("{} of {} seeds failed", failures.len(), scenario.seeds.len()),
            ),
        ],
        summary: serde_json::json!({
            "surface": scenario.surface.label(),
            "seeds": per_seed.len(),
            "worst_additivity_residual": worst,
            "failed_seeds": failures,
        }),
        tables: vec![table, summary],
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

/// ISU convergence, order invariance and, for closed-form surfaces, the distance to the oracle.
pub fn run_converge(scenario: &Scenario) -> Result<CommandOutcome, RunError> {
    let start = Instant::now();
    let surface = scenario.surface.as_ref();
    let eval = scenario.eval_times();
    let tol = scenario.config.engine.tol;
    let t_end = *eval
        .iter()
        .max_by(|a, b| a.total_cmp(b))
        .expect("eval_times is not empty");
    let primary = &scenario.orders[0];
    let per_seed = scenario.par_seeds(|seed| {
        let real = scenario.realisation(seed)?;
        let (_, report) = isu_approximate(surface, &real.basis, &scenario.sequence, eval, tol, primary)?;
        let gaps = check_order_invariance(surface, &real.basis, &scenario.sequence, eval, tol)?;
        let oracle = scenario.oracle(&real)?.map(|o| o.at(t_end)).transpose()?;
        let su_end = scenario
            .sequence
            .partitions()
            .iter()
            .map(|p| Ok(su_decompose(surface, &real.basis, p, primary)?.at(t_end)?))
            .collect::<Result<Vec<_>, RunError>>()?;
        Ok((seed, report, gaps, oracle, su_end, real.basis.labels().to_vec()))
    })?;

    let levels = scenario.sequence.levels();
    let mut table = Table::new(
        "convergence",
        &[
            "seed",
            "partition_level",
            "mesh",
            "component_label",
            "D_value",
            "oracle_value",
            "abs_error",
            "distance_to_next",
            "order_gap",
        ],
    );
    for (seed, report, gaps, oracle, su_end, labels) in &per_seed {
        for (l, level) in levels.iter().enumerate() {
            for (i, label) in labels.iter().enumerate() {
                let d = su_end[l][i];
                let (ov, err) = match oracle {
                    Some(o) => (fmt_value(o[i]), fmt_value((d - o[i]).abs())),
                    None => (String::new(), String::new()),
                };
                table.rows.push(vec![
                    seed.to_string(),
                    level.to_string(),
                    fmt_time(report.meshes[l]),
                    label.clone(),
                    fmt_value(d),
                    ov,
                    err,
                    report.distances.get(l).map(|&x| fmt_value(x)).unwrap_or_default(),
                    fmt_value(gaps.gaps[l]),
                ]);
            }
        }
    }

    let converged = fraction(per_seed.iter().map(|p| p.1.converged));
    let order_ok = fraction(per_seed.iter().map(|p| p.2.passes));
    let persistent = per_seed.iter().filter(|p| p.2.persistent).count();
    let mut checks = Vec::new();
    if levels.len() > 1 {
        checks.push(CheckResult::new(
            "isu-convergence",
            converged >= SEED_PASS_FRACTION,
            format!("{:.1}% of seeds converged within tol {tol:e}", 100.0 * converged),
        ));
    }
    checks.push(CheckResult::new(
            "order-invariance",
            order_ok >= SEED_PASS_FRACTION,
            format!(
                "{:.1}% of seeds pass; {persistent} seeds show a persistent order gap",
                100.0 * order_ok
            ),
        ));
    let mut oracle_summary = serde_json::Value::Null;
    if per_seed.iter().all(|p| p.3.is_some()) && !per_seed.is_empty() {
        let m = per_seed[0].5.len();
        let medians: Vec<Vec<f64>> = (0..m)
            .map(|i| {
                (0..levels.len())
                    .map(|l| {
                        median(
                            per_seed
                                .iter()
                                .map(|p| (p.4[l][i] - p.3.as_ref().expect("oracle")[i]).abs())
                                .collect(),
                        )
                    })
                    .collect()
            })
            .collect();
        let relative: Vec<f64> = (0..m)
            .map(|i| {
                median(
                    per_seed
                        .iter()
                        .map(|p| {
                            let o = p.3.as_ref().expect("oracle")[i];
                            (p.4[levels.len() - 1][i] - o).abs() / o.abs().max(1e-300)
                        })
                        .collect(),
                )
            })
            .collect();
        let worst_rel = relative.iter().copied().fold(0.0, f64::max);
        checks.push(CheckResult::new(
            "oracle-distance",
            worst_rel < tol,
            format!("final median relative error {worst_rel:e} (tol {tol:e})"),
        ));
        oracle_summary = serde_json::json!({
            "median_abs_error": medians,
            "final_median_relative_error": relative,
        });
    }
    info!("converge: {} seeds", per_seed.len());
    Ok(CommandOutcome {
        command: "converge".into(),
        checks,
        tables: vec![table],
        summary: serde_json::json!({
            "surface": surface.label(),
            "levels": levels,
            "converged_fraction": converged,
            "order_invariance_fraction": order_ok,
            "persistent_order_gaps": persistent,
            "order_gaps_first_seed": per_seed.first().map(|p| p.2.gaps.clone()),
            "oracle": oracle_summary,
        }),
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Refining delays applied to every realisation; also checks interval-wise uniqueness for phased delays.
pub fn run_stability(scenario: &Scenario) -> Result<CommandOutcome, RunError> {
    let start = Instant::now();
    let section = scenario
        .config
        .stability
        .clone()
        .ok_or_else(|| ConfigError::Invalid("the stability command needs a [stability] section".into()))?;
    let surface = scenario.surface.as_ref();
    let horizon = scenario.config.grid.horizon;
    let m = surface.components();
    let delays = make_refining_delays(section.delay_kind, section.delay_levels, m, horizon)?;
    let refining = verify_refining(&delays, horizon);
    let partition = scenario.sequence.finest();
    let eval = scenario.eval_times();
    let order = UpdateOrder::natural(m);
    let per_seed = scenario.par_seeds(|seed| {
        let real = scenario.realisation(seed)?;
        let distances = stability_distances(surface, &real.basis, &delays, partition, eval)?;
        let mut unique = 0.0f64;
        for d in delays.iter().filter(|d| d.is_phased()) {
            let delayed = apply_delay(&real.basis, d)?;
            unique = unique.max(check_uniqueness(surface, &delayed, d, partition, &order)?.max_residual);
        }
        Ok((distances, unique))
    })?;
    let distances: Vec<Vec<f64>> = per_seed.iter().map(|p| p.0.clone()).collect();
    let report = StabilityReport::from_distances(&distances, section.epsilon, section.max_exceedance);
    let worst_unique = per_seed.iter().map(|p| p.1).fold(0.0, f64::max);

    let mut table = Table::new(
        "stability",
        &["delay_level", "sup_lag", "exceedance_fraction", "median_distance"],
    );
    for (l, lags) in refining.sup_lags.iter().enumerate() {
        table.rows.push(vec![
            (l + 1).to_string(),
            fmt_value(lags.iter().copied().fold(0.0, f64::max)),
            fmt_value(report.exceedance[l]),
            fmt_value(report.median_distance[l]),
        ]);
    }
    let mut checks = vec![
        CheckResult::new(
            "refining-delays",
            refining.passes,
            format!("nested {}, lags non-increasing {}", refining.images_nested, refining.lags_non_increasing),
        ),
        CheckResult::new(
            "stability",
            report.passes,
            format!("exceedance per level {:?}", report.exceedance),
        ),
    ];
    if delays.iter().any(|d| d.is_phased()) {
        checks.push(CheckResult::new(
            "uniqueness",
            worst_unique <= 1e-12,
            format!("worst interval-wise residual {worst_unique:e}"),
        ));
    }
    Ok(CommandOutcome {
        command: "stability".into(),
        checks,
        tables: vec![table],
        summary: serde_json::json!({
            "surface": surface.label(),
            "delay_kind": section.delay_kind,
            "report": report,
            "refining": refining,
            "worst_uniqueness_residual": worst_unique,
        }),
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Additivity and normalization for every seed, order and level.
pub fn run_axioms(scenario: &Scenario) -> Result<CommandOutcome, RunError> {
    let start = Instant::now();
    let surface = scenario.surface.as_ref();
    let per_seed = scenario.par_seeds(|seed| {
        let real = scenario.realisation(seed)?;
        let mut rows = Vec::new();
        for order in &scenario.orders {
            for (level, partition) in scenario.sequence.levels().iter().zip(scenario.sequence.partitions()) {
                let dec = su_decompose(surface, &real.basis, partition, order)?;
                let add = check_additivity(&dec, surface, &real.basis)?;
                let norm = check_normalization(&dec, &real.basis)?;
                rows.push((seed, *level, order.to_string(), add, norm));
            }
        }
        Ok(rows)
    })?;
    let mut table = Table::new(
        "axioms",
        &[
            "seed",
            "partition_level",
            "order",
            "additivity_residual",
            "relative_residual",
            "normalization_intervals",
            "normalization_violations",
        ],
    );
    let (mut add_ok, mut norm_ok, mut violations) = (true, true, 0usize);
    let mut worst = 0.0f64;
    for (seed, level, order, add, norm) in per_seed.iter().flatten() {
        add_ok &= add.passes;
        norm_ok &= norm.passes;
        violations += norm.violations.len();
        worst = worst.max(add.relative_residual);
        table.rows.push(vec![
            seed.to_string(),
            level.to_string(),
            order.clone(),
            fmt_value(add.max_residual),
            fmt_value(add.relative_residual),
            norm.intervals_checked.to_string(),
            norm.violations.len().to_string(),
        ]);
    }
    Ok(CommandOutcome {
        command: "axioms".into(),
        checks: vec![
            CheckResult::new("additivity", add_ok, format!("worst relative residual {worst:e}")),
            CheckResult::new("normalization", norm_ok, format!("{violations} violations")),
        ],
        tables: vec![table],
        summary: serde_json::json!({
            "surface": surface.label(),
            "worst_additivity_residual": worst,
            "normalization_violations": violations,
        }),
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}
