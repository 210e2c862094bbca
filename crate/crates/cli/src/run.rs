//! Subcommand orchestration.

use jumphedge::montecarlo::{estimate_mse, run_batch, SimError};
use jumphedge::strategy::optimal_value;
use jumphedge::verify::{run_verification, VerifyError, VerifyOptions};
use jumphedge::{solve, ModelError, SolverError, StrategyKind, Which};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::{ConfigError, ExperimentConfig};
use crate::table::{Cell, ResultTable};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    /// Before-jump curves on the solver grid.
    Solve,
    /// Optimal value at the configured initial wealth.
    Value,
    /// Monte Carlo hedging error of each configured strategy.
    Simulate,
    /// Every diagnostic, with pass/fail.
    Verify,
    /// Value and simulated error over a one- or two-parameter grid.
    Sweep,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Value => "value",
            Command::Simulate => "simulate",
            Command::Verify => "verify",
            Command::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    /// Machine-readable error class.
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Model(_) => "model",
            CliError::Solver(_) => "solver",
            CliError::Sim(_) => "simulation",
            CliError::Verify(_) => "verification",
            CliError::Io { .. } => "io",
            CliError::Usage(_) => "usage",
        }
    }

    pub fn line(&self) -> Option<usize> {
        match self {
            CliError::Config(e) => e.line(),
            _ => None,
        }
    }
}

/// A table and whether every check it reports passed.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub table: ResultTable,
    pub pass: bool,
}

/// Hex SHA-256 of the canonical configuration text.
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    Sha256::digest(cfg.to_text().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

fn provenance(cmd: Command, cfg: &ExperimentConfig) -> Vec<(String, String)> {
    [
        ("tool", format!("mvh {}", env!("CARGO_PKG_VERSION"))),
        ("command", cmd.name().to_string()),
        ("config_sha256", config_hash(cfg)),
        ("seed", cfg.sim.seed.to_string()),
        ("n_paths", cfg.sim.n_paths.to_string()),
        ("sim_steps", cfg.sim.n_steps.to_string()),
        ("solve_steps", cfg.solve_steps.to_string()),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

/// Runs `cmd` on a validated configuration.
pub fn execute(cmd: Command, cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let mut outcome = match cmd {
        Command::Solve => solve_table(cfg)?,
        Command::Value => value_table(cfg)?,
        Command::Simulate => simulate_table(cfg)?,
        Command::Verify => verify_table(cfg)?,
        Command::Sweep => sweep_table(cfg)?,
    };
    let mut header = provenance(cmd, cfg);
    header.append(&mut outcome.table.provenance);
    outcome.table.provenance = header;
    Ok(outcome)
}

fn solve_table(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let sol = solve(&cfg.model()?, &cfg.claim_spec()?, cfg.solve_steps)?;
    let mut t = ResultTable::new(&["t", "y_b", "yc_b", "ups_b"]);
    for (k, &time) in sol.grid.times.iter().enumerate() {
        let mut row = vec![Cell::Float(time)];
        row.extend(Which::ALL.iter().map(|&w| Cell::Float(sol.curve(w).values[k])));
        t.push(row);
    }
    Ok(Outcome { table: t, pass: true })
}

fn value_table(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let sol = solve(&cfg.model()?, &cfg.claim_spec()?, cfg.solve_steps)?;
    let x = cfg.run.x;
    let mut t = ResultTable::new(&["x", "y0", "yc0", "ups0", "value"]);
    t.push(vec![
        x.into(),
        sol.y_b.values[0].into(),
        sol.yc_b.values[0].into(),
        sol.ups_b.values[0].into(),
        optimal_value(x, &sol).into(),
    ]);
    Ok(Outcome { table: t, pass: true })
}

fn simulate_table(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let (model, claim) = (cfg.model()?, cfg.claim_spec()?);
    let sol = solve(&model, &claim, cfg.solve_steps)?;
    // differences are paired against the optimal rule on the same paths
    let mut kinds = cfg.run.strategies.clone();
    let base = match kinds.iter().position(|k| *k == StrategyKind::Optimal) {
        Some(i) => i,
        None => {
            kinds.insert(0, StrategyKind::Optimal);
            0
        }
    };
    let batch = run_batch(&model, &claim, &sol, &kinds, cfg.run.x, &cfg.sim, &[])?;
    let mut t = ResultTable::new(&["strategy", "mse", "stderr", "n_paths", "diff_vs_optimal", "diff_stderr"]);
    for (i, kind) in kinds.iter().enumerate() {
        let e = batch.mse(i);
        let d = batch.paired_difference(i, base);
        t.push(vec![kind.label().into(), e.mean.into(), e.stderr.into(), e.n_paths.into(), d.mean.into(), d.stderr.into()]);
    }
    t.provenance.push(("optimal_value".into(), format!("{:.16e}", optimal_value(cfg.run.x, &sol))));
    Ok(Outcome { table: t, pass: true })
}

fn verify_table(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let (model, claim) = (cfg.model()?, cfg.claim_spec()?);
    let sol = solve(&model, &claim, cfg.solve_steps)?;
    let opts = VerifyOptions {
        sim: cfg.sim,
        perturbations: cfg.run.perturbations.clone(),
        probe_intervals: cfg.run.probe_intervals,
        algebra_probes: cfg.run.algebra_probes,
    };
    let report = run_verification(&model, &claim, &sol, cfg.run.x, &opts)?;
    let mut t = ResultTable::new(&["check", "value", "threshold", "pass"]);
    for c in &report.checks {
        t.push(vec![c.name.clone().into(), c.value.into(), c.threshold.into(), c.pass.into()]);
    }
    t.provenance.extend(report.notes.iter().map(|n| ("note".to_string(), n.clone())));
    Ok(Outcome { table: t, pass: report.all_pass() })
}

fn sweep_table(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let axes = &cfg.run.sweep;
    if axes.is_empty() {
        return Err(CliError::Usage("sweep needs `sweep = <param>: v1, v2, ...` in [run]".into()));
    }
    let mut points: Vec<Vec<f64>> = vec![Vec::new()];
    for axis in axes {
        points = points.iter().flat_map(|p| axis.values.iter().map(move |&v| [p.as_slice(), &[v]].concat())).collect();
    }
    let mut columns: Vec<&str> = axes.iter().map(|a| a.param.as_str()).collect();
    columns.extend(["y0", "yc0", "ups0", "value", "mse", "mse_stderr", "z"]);
    let mut t = ResultTable::new(&columns);
    for p in &points {
        let overrides: Vec<(&str, f64)> = axes.iter().map(|a| a.param.as_str()).zip(p.iter().copied()).collect();
        let (model, claim, x) = cfg.point(&overrides)?;
        let sol = solve(&model, &claim, cfg.solve_steps)?;
        let value = optimal_value(x, &sol);
        let e = estimate_mse(&model, &claim, &sol, &StrategyKind::Optimal, x, &cfg.sim)?;
        let mut row: Vec<Cell> = p.iter().map(|&v| v.into()).collect();
        row.extend(
            [sol.y_b.values[0], sol.yc_b.values[0], sol.ups_b.values[0], value, e.mean, e.stderr, e.z_score(value)]
                .map(Cell::from),
        );
        t.push(row);
    }
    Ok(Outcome { table: t, pass: true })
}
