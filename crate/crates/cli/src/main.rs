use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use jumphedge_cli::{execute, parse_config, CliError, Command, Format};

/// Mean-variance hedging up to a random jump time.
///
/// Set MVH_WORKERS to fix the number of worker threads; results do not
/// depend on it.
#[derive(Parser, Debug)]
#[command(name = "mvh", version)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// Experiment file.
    #[arg(long)]
    config: PathBuf,
    /// Output file (default: stdout).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Overrides `[sim] seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `[sim] n_paths`.
    #[arg(long)]
    paths: Option<usize>,
    /// Overrides `[sim] n_steps` (the solver grid is set by `[solve]`).
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

fn workers() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("MVH_WORKERS") else { return Ok(()) };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("MVH_WORKERS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot start {n} workers: {e}")))
}

fn run(args: &Args) -> Result<bool, CliError> {
    workers()?;
    let path = args.config.display().to_string();
    let text = std::fs::read_to_string(&args.config).map_err(|source| CliError::Io { path: path.clone(), source })?;
    let mut cfg = parse_config(&text)?;
    if let Some(seed) = args.seed {
        cfg.sim.seed = seed;
    }
    for (value, slot, flag) in [(args.paths, &mut cfg.sim.n_paths, "--paths"), (args.steps, &mut cfg.sim.n_steps, "--steps")] {
        match value {
            Some(0) => return Err(CliError::Usage(format!("{flag} must be at least 1"))),
            Some(n) => *slot = n,
            None => {}
        }
    }
    let outcome = execute(args.command, &cfg)?;
    let rendered = outcome.table.render(args.format);
    match &args.output {
        Some(out) => std::fs::write(out, rendered).map_err(|source| CliError::Io { path: out.display().to_string(), source })?,
        None => match std::io::stdout().lock().write_all(rendered.as_bytes()) {
            // a closed reader (e.g. `| head`) is not an error
            Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
                return Err(CliError::Io { path: "stdout".into(), source: e });
            }
            _ => {}
        },
    }
    Ok(outcome.pass)
}

fn report(kind: &str, message: &str, line: Option<usize>) {
    let mut record = serde_json::json!({ "error": kind, "message": message });
    if let Some(line) = line {
        record["line"] = line.into();
    }
    eprintln!("{record}");
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            report("usage", e.to_string().lines().next().unwrap_or("invalid arguments"), None);
            return ExitCode::from(2);
        }
    };
    match run(&args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            report(e.kind(), &e.to_string(), e.line());
            ExitCode::from(2)
        }
    }
}
