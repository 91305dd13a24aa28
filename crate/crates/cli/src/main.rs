use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use specrisk_cli::commands::{self, Overrides};
use specrisk_cli::config::RunConfig;
use specrisk_cli::{CliError, Outcome};

#[derive(Parser)]
#[command(name = "specrisk", version, about = "Worst-case spectral risk over couplings with fixed marginals")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for report.json and CSV tables.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_parser = ["auto", "comonotone", "lp", "entropic", "partial"])]
    solver: Option<String>,
    /// Atoms per continuous marginal for the discrete solvers.
    #[arg(long, global = true)]
    discretize: Option<usize>,
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    #[arg(long, global = true)]
    m0: Option<f64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Classify the payout's sign structure.
    Check,
    /// Solve with the configured method.
    Solve,
    /// Cross-check the closed form against the LP.
    Oracle,
    /// River overflow example (placeholder marginals unless configured).
    River,
    /// Perturbation experiment against the Lipschitz bound.
    Stability,
    /// Vector payouts against a baseline curve or point cloud.
    Multirisk,
}

fn run(cli: &Cli) -> Result<(Outcome, Option<PathBuf>), CliError> {
    let overrides = Overrides {
        seed: cli.seed,
        solver: cli.solver.clone(),
        discretize: cli.discretize,
        epsilon: cli.epsilon,
        m0: cli.m0,
    };
    let mut cfg = match &cli.config {
        Some(p) => Some(RunConfig::from_path(p)?),
        None => None,
    };
    if let Some(c) = cfg.as_mut() {
        overrides.apply(c)?;
    }
    let need = || cfg.as_ref().ok_or_else(|| CliError::Config("--config is required for this command".into()));
    let outcome = match cli.command {
        Command::Check => commands::cmd_check(need()?)?,
        Command::Solve => commands::cmd_solve(need()?)?,
        Command::Oracle => commands::cmd_oracle(need()?)?,
        Command::River => {
            let mut user = cfg.clone();
            if user.is_none() {
                let mut d = specrisk_cli::river::default_config();
                overrides.apply(&mut d)?;
                user = Some(d);
            }
            commands::cmd_river(user.as_ref())?
        }
        Command::Stability => commands::cmd_stability(need()?)?,
        Command::Multirisk => commands::cmd_multirisk(need()?)?,
    };
    let out = cli.out.clone().or_else(|| cfg.and_then(|c| c.output_dir).map(PathBuf::from));
    Ok((outcome, out))
}

fn write_outputs(outcome: &Outcome, dir: &PathBuf) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)?;
    let json = serde_json::to_string_pretty(&outcome.report).expect("report serializes");
    std::fs::write(dir.join("report.json"), json + "\n")?;
    for (name, body) in &outcome.tables {
        std::fs::write(dir.join(name), body)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli).and_then(|(outcome, dir)| {
        if let Some(d) = &dir {
            write_outputs(&outcome, d)?;
        }
        Ok(outcome)
    }) {
        Ok(outcome) => {
            // a closed pipe (`| head`) is not an error worth reporting
            let json = serde_json::to_string_pretty(&outcome.report).expect("report serializes");
            let _ = writeln!(std::io::stdout(), "{json}");
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
