use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use qtraj_cli::{execute, Command};

#[derive(Parser)]
#[command(name = "qtraj", version, about = "Repeated-interaction quantum trajectories and their continuous limits")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// Scenario file, or the name of a built-in scenario.
    #[arg(long, global = true)]
    scenario: Option<String>,
    /// Overrides the scenario's rng seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "qtraj-out")]
    out: PathBuf,
    /// Worker threads (default: hardware parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Exit with status 2 if any acceptance check fails.
    #[arg(long, global = true)]
    check: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Discrete trajectory and ensemble checks.
    Discrete,
    /// Jump (counting) equation.
    Jump,
    /// Diffusive (homodyne) equation.
    Diffusive,
    /// Discrete-to-continuous convergence.
    Converge,
    /// Return to equilibrium.
    Decay,
    /// Ensemble mean against the master equation.
    Unravel,
    /// Residuals of the scaled interaction against its asymptotics.
    ScalingScan,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Discrete => Command::Discrete,
            Cmd::Jump => Command::Jump,
            Cmd::Diffusive => Command::Diffusive,
            Cmd::Converge => Command::Converge,
            Cmd::Decay => Command::Decay,
            Cmd::Unravel => Command::Unravel,
            Cmd::ScalingScan => Command::ScalingScan,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let Some(scenario) = cli.scenario.as_deref() else {
        eprintln!("error: --scenario is required");
        return ExitCode::from(1);
    };
    if let Some(k) = cli.threads {
        if k == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let command = Command::from(cli.command);
    match execute(command, scenario, cli.seed, &cli.out) {
        Ok(out) => {
            for c in &out.checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            println!("{command}: wrote {} files to {}", out.files.len(), cli.out.display());
            if cli.check && !out.passed() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
