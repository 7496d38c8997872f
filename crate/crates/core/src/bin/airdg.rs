use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use airdg::error::{Error, Result};
use airdg::io::commands::convergence_summary;
use airdg::io::{cmd_convergence, cmd_probe, cmd_solve, parse_config, RunConfig};

/// Interior-penalty DG solver for 2D air pollutant transport.
#[derive(Parser, Debug)]
#[command(name = "airdg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate the configured problem; writes VTK files and observers.csv.
    Solve(Args),
    /// Refinement study against the exact solution; writes convergence.csv.
    Convergence(Args),
    /// Coercivity, convection, consistency and conservation probes.
    Probe(Args),
}

#[derive(clap::Args, Debug)]
struct Args {
    #[arg(long)]
    config: PathBuf,
    /// Overrides [output] directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides [run] seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn load(args: &Args) -> Result<RunConfig> {
    let text = fs::read_to_string(&args.config).map_err(|e| Error::io(&args.config, e))?;
    let mut cfg = parse_config(&text)?;
    if let Some(out) = &args.out {
        cfg.output.directory = out.clone();
    }
    if let Some(seed) = args.seed {
        cfg.run.seed = seed;
    }
    Ok(cfg)
}

const PROBE_FAILURE: u8 = 3;

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Solve(args) => {
            let cfg = load(&args)?;
            let r = cmd_solve(&cfg, &cfg.output.directory)?;
            println!(
                "{} steps to t = {} with {}; output in {}",
                r.steps,
                r.final_state.time,
                cfg.time.integrator,
                cfg.output.directory.display()
            );
            Ok(0)
        }
        Command::Convergence(args) => {
            let cfg = load(&args)?;
            let report = cmd_convergence(&cfg, &cfg.output.directory)?;
            print!("{}", convergence_summary(&report));
            Ok(0)
        }
        Command::Probe(args) => {
            let cfg = load(&args)?;
            let report = cmd_probe(&cfg, &cfg.output.directory)?;
            print!("{report}");
            Ok(if report.passed() { 0 } else { PROBE_FAILURE })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
